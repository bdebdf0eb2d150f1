"""Shared test utilities: brute-force oracles and closed-form references."""

import numpy as np

from gfreg import evaluate


def prox_oracle(spec, a, theta, step=1e-4):
    """Radial grid search for argmin_m (theta/2)||m - a||^2 + J(||m||).

    The minimizer lies on the ray through ``a`` (the penalty depends only
    on the norm), so a 1-D search over the radius suffices.
    """
    a = np.atleast_1d(np.asarray(a, dtype=float))
    norm = np.linalg.norm(a)
    if norm == 0.0:
        return np.zeros_like(a)
    radii = np.arange(0.0, max(norm, spec.gamma * spec.lam) + 1.0, step)
    obj = 0.5 * theta * (radii - norm) ** 2 + evaluate(spec, radii)
    return a * (radii[np.argmin(obj)] / norm)


def ols_rows(scores, y):
    """Closed-form least squares on mean-centered responses, reshaped (p, D)."""
    yc = y - y.mean()
    n, p, d = scores.scores.shape
    return np.linalg.lstsq(scores.flat, yc, rcond=None)[0].reshape(p, d)
