"""Concave penalties and their exact group proximal updates.

Three penalties on a nonnegative argument x, each flat beyond gamma*lam:

    tlasso:  min(lam * x, gamma * lam^2)
    mcp:     min(lam * x - x^2 / (2 gamma), gamma * lam^2 / 2)
    scad:    lam * x                                   if x <= lam
             (2 gamma lam x - x^2 - lam^2) / (2 (gamma - 1))
                                                       if lam < x <= gamma lam
             lam^2 (gamma + 1) / 2                     if x > gamma lam

``prox_update`` solves argmin_m  (theta/2) ||m - a||^2 + J(||m||) in closed
form.  Each solution is a radial rescaling of ``a``; at a branch boundary
the later-listed branch applies (the candidate minimizers tie in objective
value there).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import ConfigurationError, InvalidInputError

KINDS = ("tlasso", "mcp", "scad")


@dataclass(frozen=True)
class PenaltySpec:
    """Penalty kind plus its strength ``lam`` and concavity parameter ``gamma``."""

    kind: str
    lam: float
    gamma: float

    def __post_init__(self):
        kind = str(self.kind).lower()
        if kind not in KINDS:
            raise ConfigurationError(f"unknown penalty kind {self.kind!r}; expected one of {KINDS}")
        lam = float(self.lam)
        gamma = float(self.gamma)
        if lam < 0:
            raise ConfigurationError("penalty strength lam must be nonnegative")
        if kind == "scad":
            if gamma <= 2:
                raise ConfigurationError("scad requires gamma > 2")
        elif gamma <= 0:
            raise ConfigurationError(f"{kind} requires gamma > 0")
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "lam", lam)
        object.__setattr__(self, "gamma", gamma)


def validate_theta(spec: PenaltySpec, theta: float) -> None:
    """Check the (gamma, theta) side conditions the prox formulas need.

    mcp requires gamma * theta > 1 and scad requires theta * (gamma - 1) > 1,
    otherwise the rescaled-soft-threshold branches divide by a nonpositive
    factor.  Raised before any solver iteration runs.
    """
    theta = float(theta)
    if theta <= 0:
        raise ConfigurationError("theta must be positive")
    if spec.kind == "mcp" and spec.gamma * theta <= 1:
        raise ConfigurationError(
            f"mcp prox needs gamma*theta > 1 (got gamma={spec.gamma}, theta={theta})"
        )
    if spec.kind == "scad" and theta * (spec.gamma - 1) <= 1:
        raise ConfigurationError(
            f"scad prox needs theta*(gamma-1) > 1 (got gamma={spec.gamma}, theta={theta})"
        )


def evaluate(spec: PenaltySpec, x) -> np.ndarray | float:
    """Penalty value at nonnegative ``x`` (scalar or array)."""
    arr = np.asarray(x, dtype=float)
    if np.any(arr < 0):
        raise InvalidInputError("penalty argument must be nonnegative")
    lam, gamma = spec.lam, spec.gamma
    if spec.kind == "tlasso":
        out = np.minimum(lam * arr, gamma * lam**2)
    elif spec.kind == "mcp":
        # Piecewise, not min(parabola, cap): the parabola falls back below the
        # cap beyond its peak at gamma*lam, where the penalty must stay flat.
        out = np.where(arr <= gamma * lam, lam * arr - arr**2 / (2.0 * gamma),
                       gamma * lam**2 / 2.0)
    else:  # scad
        mid = (2.0 * gamma * lam * arr - arr**2 - lam**2) / (2.0 * (gamma - 1.0))
        out = np.where(
            arr <= lam, lam * arr, np.where(arr <= gamma * lam, mid, lam**2 * (gamma + 1.0) / 2.0)
        )
    return out if np.ndim(x) else float(out)


def _soft_factor(norms: np.ndarray, shrink: float) -> np.ndarray:
    """(1 - shrink/norm)_+ with a 0/0 guard at zero norm."""
    safe = np.where(norms > 0, norms, 1.0)
    return np.where(norms > 0, np.maximum(1.0 - shrink / safe, 0.0), 0.0)


def prox_factors(spec: PenaltySpec, norms: np.ndarray, theta: float) -> np.ndarray:
    """Radial multipliers of the group prox, one per row norm."""
    validate_theta(spec, theta)
    norms = np.asarray(norms, dtype=float)
    lam, gamma = spec.lam, spec.gamma
    if lam == 0.0:
        return np.ones_like(norms)
    if spec.kind == "tlasso":
        bound = lam * (gamma + 1.0 / (2.0 * theta))
        factors = np.where(norms < bound, _soft_factor(norms, lam / theta), 1.0)
    elif spec.kind == "mcp":
        scaled = _soft_factor(norms, lam / theta) / (1.0 - 1.0 / (gamma * theta))
        factors = np.where(norms < gamma * lam, scaled, 1.0)
    else:  # scad
        first = _soft_factor(norms, lam / theta)
        middle = _soft_factor(norms, gamma * lam / (theta * (gamma - 1.0))) / (
            1.0 - 1.0 / (theta * (gamma - 1.0))
        )
        factors = np.where(
            norms < lam * (1.0 + 1.0 / theta), first, np.where(norms < gamma * lam, middle, 1.0)
        )
    return factors


def prox_update(spec: PenaltySpec, a: np.ndarray, theta: float) -> np.ndarray:
    """argmin_m (theta/2)||m - a||^2 + J(||m||) for a single vector ``a``."""
    a = np.atleast_1d(np.asarray(a, dtype=float))
    factor = prox_factors(spec, np.array([np.linalg.norm(a)]), theta)[0]
    return a * factor


def prox_update_rows(spec: PenaltySpec, a: np.ndarray, theta: float) -> np.ndarray:
    """Row-wise group prox for a (n, q) array of vectors."""
    a = np.asarray(a, dtype=float)
    norms = np.linalg.norm(a, axis=-1)
    return a * prox_factors(spec, norms, theta)[..., None]
