"""Poincare-ball geometry kernel with a free curvature parameter.

Points live in the open ball of radius 1/sqrt(c); the space has constant
sectional curvature -c.  All formulas are the general-curvature forms;
the unit-curvature expressions are recovered at c=1.

Every function is written against the dual-mode primitives in
:mod:`geoplan.gradengine`: call with plain ndarrays for fast numpy
evaluation, or with Nodes to get gradients.  Batched inputs put the
coordinate dimension last.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import gradengine as ge
from .gradengine import Node, is_node

BALL_EPS = 1e-5
MIN_C = 0.1
MAX_C = 10.0
_MIN_DEN = 1e-15


class ManifoldDomainError(ValueError):
    """Input point violates the open-ball constraint beyond tolerance."""


@dataclass(frozen=True)
class Curvature:
    """Positive curvature magnitude c stored as log(c), clamp-able."""

    log_c: float

    @property
    def c(self) -> float:
        return float(np.exp(self.log_c))

    @classmethod
    def from_c(cls, c: float) -> "Curvature":
        if c <= 0:
            raise ValueError(f"curvature magnitude must be positive, got {c}")
        return cls(log_c=float(np.log(c)))

    def clamped(self) -> "Curvature":
        c = min(max(self.c, MIN_C), MAX_C)
        return Curvature.from_c(c)


def _cval(c):
    """Curvature as a scalar (or Node) usable in formulas."""
    if isinstance(c, Curvature):
        return c.c
    if isinstance(c, Node):
        return c
    return float(c)


def check_in_ball(x, c, name: str = "point") -> None:
    """Raise unless sqrt(c)*|x| stays below the clamp radius (numpy path)."""
    if is_node(x) or isinstance(c, Node):
        return
    cv = _cval(c)
    n = np.linalg.norm(np.asarray(x, dtype=np.float64), axis=-1)
    limit = (1.0 - BALL_EPS) * (1.0 + 1e-9)
    if np.any(np.sqrt(cv) * n > limit):
        raise ManifoldDomainError(
            f"{name} outside the open ball: sqrt(c)*|x| = "
            f"{float(np.max(np.sqrt(cv) * n)):.6g}")


def clamp_to_ball(z, c, eps: float = BALL_EPS):
    """Rescale z onto norm (1-eps)/sqrt(c) if it lies outside; idempotent."""
    cv = _cval(c)
    n = ge.norm(z, keepdims=True)
    limit = (1.0 - eps) / ge.sqrt(cv)
    scale = ge.clip(limit / n, 0.0, 1.0)
    return ge.mul(z, scale)


def conformal(x, c):
    """Local metric scaling lambda_x = 2 / (1 - c*|x|^2)."""
    check_in_ball(x, c)
    cv = _cval(c)
    return ge.div(2.0, ge.sub(1.0, ge.mul(cv, ge.sqnorm(x))))


def mobius_add(x, y, c):
    """Curvature-c Mobius addition x (+) y, clamped back into the ball."""
    check_in_ball(x, c, "x")
    check_in_ball(y, c, "y")
    cv = _cval(c)
    x2 = ge.sqnorm(x, keepdims=True)
    y2 = ge.sqnorm(y, keepdims=True)
    xy = ge.dot(x, y, keepdims=True)
    num = ge.add(
        ge.mul(ge.add(ge.add(1.0, ge.mul(ge.mul(2.0, cv), xy)),
                      ge.mul(cv, y2)), x),
        ge.mul(ge.sub(1.0, ge.mul(cv, x2)), y))
    den = ge.add(ge.add(1.0, ge.mul(ge.mul(2.0, cv), xy)),
                 ge.mul(ge.mul(cv, cv), ge.mul(x2, y2)))
    if not is_node(den):
        den = np.where(np.abs(den) < _MIN_DEN, _MIN_DEN, den)
    return clamp_to_ball(ge.div(num, den), c)


def exp_origin(v, c):
    """Exponential map at the origin: tanh(sqrt(c)|v|) * v / (sqrt(c)|v|)."""
    cv = _cval(c)
    sc = ge.sqrt(cv)
    n = ge.norm(v, keepdims=True)
    scale = ge.div(ge.tanh(ge.mul(sc, n)), ge.mul(sc, n))
    return clamp_to_ball(ge.mul(v, scale), c)


def log_origin(y, c):
    """Inverse of exp_origin: artanh(sqrt(c)|y|) * y / (sqrt(c)|y|)."""
    check_in_ball(y, c)
    cv = _cval(c)
    sc = ge.sqrt(cv)
    n = ge.norm(y, keepdims=True)
    scale = ge.div(ge.artanh(ge.mul(sc, n)), ge.mul(sc, n))
    return ge.mul(y, scale)


def exp_at(x, v, c):
    """Exponential map at base point x (Mobius composition form)."""
    check_in_ball(x, c, "base point")
    cv = _cval(c)
    sc = ge.sqrt(cv)
    lam = conformal(x, c)
    n = ge.norm(v, keepdims=True)
    alpha = ge.tanh(ge.div(ge.mul(ge.mul(sc, _keep(lam)), n), 2.0))
    step = ge.mul(v, ge.div(alpha, ge.mul(sc, n)))
    return mobius_add(x, step, c)


def log_at(x, y, c):
    """Tangent vector at x pointing toward y; inverse of exp_at."""
    check_in_ball(x, c, "base point")
    check_in_ball(y, c, "target point")
    cv = _cval(c)
    sc = ge.sqrt(cv)
    w = mobius_add(ge.mul(x, -1.0), y, c)
    n = ge.norm(w, keepdims=True)
    lam = conformal(x, c)
    scale = ge.div(ge.mul(2.0, ge.artanh(ge.mul(sc, n))),
                   ge.mul(ge.mul(_keep(lam), sc), n))
    return ge.mul(w, scale)


def distance(u, v, c):
    """Geodesic distance on the curvature -c Poincare ball.

    d = (1/sqrt(c)) * arcosh(1 + 2c |u-v|^2 / ((1-c|u|^2)(1-c|v|^2))).
    The arcosh argument is floored at 1 against rounding, so coincident
    points give exactly zero.
    """
    check_in_ball(u, c, "u")
    check_in_ball(v, c, "v")
    cv = _cval(c)
    diff2 = ge.sqnorm(ge.sub(u, v))
    den = ge.mul(ge.sub(1.0, ge.mul(cv, ge.sqnorm(u))),
                 ge.sub(1.0, ge.mul(cv, ge.sqnorm(v))))
    if not is_node(den):
        den = np.maximum(den, _MIN_DEN)
    arg = ge.add(1.0, ge.div(ge.mul(ge.mul(2.0, cv), diff2), den))
    return ge.div(ge.arcosh(arg), ge.sqrt(cv))


def euclidean_distance(u, v):
    """Flat-space counterpart used by the baseline geometry mode."""
    return ge.norm(ge.sub(u, v))


def _keep(lam):
    """Re-expand a conformal factor for broadcasting against coordinates."""
    if is_node(lam):
        val = lam.value
        if val.ndim == 0:
            return lam
        return Node(val[..., None], (lam,), (lambda g: g[..., 0],))
    lam = np.asarray(lam)
    return lam if lam.ndim == 0 else lam[..., None]
