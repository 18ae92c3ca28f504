"""Training objectives: teacher forcing, two-step rollout, the supervised
mixture, energy cost/reward, the discounted refinement objective, and the
triangle-inequality hinge.

All functions run dual-mode: arrays in, arrays out; Nodes in, graph out.
Point sequences are passed as lists (each entry a single point or a batch
with coordinates last); batch reduction is the arithmetic mean.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import gradengine as ge
from . import manifold
from . import worldmodel as wm


@dataclass(frozen=True)
class SftConfig:
    lambda_: float = 0.5

    def __post_init__(self):
        if not 0.0 <= self.lambda_ <= 1.0:
            raise ValueError(f"lambda must lie in [0,1], got {self.lambda_}")


@dataclass(frozen=True)
class GrlConfig:
    gamma: float = 0.99
    beta: float = 0.1
    horizon: int = 4
    triangle_mode: str = "slack"   # or "reversed"

    def __post_init__(self):
        if not 0.0 <= self.gamma < 1.0:
            raise ValueError(f"gamma must lie in [0,1), got {self.gamma}")
        if self.beta < 0.0:
            raise ValueError(f"beta must be nonnegative, got {self.beta}")
        if self.horizon < 2:
            raise ValueError(f"horizon must be >= 2, got {self.horizon}")
        if self.triangle_mode not in ("slack", "reversed"):
            raise ValueError(f"unknown triangle mode {self.triangle_mode!r}")


def _pairwise(points_a, points_b, c, metric):
    if metric == "euclidean":
        return [manifold.euclidean_distance(a, b)
                for a, b in zip(points_a, points_b)]
    return [manifold.distance(a, b, c) for a, b in zip(points_a, points_b)]


def teacher_forcing(pred, target, c, metric: str = "hyperbolic"):
    """Mean one-step distance between predicted and true latent states."""
    pred, target = list(pred), list(target)
    if len(pred) != len(target):
        raise ValueError(f"length mismatch: {len(pred)} vs {len(target)}")
    if not pred:
        raise ValueError("empty prediction sequence")
    dists = _pairwise(pred, target, c, metric)
    acc = dists[0]
    for d in dists[1:]:
        acc = ge.add(acc, d)
    return ge.mean(ge.div(acc, float(len(dists))))


def rollout_loss(model: wm.WorldModel, start, actions, target2,
                 params=None):
    """Two-step self-rollout distance to the encoded second-next state."""
    actions = list(actions)
    if len(actions) != 2:
        raise ValueError(f"rollout loss is two-step, got {len(actions)} "
                         "actions")
    traj = wm.rollout(start, actions, model, params)
    return ge.mean(wm.model_distance(traj.end, target2, model, params))


def sft_loss(tf, ro, cfg: SftConfig):
    """Supervised mixture lambda*tf + (1-lambda)*ro."""
    return ge.add(ge.mul(cfg.lambda_, tf), ge.mul(1.0 - cfg.lambda_, ro))


def triangle_regularizer(pred, c, mode: str = "slack",
                         metric: str = "hyperbolic"):
    """Hinge on consecutive triplets of a predicted trajectory.

    slack mode penalizes [d(t,t+1) + d(t+1,t+2) - d(t,t+2)]_+, the excess
    of the two-hop path over the direct geodesic; reversed mode penalizes
    the opposite difference, which a true metric makes vacuous.
    """
    pred = list(pred)
    if len(pred) < 3:
        raise ValueError(f"need at least 3 points, got {len(pred)}")
    if mode not in ("slack", "reversed"):
        raise ValueError(f"unknown triangle mode {mode!r}")
    terms = []
    for t in range(len(pred) - 2):
        d01 = _pairwise([pred[t]], [pred[t + 1]], c, metric)[0]
        d12 = _pairwise([pred[t + 1]], [pred[t + 2]], c, metric)[0]
        d02 = _pairwise([pred[t]], [pred[t + 2]], c, metric)[0]
        if mode == "slack":
            gap = ge.sub(ge.add(d01, d12), d02)
        else:
            gap = ge.sub(d02, ge.add(d01, d12))
        terms.append(ge.positive_part(gap))
    acc = terms[0]
    for term in terms[1:]:
        acc = ge.add(acc, term)
    return ge.mean(ge.div(acc, float(len(terms))))


def energy_cost(pred_next, true_next, c, metric: str = "hyperbolic"):
    """Transition energy = latent distance; the reward is its negation."""
    return _pairwise([pred_next], [true_next], c, metric)[0]


def grl_loss(model: wm.WorldModel, start, actions, targets,
             cfg: GrlConfig, params=None):
    """Discounted rollout energy plus the weighted triangle hinge.

    Rolls the predictor out on `actions`, sums gamma^(t-1) times the
    distance of each predicted state to its target, and regularizes the
    predicted trajectory toward geodesic consistency.  Minimizing this
    maximizes the discounted negative-energy return.
    """
    actions = list(actions)
    targets = list(targets)
    if len(actions) != cfg.horizon or len(targets) != cfg.horizon:
        raise ValueError(
            f"horizon mismatch: {len(actions)} actions, {len(targets)} "
            f"targets, configured horizon {cfg.horizon}")
    params = params if params is not None else model.params
    metric = "euclidean" if model.geometry == "euclidean" else "hyperbolic"
    c = _model_c(params)
    traj = wm.rollout(start, actions, model, params)
    acc = None
    for t in range(cfg.horizon):
        d = ge.mean(energy_cost(traj.predicted[t], targets[t], c, metric))
        term = ge.mul(cfg.gamma ** t, d)
        acc = term if acc is None else ge.add(acc, term)
    discounted = acc
    if cfg.beta == 0.0:
        return discounted
    tri = triangle_regularizer(traj.states, c, mode=cfg.triangle_mode,
                               metric=metric)
    return ge.add(discounted, ge.mul(cfg.beta, tri))


def grl_terms(model: wm.WorldModel, start, actions, targets,
              cfg: GrlConfig, params=None):
    """(discounted energy, triangle term) evaluated separately for traces."""
    actions, targets = list(actions), list(targets)
    params = params if params is not None else model.params
    metric = "euclidean" if model.geometry == "euclidean" else "hyperbolic"
    c = _model_c(params)
    traj = wm.rollout(start, actions, model, params)
    acc = None
    for t in range(len(actions)):
        d = ge.mean(energy_cost(traj.predicted[t], targets[t], c, metric))
        term = ge.mul(cfg.gamma ** t, d)
        acc = term if acc is None else ge.add(acc, term)
    tri = triangle_regularizer(traj.states, c, mode=cfg.triangle_mode,
                               metric=metric)
    return acc, tri


def _model_c(params):
    if ge.is_node(params.log_c):
        return ge.exp(params.log_c)
    return float(np.exp(ge.value_of(params.log_c)))
