"""Energy-based planning with the cross-entropy method.

The planner searches action sequences minimizing the goal-conditioned
latent energy of the world model's imagined rollout.  A Gaussian variant
covers continuous actions (diagonal refit by default, full covariance
optional) and a categorical variant covers discrete vocabularies; both
return the best sequence ever evaluated.  When the discrete space is
small enough, the categorical planner can enumerate it exactly.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from . import worldmodel as wm


@dataclass
class CemConfig:
    num_samples: int = 800
    num_elites: int = 80
    iterations: int = 10
    horizon: int = 4
    mu0: object = 0.0            # scalar or (T, action_dim)
    sigma0: object = 1.0         # initial std, scalar or (T, action_dim)
    variance_floor: float = 1e-3
    seed: int = 0
    full_cov: bool = False
    enumerate_small: bool = True   # exhaustive search when B**T <= N

    def __post_init__(self):
        if not 1 <= self.num_elites <= self.num_samples:
            raise ValueError(
                f"need 1 <= K <= N, got K={self.num_elites} "
                f"N={self.num_samples}")
        if self.iterations < 1:
            raise ValueError(f"need at least one iteration")
        if self.variance_floor <= 0:
            raise ValueError("variance floor must be positive")


@dataclass
class PlanResult:
    actions: np.ndarray
    final_energy: float
    energy_trace: list
    iterations_run: int
    mean: np.ndarray = None        # Gaussian variant: final proposal mean
    probs: np.ndarray = None       # categorical variant: final (T, B) table
    exhaustive: bool = False


def plan_energy(actions, start, goal, model: wm.WorldModel) -> float:
    """Goal energy of one candidate: distance(rollout end, goal)."""
    traj = wm.rollout(start, list(actions), model)
    return float(wm.model_distance(traj.end, goal, model))


def make_energy(model: wm.WorldModel, start, goal):
    """Batched energy over candidate matrices (N,T) ints or (N,T,A) floats."""
    start = np.asarray(start, dtype=np.float64)
    goal = np.asarray(goal, dtype=np.float64)

    def energy(candidates: np.ndarray) -> np.ndarray:
        ends = wm.rollout_batch(start, candidates, model)
        return np.asarray(wm.model_distance(ends, goal, model))

    return energy


def _finite(energies: np.ndarray) -> np.ndarray:
    energies = np.asarray(energies, dtype=np.float64).copy()
    energies[~np.isfinite(energies)] = np.inf
    return energies


def cem_gaussian(energy, cfg: CemConfig) -> PlanResult:
    """Iterative Gaussian refit over continuous action sequences.

    energy: callable mapping (N, T, A) candidates to (N,) costs.
    Elite ties at the K-th rank break by candidate index (stable sort).
    """
    rng = np.random.default_rng(cfg.seed)
    mu = np.asarray(cfg.mu0, dtype=np.float64)
    if mu.ndim == 0:
        raise ValueError("mu0 must carry the (horizon, action_dim) shape")
    shape = mu.shape
    var = np.broadcast_to(np.square(np.asarray(cfg.sigma0, dtype=np.float64)),
                          shape).copy()
    var = np.maximum(var, cfg.variance_floor)
    cov = np.diag(var.ravel()) if cfg.full_cov else None

    best_actions, best_energy, trace = None, np.inf, []
    for _ in range(cfg.iterations):
        if cfg.full_cov:
            flat = rng.multivariate_normal(mu.ravel(), cov,
                                           size=cfg.num_samples,
                                           method="cholesky")
            samples = flat.reshape((cfg.num_samples,) + shape)
        else:
            noise = rng.standard_normal((cfg.num_samples,) + shape)
            samples = mu + np.sqrt(var) * noise
        energies = _finite(energy(samples))
        order = np.argsort(energies, kind="stable")
        elites = samples[order[:cfg.num_elites]]
        if energies[order[0]] < best_energy:
            best_energy = float(energies[order[0]])
            best_actions = samples[order[0]].copy()
        trace.append(best_energy)
        mu = elites.mean(axis=0)
        if cfg.full_cov:
            centered = elites.reshape(cfg.num_elites, -1) - mu.ravel()
            cov = centered.T @ centered / cfg.num_elites
            cov[np.diag_indices_from(cov)] = np.maximum(
                np.diag(cov), cfg.variance_floor)
        else:
            var = np.maximum(elites.var(axis=0), cfg.variance_floor)
    return PlanResult(actions=best_actions, final_energy=best_energy,
                      energy_trace=trace, iterations_run=cfg.iterations,
                      mean=mu)


def cem_categorical(energy, num_actions: int, cfg: CemConfig) -> PlanResult:
    """Discrete-action adaptation: per-step probability table refit.

    energy: callable mapping (N, T) integer candidates to (N,) costs.
    Rows refit to elite empirical frequencies with additive smoothing
    alpha = 1/B.  Falls back to exhaustive enumeration when the whole
    space fits inside one sample budget and `enumerate_small` is set.
    """
    if num_actions < 2:
        raise ValueError(f"need at least 2 actions, got {num_actions}")
    horizon = cfg.horizon
    space = num_actions ** horizon
    if cfg.enumerate_small and space <= cfg.num_samples:
        grid = np.array(list(itertools.product(range(num_actions),
                                               repeat=horizon)),
                        dtype=np.int64)
        energies = _finite(energy(grid))
        best = int(np.argmin(energies))   # ties break by candidate index
        best_energy = float(energies[best])
        return PlanResult(actions=grid[best].copy(),
                          final_energy=best_energy,
                          energy_trace=[best_energy], iterations_run=1,
                          probs=None, exhaustive=True)

    rng = np.random.default_rng(cfg.seed)
    probs = np.full((horizon, num_actions), 1.0 / num_actions)
    alpha = 1.0 / num_actions
    best_actions, best_energy, trace = None, np.inf, []
    for _ in range(cfg.iterations):
        cum = np.cumsum(probs, axis=1)
        cum[:, -1] = 1.0
        u = rng.random((cfg.num_samples, horizon))
        samples = (u[:, :, None] > cum[None, :, :]).sum(axis=2)
        energies = _finite(energy(samples))
        order = np.argsort(energies, kind="stable")
        elites = samples[order[:cfg.num_elites]]
        if energies[order[0]] < best_energy:
            best_energy = float(energies[order[0]])
            best_actions = samples[order[0]].copy()
        trace.append(best_energy)
        for t in range(horizon):
            counts = np.bincount(elites[:, t], minlength=num_actions)
            row = counts + alpha
            probs[t] = row / row.sum()
    return PlanResult(actions=best_actions, final_energy=best_energy,
                      energy_trace=trace, iterations_run=cfg.iterations,
                      probs=probs)


def receding_horizon(episode, model: wm.WorldModel, goal_obs,
                     cfg: CemConfig, num_actions: int,
                     goal_tol: float = 1e-9) -> list:
    """Plan, execute only the first action, observe, re-plan.

    `episode` exposes observe() and step(action).  The horizon shrinks to
    the remaining step budget; execution stops early once the current
    latent reaches the goal latent within `goal_tol`.
    """
    goal = wm.to_manifold(wm.encode(goal_obs, model.encoder), model)
    executed = []
    for t in range(cfg.horizon):
        obs = episode.observe()
        state = wm.to_manifold(wm.encode(obs, model.encoder), model)
        if float(wm.model_distance(state, goal, model)) <= goal_tol:
            break
        step_cfg = CemConfig(
            num_samples=cfg.num_samples, num_elites=cfg.num_elites,
            iterations=cfg.iterations, horizon=cfg.horizon - t,
            mu0=cfg.mu0, sigma0=cfg.sigma0,
            variance_floor=cfg.variance_floor, seed=cfg.seed + t,
            full_cov=cfg.full_cov, enumerate_small=cfg.enumerate_small)
        result = cem_categorical(make_energy(model, state, goal),
                                 num_actions, step_cfg)
        action = int(result.actions[0])
        episode.step(action)
        executed.append(action)
    return executed
