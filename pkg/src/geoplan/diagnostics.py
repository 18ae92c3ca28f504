"""Geometry diagnostics: four-point hyperbolicity estimates over sampled
latent quadruples, and goal-directed energy-landscape sweeps in tangent
coordinates.  Results export to CSV for external plotting.
"""

from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np

from . import manifold


@dataclass
class DeltaReport:
    deltas: np.ndarray
    mean: float
    median: float
    frac_below: float
    threshold: float
    mean_pairwise: float

    @property
    def normalized_mean(self) -> float:
        """Scale-free summary: mean delta over mean pairwise distance."""
        if self.mean_pairwise == 0.0:
            return 0.0
        return self.mean / self.mean_pairwise


def quadruple_delta(d, i, j, k, l) -> float:
    """Four-point slimness of one quadruple given a distance lookup d[a,b].

    Of the three pairing sums S1 >= S2 >= S3, delta = (S1 - S2) / 2.
    """
    sums = sorted([d[i, j] + d[k, l], d[i, k] + d[j, l], d[i, l] + d[j, k]],
                  reverse=True)
    return (sums[0] - sums[1]) / 2.0


def gromov_delta(points, metric, num_quadruples: int = 10000,
                 seed: int = 0, threshold: float = None,
                 dist_matrix: np.ndarray = None) -> DeltaReport:
    """Sample quadruples without replacement and report their slimness.

    `points` is an (m, n) array of latent states; `metric` maps two (k, n)
    batches to (k,) distances (pass None when `dist_matrix` supplies the
    full pairwise table directly, e.g. a graph metric).
    """
    if dist_matrix is not None:
        d = np.asarray(dist_matrix, dtype=np.float64)
        m = d.shape[0]
    else:
        points = np.asarray(points, dtype=np.float64)
        m = points.shape[0]
        if m < 4:
            raise ValueError(f"need at least 4 points, got {m}")
        ii, jj = np.triu_indices(m, k=1)
        vals = metric(points[ii], points[jj])
        d = np.zeros((m, m))
        d[ii, jj] = vals
        d[jj, ii] = vals
    if m < 4:
        raise ValueError(f"need at least 4 points, got {m}")

    rng = np.random.default_rng(seed)
    quads = np.empty((num_quadruples, 4), dtype=np.int64)
    for q in range(num_quadruples):
        quads[q] = rng.choice(m, size=4, replace=False)
    i, j, k, l = quads.T
    s1 = d[i, j] + d[k, l]
    s2 = d[i, k] + d[j, l]
    s3 = d[i, l] + d[j, k]
    sums = np.sort(np.stack([s1, s2, s3]), axis=0)
    deltas = (sums[2] - sums[1]) / 2.0

    iu = np.triu_indices(m, k=1)
    mean_pairwise = float(d[iu].mean())
    if threshold is None:
        threshold = 0.1 * mean_pairwise
    return DeltaReport(
        deltas=deltas, mean=float(deltas.mean()),
        median=float(np.median(deltas)),
        frac_below=float((deltas < threshold).mean()),
        threshold=float(threshold), mean_pairwise=mean_pairwise)


def orthonormal_pair(v_goal, v_alt):
    """Unit goal direction plus the orthonormalized residual of v_alt."""
    v_goal = np.asarray(v_goal, dtype=np.float64)
    v_alt = np.asarray(v_alt, dtype=np.float64)
    n = np.linalg.norm(v_goal)
    if n < 1e-10:
        raise ValueError("goal direction is (near) zero")
    u1 = v_goal / n
    resid = v_alt - (v_alt @ u1) * u1
    rn = np.linalg.norm(resid)
    if rn < 1e-10:
        raise ValueError("alternate direction is (near) parallel to the "
                         "goal direction")
    return u1, resid / rn


@dataclass(frozen=True)
class GridSpec:
    """Uniform perturbation grid: values lo, lo+step, ..., up to hi."""

    x_lo: float = -1.0
    x_hi: float = 1.0
    y_lo: float = -1.0
    y_hi: float = 1.0
    step: float = 0.05

    def axis(self, lo, hi) -> np.ndarray:
        count = int(round((hi - lo) / self.step)) + 1
        if count < 1:
            raise ValueError("empty grid")
        return lo + self.step * np.arange(count)

    @property
    def xs(self) -> np.ndarray:
        return self.axis(self.x_lo, self.x_hi)

    @property
    def ys(self) -> np.ndarray:
        return self.axis(self.y_lo, self.y_hi)


@dataclass
class LandscapeGrid:
    dx: np.ndarray
    dy: np.ndarray
    energy: np.ndarray       # shape (len(dx), len(dy))
    reference_step: int = 0


def energy_sweep(s_t, s_next, u1, u2, grid: GridSpec, c,
                 reference_step: int = 0) -> LandscapeGrid:
    """Latent energy of perturbed states around a transition.

    Cell (i, j) holds the geodesic distance from s_next to the manifold
    projection of s_t + dx_i*u1 + dy_j*u2 (clamped into the ball first).
    s_t, u1, u2 are tangent vectors at the origin; s_next is on the ball.
    """
    s_t = np.asarray(s_t, dtype=np.float64)
    s_next = np.asarray(s_next, dtype=np.float64)
    xs, ys = grid.xs, grid.ys
    energy = np.empty((len(xs), len(ys)))
    for i, dx in enumerate(xs):
        for j, dy in enumerate(ys):
            # elementwise construction keeps float identity with callers
            # that build a target as s_t + a*u1 + b*u2 for grid (a, b)
            v = s_t + dx * u1 + dy * u2
            point = manifold.clamp_to_ball(manifold.exp_origin(v, c), c)
            energy[i, j] = manifold.distance(point, s_next, c)
    return LandscapeGrid(dx=xs, dy=ys, energy=energy,
                         reference_step=reference_step)


def landscape_csv(grid: LandscapeGrid) -> str:
    """Row-major CSV with header dx,dy,energy; 9 significant digits."""
    buf = io.StringIO()
    buf.write("dx,dy,energy\n")
    for i, dx in enumerate(grid.dx):
        for j, dy in enumerate(grid.dy):
            buf.write(f"{dx:.9g},{dy:.9g},{grid.energy[i, j]:.9g}\n")
    return buf.getvalue()


def write_landscape_csv(grid: LandscapeGrid, path) -> None:
    with open(path, "w") as fh:
        fh.write(landscape_csv(grid))


def delta_csv(report: DeltaReport) -> str:
    """One delta per line plus a summary footer comment."""
    buf = io.StringIO()
    for d in report.deltas:
        buf.write(f"{d:.9g}\n")
    buf.write(f"# mean={report.mean:.9g} median={report.median:.9g} "
              f"frac_below={report.frac_below:.9g} "
              f"threshold={report.threshold:.9g} "
              f"mean_pairwise={report.mean_pairwise:.9g}\n")
    return buf.getvalue()


def write_delta_csv(report: DeltaReport, path) -> None:
    with open(path, "w") as fh:
        fh.write(delta_csv(report))
