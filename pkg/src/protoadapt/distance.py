"""Inter-cluster distances: plain L2 between centroids, or the debiased
Sinkhorn divergence between cluster member point clouds.

The Sinkhorn divergence between uniform empirical measures alpha (on A) and
beta (on B) is

    S_eps(alpha, beta) = OT_eps(alpha, beta)
                         - 1/2 OT_eps(alpha, alpha) - 1/2 OT_eps(beta, beta)

with ground cost C(x, y) = 1/2 ||x - y||^2 and temperature eps = blur^2, so
S_eps approaches the squared 2-Wasserstein cost (1/2||.||^2 convention) as
blur -> 0. At the default blur of 1e-5 a naive Sinkhorn would overflow
instantly, so the solver works on dual potentials in the log domain and
anneals the temperature, starting at eps_0 = 1/2 diameter(A u B)^2 and
multiplying by `scaling` per level down to the target. At every level,
damped symmetric Jacobi updates run until the sup-norm change of the
potentials falls below max(dual_tol, 0.1 * eps) (tracking each level's
fixed point to within its own temperature keeps the annealing path on the
optimal structure) or until max_inner is spent; a final pure Jacobi step
then snaps the potentials onto the marginal constraints.

All four potentials (cross problem and the two self problems needed for
debiasing) share the same annealing loop. Updates are Jacobi-style, computed
simultaneously from the previous iterates, which makes the returned value
bitwise symmetric in (A, B) and the self-divergence exactly zero.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .embio import EmbeddingSet
from .errors import ConfigError, FormatError, ShapeError, ValidationError
from .kmeans import ClusterModel
from .prototypes import PrototypeSet

METRICS = ("l2_centroid", "sinkhorn_w2")

# Above this element count the pairwise-difference cost tensor is too large;
# fall back to the inner-product expansion.
_DIFF_LIMIT = 1 << 23

# Per annealing level, iterate until the potentials move less than this
# fraction of the level's temperature (floored by dual_tol). Looser factors
# freeze mass-splitting ties of unequal-size problems into suboptimal
# configurations; 0.03 resolves both balanced and unbalanced pairs.
_LEVEL_TOL_FACTOR = 0.03

# In the scaled-domain row solver, re-absorb the scalings into the potentials
# once a log-scaling exceeds this, keeping all exponentials finite.
_ABSORB_LIMIT = 40.0

# Aitken extrapolation gate for the row solver: jump along the last damped
# step when the per-cell delta decay ratio sits in (MIN, MAX) and has
# stabilized to within GATE of its previous value; the jump factor
# ratio / (1 - ratio) is capped. Convergence is still declared only from a
# measured damped step, never from an extrapolated one.
_AITKEN_MIN_RATIO = 0.1
_AITKEN_MAX_RATIO = 0.9995
_AITKEN_GATE = 0.5
_AITKEN_COOLDOWN = 1
_AITKEN_CAP = 100.0


@dataclass(frozen=True)
class SinkhornParams:
    """Solver configuration. eps = blur**p is the target temperature.

    max_outer caps the number of annealing levels; max_inner bounds the
    damped iterations spent at the target temperature; dual_tol is the
    sup-norm change of the dual potentials considered converged.
    """

    blur: float = 1e-5
    p: int = 2
    scaling: float = 0.5
    max_outer: int = 200
    max_inner: int = 100
    dual_tol: float = 1e-6

    def __post_init__(self):
        if not self.blur > 0:
            raise ConfigError("blur must be positive")
        if self.p != 2:
            raise ConfigError("only the quadratic cost (p=2) is supported")
        if not 0.0 < self.scaling < 1.0:
            raise ConfigError("scaling must lie strictly between 0 and 1")
        if self.max_outer < 1 or self.max_inner < 1:
            raise ConfigError("iteration budgets must be positive")
        if not self.dual_tol > 0:
            raise ConfigError("dual_tol must be positive")

    @property
    def eps(self) -> float:
        return self.blur**self.p


@dataclass(frozen=True)
class SinkhornResult:
    value: float
    converged: bool
    n_levels: int
    n_iterations: int


def l2_centroid_distance(cs: np.ndarray, ct: np.ndarray) -> float:
    """Euclidean distance between two centroid vectors, accumulated in f64."""
    a = np.asarray(cs, dtype=np.float64).reshape(-1)
    b = np.asarray(ct, dtype=np.float64).reshape(-1)
    if a.shape != b.shape:
        raise ShapeError(f"centroid dims differ: {a.shape[0]} vs {b.shape[0]}")
    return float(np.linalg.norm(a - b))


def _half_sqdist(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """(n, m) matrix of 1/2 ||x_i - y_j||^2 in float64.

    Small problems use explicit differences (bitwise-exact transpose
    symmetry); large ones use the inner-product expansion.
    """
    n, d = x.shape
    m = y.shape[0]
    if n * m * d <= _DIFF_LIMIT:
        diff = x[:, None, :] - y[None, :, :]
        return 0.5 * np.einsum("ijk,ijk->ij", diff, diff)
    x_sq = np.einsum("ij,ij->i", x, x)
    y_sq = np.einsum("ij,ij->i", y, y)
    c = x_sq[:, None] + y_sq[None, :] - 2.0 * (x @ y.T)
    np.maximum(c, 0.0, out=c)
    return 0.5 * c


def _softmin(eps: float, c_over_eps: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Row-wise -eps * logsumexp(y[j] - c_over_eps[i, j])."""
    M = y[None, :] - c_over_eps
    m = M.max(axis=1, keepdims=True)
    np.subtract(M, m, out=M)
    np.exp(M, out=M)
    return -eps * (m[:, 0] + np.log(M.sum(axis=1)))


def epsilon_schedule(eps0: float, target: float, scaling: float, max_levels: int) -> list[float]:
    """Geometric temperatures from eps0 down to (exactly) target."""
    if not eps0 > target:
        return [target]
    levels = []
    e = eps0
    while e > target and len(levels) < max_levels - 1:
        levels.append(e)
        e *= scaling
    levels.append(target)
    return levels


def _validate_cloud(points: np.ndarray, name: str) -> np.ndarray:
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2:
        raise ShapeError(f"{name} must be a 2-D point cloud")
    if pts.shape[0] < 1:
        raise ValidationError(f"{name} is empty")
    if not np.isfinite(pts).all():
        raise ValidationError(f"{name} contains non-finite values")
    return pts


def _anneal_potentials(c_ab, c_ba, c_aa, c_bb, log_a, log_b, params):
    """Shared annealing loop; returns potentials, schedule and iteration info."""
    # eps_0 = 1/2 diameter(A u B)^2, i.e. the largest half-squared distance
    # over any pair of points in the union.
    eps0 = float(max(c_ab.max(), c_aa.max(), c_bb.max()))
    schedule = epsilon_schedule(eps0, params.eps, params.scaling, params.max_outer)

    n = c_ab.shape[0]
    m = c_ab.shape[1]
    f = np.zeros(n)
    g = np.zeros(m)
    p = np.zeros(n)
    q = np.zeros(m)
    total_iters = 0
    converged = False
    last = len(schedule) - 1
    for lvl, eps in enumerate(schedule):
        cab = c_ab / eps
        cba = c_ba / eps
        caa = c_aa / eps
        cbb = c_bb / eps
        # Each level must track its own fixed point to within O(eps),
        # otherwise the potentials freeze into a suboptimal configuration
        # once eps drops below the resolution of the softmin.
        tol = max(params.dual_tol, _LEVEL_TOL_FACTOR * eps)
        for _ in range(params.max_inner):
            f_new = 0.5 * (f + _softmin(eps, cab, log_b + g / eps))
            g_new = 0.5 * (g + _softmin(eps, cba, log_a + f / eps))
            p_new = 0.5 * (p + _softmin(eps, caa, log_a + p / eps))
            q_new = 0.5 * (q + _softmin(eps, cbb, log_b + q / eps))
            delta = max(
                np.abs(f_new - f).max(),
                np.abs(g_new - g).max(),
                np.abs(p_new - p).max(),
                np.abs(q_new - q).max(),
            )
            f, g, p, q = f_new, g_new, p_new, q_new
            total_iters += 1
            if delta <= tol:
                if lvl == last:
                    converged = True
                break
    eps = schedule[-1]
    # Pure Jacobi extrapolation: project each potential onto the optimality
    # condition of its problem given the other side, all from the same state.
    f_fin = _softmin(eps, c_ab / eps, log_b + g / eps)
    g_fin = _softmin(eps, c_ba / eps, log_a + f / eps)
    p_fin = _softmin(eps, c_aa / eps, log_a + p / eps)
    q_fin = _softmin(eps, c_bb / eps, log_b + q / eps)
    return f_fin, g_fin, p_fin, q_fin, schedule, total_iters, converged


def sinkhorn_divergence_with_info(
    a_points: np.ndarray, b_points: np.ndarray, params: SinkhornParams | None = None
) -> SinkhornResult:
    """Debiased Sinkhorn divergence between uniform clouds, with solver info."""
    params = params or SinkhornParams()
    xa = _validate_cloud(a_points, "A")
    xb = _validate_cloud(b_points, "B")
    if xa.shape[1] != xb.shape[1]:
        raise ShapeError(f"cloud dims differ: {xa.shape[1]} vs {xb.shape[1]}")

    c_ab = _half_sqdist(xa, xb)
    c_ba = _half_sqdist(xb, xa) if c_ab.size * xa.shape[1] <= _DIFF_LIMIT else c_ab.T
    c_aa = _half_sqdist(xa, xa)
    c_bb = _half_sqdist(xb, xb)
    log_a = np.full(xa.shape[0], -math.log(xa.shape[0]))
    log_b = np.full(xb.shape[0], -math.log(xb.shape[0]))

    f, g, p, q, schedule, iters, converged = _anneal_potentials(
        c_ab, c_ba, c_aa, c_bb, log_a, log_b, params
    )
    value = float(np.mean(f - p) + np.mean(g - q))
    return SinkhornResult(
        value=max(value, 0.0),
        converged=converged,
        n_levels=len(schedule),
        n_iterations=iters,
    )


def sinkhorn_divergence(
    a_points: np.ndarray, b_points: np.ndarray, params: SinkhornParams | None = None
) -> float:
    """Debiased Sinkhorn divergence S_eps between two uniform point clouds.

    Symmetric in its arguments, zero for identical clouds, and convergent to
    the exact squared-2-Wasserstein cost (1/2||.||^2 convention) as blur -> 0.
    Non-convergence within the iteration budget is not an error; the best
    dual estimate is returned (see sinkhorn_divergence_with_info).
    """
    return sinkhorn_divergence_with_info(a_points, b_points, params).value


def transport_plan(
    a_points: np.ndarray, b_points: np.ndarray, params: SinkhornParams | None = None
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Entropic transport plan between uniform clouds plus its dual potentials.

    After annealing, alternating (Gauss-Seidel) updates are run at the target
    temperature until the potentials move less than dual_tol * eps, ending on
    a row update so the row marginals match exactly; column marginals then
    reflect the convergence level. Returns (plan, f, g).
    """
    params = params or SinkhornParams()
    xa = _validate_cloud(a_points, "A")
    xb = _validate_cloud(b_points, "B")
    if xa.shape[1] != xb.shape[1]:
        raise ShapeError(f"cloud dims differ: {xa.shape[1]} vs {xb.shape[1]}")

    c_ab = _half_sqdist(xa, xb)
    c_ba = c_ab.T
    c_aa = _half_sqdist(xa, xa)
    c_bb = _half_sqdist(xb, xb)
    n, m = c_ab.shape
    log_a = np.full(n, -math.log(n))
    log_b = np.full(m, -math.log(m))

    f, g, _, _, schedule, _, _ = _anneal_potentials(c_ab, c_ba, c_aa, c_bb, log_a, log_b, params)
    eps = schedule[-1]
    cab = c_ab / eps
    cba = c_ba / eps
    for _ in range(10 * params.max_inner):
        g_new = _softmin(eps, cba, log_a + f / eps)
        f_new = _softmin(eps, cab, log_b + g_new / eps)
        delta = max(np.abs(f_new - f).max(), np.abs(g_new - g).max())
        f, g = f_new, g_new
        if delta <= params.dual_tol * eps:
            break
    log_plan = log_a[:, None] + log_b[None, :] + (f[:, None] + g[None, :]) / eps - cab
    return np.exp(log_plan), f, g


def _softmin_batch(eps_col: np.ndarray, c_over_eps: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Batched softmin: (cells, rows, cols) costs, (cells, cols) duals."""
    M = y[:, None, :] - c_over_eps
    mx = M.max(axis=2)
    np.subtract(M, mx[:, :, None], out=M)
    np.exp(M, out=M)
    return -eps_col * (mx + np.log(M.sum(axis=2)))


def _sinkhorn_row(
    a_cloud: np.ndarray, b_clouds: list[np.ndarray], params: SinkhornParams
) -> tuple[np.ndarray, np.ndarray, int]:
    """Divergence of one source cloud against many target clouds at once.

    Clouds are solved in batches of similar size (within 30% of the batch
    minimum) so that padding waste stays bounded.
    """
    order = np.lexsort((np.arange(len(b_clouds)), np.array([len(b) for b in b_clouds])))
    values = np.empty(len(b_clouds))
    converged = np.empty(len(b_clouds), dtype=bool)
    total = 0
    start = 0
    while start < len(order):
        base = len(b_clouds[order[start]])
        stop = start + 1
        while stop < len(order) and len(b_clouds[order[stop]]) <= 1.3 * base:
            stop += 1
        group = order[start:stop]
        vals, conv, iters = _sinkhorn_row_batch(a_cloud, [b_clouds[j] for j in group], params)
        values[group] = vals
        converged[group] = conv
        total += iters
        start = stop
    return values, converged, total


def _sinkhorn_row_batch(
    a_cloud: np.ndarray, b_clouds: list[np.ndarray], params: SinkhornParams
) -> tuple[np.ndarray, np.ndarray, int]:
    """Core batched solve for one source cloud against same-sized targets.

    Same iteration as sinkhorn_divergence (shared annealing of the cross and
    self potentials, per-pair eps_0, half-damped Jacobi updates, final pure
    step) vectorized over the target clouds, which are right-padded to a
    common size with infinite-cost, zero-mass columns. For speed, each
    annealing level runs in the stabilized scaled domain: the current
    potentials are absorbed into kernels K = exp((f (+) g - C) / eps) and
    the half-damped log update becomes a geometric-mean update on the
    scalings, whose matrix-vector products BLAS can batch. Potentials are
    re-absorbed whenever a scaling drifts too far for safe exponentials.
    Returns (values, converged, total_iterations).
    """
    n = a_cloud.shape[0]
    kt = len(b_clouds)
    ms = np.array([len(b) for b in b_clouds])
    m_max = int(ms.max())

    c_aa = _half_sqdist(a_cloud, a_cloud)
    cab_full = np.full((kt, n, m_max), np.inf)
    cba_full = np.full((kt, m_max, n), np.inf)
    cbb_full = np.full((kt, m_max, m_max), np.inf)
    w_b = np.zeros((kt, m_max))  # uniform weights, zero on padding
    eps0 = np.empty(kt)
    for j, b in enumerate(b_clouds):
        m = int(ms[j])
        cab = _half_sqdist(a_cloud, b)
        cbb = _half_sqdist(b, b)
        cab_full[j, :, :m] = cab
        cba_full[j, :m, :] = _half_sqdist(b, a_cloud)
        cbb_full[j, :m, :m] = cbb
        w_b[j, :m] = 1.0 / m
        eps0[j] = max(cab.max(), c_aa.max(), cbb.max())
    caa_full = np.broadcast_to(c_aa, (kt, n, n))
    valid = np.arange(m_max)[None, :] < ms[:, None]

    target = params.eps
    scaling = params.scaling
    n_levels = 1
    if eps0.max() > target:
        n_levels = 1 + int(math.ceil(math.log(target / eps0.max()) / math.log(scaling)))
    n_levels = min(max(n_levels, 1), params.max_outer)

    f = np.zeros((kt, n))
    g = np.zeros((kt, m_max))
    p = np.zeros((kt, n))
    q = np.zeros((kt, m_max))
    total_iters = 0
    delta = np.zeros(kt)
    tol = np.zeros(kt)

    def kernel(c_full, lhs, rhs, e2, e3):
        z = c_full / e3
        np.negative(z, out=z)
        z += (lhs / e2)[:, :, None]
        z += (rhs / e2)[:, None, :]
        return np.exp(z, out=z)

    lw_a = -math.log(n)
    with np.errstate(divide="ignore"):
        lw_b = np.log(w_b)  # -inf on padding: zero mass

    converged = np.zeros(kt, dtype=bool)
    for lvl in range(n_levels):
        eps = np.maximum(eps0 * scaling**lvl, target) if lvl < n_levels - 1 else np.full(kt, target)
        e2 = eps[:, None]
        e3 = eps[:, None, None]
        tol = np.maximum(params.dual_tol, _LEVEL_TOL_FACTOR * eps)
        budget = params.max_inner
        converged = np.zeros(kt, dtype=bool)
        level_done = False
        while not level_done:
            active = np.flatnonzero(~converged)
            k_ab = kernel(cab_full[active], f[active], g[active], e2[active], e3[active])
            k_ba = k_ab.transpose(0, 2, 1)
            k_aa = kernel(caa_full[active], p[active], p[active], e2[active], e3[active])
            k_bb = kernel(cbb_full[active], q[active], q[active], e2[active], e3[active])
            av = valid[active]
            a_e2 = e2[active]
            a_tol = tol[active]
            a_lwb = lw_b[active]
            na = len(active)
            lu_f = np.zeros((na, n))
            lu_g = np.zeros((na, m_max))
            lu_p = np.zeros((na, n))
            lu_q = np.zeros((na, m_max))
            done = np.zeros(na, dtype=bool)
            prev_delta = np.full(na, np.inf)
            prev_ratio = np.zeros(na)
            cooldown = np.zeros(na, dtype=np.int64)
            level_done = True  # flipped back on an absorb-and-retry break
            while budget > 0:
                bu_g = np.exp(a_lwb + lu_g)[:, :, None]
                au_f = np.exp(lw_a + lu_f)[:, :, None]
                au_p = np.exp(lw_a + lu_p)[:, :, None]
                bu_q = np.exp(a_lwb + lu_q)[:, :, None]
                with np.errstate(divide="ignore"):
                    # half-damped Jacobi in log domain == geometric mean here
                    lf = 0.5 * (lu_f - np.log((k_ab @ bu_g)[:, :, 0]))
                    lg = 0.5 * (lu_g - np.log((k_ba @ au_f)[:, :, 0]))
                    lp = 0.5 * (lu_p - np.log((k_aa @ au_p)[:, :, 0]))
                    lq = 0.5 * (lu_q - np.log((k_bb @ bu_q)[:, :, 0]))
                lg[~av] = 0.0
                lq[~av] = 0.0
                step_f = lf - lu_f
                step_g = lg - lu_g
                step_p = lp - lu_p
                step_q = lq - lu_q
                delta = a_e2[:, 0] * np.maximum.reduce(
                    [
                        np.abs(step_f).max(axis=1),
                        np.abs(step_g).max(axis=1),
                        np.abs(step_p).max(axis=1),
                        np.abs(step_q).max(axis=1),
                    ]
                )
                lu_f, lu_g, lu_p, lu_q = lf, lg, lp, lq
                total_iters += 1
                budget -= 1
                done = delta <= a_tol
                if np.all(done):
                    break
                # Slow tie-resolving modes decay geometrically; once the decay
                # ratio stabilizes, jump along the last step to its limit
                # (Aitken extrapolation), then let damped updates clean up.
                with np.errstate(invalid="ignore", divide="ignore"):
                    ratio = np.where(prev_delta > 0, delta / prev_delta, 0.0)
                stable = (
                    (cooldown <= 0)
                    & ~done
                    & (ratio > _AITKEN_MIN_RATIO)
                    & (ratio < _AITKEN_MAX_RATIO)
                    & (np.abs(ratio - prev_ratio) < _AITKEN_GATE * ratio)
                )
                if stable.any():
                    jump = np.minimum(ratio / (1.0 - np.minimum(ratio, 0.999)), _AITKEN_CAP)
                    factor = np.where(stable, jump, 0.0)[:, None]
                    lu_f = lu_f + step_f * factor
                    lu_g = lu_g + step_g * factor
                    lu_p = lu_p + step_p * factor
                    lu_q = lu_q + step_q * factor
                    cooldown[stable] = _AITKEN_COOLDOWN
                cooldown -= 1
                prev_delta = delta
                prev_ratio = ratio
                drift = max(
                    np.abs(lu_f).max(),
                    np.abs(lu_g).max(),
                    np.abs(lu_p).max(),
                    np.abs(lu_q).max(),
                )
                if drift > _ABSORB_LIMIT and budget > 0:
                    level_done = False  # fold scalings in, rebuild kernels, go on
                    break
                if budget > 0 and done.sum() >= max(8, na // 2):
                    level_done = False  # shed converged cells, keep iterating
                    break
            f[active] += a_e2 * lu_f
            g[active] += a_e2 * lu_g
            p[active] += a_e2 * lu_p
            q[active] += a_e2 * lu_q
            converged[active] = done

    eps = np.full(kt, target)
    e2 = eps[:, None]
    e3 = eps[:, None, None]
    log_b = np.full((kt, m_max), -np.inf)
    log_b[valid] = np.log(w_b[valid])
    log_a = -math.log(n)
    with np.errstate(invalid="ignore"):  # padded rows reduce over -inf only
        f_fin = _softmin_batch(e2, cab_full / e3, log_b + g / e2)
        g_fin = _softmin_batch(e2, cba_full / e3, log_a + f / e2)
        p_fin = _softmin_batch(e2, caa_full / e3, log_a + p / e2)
        q_fin = _softmin_batch(e2, cbb_full / e3, log_b + q / e2)
    values = (f_fin - p_fin).mean(axis=1) + np.where(valid, g_fin - q_fin, 0.0).sum(axis=1) / ms
    return np.maximum(values, 0.0), converged, total_iters


_ROW_POOL_CTX: dict = {}


def _row_pool_init(members_t, params):
    _ROW_POOL_CTX["members_t"] = members_t
    _ROW_POOL_CTX["params"] = params


def _row_pool_work(a_cloud):
    vals, conv, _ = _sinkhorn_row(a_cloud, _ROW_POOL_CTX["members_t"], _ROW_POOL_CTX["params"])
    return vals, conv


@dataclass(frozen=True)
class DistanceMatrix:
    """Source-cluster x target-cluster distances."""

    values: np.ndarray  # (k_source, k_target) float64
    metric: str
    sinkhorn_params: SinkhornParams | None = None
    converged: np.ndarray | None = None  # per-cell flag for sinkhorn_w2

    def __post_init__(self):
        v = np.ascontiguousarray(self.values, dtype=np.float64)
        if v.ndim != 2:
            raise ShapeError("distance matrix must be 2-D")
        if not np.isfinite(v).all():
            raise ValidationError("distance matrix contains non-finite values")
        if v.min(initial=0.0) < -1e-9:
            raise ValidationError(f"distance {v.min()} below the -1e-9 numerical floor")
        v = np.maximum(v, 0.0)
        v.setflags(write=False)
        object.__setattr__(self, "values", v)
        if self.converged is not None:
            c = np.ascontiguousarray(self.converged, dtype=bool)
            c.setflags(write=False)
            object.__setattr__(self, "converged", c)

    @property
    def k_source(self) -> int:
        return self.values.shape[0]

    @property
    def k_target(self) -> int:
        return self.values.shape[1]

    @property
    def converged_cells(self) -> int:
        if self.converged is None:
            return self.values.size
        return int(self.converged.sum())


@dataclass(frozen=True)
class ClusteredDomain:
    """One domain's artifacts as consumed by the matrix builder."""

    emb: EmbeddingSet
    model: ClusterModel
    protos: PrototypeSet | None = None


def _pairwise_l2(cs: np.ndarray, ct: np.ndarray) -> np.ndarray:
    return np.sqrt(2.0 * _half_sqdist(cs.astype(np.float64), ct.astype(np.float64)))


def _cluster_members(domain: ClusteredDomain) -> list[np.ndarray]:
    X = domain.emb.vectors.astype(np.float64)
    return [X[domain.model.assignments == j] for j in range(domain.model.k)]


def build_distance_matrix(
    source: ClusteredDomain,
    target: ClusteredDomain,
    metric: str = "l2_centroid",
    params: SinkhornParams | None = None,
    *,
    l2_on: str = "centroids",
    threads: int = 1,
    checkpoint_path: str | Path | None = None,
    checkpoint_context: dict | None = None,
) -> DistanceMatrix:
    """values[i][j] = distance between source cluster i and target cluster j.

    l2_centroid measures Euclidean distance between centroids (or between the
    prototype vectors with l2_on="prototypes"); sinkhorn_w2 measures the
    debiased Sinkhorn divergence between the clusters' member point clouds.
    Prototype sets ride along in ClusteredDomain but take no part in either
    metric. With a checkpoint path, completed rows are persisted atomically
    and recomputation resumes after the last complete row.
    """
    if metric not in METRICS:
        raise ConfigError(f"unknown metric {metric!r}; expected one of {METRICS}")
    if source.emb.dim != target.emb.dim:
        raise ShapeError(f"embedding dims differ: {source.emb.dim} vs {target.emb.dim}")

    if metric == "l2_centroid":
        if l2_on == "centroids":
            cs, ct = source.model.centroids, target.model.centroids
        elif l2_on == "prototypes":
            if source.protos is None or target.protos is None:
                raise ConfigError("l2_on='prototypes' requires prototype sets")
            cs, ct = source.protos.vectors, target.protos.vectors
        else:
            raise ConfigError(f"l2_on must be 'centroids' or 'prototypes', got {l2_on!r}")
        return DistanceMatrix(values=_pairwise_l2(cs, ct), metric=metric)

    params = params or SinkhornParams()
    members_s = _cluster_members(source)
    members_t = _cluster_members(target)
    ks, kt = source.model.k, target.model.k

    values = np.zeros((ks, kt))
    converged = np.zeros((ks, kt), dtype=bool)
    start_row = 0
    ckpt = (
        _Checkpoint(checkpoint_path, metric, ks, kt, params, checkpoint_context)
        if checkpoint_path
        else None
    )
    if ckpt is not None:
        done = ckpt.load_existing()
        if done is not None:
            rows, vals = done
            values[:rows] = vals
            start_row = rows

    rows = range(start_row, ks)
    if threads > 1 and len(rows) > 1:
        # Worker count never changes results: rows are independent and are
        # collected in order; processes sidestep the GIL on the small-array
        # solver loop.
        with ProcessPoolExecutor(
            max_workers=threads, initializer=_row_pool_init, initargs=(members_t, params)
        ) as pool:
            results = pool.map(_row_pool_work, [members_s[i] for i in rows], chunksize=1)
            for i, (vals, conv) in zip(rows, results):
                values[i] = vals
                converged[i] = conv
                if ckpt is not None:
                    ckpt.append_row(values[i], i)
    else:
        for i in rows:
            vals, conv, _ = _sinkhorn_row(members_s[i], members_t, params)
            values[i] = vals
            converged[i] = conv
            if ckpt is not None:
                ckpt.append_row(values[i], i)
    if ckpt is not None:
        ckpt.finalize(int(converged.sum()))
    return DistanceMatrix(values=values, metric=metric, sinkhorn_params=params, converged=converged)


class _Checkpoint:
    """Row-atomic persistence for an in-progress distance matrix."""

    def __init__(self, path, metric, k_source, k_target, params, context=None):
        self.path = Path(path)
        self.header_path = Path(str(self.path) + ".json")
        self.context_keys = tuple(sorted(context)) if context else ()
        self.header = {
            "metric": metric,
            "k_source": k_source,
            "k_target": k_target,
            "sinkhorn_params": asdict(params) if params is not None else None,
            "rows_done": 0,
            "converged_cells": None,
            "complete": False,
            **(context or {}),
        }

    def load_existing(self):
        if not self.header_path.exists():
            self.path.unlink(missing_ok=True)
            self._write_header()
            return None
        existing = json.loads(self.header_path.read_text(encoding="utf-8"))
        for key in ("metric", "k_source", "k_target", "sinkhorn_params", *self.context_keys):
            if existing.get(key) != self.header[key]:
                raise ConfigError(
                    f"checkpoint {self.path} was produced with different settings "
                    f"({key} differs); remove it or pass force"
                )
        rows = int(existing.get("rows_done", 0))
        kt = self.header["k_target"]
        raw = self.path.read_bytes() if self.path.exists() else b""
        if len(raw) != rows * kt * 8:
            raise ConfigError(f"checkpoint payload {self.path} is inconsistent with its header")
        self.header["rows_done"] = rows
        if rows == 0:
            return None
        vals = np.frombuffer(raw, dtype="<f8").reshape(rows, kt)
        return rows, vals

    def _write_header(self):
        tmp = self.header_path.with_suffix(".tmp")
        tmp.write_text(json.dumps(self.header, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        tmp.replace(self.header_path)

    def append_row(self, row: np.ndarray, row_index: int):
        with open(self.path, "ab") as fh:
            fh.write(row.astype("<f8").tobytes())
            fh.flush()
        self.header["rows_done"] = row_index + 1
        self._write_header()

    def finalize(self, converged_cells: int):
        self.header["converged_cells"] = converged_cells
        self.header["complete"] = True
        self._write_header()


def save_distance_matrix(matrix: DistanceMatrix, path: str | Path, **extra) -> None:
    """Persist as raw little-endian f64 rows plus a JSON header at <path>.json."""
    path = Path(path)
    path.write_bytes(matrix.values.astype("<f8").tobytes(order="C"))
    header = {
        "metric": matrix.metric,
        "k_source": matrix.k_source,
        "k_target": matrix.k_target,
        "sinkhorn_params": asdict(matrix.sinkhorn_params) if matrix.sinkhorn_params else None,
        "converged_cells": matrix.converged_cells,
        "rows_done": matrix.k_source,
        "complete": True,
        **extra,
    }
    Path(str(path) + ".json").write_text(
        json.dumps(header, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )


def load_distance_matrix(path: str | Path) -> DistanceMatrix:
    path = Path(path)
    header = json.loads(Path(str(path) + ".json").read_text(encoding="utf-8"))
    if not header.get("complete", False):
        raise ConfigError(f"{path} holds an incomplete checkpoint ({header['rows_done']} rows)")
    ks, kt = int(header["k_source"]), int(header["k_target"])
    raw = path.read_bytes()
    if len(raw) != ks * kt * 8:
        raise FormatError(f"{path}: expected {ks * kt * 8} bytes, found {len(raw)}")
    values = np.frombuffer(raw, dtype="<f8").reshape(ks, kt).astype(np.float64, copy=True)
    sp = header.get("sinkhorn_params")
    return DistanceMatrix(
        values=values,
        metric=header["metric"],
        sinkhorn_params=SinkhornParams(**sp) if sp else None,
    )
