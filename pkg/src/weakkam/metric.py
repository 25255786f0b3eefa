"""Metric side of the critical equation.

The sublevel support function sigma_a(x, q) = sup{ <q,p> : H(x,p) <= a }
prices a displacement q at x.  Summing it along lattice edges gives a cost
graph whose shortest paths approximate the semidistance S_a; a negative
cycle (or an empty sublevel) is a certificate that the level a is
subcritical, which turns critical-value estimation into bisection on the
existence of such certificates.

Edge convention: the edge for offset k ends at node x and starts at
x - k h, costs sigma_a(mid, k h) with mid the (wrapped) segment midpoint.
S(y, x) is the cheapest chain from y to x; subsolutions are exactly the
functions with phi(x) - phi(y) <= S(y, x).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, SubcriticalLevelError
from .grid import BoxSpec, GridFn, GridSpec

__all__ = [
    "support_sigma",
    "CostGraph",
    "build_cost_graph",
    "default_edge_radius",
    "SemidistanceResult",
    "semidistance",
    "SubsolutionReport",
    "check_subsolution",
    "lippo_scale",
    "CriticalValueResult",
    "critical_value_free",
    "StationaryCriticalResult",
    "critical_value_stationary",
]


def support_sigma(model, x, q, a: float, env=None,
                  p_radius: float = 8.0, n_p: int = 129) -> np.ndarray:
    """sigma_a(x, q); NaN entries mark points with empty sublevel.

    Closed form when the model provides one, otherwise a sup over a momentum
    lattice (adequate for smoke tests; catalog models never hit it).
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    q = np.atleast_2d(np.asarray(q, dtype=float))
    if model.sigma is not None:
        return np.asarray(model.sigma(x, q, a, env), dtype=float)
    from .hamiltonian import _p_lattice

    lattice = _p_lattice(model.dim, p_radius, n_p)
    out = np.empty(x.shape[0])
    for i in range(x.shape[0]):
        h = model.eval_H(np.repeat(x[i : i + 1], len(lattice), axis=0), lattice, env)
        inside = h <= a + 1e-12
        out[i] = np.max(lattice[inside] @ q[i]) if np.any(inside) else np.nan
    return out


def default_edge_radius(lattice, kappa_hi: float) -> float:
    """Edge reach for the cost graph: max(3h, h ceil(kappa)) capped at 6h."""
    h = lattice.h
    return min(max(3.0 * h, h * float(np.ceil(max(kappa_hi, 1.0)))), 6.0 * h)


def _lattice_points(lattice) -> np.ndarray:
    return lattice.points()


def _shift_values(lattice, values: np.ndarray, k: np.ndarray, fill: float = np.inf) -> np.ndarray:
    """Predecessor read out[j] = values[j - k], periodic or inf-padded."""
    if isinstance(lattice, GridSpec):
        return lattice.roll_flat(values, k)
    shape = (lattice.n_per_axis,) * lattice.dim
    v = values.reshape(shape)
    out = np.full(shape, fill)
    src = [slice(None)] * lattice.dim
    dst = [slice(None)] * lattice.dim
    for a, ka in enumerate(np.atleast_1d(k)):
        ka = int(ka)
        n = shape[a]
        if abs(ka) >= n:
            return np.full(values.shape, fill)
        if ka >= 0:
            dst[a] = slice(ka, n)
            src[a] = slice(0, n - ka)
        else:
            dst[a] = slice(0, n + ka)
            src[a] = slice(-ka, n)
    out[tuple(dst)] = v[tuple(src)]
    return out.ravel()


@dataclass
class CostGraph:
    """Edge costs sigma_a over a lattice, stored per offset."""

    lattice: object
    a: float
    offsets: np.ndarray                    # (m, dim) integer steps
    weights: np.ndarray = field(repr=False)  # (m, size): cost of edge ending at node j
    midpoints_checked: int = 0

    @property
    def size(self) -> int:
        return self.lattice.size


def build_cost_graph(model, a: float, env, lattice, radius: float | None = None,
                     offsets: np.ndarray | None = None) -> CostGraph:
    """Assemble sigma_a edge costs; raises on any empty sublevel sample.

    The emptiness check covers every node and every edge midpoint, so the
    subcritical certificate cannot slip between nodes.
    """
    if offsets is None:
        if radius is None:
            raise ConfigError("build_cost_graph needs a radius or an explicit offset set")
        offsets = lattice.offsets_within(radius)
    if len(offsets) == 0:
        raise ConfigError("edge radius below grid spacing: no edges")
    pts = _lattice_points(lattice)
    h = lattice.h
    m = len(offsets)
    weights = np.empty((m, lattice.size))
    periodic = isinstance(lattice, GridSpec)
    for idx, k in enumerate(offsets):
        disp = np.asarray(k, dtype=float) * h
        mids = pts - 0.5 * disp[None, :]
        if periodic:
            mids = lattice.wrap(mids)
        w = support_sigma(model, mids, np.repeat(disp[None, :], len(pts), axis=0), a, env)
        bad = np.isnan(w)
        if np.any(bad):
            j = int(np.argmax(bad))
            raise SubcriticalLevelError(
                f"sublevel {{H <= {a}}} empty at sampled point {mids[j]}",
                empty_at=mids[j])
        weights[idx] = w
    # node-level emptiness: sigma at zero displacement
    w0 = support_sigma(model, pts, np.zeros_like(pts), a, env)
    if np.any(np.isnan(w0)):
        j = int(np.argmax(np.isnan(w0)))
        raise SubcriticalLevelError(
            f"sublevel {{H <= {a}}} empty at node {pts[j]}", empty_at=pts[j])
    return CostGraph(lattice=lattice, a=a, offsets=np.asarray(offsets),
                     weights=weights, midpoints_checked=m * lattice.size + lattice.size)


def _bellman_ford(graph: CostGraph, init: np.ndarray):
    """Label correction to a fixed point, or a negative-cycle certificate.

    Returns (dist, parents, cycle) with cycle None when none exists;
    parents[j] = offset index of the last improving edge into j, -1 at
    sources.
    """
    lattice = graph.lattice
    dist = init.copy()
    parents = np.full(graph.size, -1, dtype=int)
    size = graph.size
    for sweep in range(size + 1):
        best = dist
        best_parent = parents
        improved = False
        cand_all = np.empty((len(graph.offsets), size))
        for idx, k in enumerate(graph.offsets):
            cand_all[idx] = _shift_values(lattice, dist, k) + graph.weights[idx]
        min_cand = np.min(cand_all, axis=0)
        take = min_cand < dist - 1e-15
        if np.any(take):
            improved = True
            arg = np.argmin(cand_all, axis=0)
            best = np.where(take, min_cand, dist)
            best_parent = np.where(take, arg, parents)
        dist = best
        parents = best_parent
        if not improved:
            return dist, parents, None
    # still improving after |V| sweeps: walk parents to find a cycle
    j = int(np.argmin(dist))
    seen = {}
    path = []
    for _ in range(2 * size):
        if parents[j] < 0:
            break
        if j in seen:
            cyc = path[seen[j]:]
            return dist, parents, cyc
        seen[j] = len(path)
        path.append(j)
        k = graph.offsets[parents[j]]
        j = _predecessor_index(lattice, j, k)
    return dist, parents, path or [j]


def _predecessor_index(lattice, j: int, k: np.ndarray) -> int:
    if isinstance(lattice, GridSpec):
        n = lattice.n
        if lattice.dim == 1:
            return int((j - int(k[0])) % n)
        ji, jj = divmod(j, n)
        return int(((ji - int(k[0])) % n) * n + ((jj - int(k[1])) % n))
    n = lattice.n_per_axis
    if lattice.dim == 1:
        return int(j - int(k[0]))
    ji, jj = divmod(j, n)
    return int((ji - int(k[0])) * n + (jj - int(k[1])))


@dataclass
class SemidistanceResult:
    """Shortest-path semidistance from a batch of source nodes."""

    graph: CostGraph
    source_indices: np.ndarray
    values: np.ndarray = field(repr=False)    # (n_sources, size)

    def as_gridfn(self, row: int = 0) -> GridFn:
        if not isinstance(self.graph.lattice, GridSpec):
            raise ConfigError("only periodic-grid semidistances convert to GridFn")
        return GridFn(self.graph.lattice, self.values[row])


def semidistance(model, a: float, sources, env, lattice, radius: float | None = None,
                 offsets: np.ndarray | None = None,
                 graph: CostGraph | None = None) -> SemidistanceResult:
    """S_a(y_i, .) for each source node y_i (indices or coordinates).

    Raises SubcriticalLevelError with a cycle certificate whenever the level
    admits a negative cycle; at and above the critical value the values are
    finite with S_a(y, y) = 0.
    """
    if graph is None:
        if radius is None and offsets is None:
            kap = _kappa_for_radius(model, a, env, lattice)
            radius = default_edge_radius(lattice, kap)
        graph = build_cost_graph(model, a, env, lattice, radius=radius, offsets=offsets)
    src_idx = _as_node_indices(lattice, sources)
    vals = np.empty((len(src_idx), graph.size))
    for row, s in enumerate(src_idx):
        init = np.full(graph.size, np.inf)
        init[s] = 0.0
        dist, _, cycle = _bellman_ford(graph, init)
        if cycle is not None:
            raise SubcriticalLevelError(
                f"negative cycle at level {a}: semidistance diverges to -inf",
                cycle=cycle)
        vals[row] = dist
    return SemidistanceResult(graph=graph, source_indices=np.asarray(src_idx), values=vals)


def _kappa_for_radius(model, a, env, lattice) -> float:
    from .hamiltonian import kappa

    try:
        return kappa(model, a, env, x_samples=_lattice_points(lattice))
    except SubcriticalLevelError:
        return 1.0


def _as_node_indices(lattice, sources) -> list:
    """Sources given as flat node indices (ints) or coordinate rows."""
    out = []
    for s in list(np.atleast_1d(np.asarray(sources, dtype=object))):
        if isinstance(s, (int, np.integer)):
            out.append(int(s))
            continue
        arr = np.asarray(s, dtype=float).reshape(-1)
        if isinstance(lattice, GridSpec):
            out.append(lattice.index_of(arr))
        else:
            pts = lattice.points()
            out.append(int(np.argmin(np.linalg.norm(pts - arr[None, :], axis=1))))
    return out


# -- subsolution verification ----------------------------------------------


def lippo_scale(model, a: float, env, lattice) -> float:
    """Momentum Lipschitz scale of H near level a: sup |H| over |p| <= kappa + 2."""
    from .hamiltonian import kappa

    pts = _lattice_points(lattice)
    try:
        kap = kappa(model, a, env, x_samples=pts)
    except SubcriticalLevelError:
        kap = 1.0
    radii = np.array([0.0, 0.5 * (kap + 2.0), kap + 2.0])
    dirs = np.array([[1.0]]) if model.dim == 1 else np.array(
        [[1.0, 0.0], [0.0, 1.0], [np.sqrt(0.5), np.sqrt(0.5)]])
    worst = 0.0
    for r in radii:
        for e in dirs:
            p = np.repeat((r * e)[None, :], len(pts), axis=0)
            worst = max(worst, float(np.max(np.abs(model.eval_H(pts, p, env)))))
            worst = max(worst, float(np.max(np.abs(model.eval_H(pts, -p, env)))))
    return worst


@dataclass
class SubsolutionReport:
    max_violation: float
    worst_point: np.ndarray
    tol: float
    passed: bool


def check_subsolution(phi: GridFn, model, a: float, env=None,
                      tol: float | None = None) -> SubsolutionReport:
    """Almost-everywhere test H(x, D_h phi) <= a via central differences.

    Central differences average the two one-sided slopes, so kinks of
    genuine (viscosity) subsolutions stay admissible by convexity; the
    tolerance absorbs the O(h) drift of the sublevels between neighboring
    cells.  Default tol = 4 h Ltilde with Ltilde the sampled momentum
    Lipschitz scale of H near the level.
    """
    grid = phi.grid
    if tol is None:
        tol = 4.0 * grid.h * lippo_scale(model, a, env, grid)
    grad = phi.central_gradient()
    vals = model.eval_H(grid.points(), grad, env) - a
    j = int(np.argmax(vals))
    worst = float(vals[j])
    return SubsolutionReport(
        max_violation=worst, worst_point=grid.points()[j], tol=float(tol),
        passed=bool(worst <= tol))


# -- critical values ---------------------------------------------------------


@dataclass
class CriticalValueResult:
    value: float
    lo: float
    hi: float
    iterations: int
    certificate: dict = field(default_factory=dict)

    @property
    def bracket_width(self) -> float:
        return self.hi - self.lo


def _level_verdict(model, a: float, env, lattice, radius, offsets) -> tuple:
    """(feasible?, detail) at level a: empty sublevel or negative cycle
    means subcritical."""
    try:
        graph = build_cost_graph(model, a, env, lattice, radius=radius, offsets=offsets)
    except SubcriticalLevelError as err:
        return False, {"reason": "empty_sublevel", "witness": getattr(err, "empty_at", None)}
    dist, _, cycle = _bellman_ford(graph, np.zeros(graph.size))
    if cycle is not None:
        return False, {"reason": "negative_cycle", "witness": cycle}
    return True, {}


def critical_value_free(model, env, lattice, radius: float | None = None,
                        tol_bisect: float = 5e-3, max_expand: int = 60) -> CriticalValueResult:
    """Free critical value on the lattice by certificate bisection.

    hi starts at max H(x, 0) over nodes and edge midpoints (always
    feasible, since the zero function is then a subsolution); lo expands
    downward until a subcritical certificate appears.  The reported value is
    the bracket midpoint.
    """
    pts = _lattice_points(lattice)
    if radius is None:
        hzero = float(np.max(model.eval_H(pts, np.zeros_like(pts), env)))
        kap = _kappa_for_radius(model, hzero, env, lattice)
        radius = default_edge_radius(lattice, kap)
    offsets = lattice.offsets_within(radius)
    h = lattice.h
    samples = [pts]
    for k in offsets:
        mids = pts - 0.5 * (np.asarray(k, dtype=float) * h)[None, :]
        if isinstance(lattice, GridSpec):
            mids = lattice.wrap(mids)
        samples.append(mids)
    allpts = np.concatenate(samples, axis=0)
    hi = float(np.max(model.eval_H(allpts, np.zeros_like(allpts), env)))
    feasible_hi, _ = _level_verdict(model, hi, env, lattice, None, offsets)
    iters = 0
    step = 1.0
    while not feasible_hi:
        hi += step
        step *= 2.0
        iters += 1
        if iters > max_expand:
            raise ConfigError("could not find a feasible upper level")
        feasible_hi, _ = _level_verdict(model, hi, env, lattice, None, offsets)
    lo = float(np.min(model.eval_H(allpts, np.zeros_like(allpts), env))) - 1.0
    step = 1.0
    detail_lo = {}
    while True:
        feas, detail_lo = _level_verdict(model, lo, env, lattice, None, offsets)
        if not feas:
            break
        lo -= step
        step *= 2.0
        iters += 1
        if iters > max_expand:
            # no subcritical level found: critical value is unbounded below
            # on this lattice (flat model); report the feasible floor
            return CriticalValueResult(value=lo, lo=lo, hi=hi, iterations=iters,
                                       certificate={"reason": "no_lower_certificate"})
    while hi - lo > tol_bisect:
        mid = 0.5 * (lo + hi)
        feas, detail = _level_verdict(model, mid, env, lattice, None, offsets)
        if feas:
            hi = mid
        else:
            lo = mid
            detail_lo = detail
        iters += 1
        if iters > 200:
            break
    return CriticalValueResult(value=0.5 * (lo + hi), lo=lo, hi=hi,
                               iterations=iters, certificate=detail_lo)


@dataclass
class StationaryCriticalResult:
    box_radii: np.ndarray
    estimates: np.ndarray          # (n_samples, n_radii)
    means: np.ndarray
    spreads: np.ndarray            # max - min across realizations, per radius


def critical_value_stationary(model, spec, n_samples: int, box_radii,
                              points_per_unit: int = 32,
                              tol_bisect: float = 5e-3) -> StationaryCriticalResult:
    """Per-realization free critical values on growing boxes.

    Boxes are non-periodic lattices centered at the origin; under
    stationarity + ergodicity the per-realization estimates concentrate as
    the radius grows, which shows up as a shrinking cross-realization
    spread.
    """
    from .env import sample_realization

    box_radii = np.asarray(sorted(float(r) for r in box_radii))
    if box_radii.size < 1:
        raise ConfigError("need at least one box radius")
    est = np.zeros((n_samples, box_radii.size))
    for i in range(n_samples):
        omega = sample_realization(spec, i)
        for rj, rad in enumerate(box_radii):
            box = BoxSpec(dim=spec.dimension, radius=rad, points_per_unit=points_per_unit)
            res = critical_value_free(model, omega, box, tol_bisect=tol_bisect)
            est[i, rj] = res.value
    return StationaryCriticalResult(
        box_radii=box_radii, estimates=est,
        means=est.mean(axis=0), spreads=est.max(axis=0) - est.min(axis=0))
