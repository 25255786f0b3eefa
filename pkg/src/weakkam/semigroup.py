"""Lax-Oleinik semigroups by min-plus dynamic programming.

The one-step kernel prices a displacement d covered in time dt at
dt * (L(midpoint, d/dt) + shift); longer times come from min-plus matrix
squaring, so the semigroup law holds exactly on the dyadic ladder
t = dt * 2^k and, by binary composition, at every multiple of dt.

The backward operator is (T_t u)(x) = min_y u(y) + h_t(y, x); the forward
one is computed from the same table through the reversal identity
T^+_t u = -(reversed T^-_t)(-u), which on tables is a transpose.

The kernel matrix is also a weighted graph; its minimal cycle mean (Karp)
is the exact critical value of the discretized system, the level at which
min-plus powers stay bounded.  Folding the kernel by that value puts the
discrete Aubry phenomenon at machine precision instead of bisection
precision.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, LadderError
from .grid import GridFn, GridSpec
from .hamiltonian import lipschitz_radius

__all__ = [
    "ActionKernel",
    "build_kernel",
    "kernel_table_distance",
    "lax_minus",
    "lax_plus",
    "semigroup_orbit",
    "discrete_critical_value",
    "MonotoneReport",
    "check_monotone_semigroup",
    "CorrectorReport",
    "check_corrector",
    "lax_friedrichs_evolve",
    "TimeDependentReport",
    "check_time_dependent_solution",
]


def _full_offsets(grid: GridSpec) -> np.ndarray:
    return grid.offsets_within(0.5 * np.sqrt(grid.dim) + grid.h, include_zero=True)


@dataclass
class ActionKernel:
    """Minimal-action tables h_t(y, x) on the dyadic time ladder.

    base[i, j] is the one-step cost from node i to node j (inf outside the
    one-step reach); powers[k] caches the 2^k dt table.  ``shift`` is the
    energy folding added to L (use the critical value to normalize).
    """

    grid: GridSpec
    model: object
    env: object
    dt: float
    theta: float
    radius_one: float
    shift: float
    base: np.ndarray = field(repr=False)
    offsets: np.ndarray = field(repr=False)
    _powers: dict = field(default_factory=dict, repr=False)
    _power_offsets: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        self._powers.setdefault(0, self.base)
        self._power_offsets.setdefault(0, self.offsets)

    # -- ladder ----------------------------------------------------------

    def ladder(self, t_max: float) -> list:
        """Dyadic times dt * 2^k up to t_max."""
        out = []
        t = self.dt
        while t <= t_max * (1 + 1e-12):
            out.append(t)
            t *= 2.0
        return out

    def power(self, k: int) -> np.ndarray:
        """Table for t = dt * 2^k, by repeated min-plus squaring."""
        if k not in self._powers:
            prev = self.power(k - 1)
            prev_off = self._power_offsets[k - 1]
            tab, off = _minplus_compose(self.grid, prev, prev_off, prev)
            self._powers[k] = tab
            self._power_offsets[k] = off
        return self._powers[k]

    def steps_of(self, t: float) -> int:
        m = t / self.dt
        mi = int(round(m))
        if mi < 1 or abs(m - mi) > 1e-9:
            raise LadderError(
                f"time {t} is not a positive multiple of dt={self.dt}; "
                f"pick times on the kernel ladder")
        return mi

    def at(self, t: float) -> np.ndarray:
        """Table for any positive multiple of dt (binary composition)."""
        m = self.steps_of(t)
        table = None
        offsets = None
        k = 0
        while m:
            if m & 1:
                pk = self.power(k)
                if table is None:
                    table, offsets = pk, self._power_offsets[k]
                else:
                    table, offsets = _minplus_compose(self.grid, pk, self._power_offsets[k], table)
            m >>= 1
            k += 1
        return table


def _minplus_compose(grid: GridSpec, A: np.ndarray, A_offsets: np.ndarray | None,
                     B: np.ndarray) -> tuple:
    """C[i, j] = min_z A[i, z] + B[z, j], exploiting A's offset support.

    A_offsets None means dense support.  Returns (C, C_offsets) where the
    support bound is the clipped Minkowski sum (None once it saturates).
    """
    size = A.shape[0]
    if A_offsets is None or len(A_offsets) >= size:
        C = np.empty_like(A)
        for i in range(size):
            C[i] = np.min(A[i][:, None] + B, axis=0)
        return C, None
    C = np.full_like(A, np.inf)
    idx = np.arange(size)
    for k in A_offsets:
        j_of = _shifted_indices(grid, k)
        a_u = A[idx, j_of]
        rolled = grid.roll_rows(B, k)
        np.minimum(C, a_u[:, None] + rolled, out=C)
    # support of C: offsets u+v clipped to the torus half-width
    lim = grid.n // 2
    if len(A_offsets) ** 2 >= size:
        C_off = None
    else:
        summed = (A_offsets[:, None, :] + A_offsets[None, :, :]).reshape(-1, grid.dim)
        summed = ((summed + lim) % grid.n) - lim
        C_off = np.unique(summed, axis=0)
        if len(C_off) >= size:
            C_off = None
    return C, C_off


def _shifted_indices(grid: GridSpec, k: np.ndarray) -> np.ndarray:
    """Flat index of node + k*h for every node."""
    n = grid.n
    if grid.dim == 1:
        return (np.arange(n) + int(k[0])) % n
    ii, jj = np.divmod(np.arange(grid.size), n)
    return ((ii + int(k[0])) % n) * n + ((jj + int(k[1])) % n)


def build_kernel(model, env, grid: GridSpec, dt: float, theta: float,
                 shift: float = 0.0, radius: float | None = None) -> ActionKernel:
    """One-step minimal-action kernel with reach dt R(theta) + 2h.

    Uses the model's closed-form Lagrangian when present, else the numeric
    Legendre transform per edge.  Offsets whose speed is outside the model's
    cone (L = +inf everywhere) are pruned.
    """
    if dt <= 0:
        raise ConfigError("dt must be positive")
    R = lipschitz_radius(theta, model)
    radius_one = radius if radius is not None else dt * R + 2.0 * grid.h
    offsets = grid.offsets_within(radius_one, include_zero=True)
    pts = grid.points()
    base = np.full((grid.size, grid.size), np.inf)
    idx = np.arange(grid.size)
    kept = []
    for k in offsets:
        disp = np.asarray(k, dtype=float) * grid.h
        q = disp / dt
        mids = grid.wrap(pts + 0.5 * disp[None, :])
        if model.L is not None:
            lvals = model.eval_L(mids, np.repeat(q[None, :], grid.size, axis=0), env)
        else:
            from .hamiltonian import legendre

            lvals = np.array([
                legendre(model, mids[i], q, env, on_boundary="flag").value
                for i in range(grid.size)])
        cost = dt * (np.asarray(lvals, dtype=float) + shift)
        if not np.any(np.isfinite(cost)):
            continue
        j_of = _shifted_indices(grid, k)
        base[idx, j_of] = cost
        kept.append(k)
    return ActionKernel(grid=grid, model=model, env=env, dt=dt, theta=theta,
                        radius_one=radius_one, shift=shift, base=base,
                        offsets=np.asarray(kept))


def refold_kernel(kernel: ActionKernel, shift: float) -> ActionKernel:
    """Same kernel with a different energy folding (fresh power cache).

    Only the constant dt * (shift - old shift) moves on every finite edge,
    so the edge set and reach are reused.
    """
    base = kernel.base + kernel.dt * (shift - kernel.shift)
    return ActionKernel(grid=kernel.grid, model=kernel.model, env=kernel.env,
                        dt=kernel.dt, theta=kernel.theta,
                        radius_one=kernel.radius_one, shift=float(shift),
                        base=base, offsets=kernel.offsets)


def kernel_table_distance(A: np.ndarray, B: np.ndarray) -> float:
    """Sup distance between tables, treating matching inf entries as equal."""
    both_inf = np.isinf(A) & np.isinf(B)
    diff = np.abs(A - B)
    diff[both_inf] = 0.0
    if np.any(np.isnan(diff)):
        return np.inf
    return float(np.max(diff))


# -- operators ---------------------------------------------------------------


def lax_minus(u: GridFn, kernel: ActionKernel, t: float) -> tuple:
    """(T^-_t u, argmin map): value and optimizer index per node.

    Ties break to the smallest flat index, i.e. lexicographically smallest
    optimizer coordinate.
    """
    table = kernel.at(t)
    stacked = u.values[:, None] + table
    vals = np.min(stacked, axis=0)
    arg = np.argmin(stacked, axis=0)
    return GridFn(u.grid, vals), arg


def lax_plus(u: GridFn, kernel: ActionKernel, t: float) -> tuple:
    """(T^+_t u, argmax map) through the reversal identity.

    h_t of the reversed model is the transpose of the forward table, so
    T^+_t u = -min_y (h_t(x, y) - u(y)) needs no second kernel.
    """
    table = kernel.at(t)
    stacked = table - u.values[None, :]
    vals = -np.min(stacked, axis=1)
    arg = np.argmin(stacked, axis=1)
    return GridFn(u.grid, vals), arg


def semigroup_orbit(u: GridFn, kernel: ActionKernel, n_steps: int) -> np.ndarray:
    """Values of T^-_{m dt} u for m = 0..n_steps, shape (n_steps+1, size)."""
    out = np.empty((n_steps + 1, u.grid.size))
    out[0] = u.values
    for m in range(1, n_steps + 1):
        out[m] = np.min(out[m - 1][:, None] + kernel.base, axis=0)
    return out


def discrete_critical_value(kernel: ActionKernel) -> float:
    """Critical value of the discretized system via Karp's cycle mean.

    The minimal mean cycle of the one-step graph equals dt (mean L + shift)
    along the best closed orbit; the value returned is the total level
    (shift included) that makes that mean zero, i.e. the exact level at
    which min-plus powers of the folded kernel stay bounded.
    """
    size = kernel.grid.size
    idx = np.arange(size)
    edges = []
    for k in kernel.offsets:
        j_of = _shifted_indices(kernel.grid, k)
        edges.append((j_of, kernel.base[idx, j_of]))
    D = np.full((size + 1, size), np.inf)
    D[0, 0] = 0.0
    cand = np.empty(size)
    for m in range(1, size + 1):
        prev = D[m - 1]
        best = np.full(size, np.inf)
        for j_of, w in edges:
            cand.fill(np.inf)
            cand[j_of] = prev + w
            np.minimum(best, cand, out=best)
        D[m] = best
    with np.errstate(invalid="ignore"):
        finals = D[size]
        best_mean = np.inf
        ks = np.arange(size)
        for v in range(size):
            if not np.isfinite(finals[v]):
                continue
            dk = D[:size, v]
            ratio = (finals[v] - dk) / (size - ks)
            ratio = ratio[np.isfinite(dk)]
            if ratio.size:
                best_mean = min(best_mean, float(np.max(ratio)))
    if not np.isfinite(best_mean):
        raise ConfigError("kernel graph has no cycles reachable from node 0")
    return kernel.shift - best_mean / kernel.dt


# -- verification ------------------------------------------------------------


@dataclass
class MonotoneReport:
    times: list
    min_increment: float
    tol: float
    passed: bool


def check_monotone_semigroup(u: GridFn, kernel: ActionKernel, a: float,
                             times, tol: float | None = None) -> MonotoneReport:
    """For subsolutions of level a, t -> T^-_t u + a t must not decrease.

    Checks all consecutive ladder pairs pointwise, including the step from
    t = 0.  Violations beyond the quadrature tolerance flag either a
    non-subsolution or an inconsistent level.
    """
    times = sorted(times)
    if tol is None:
        from .metric import lippo_scale

        tol = 4.0 * u.grid.h * lippo_scale(kernel.model, a, kernel.env, u.grid)
    worst = np.inf
    prev = u.values
    prev_t = 0.0
    for t in times:
        cur, _ = lax_minus(u, kernel, t)
        cur_vals = cur.values + (a - kernel.shift) * t
        worst = min(worst, float(np.min(cur_vals - (prev + (a - kernel.shift) * prev_t))))
        prev, prev_t = cur.values, t
    return MonotoneReport(times=list(times), min_increment=worst, tol=float(tol),
                          passed=bool(worst >= -tol))


@dataclass
class CorrectorReport:
    times: list
    residuals: np.ndarray
    tol: float
    passed: bool


def check_corrector(u: GridFn, kernel: ActionKernel, a: float, times,
                    tol: float) -> CorrectorReport:
    """Fixed-point test sup |T^-_t u + a t - u| at each ladder time."""
    res = []
    for t in sorted(times):
        cur, _ = lax_minus(u, kernel, t)
        res.append(float(np.max(np.abs(cur.values + (a - kernel.shift) * t - u.values))))
    res = np.asarray(res)
    return CorrectorReport(times=sorted(times), residuals=res, tol=float(tol),
                           passed=bool(np.all(res <= tol)))


# -- independent finite-difference oracle ------------------------------------


def lax_friedrichs_evolve(u0: GridFn, model, env, t_final: float,
                          dissipation: float | None = None, cfl: float = 0.4) -> GridFn:
    """Monotone upwind (local Lax-Friedrichs) scheme for u_t + H(x, Du) = 0.

    Completely independent of the kernel machinery: explicit time stepping
    with one-sided differences and a dissipation at least the momentum
    Lipschitz bound of H over the slopes present in the data.
    """
    grid = u0.grid
    if dissipation is None:
        slope = max(float(np.max(np.abs(b))) for b in
                    [np.concatenate(u0.one_sided_slopes(a)) for a in range(grid.dim)])
        dissipation = float(model.dhp_bound(1.5 * slope + 2.0)) if model.dhp_bound else 1.5 * slope + 2.0
        dissipation = max(dissipation, 1.0)
    h = grid.h
    dt = cfl * h / (dissipation * grid.dim)
    steps = max(int(np.ceil(t_final / dt)), 1)
    dt = t_final / steps
    pts = grid.points()
    u = u0.values.copy()
    for _ in range(steps):
        fn = GridFn(grid, u)
        centers = []
        visc = np.zeros(grid.size)
        for axis in range(grid.dim):
            bwd, fwd = fn.one_sided_slopes(axis)
            centers.append(0.5 * (bwd + fwd))
            visc += 0.5 * dissipation * (fwd - bwd)
        grad = np.stack(centers, axis=1)
        u = u - dt * (model.eval_H(pts, grad, env) - visc)
    return GridFn(grid, u)


@dataclass
class TimeDependentReport:
    t_final: float
    max_discrepancy: float
    tol: float
    passed: bool


def check_time_dependent_solution(u0: GridFn, kernel: ActionKernel, t_final: float,
                                  tol: float | None = None) -> TimeDependentReport:
    """Kernel evolution vs the independent monotone scheme.

    Both discretize the same Cauchy problem; agreement to the scheme's
    sqrt(h)-scale accuracy ties the variational route to the PDE route.
    """
    dp, _ = lax_minus(u0, kernel, t_final)
    dp_vals = dp.values - kernel.shift * t_final
    fd = lax_friedrichs_evolve(u0, kernel.model, kernel.env, t_final)
    diff = float(np.max(np.abs(dp_vals - fd.values)))
    if tol is None:
        tol = 4.0 * np.sqrt(u0.grid.h) * (1.0 + t_final)
    return TimeDependentReport(t_final=t_final, max_discrepancy=diff,
                               tol=float(tol), passed=bool(diff <= tol))
