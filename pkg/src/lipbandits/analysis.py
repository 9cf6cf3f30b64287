"""Instance-dependent quantities: gap integrals, phase indices, dimension and exponent fits."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Callable, Sequence

import numpy as np

from .geometry import Region, covering_number, packing_number
from .instances import Instance

MAX_CELLS = 1 << 24
CHUNK_CELLS = 1 << 20
EXCLUSION_TOL = 1e-9
STABLE_REL = 0.01
UNSTABLE_REL = 0.05


class QuadratureUnstable(RuntimeError):
    pass


class DegenerateFit(ValueError):
    pass


class InsufficientData(ValueError):
    pass


def _midpoint_sum(gap_fn: Callable[[np.ndarray], np.ndarray],
                  weight: Callable[[np.ndarray], np.ndarray], d: int, n: int) -> float:
    """Midpoint rule on n^d cells of [0, 1]^d, evaluated in slabs along the first axis."""
    axis = (np.arange(n) + 0.5) / n
    rest = int(n ** (d - 1))
    rows = max(1, CHUNK_CELLS // rest)
    tail = None
    if d > 1:
        mesh = np.meshgrid(*([axis] * (d - 1)), indexing="ij")
        tail = np.stack([m.ravel() for m in mesh], axis=1)
    total = 0.0
    for i0 in range(0, n, rows):
        head = axis[i0:i0 + rows]
        if tail is None:
            pts = head[:, None]
        else:
            pts = np.hstack([np.repeat(head, rest)[:, None], np.tile(tail, (len(head), 1))])
        total += float(np.sum(weight(gap_fn(pts))))
    return total / n ** d


def adaptive_quadrature(gap_fn, weight, d: int, start: int) -> tuple[float, int, float]:
    """Double the per-axis resolution until the relative change is below 1%.

    Returns (value, cells per axis, last relative change). Raises
    QuadratureUnstable if the cell cap is hit while refinements still disagree
    by more than 5%.
    """
    cap = int(round(MAX_CELLS ** (1.0 / d)))
    n = min(start, cap)
    prev = _midpoint_sum(gap_fn, weight, d, n)
    change = math.inf
    while 2 * n <= cap:
        n *= 2
        cur = _midpoint_sum(gap_fn, weight, d, n)
        scale = max(abs(cur), abs(prev))
        change = 0.0 if scale == 0 else abs(cur - prev) / scale
        prev = cur
        if change < STABLE_REL:
            return cur, n, change
    if change > UNSTABLE_REL:
        raise QuadratureUnstable(f"refinements differ by {change:.1%} at {n} cells per axis")
    return prev, n, change


def kT_lower(T: float, d: int) -> int:
    """floor(log2(T) / (d + 2)), computed in integer arithmetic."""
    if T < 1:
        raise ValueError("T must be at least 1")
    k = 0
    while 2.0 ** ((k + 1) * (d + 2)) <= T:
        k += 1
    return k


def truncated_integral(instance: Instance, k_T: int, resolution: int | None = None) -> float:
    """Integral of 1 / max(gap, 2^-k_T)^(d+1) over the non-maximizing part of the domain."""
    if k_T < 0:
        raise ValueError("k_T must be nonnegative")
    d = instance.d
    floor = 2.0 ** -k_T

    def weight(g):
        return np.where(g > EXCLUSION_TOL, np.maximum(g, floor) ** -(d + 1), 0.0)

    start = resolution or 2 ** (k_T + 4)
    return adaptive_quadrature(instance.gaps, weight, d, start)[0]


def lower_integral(instance: Instance, T: float, resolution: int | None = None) -> float:
    """Integral of gap^-(d+1) over {gap > 2^-k_T} with k_T = kT_lower(T, d)."""
    d = instance.d
    k = kT_lower(T, d)
    floor = 2.0 ** -k

    def weight(g):
        out = np.zeros_like(g)
        mask = g > floor
        out[mask] = g[mask] ** -(d + 1)
        return out

    start = resolution or 2 ** (k + 4)
    return adaptive_quadrature(instance.gaps, weight, d, start)[0]


def _level_set(instance: Instance, r: float) -> Region:
    region = instance.level_set(r)
    if region is None:
        raise ValueError(f"family {instance.family!r} has no analytic level sets")
    return region


def _annulus(instance: Instance, r: float) -> Region:
    """Closure of X_r minus X_{r/2}."""
    return _level_set(instance, r).minus_open(_level_set(instance, r / 2))


def budget_terms(instance: Instance, k: int, L: float) -> tuple[int, float]:
    """(M, 4^(k-2) M) with M = M(X_{2^-k}, min(2^-(k-2) / L, 1))."""
    scale = min(2.0 ** -(k - 2) / L, 1.0)
    M = int(covering_number(_level_set(instance, 2.0 ** -k), scale))
    return M, 4.0 ** (k - 2) * M


def kT_from_budget(instance: Instance, T: float, L: float | None = None) -> int:
    """Largest k with T > 4^(k-2) M(X_{2^-k}, 2^-(k-2) / L); 1 if none qualifies."""
    L = instance.lipschitz_known if L is None else float(L)
    best = 1
    k = 1
    # beyond this k the bound exceeds T for any nonempty level set
    while 4.0 ** (k - 2) < T:
        if T > budget_terms(instance, k, L)[1]:
            best = k
        k += 1
    return best


def default_r_grid(d: int) -> np.ndarray:
    finest = {1: 10, 2: 8, 3: 6}[d]
    return 2.0 ** -np.arange(3, finest + 1)


@dataclass
class LogFit:
    slope: float
    intercept: float
    residual: float
    counts: list[int] = field(default_factory=list)


def _log_fit(r: np.ndarray, counts: Sequence[int]) -> LogFit:
    counts = np.asarray(counts, dtype=float)
    if not np.any(counts > 0):
        raise DegenerateFit("all covering counts are zero")
    ok = counts > 0
    if ok.sum() < 2:
        raise DegenerateFit("need at least two nonzero counts")
    x, y = np.log(1.0 / r[ok]), np.log(counts[ok])
    slope, intercept = np.polyfit(x, y, 1)
    res = float(np.sqrt(np.mean((y - (slope * x + intercept)) ** 2)))
    return LogFit(float(slope), float(intercept), res, [int(c) for c in counts])


def estimate_dimensions(instance: Instance, r_grid: Sequence[float] | None = None):
    """Slopes of log M(annulus_r, r/16) and log M(maximizer, r) against log(1/r).

    Returns (dz_fit, dstar_fit) as :class:`LogFit` records.
    """
    r = np.asarray(default_r_grid(instance.d) if r_grid is None else r_grid, dtype=float)
    if len(r) < 2:
        raise DegenerateFit("need at least two scales")
    zoom = [int(covering_number(_annulus(instance, ri), ri / 16)) for ri in r]
    maxi = _level_set(instance, 0.0)
    star = [int(covering_number(maxi, min(ri, 1.0))) for ri in r]
    return _log_fit(r, zoom), _log_fit(r, star)


def packing_sum_bound(instance: Instance, k_T: int, L: float | None = None):
    """Both packing sums of the phase-wise regret bound with unit constants.

    first = sum_k 2^k N(X_{2^-k} minus X_{2^-(k+1)}, 2^-k / L)
    second = 2^-(k_T+1) sum_k 4^k N(X_{2^-(k_T+1)} minus X*, 2^-k / L), k = 1..k_T.
    Returns (first, second).
    """
    L = instance.lipschitz_known if L is None else float(L)
    first = 0.0
    second = 0.0
    inner = _level_set(instance, 2.0 ** -(k_T + 1)).minus_open(_level_set(instance, 0.0))
    for k in range(1, k_T + 1):
        scale = 2.0 ** -k / L
        first += 2.0 ** k * _packing(_annulus(instance, 2.0 ** -k), scale)
        second += 4.0 ** k * _packing(inner, scale)
    return first, 2.0 ** -(k_T + 1) * second


def _packing(region: Region, scale: float) -> int:
    if region.is_empty:
        return 0
    if scale >= 1.0:
        return 1
    return packing_number(region, scale)


@dataclass
class ExponentFit:
    slope: float
    ci_low: float
    ci_high: float
    intercept: float
    horizons: list[float]
    means: list[float]


def fit_exponent(horizons: Sequence[float], regrets, n_boot: int = 2000,
                 seed: int = 0) -> ExponentFit:
    """OLS slope of log mean regret against log T with a seed-bootstrap 90% interval.

    ``regrets`` has shape (n_horizons, n_seeds).
    """
    T = np.asarray(horizons, dtype=float)
    R = np.asarray(regrets, dtype=float)
    if R.ndim != 2 or R.shape[0] != len(T):
        raise InsufficientData("regrets must have shape (n_horizons, n_seeds)")
    if len(T) < 4:
        raise InsufficientData("need at least 4 horizons")
    if np.any(np.diff(T) <= 0):
        raise InsufficientData("horizons must be strictly increasing")
    if math.log10(T[-1] / T[0]) < 2.5 - 1e-9:
        raise InsufficientData("horizons must span at least 2.5 decades")
    if R.shape[1] < 10:
        raise InsufficientData("need at least 10 seeds per horizon")
    means = R.mean(axis=1)
    if np.any(means <= 0):
        raise InsufficientData("mean regret must be positive at every horizon")
    x = np.log(T)
    slope, intercept = np.polyfit(x, np.log(means), 1)
    rng = np.random.default_rng(seed)
    idx = rng.integers(0, R.shape[1], size=(n_boot, R.shape[1]))
    boot_means = R[:, idx].mean(axis=2)  # (horizons, n_boot)
    boot_means = np.maximum(boot_means, np.finfo(float).tiny)
    xc = x - x.mean()
    ly = np.log(boot_means)
    boot = (xc @ (ly - ly.mean(axis=0))) / (xc @ xc)
    lo, hi = np.quantile(boot, [0.05, 0.95])
    return ExponentFit(float(slope), float(lo), float(hi), float(intercept),
                       T.tolist(), means.tolist())


@dataclass
class AnalysisReport:
    family: str
    d: int
    T: int
    dz_est: float | None = None
    dz_residual: float | None = None
    dstar_est: float | None = None
    dstar_residual: float | None = None
    kT_budget: int | None = None
    kT_lower: int | None = None
    upper_integral: float | None = None
    lower_integral: float | None = None
    packing_sums: tuple[float, float] | None = None
    exponents: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        out = asdict(self)
        if self.packing_sums is not None:
            out["packing_sums"] = list(self.packing_sums)
        return out


def build_report(instance: Instance, T: int, L: float | None = None,
                 dimensions: bool = True) -> AnalysisReport:
    """All instance-level quantities at horizon ``T`` for analytic families."""
    rep = AnalysisReport(instance.family, instance.d, int(T))
    rep.kT_lower = kT_lower(T, instance.d)
    rep.kT_budget = kT_from_budget(instance, T, L)
    rep.upper_integral = truncated_integral(instance, rep.kT_lower)
    rep.lower_integral = lower_integral(instance, T)
    rep.packing_sums = packing_sum_bound(instance, rep.kT_lower, L)
    if dimensions:
        dz, ds = estimate_dimensions(instance)
        rep.dz_est, rep.dz_residual = dz.slope, dz.residual
        rep.dstar_est, rep.dstar_residual = ds.slope, ds.residual
    return rep
