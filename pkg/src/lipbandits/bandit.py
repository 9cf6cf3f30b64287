"""Phased adaptive covering (PACO), its forward-cover variant, and finite-armed baselines.

All runs log every pull into a :class:`RunTrace`; phased runs additionally keep
one :class:`PhaseRecord` per phase (net, pull counts, elimination rounds,
next active region) so the structural guarantees can be audited afterwards.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import Net, Region, forward_net, greedy_net
from .instances import Instance, NoiseModel

NUM_TOL = 1e-12


class InvalidConfidence(ValueError):
    pass


class GapViolated(RuntimeError):
    pass


def phase_budget(k: int, delta: float) -> float:
    """delta_k = 6 delta / (pi^2 k^2); the budgets sum to delta."""
    return 6.0 * delta / (math.pi ** 2 * k * k)


def default_delta(T: int) -> float:
    return min(float(T) ** -3, 0.5)


def confidence_radius(ell: int, net_size: int, delta_k: float) -> float:
    """u_{k,l} = sqrt((2 / l) log(pi^2 l^2 |S_k| / (6 delta_k)))."""
    if not 0.0 < delta_k < 1.0:
        raise InvalidConfidence(f"delta_k must lie in (0, 1), got {delta_k!r}")
    if ell < 1 or net_size < 1:
        raise ValueError("round and net size must be positive")
    return math.sqrt(2.0 / ell * math.log(math.pi ** 2 * ell * ell * net_size / (6.0 * delta_k)))


def stopping_round(net_size: int, r_k: float, delta_k: float) -> int:
    """Smallest round l with u_{k,l} <= r_k / 4."""
    target = r_k / 4
    hi = 1
    while confidence_radius(hi, net_size, delta_k) > target:
        hi *= 2
    lo = hi // 2 + 1 if hi > 1 else 1
    # u is decreasing from l = 3 on; scan the short prefix explicitly
    for ell in range(1, min(3, hi) + 1):
        if confidence_radius(ell, net_size, delta_k) <= target:
            return ell
    lo = max(lo, 3)
    while lo < hi:
        mid = (lo + hi) // 2
        if confidence_radius(mid, net_size, delta_k) <= target:
            hi = mid
        else:
            lo = mid + 1
    return hi


@dataclass
class PhaseRecord:
    k: int
    r: float
    delta_k: float
    region: Region
    net: Net
    start_t: int
    rounds: int = 0
    pulls: np.ndarray | None = None
    eliminated_at: np.ndarray | None = None  # round of removal, 0 if survived
    survivors: np.ndarray | None = None  # boolean mask over the net
    active_sizes: list[int] = field(default_factory=list)
    u_final: float = math.inf
    completed: bool = False
    next_region: Region | None = None

    def summary(self) -> dict:
        return {"k": self.k, "r": self.r, "delta_k": self.delta_k,
                "net_size": len(self.net), "rounds": self.rounds,
                "survivors": int(self.survivors.sum()), "completed": self.completed,
                "start_t": self.start_t, "pulls": int(self.pulls.sum()),
                "u_final": self.u_final, "region_parts": len(self.region.boxes)}


@dataclass
class RunTrace:
    algorithm: str
    T: int
    arms: np.ndarray
    rewards: np.ndarray
    gaps: np.ndarray
    epoch: np.ndarray  # phase index for phased runs, round otherwise
    phases: list[PhaseRecord] = field(default_factory=list)
    info: dict = field(default_factory=dict)

    @classmethod
    def empty(cls, algorithm: str, T: int, d: int) -> "RunTrace":
        return cls(algorithm, T, np.full((T, d), np.nan), np.full(T, np.nan),
                   np.full(T, np.nan), np.zeros(T, dtype=np.int64))

    def record(self, t: int, arms: np.ndarray, rewards: np.ndarray, gaps: np.ndarray,
               epoch) -> None:
        """Write pulls for rounds t .. t + n - 1 (1-based)."""
        n = len(rewards)
        sl = slice(t - 1, t - 1 + n)
        self.arms[sl] = arms
        self.rewards[sl] = rewards
        self.gaps[sl] = gaps
        self.epoch[sl] = epoch

    @property
    def n_rounds(self) -> int:
        return int(np.count_nonzero(~np.isnan(self.rewards)))

    def cumulative_regret(self) -> np.ndarray:
        return np.cumsum(self.gaps)

    @property
    def regret(self) -> float:
        return float(self.gaps.sum())

    @property
    def k_T(self) -> int:
        return int(self.epoch[-1]) if self.phases else 1

    def phase_summaries(self) -> list[dict]:
        return [p.summary() for p in self.phases]


def run_elimination(points: np.ndarray, r_k: float, delta_k: float, instance: Instance,
                    noise: NoiseModel, t: int, T: int, rng: np.random.Generator,
                    trace: RunTrace | None = None, record: PhaseRecord | None = None):
    """Successive elimination to accuracy ``r_k`` on a finite arm set.

    Returns (survivor mask, updated t). Every round pulls the active arms once
    in scan order; the phase ends when the radius drops to ``r_k / 4`` or the
    horizon is reached mid-round.
    """
    n = len(points)
    if n == 0:
        raise ValueError("empty arm set")
    means = instance.values(points)
    gaps = np.maximum(instance.fstar - means, 0.0)
    epoch = record.k if record is not None else 1
    active = np.arange(n)
    mu = np.zeros(n)
    pulls = np.zeros(n, dtype=np.int64)
    eliminated_at = np.zeros(n, dtype=np.int64)
    sizes = []
    u = math.inf  # the loop always runs at least one round
    ell = 0
    completed = False
    while u > r_k / 4 and t <= T:
        batch = active[: T - t + 1]
        y = noise.observe(means[batch], rng)
        if trace is not None:
            trace.record(t, points[batch], y, gaps[batch], epoch)
        t += len(batch)
        if len(batch) < len(active):
            pulls[batch] += 1  # aborted mid-round; the active set is returned as is
            break
        ell += 1
        pulls[active] += 1
        mu[active] += (y - mu[active]) / ell
        sizes.append(len(active))
        u = confidence_radius(ell, n, delta_k)
        best = mu[active].max()
        keep = mu[active] + u >= best - u - r_k - NUM_TOL
        eliminated_at[active[~keep]] = ell
        active = active[keep]
        if u <= r_k / 4:
            completed = True
    survivors = np.zeros(n, dtype=bool)
    survivors[active] = True
    if record is not None:
        record.rounds = ell
        record.pulls = pulls
        record.eliminated_at = eliminated_at
        record.survivors = survivors
        record.active_sizes = sizes
        record.u_final = u
        record.completed = completed
    return survivors, t


def _run_phased(instance: Instance, noise: NoiseModel, T: int, delta: float | None,
                L: float | None, rng: np.random.Generator, one_sided: bool) -> RunTrace:
    if T < 1:
        raise ValueError("horizon must be positive")
    delta = default_delta(T) if delta is None else float(delta)
    if not 0.0 < delta < 1.0:
        raise InvalidConfidence("delta must lie in (0, 1)")
    L = instance.lipschitz_known if L is None else float(L)
    if L <= 0:
        raise ValueError("L must be positive")
    name = "paco_one_sided" if one_sided else "paco"
    trace = RunTrace.empty(name, T, instance.d)
    trace.info.update(delta=delta, L=L)
    oracle = forward_net if one_sided else greedy_net
    domain = Region(instance.domain, None)
    region = domain
    t, k = 1, 1
    while t <= T:
        r_k = 2.0 ** -k
        delta_k = phase_budget(k, delta)
        radius = r_k / L
        net = oracle(region, min(radius, 1.0))
        rec = PhaseRecord(k, r_k, delta_k, region, net, t)
        survivors, t = run_elimination(net.points, r_k, delta_k, instance, noise, t, T,
                                       rng, trace, rec)
        kept = net.points[survivors]
        if one_sided:
            rec.next_region = region.intersect(Region.balls(kept, radius, instance.domain,
                                                            forward=True))
        else:
            rec.next_region = Region.balls(kept, radius, instance.domain)
        trace.phases.append(rec)
        region = rec.next_region
        k += 1
    return trace


def run_paco(instance: Instance, noise: NoiseModel, T: int, delta: float | None = None,
             L: float | None = None, rng: np.random.Generator | None = None) -> RunTrace:
    """PACO with symmetric covers; ``delta`` defaults to T^-3."""
    rng = np.random.default_rng() if rng is None else rng
    return _run_phased(instance, noise, T, delta, L, rng, one_sided=False)


def run_paco_one_sided(instance: Instance, noise: NoiseModel, T: int,
                       delta: float | None = None, L: float | None = None,
                       rng: np.random.Generator | None = None) -> RunTrace:
    """PACO with forward covers; active regions are nested by construction."""
    rng = np.random.default_rng() if rng is None else rng
    return _run_phased(instance, noise, T, delta, L, rng, one_sided=True)


def ucb1(points: np.ndarray, instance: Instance, noise: NoiseModel, T: int,
         rng: np.random.Generator, name: str = "ucb1") -> RunTrace:
    """UCB1 index policy (mean + sqrt(2 log t / n)) on a finite arm set."""
    K = len(points)
    means = instance.values(points)
    gaps = np.maximum(instance.fstar - means, 0.0)
    trace = RunTrace.empty(name, T, instance.d)
    counts = np.zeros(K)
    sums = np.zeros(K)
    chosen = np.empty(T, dtype=np.int64)
    block = 1 << 14
    v = np.empty(0)
    for t in range(1, T + 1):
        j = (t - 1) % block
        if j == 0:
            v = noise.variates(min(block, T - t + 1), rng)
        if t <= K:
            a = t - 1
        else:
            a = int(np.argmax(sums / counts + np.sqrt(2.0 * math.log(t) / counts)))
        y = float(noise.apply(means[a], v[j]))
        counts[a] += 1
        sums[a] += y
        chosen[t - 1] = a
        trace.rewards[t - 1] = y
    trace.arms[:] = points[chosen]
    trace.gaps[:] = gaps[chosen]
    trace.epoch[:] = np.arange(1, T + 1)
    trace.info["n_arms"] = K
    trace.info["pulls"] = counts.astype(np.int64)
    return trace


def run_positive_gap_ucb(instance: Instance, noise: NoiseModel, T: int, gap_floor: float,
                         L: float | None = None,
                         rng: np.random.Generator | None = None) -> RunTrace:
    """UCB1 on a single forward net at scale gap_floor / (4 L)."""
    rng = np.random.default_rng() if rng is None else rng
    if gap_floor <= 0:
        raise ValueError("gap floor must be positive")
    L = instance.lipschitz_known if L is None else float(L)
    scale = min(gap_floor / (4 * L), 1.0)
    net = forward_net(Region(instance.domain, None), scale)
    optimal = instance.gaps(net.points) <= NUM_TOL
    if not optimal.any():
        raise GapViolated(f"no maximizer in the forward net at scale {scale}")
    trace = ucb1(net.points, instance, noise, T, rng, name="positive_gap_ucb")
    trace.info.update(scale=scale, n_optimal=int(optimal.sum()), L=L, suboptimal=~optimal)
    return trace


def baseline_grid(T: int, d: int) -> np.ndarray:
    pitch = float(T) ** (-1.0 / (d + 2))
    n = int(math.floor(1.0 / pitch + 1e-9)) + 1
    axis = np.minimum(np.arange(n) * pitch, 1.0)
    mesh = np.meshgrid(*([axis] * d), indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=1)


def run_grid_ucb_baseline(instance: Instance, noise: NoiseModel, T: int,
                          rng: np.random.Generator | None = None) -> RunTrace:
    """UCB1 on a fixed uniform grid of pitch T^(-1/(d+2))."""
    rng = np.random.default_rng() if rng is None else rng
    trace = ucb1(baseline_grid(T, instance.d), instance, noise, T, rng, name="grid_ucb")
    trace.info["pitch"] = float(T) ** (-1.0 / (instance.d + 2))
    return trace


def audit_phases(trace: RunTrace, instance: Instance, rng: np.random.Generator,
                 n_samples: int = 256) -> list[dict]:
    """Check the structural guarantees on every completed phase.

    * ``near_optimal_kept``: net points with gap <= r_k all survived;
    * ``maximizer_active``: the maximizer lies in A_k and A_{k+1};
    * ``gap_control``: sampled points of A_{k+1} have gap <= 4 r_k.
    """
    maxi = instance.maximizer
    probes = None
    if maxi is not None and not maxi.is_empty:
        corners = np.array([c for b in maxi.boxes for c in
                            np.array(np.meshgrid(*zip(b.lo, b.hi), indexing="ij"))
                            .reshape(instance.d, -1).T])
        probes = np.vstack([corners, maxi.sample(n_samples, rng)])
    out = []
    for rec in trace.phases:
        if not rec.completed:
            continue
        net_gaps = instance.gaps(rec.net.points)
        near = net_gaps <= rec.r + NUM_TOL
        row = {"k": rec.k, "near_optimal_kept": bool(np.all(rec.survivors[near]))}
        if probes is not None:
            row["maximizer_active"] = bool(rec.region.contains(probes).all()
                                           and rec.next_region.contains(probes).all())
        xs = rec.next_region.sample(n_samples, rng)
        row["gap_control"] = bool(np.all(instance.gaps(xs) <= 4 * rec.r + NUM_TOL))
        row["nested"] = bool(np.all(np.diff(rec.active_sizes) <= 0)
                             and np.array_equal(rec.pulls[~rec.survivors],
                                                rec.eliminated_at[~rec.survivors]))
        out.append(row)
    return out
