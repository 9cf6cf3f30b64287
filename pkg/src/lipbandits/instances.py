"""Synthetic Lipschitz reward environments with closed-form gaps and level sets.

Every built-in family is piecewise linear in the L-infinity distance, so the gap
function, the near-optimal sets ``X_r``, their volumes and the zooming and
maximizer dimensions are all known exactly.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .geometry import MAX_DIM, Box, Region

FAMILIES = ("cone", "plateau", "multipeak", "one_sided_step", "custom")
NOISE_KINDS = ("gaussian_unit", "bernoulli", "zero")


class OutOfDomain(ValueError):
    pass


def _linf_dist_to_box(x: np.ndarray, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    return np.max(np.maximum(np.maximum(lo - x, x - hi), 0.0), axis=-1)


@dataclass(frozen=True)
class Instance:
    """A reward function on [0, 1]^d together with its analytic structure.

    ``params`` holds the family parameters:

    * ``cone``: ``center`` (d,), ``height``
    * ``plateau``: ``lo``, ``hi`` (maximizer box corners), ``height``
    * ``multipeak``: ``centers`` (m, d), ``heights`` (m,)
    * ``one_sided_step``: ``peak``, ``width``, ``drop`` (d = 1 only)
    * ``custom``: ``fn`` (vectorised callable), ``maximizer`` (Region or None)

    For every family but ``custom`` the slope is ``lipschitz_true``.
    """

    family: str
    d: int
    lipschitz_true: float
    lipschitz_known: float
    params: dict = field(default_factory=dict)
    fstar: float = 1.0
    dz_true: float | None = None
    dstar_true: float | None = None
    gamma: float | None = None
    symmetric_lipschitz: bool = True
    maximizer_connected: bool = True

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown family {self.family!r}; choose from {FAMILIES}")
        if not 1 <= self.d <= MAX_DIM:
            raise ValueError(f"d must be in 1..{MAX_DIM}")
        if self.lipschitz_true <= 0 or self.lipschitz_known < self.lipschitz_true:
            raise ValueError("need 0 < lipschitz_true <= lipschitz_known")

    @property
    def domain(self) -> Box:
        return Box.unit(self.d)

    def _as_points(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.ndim == 0:
            x = x.reshape(1)
        if x.shape[-1] != self.d:
            if self.d == 1:
                x = x[..., None]
            else:
                raise OutOfDomain(f"expected points of dimension {self.d}")
        if np.any(x < -1e-12) or np.any(x > 1 + 1e-12):
            raise OutOfDomain("point outside [0, 1]^d")
        return x

    def values(self, x) -> np.ndarray:
        """Vectorised mean reward; input shape (n, d), or (n,) when d = 1."""
        x = self._as_points(x)
        p, l = self.params, self.lipschitz_true
        if self.family == "cone":
            c = np.asarray(p["center"], dtype=float)
            return p["height"] - l * np.max(np.abs(x - c), axis=-1)
        if self.family == "plateau":
            lo, hi = np.asarray(p["lo"], float), np.asarray(p["hi"], float)
            return p["height"] - l * _linf_dist_to_box(x, lo, hi)
        if self.family == "multipeak":
            cs = np.asarray(p["centers"], float)
            hs = np.asarray(p["heights"], float)
            dist = np.max(np.abs(x[..., None, :] - cs), axis=-1)
            return np.max(hs - l * dist, axis=-1)
        if self.family == "one_sided_step":
            s = x[..., 0]
            a, b = p["peak"], p["peak"] + p["width"]
            return np.where(s < a, 1.0 - l * (a - s),
                            np.where(s <= b, 1.0, 1.0 - p["drop"]))
        return np.asarray(p["fn"](x), dtype=float)

    def eval(self, x) -> float:
        v = self.values(np.asarray(x, dtype=float).reshape(1, -1) if self.d > 1 else [x])
        return float(np.ravel(v)[0])

    def gaps(self, x) -> np.ndarray:
        return np.maximum(self.fstar - self.values(x), 0.0)

    def gap(self, x) -> float:
        return self.fstar - self.eval(x)

    @property
    def maximizer(self) -> Region | None:
        return self.level_set(0.0)

    def level_set(self, r: float) -> Region | None:
        """X_r = {x : gap(x) <= r} as an exact union of boxes (None for custom)."""
        if r < 0:
            raise ValueError("level must be nonnegative")
        p, l, dom = self.params, self.lipschitz_true, self.domain
        if self.family == "cone":
            return Region(dom, (Box.ball(p["center"], r / l),))
        if self.family == "plateau":
            lo = np.asarray(p["lo"], float) - r / l
            hi = np.asarray(p["hi"], float) + r / l
            return Region(dom, (Box(tuple(lo), tuple(hi)),))
        if self.family == "multipeak":
            boxes = [Box.ball(c, (r - (self.fstar - h)) / l)
                     for c, h in zip(p["centers"], p["heights"]) if self.fstar - h <= r]
            return Region(dom, tuple(boxes))
        if self.family == "one_sided_step":
            a, b = p["peak"], p["peak"] + p["width"]
            boxes = [Box((a - r / l,), (b,))]
            if r >= p["drop"]:
                boxes.append(Box((b,), (1.0,)))
            return Region(dom, tuple(boxes))
        if r == 0 and p.get("maximizer") is not None:
            return p["maximizer"]
        return None

    def level_set_volume(self, r: float) -> float | None:
        region = self.level_set(r)
        return None if region is None else region.volume()

    def in_level_set(self, x, r: float) -> np.ndarray:
        """Membership predicate available for every family, custom included."""
        return self.gaps(x) <= r + 1e-12

    def global_gap(self) -> float:
        """inf of the gap off the maximizer (0 when gaps approach zero)."""
        if self.family == "one_sided_step" and self.params["peak"] == 0.0:
            return float(self.params["drop"]) if self.params["width"] < 1.0 else math.inf
        if self.family == "plateau" and all(
                l <= 0 and h >= 1 for l, h in zip(self.params["lo"], self.params["hi"])):
            return math.inf
        return 0.0


def cone(d: int = 1, center: Sequence[float] | float = 0.5, slope: float = 1.0,
         height: float = 1.0, L: float | None = None) -> Instance:
    c = tuple(np.broadcast_to(np.asarray(center, float), (d,)))
    return Instance("cone", d, slope, L or slope, {"center": c, "height": height},
                    fstar=height, dz_true=0.0, dstar_true=0.0, gamma=2.0 ** -d)


def plateau(d: int = 1, lo: Sequence[float] | float = 0.25, hi: Sequence[float] | float = 0.75,
            slope: float = 1.0, height: float = 1.0, L: float | None = None) -> Instance:
    lo_t = tuple(np.broadcast_to(np.asarray(lo, float), (d,)))
    hi_t = tuple(np.broadcast_to(np.asarray(hi, float), (d,)))
    dstar = float(sum(h > l for l, h in zip(lo_t, hi_t)))
    # shells around a box with m thick axes need ~r^-m balls, or r^-(d-1) when m = d
    return Instance("plateau", d, slope, L or slope,
                    {"lo": lo_t, "hi": hi_t, "height": height},
                    fstar=height, dz_true=min(dstar, d - 1.0), dstar_true=dstar,
                    gamma=2.0 ** -d)


def multipeak(d: int = 1, centers=((0.2,), (0.8,)), heights=(1.0, 0.9),
              slope: float = 1.0, L: float | None = None) -> Instance:
    cs = tuple(tuple(np.broadcast_to(np.asarray(c, float), (d,))) for c in centers)
    hs = tuple(float(h) for h in heights)
    fstar = max(hs)
    connected = sum(h == fstar for h in hs) == 1
    return Instance("multipeak", d, slope, L or slope, {"centers": cs, "heights": hs},
                    fstar=fstar, dz_true=0.0, dstar_true=0.0, gamma=2.0 ** -d,
                    maximizer_connected=connected)


def one_sided_step(peak: float = 0.6, width: float = 0.0, drop: float = 0.5,
                   slope: float = 1.0, L: float | None = None) -> Instance:
    """Ramp of slope ``slope`` up to ``[peak, peak + width]``, then a drop of ``drop``.

    Only the forward condition f(y) - f(x) <= L |y - x| for x <= y holds.
    """
    if not 0.0 <= peak <= peak + width <= 1.0:
        raise ValueError("need 0 <= peak <= peak + width <= 1")
    if not 0.0 < drop <= 1.0:
        raise ValueError("drop must lie in (0, 1]")
    return Instance("one_sided_step", 1, slope, L or slope,
                    {"peak": float(peak), "width": float(width), "drop": float(drop)},
                    fstar=1.0, dz_true=0.0, dstar_true=1.0 if width > 0 else 0.0,
                    gamma=0.5, symmetric_lipschitz=False)


def custom(fn: Callable[[np.ndarray], np.ndarray], d: int, lipschitz: float, fstar: float,
           L: float | None = None, maximizer: Region | None = None) -> Instance:
    return Instance("custom", d, lipschitz, L or lipschitz, {"fn": fn, "maximizer": maximizer},
                    fstar=fstar)


BUILDERS = {"cone": cone, "plateau": plateau, "multipeak": multipeak,
            "one_sided_step": one_sided_step}


def make_instance(family: str, **params) -> Instance:
    if family not in BUILDERS:
        raise ValueError(f"unknown family {family!r}; choose from {sorted(BUILDERS)}")
    return BUILDERS[family](**params)


@dataclass(frozen=True)
class NoiseModel:
    kind: str = "gaussian_unit"

    def __post_init__(self):
        if self.kind not in NOISE_KINDS:
            raise ValueError(f"unknown noise kind {self.kind!r}; choose from {NOISE_KINDS}")

    def observe(self, means: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        """Noisy rewards for a batch of mean values."""
        means = np.asarray(means, dtype=float)
        if self.kind == "zero":
            return means.copy()
        if self.kind == "gaussian_unit":
            return means + rng.standard_normal(means.shape)
        if np.any(means < 0) or np.any(means > 1):
            raise ValueError("bernoulli rewards need means in [0, 1]")
        return (rng.random(means.shape) < means).astype(float)

    def variates(self, n: int, rng: np.random.Generator) -> np.ndarray:
        """Pre-drawn randomness for ``n`` pulls, consumed by :meth:`apply`."""
        if self.kind == "zero":
            return np.zeros(n)
        if self.kind == "gaussian_unit":
            return rng.standard_normal(n)
        return rng.random(n)

    def apply(self, means: np.ndarray, v: np.ndarray) -> np.ndarray:
        if self.kind == "zero":
            return np.asarray(means, dtype=float)
        if self.kind == "gaussian_unit":
            return means + v
        return (v < means).astype(float)


def sample_reward(instance: Instance, noise: NoiseModel, x, rng: np.random.Generator) -> float:
    return float(noise.observe(np.array([instance.eval(x)]), rng)[0])


@dataclass(frozen=True)
class ExpertDistribution:
    """f_t(x) = clip(base(x) + sigma_t * s(x), 0, 1) with sigma_t uniform on {-1, +1}.

    ``shape="balanced"`` uses s = amplitude * min(base, 1 - base), which never
    needs clipping for amplitude <= 1. ``shape="tent"`` uses
    s = amplitude * max(0, 1 - |x - center|_inf / width) and is checked for
    clipping on a dense grid at construction.
    """

    base: Instance
    amplitude: float = 0.2
    shape: str = "balanced"
    center: tuple[float, ...] | None = None
    width: float = 0.1

    def __post_init__(self):
        if self.amplitude < 0:
            raise ValueError("amplitude must be nonnegative")
        if self.shape == "balanced":
            if self.amplitude > 1:
                raise ValueError("balanced shape needs amplitude <= 1")
            vals = self.base.values(_check_grid(self.base.d))
            if np.any(vals < -1e-12) or np.any(vals > 1 + 1e-12):
                raise ValueError("balanced shape needs base values in [0, 1]")
        elif self.shape == "tent":
            if self.center is None:
                raise ValueError("tent shape needs a center")
            g = _check_grid(self.base.d)
            b, s = self.base.values(g), self.shape_values(g)
            if np.any(b + s > 1 + 1e-12) or np.any(b - s < -1e-12):
                raise ValueError("tent perturbation would be clipped; lower the amplitude")
        else:
            raise ValueError(f"unknown shape {self.shape!r}")

    @property
    def shape_lipschitz(self) -> float:
        if self.shape == "balanced":
            return self.amplitude * self.base.lipschitz_true
        return self.amplitude / self.width

    @property
    def lipschitz(self) -> float:
        return self.base.lipschitz_true + self.shape_lipschitz

    def shape_values(self, x) -> np.ndarray:
        x = self.base._as_points(x)
        if self.shape == "balanced":
            b = self.base.values(x)
            return self.amplitude * np.minimum(b, 1.0 - b)
        c = np.asarray(self.center, float)
        return self.amplitude * np.maximum(0.0, 1.0 - np.max(np.abs(x - c), axis=-1) / self.width)

    def realize(self, signs: np.ndarray, grid: np.ndarray) -> np.ndarray:
        """Values of f_t on ``grid`` for each sign; shape (len(signs), len(grid))."""
        b = self.base.values(grid)
        s = self.shape_values(grid)
        return np.clip(b[None, :] + np.asarray(signs, float)[:, None] * s[None, :], 0.0, 1.0)

    def draw_signs(self, n: int, rng: np.random.Generator) -> np.ndarray:
        return np.where(rng.random(n) < 0.5, -1.0, 1.0)


def _check_grid(d: int, n: int = 201) -> np.ndarray:
    axes = [np.linspace(0, 1, n if d == 1 else 41)] * d
    return np.stack([m.ravel() for m in np.meshgrid(*axes, indexing="ij")], axis=1)


def sample_expert_function(dist: ExpertDistribution, rng: np.random.Generator):
    """Draw one f_t; returns a vectorised callable."""
    sign = float(dist.draw_signs(1, rng)[0])

    def f_t(x):
        return dist.realize(np.array([sign]), dist.base._as_points(x))[0]

    f_t.sign = sign
    return f_t
