"""Experiment configuration: an INI document parsed into a validated dataclass.

See docs/formats.md for the grammar. Every error names the offending key as
``section.key``.
"""
from __future__ import annotations

import configparser
import difflib
import hashlib
import json
from dataclasses import asdict, dataclass, field

from .instances import BUILDERS, NOISE_KINDS

ALGORITHMS = ("paco", "paco_one_sided", "positive_gap_ucb", "grid_ucb", "sous")
EXPERT_SHAPES = ("balanced", "tent")


class ConfigError(ValueError):
    def __init__(self, key: str, message: str):
        super().__init__(f"{key}: {message}")
        self.key = key


class UnknownKey(ConfigError):
    def __init__(self, key: str, message: str, suggestions=()):
        hint = f" (did you mean: {', '.join(suggestions)}?)" if suggestions else ""
        super().__init__(key, message + hint)
        self.suggestions = list(suggestions)


class TypeMismatch(ConfigError):
    pass


class RangeViolation(ConfigError):
    pass


# per-family instance parameters: name -> kind
INSTANCE_PARAMS = {
    "cone": {"d": "int", "center": "floats", "slope": "float", "height": "float"},
    "plateau": {"d": "int", "lo": "floats", "hi": "floats", "slope": "float",
                "height": "float"},
    "multipeak": {"d": "int", "centers": "points", "heights": "floats", "slope": "float"},
    "one_sided_step": {"peak": "float", "width": "float", "drop": "float", "slope": "float"},
}

EXPERIMENT_KEYS = {"family", "algorithm", "horizons", "seeds", "delta", "lipschitz", "noise",
                   "master_seed", "output", "gap_floor", "traces"}
ANALYSIS_KEYS = {"report", "dimensions", "quadrature_resolution"}
EXPERTS_KEYS = {"amplitude", "shape", "center", "width"}
SECTIONS = {"experiment": EXPERIMENT_KEYS, "instance": None, "analysis": ANALYSIS_KEYS,
            "experts": EXPERTS_KEYS}


@dataclass(frozen=True)
class ExpertConfig:
    amplitude: float = 0.2
    shape: str = "balanced"
    center: tuple[float, ...] | None = None
    width: float = 0.1


@dataclass(frozen=True)
class ExperimentConfig:
    family: str
    algorithm: str
    horizons: tuple[int, ...]
    seeds: tuple[int, ...]
    instance_params: dict = field(default_factory=dict)
    delta: float | None = None
    lipschitz: float | None = None
    noise: str = "gaussian_unit"
    master_seed: int = 0
    output: str = "results"
    gap_floor: float | None = None
    traces: bool = True
    report: bool = True
    dimensions: bool = False
    quadrature_resolution: int | None = None
    experts: ExpertConfig = field(default_factory=ExpertConfig)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["horizons"] = list(self.horizons)
        out["seeds"] = list(self.seeds)
        return out

    def canonical(self) -> str:
        """Canonical JSON of every field that influences outputs."""
        d = self.to_dict()
        d.pop("output")
        return json.dumps(d, sort_keys=True, separators=(",", ":"))

    def sha256(self) -> str:
        return hashlib.sha256(self.canonical().encode()).hexdigest()

    def build_instance(self):
        return BUILDERS[self.family](**self.instance_params, **(
            {"L": self.lipschitz} if self.lipschitz is not None else {}))


def _unknown(key: str, name: str, choices) -> UnknownKey:
    sugg = difflib.get_close_matches(name, list(choices), n=3, cutoff=0.5)
    return UnknownKey(key, f"unknown value {name!r}", sugg or sorted(choices))


def _convert(key: str, raw: str, kind: str):
    raw = raw.strip()
    try:
        if kind == "int":
            return int(raw)
        if kind == "float":
            return float(raw)
        if kind == "bool":
            low = raw.lower()
            if low in ("true", "yes", "on", "1"):
                return True
            if low in ("false", "no", "off", "0"):
                return False
            raise ValueError(raw)
        if kind == "ints":
            return tuple(int(v) for v in raw.split(",") if v.strip())
        if kind == "floats":
            return tuple(float(v) for v in raw.split(",") if v.strip())
        if kind == "points":
            return tuple(tuple(float(v) for v in p.split(",")) for p in raw.split(";")
                         if p.strip())
    except ValueError:
        raise TypeMismatch(key, f"expected {kind}, got {raw!r}") from None
    raise AssertionError(kind)


def _integral_float(key: str, raw: str) -> int:
    value = float(raw)
    if value != int(value):
        raise TypeMismatch(key, f"expected an integer, got {raw!r}")
    return int(value)


def parse_config(text: str) -> ExperimentConfig:
    """Parse and validate an INI experiment description."""
    cp = configparser.ConfigParser(interpolation=None, delimiters=("=",))
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise TypeMismatch("document", str(exc).splitlines()[0]) from None
    for sec in cp.sections():
        if sec not in SECTIONS:
            raise _unknown(sec, sec, SECTIONS)
        allowed = SECTIONS[sec]
        if allowed is None:
            continue
        for key in cp[sec]:
            if key not in allowed:
                raise _unknown(f"{sec}.{key}", key, allowed)
    if "experiment" not in cp:
        raise ConfigError("experiment", "missing required section")
    ex = cp["experiment"]
    for req in ("family", "algorithm", "horizons", "seeds"):
        if req not in ex:
            raise ConfigError(f"experiment.{req}", "missing required key")

    family = ex["family"].strip()
    if family not in BUILDERS:
        raise _unknown("experiment.family", family, BUILDERS)
    algorithm = ex["algorithm"].strip()
    if algorithm not in ALGORITHMS:
        raise _unknown("experiment.algorithm", algorithm, ALGORITHMS)
    noise = ex.get("noise", "gaussian_unit").strip()
    if noise not in NOISE_KINDS:
        raise _unknown("experiment.noise", noise, NOISE_KINDS)

    try:
        horizons = tuple(_integral_float("experiment.horizons", v)
                         for v in ex["horizons"].split(",") if v.strip())
    except ValueError:
        raise TypeMismatch("experiment.horizons",
                           f"expected integers, got {ex['horizons']!r}") from None
    if not horizons or any(T < 1 for T in horizons):
        raise RangeViolation("experiment.horizons", "horizons must be positive integers")
    if len(set(horizons)) != len(horizons):
        raise RangeViolation("experiment.horizons", "horizons must be distinct")
    seeds = _convert("experiment.seeds", ex["seeds"], "ints")
    if not seeds or any(s < 0 for s in seeds):
        raise RangeViolation("experiment.seeds", "seeds must be nonnegative integers")
    if len(set(seeds)) != len(seeds):
        raise RangeViolation("experiment.seeds", "seeds must be distinct")

    kw: dict = {}
    if "delta" in ex:
        delta = _convert("experiment.delta", ex["delta"], "float")
        if not 0.0 < delta < 1.0:
            raise RangeViolation("experiment.delta", f"must lie in (0, 1), got {delta}")
        kw["delta"] = delta
    if "lipschitz" in ex:
        lip = _convert("experiment.lipschitz", ex["lipschitz"], "float")
        if lip <= 0:
            raise RangeViolation("experiment.lipschitz", "must be positive")
        kw["lipschitz"] = lip
    if "gap_floor" in ex:
        gf = _convert("experiment.gap_floor", ex["gap_floor"], "float")
        if gf <= 0:
            raise RangeViolation("experiment.gap_floor", "must be positive")
        kw["gap_floor"] = gf
    elif algorithm == "positive_gap_ucb":
        raise ConfigError("experiment.gap_floor", "required for positive_gap_ucb")
    if "master_seed" in ex:
        ms = _convert("experiment.master_seed", ex["master_seed"], "int")
        if ms < 0:
            raise RangeViolation("experiment.master_seed", "must be nonnegative")
        kw["master_seed"] = ms
    if "output" in ex:
        kw["output"] = ex["output"].strip()
    if "traces" in ex:
        kw["traces"] = _convert("experiment.traces", ex["traces"], "bool")

    schema = INSTANCE_PARAMS[family]
    params = {}
    if "instance" in cp:
        for key, raw in cp["instance"].items():
            if key not in schema:
                raise _unknown(f"instance.{key}", key, schema)
            params[key] = _convert(f"instance.{key}", raw, schema[key])
    d = params.get("d", 1)
    if not 1 <= d <= 3:
        raise RangeViolation("instance.d", "must be 1, 2 or 3")
    for key, val in params.items():
        if schema[key] == "floats" and key != "heights" and len(val) == 1:
            params[key] = val[0]
        elif schema[key] == "floats" and key != "heights" and len(val) != d:
            raise RangeViolation(f"instance.{key}", f"expected 1 or {d} values")
    if algorithm == "sous" and d > 2:
        raise RangeViolation("instance.d", "sous supports d <= 2")

    if "analysis" in cp:
        an = cp["analysis"]
        if "report" in an:
            kw["report"] = _convert("analysis.report", an["report"], "bool")
        if "dimensions" in an:
            kw["dimensions"] = _convert("analysis.dimensions", an["dimensions"], "bool")
        if "quadrature_resolution" in an:
            q = _convert("analysis.quadrature_resolution", an["quadrature_resolution"], "int")
            if q < 1:
                raise RangeViolation("analysis.quadrature_resolution", "must be positive")
            kw["quadrature_resolution"] = q
    if "experts" in cp:
        e = cp["experts"]
        ek: dict = {}
        if "amplitude" in e:
            ek["amplitude"] = _convert("experts.amplitude", e["amplitude"], "float")
            if ek["amplitude"] < 0:
                raise RangeViolation("experts.amplitude", "must be nonnegative")
        if "shape" in e:
            shape = e["shape"].strip()
            if shape not in EXPERT_SHAPES:
                raise _unknown("experts.shape", shape, EXPERT_SHAPES)
            ek["shape"] = shape
        if "center" in e:
            ek["center"] = _convert("experts.center", e["center"], "floats")
        if "width" in e:
            ek["width"] = _convert("experts.width", e["width"], "float")
            if ek["width"] <= 0:
                raise RangeViolation("experts.width", "must be positive")
        kw["experts"] = ExpertConfig(**ek)

    cfg = ExperimentConfig(family, algorithm, horizons, seeds, params, noise=noise, **kw)
    try:
        inst = cfg.build_instance()
    except (TypeError, ValueError) as exc:
        raise RangeViolation("instance", str(exc)) from None
    if algorithm == "sous":
        from .instances import ExpertDistribution
        try:
            ExpertDistribution(inst, **asdict(cfg.experts))
        except ValueError as exc:
            raise RangeViolation("experts", str(exc)) from None
    return cfg


def load_config(path) -> ExperimentConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())
