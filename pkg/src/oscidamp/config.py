"""JSON configuration documents (schema ``oscidamp-config/1``).

Area numbers are 1-based in the file and 0-based once loaded.  Every key
is checked; unknown keys are rejected with the dotted path of the
offending field.
"""

import hashlib
import json
import math
import os
from dataclasses import dataclass, field
from pathlib import Path

from .exceptions import ParseError, ValidationError
from .model import AreaParams, PowerSystem, TieNetwork
from .sim import BurstLoad, FaultPulse, Feedforward, NoDisturbance, NoiseSpec, Scenario, StepLoad

SCHEMA = "oscidamp-config/1"
SEED_ENV = "OSCIDAMP_SEED"
CONTROLLER_MODES = {"fd": "fd", "sf": "sf", "sdf": "sdf_exact", "sdf_measured": "sdf_measured"}
DATA_DIR = Path(__file__).parent / "data"


@dataclass(frozen=True)
class ControllerSpec:
    mode: str = "sdf"
    kd: object = "auto"
    q_diag: tuple = None
    r_diag: tuple = None

    @property
    def sim_mode(self):
        return CONTROLLER_MODES[self.mode]


@dataclass(frozen=True)
class OutputSpec:
    dir: str = "out"
    decimation: int = 10


@dataclass(frozen=True)
class Config:
    system: PowerSystem
    controller: ControllerSpec
    scenario: Scenario
    output: OutputSpec = field(default_factory=OutputSpec)
    description: str = ""

    def fingerprint(self):
        text = json.dumps(config_to_dict(self), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode()).hexdigest()


# -- validation helpers --------------------------------------------------


def _keys(doc, path, required=(), optional=()):
    if not isinstance(doc, dict):
        raise ValidationError(path, "expected an object")
    for key in required:
        if key not in doc:
            raise ValidationError(f"{path}.{key}", "missing required field")
    allowed = set(required) | set(optional)
    for key in doc:
        if key not in allowed:
            raise ValidationError(f"{path}.{key}", "unknown field")


def _num(doc, key, path, *, minimum=None, strict=False, default=None, allow_none=False):
    value = doc.get(key, default)
    where = f"{path}.{key}"
    if value is None and allow_none:
        return None
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ValidationError(where, f"expected a number, got {value!r}")
    value = float(value)
    if not math.isfinite(value):
        raise ValidationError(where, "must be finite")
    if minimum is not None:
        if strict and not value > minimum:
            raise ValidationError(where, f"must be > {minimum:g}, got {value:g}")
        if not strict and value < minimum:
            raise ValidationError(where, f"must be >= {minimum:g}, got {value:g}")
    return value


def _int(doc, key, path, minimum=None, default=None):
    value = doc.get(key, default)
    if isinstance(value, bool) or not isinstance(value, int):
        raise ValidationError(f"{path}.{key}", f"expected an integer, got {value!r}")
    if minimum is not None and value < minimum:
        raise ValidationError(f"{path}.{key}", f"must be >= {minimum}")
    return value


def _list(doc, key, path, length=None, default=None):
    value = doc.get(key, default)
    if not isinstance(value, list):
        raise ValidationError(f"{path}.{key}", "expected a list")
    if length is not None and len(value) != length:
        raise ValidationError(f"{path}.{key}", f"expected {length} entries, got {len(value)}")
    return value


def _numbers(values, path):
    out = []
    for k, v in enumerate(values):
        out.append(_num({"v": v}, "v", f"{path}[{k}]"))
    return tuple(out)


# -- sections ----------------------------------------------------------------


def _system(doc, path="system"):
    _keys(doc, path, ("areas", "ties"), ("stiffness_eps", "f_nom_hz"))
    raw_areas = _list(doc, "areas", path)
    if not raw_areas:
        raise ValidationError(f"{path}.areas", "at least one area is required")
    areas = []
    for k, area in enumerate(raw_areas):
        ap = f"{path}.areas[{k}]"
        _keys(area, ap, ("inertia_s", "damping_pu"))
        areas.append(AreaParams(
            _num(area, "inertia_s", ap, minimum=0.0, strict=True),
            _num(area, "damping_pu", ap, minimum=0.0),
        ))
    n = len(areas)
    ties = []
    seen = set()
    for k, tie in enumerate(_list(doc, "ties", path)):
        tp = f"{path}.ties[{k}]"
        _keys(tie, tp, ("i", "j", "t_pu"))
        i = _int(tie, "i", tp, minimum=1)
        j = _int(tie, "j", tp, minimum=1)
        if i > n or j > n:
            raise ValidationError(tp, f"area index out of range 1..{n}")
        if i == j:
            raise ValidationError(tp, "self-loop ties are not allowed")
        pair = (min(i, j), max(i, j))
        if pair in seen:
            raise ValidationError(tp, f"duplicate tie between areas {pair[0]} and {pair[1]}")
        seen.add(pair)
        ties.append((i - 1, j - 1, _num(tie, "t_pu", tp, minimum=0.0, strict=True)))
    eps = _numbers(_list(doc, "stiffness_eps", path, length=n, default=[0.0] * n), f"{path}.stiffness_eps")
    if any(e < 0 for e in eps):
        raise ValidationError(f"{path}.stiffness_eps", "entries must be >= 0")
    f_nom = _num(doc, "f_nom_hz", path, minimum=0.0, strict=True, default=60.0)
    try:
        net = TieNetwork(n, tuple(ties), eps)
    except ValueError as exc:
        raise ValidationError(f"{path}.ties", str(exc)) from None
    return PowerSystem(tuple(areas), net, f_nom)


def _controller(doc, n, path="controller"):
    _keys(doc, path, ("mode",), ("kd", "lqr"))
    mode = doc["mode"]
    if mode not in CONTROLLER_MODES:
        raise ValidationError(f"{path}.mode", f"expected one of {sorted(CONTROLLER_MODES)}, got {mode!r}")
    kd = doc.get("kd", "auto")
    if kd != "auto":
        kd = _num(doc, "kd", path, minimum=0.0, strict=True)
    q_diag = r_diag = None
    lqr = doc.get("lqr")
    if lqr is not None:
        lp = f"{path}.lqr"
        _keys(lqr, lp, (), ("q_diag", "r_diag"))
        if lqr.get("q_diag") is not None:
            q_diag = _numbers(_list(lqr, "q_diag", lp, length=2 * n), f"{lp}.q_diag")
            if any(v < 0 for v in q_diag):
                raise ValidationError(f"{lp}.q_diag", "entries must be >= 0")
        if lqr.get("r_diag") is not None:
            r_diag = _numbers(_list(lqr, "r_diag", lp, length=n), f"{lp}.r_diag")
            if any(v <= 0 for v in r_diag):
                raise ValidationError(f"{lp}.r_diag", "entries must be > 0")
    return ControllerSpec(mode, kd, q_diag, r_diag)


def _area(doc, path, n):
    area = _int(doc, "area", path, minimum=1)
    if area > n:
        raise ValidationError(f"{path}.area", f"area index out of range 1..{n}")
    return area - 1


def _disturbance(doc, n, path):
    if doc is None:
        return NoDisturbance()
    if not isinstance(doc, dict) or "type" not in doc:
        raise ValidationError(path, "expected an object with a 'type' field")
    kind = doc["type"]
    try:
        if kind == "none":
            _keys(doc, path, ("type",))
            return NoDisturbance()
        if kind == "step":
            _keys(doc, path, ("type", "area", "magnitude_pu", "t_on_s", "t_off_s"))
            return StepLoad(_area(doc, path, n), _num(doc, "magnitude_pu", path),
                            _num(doc, "t_on_s", path, minimum=0.0), _num(doc, "t_off_s", path, minimum=0.0))
        if kind == "fault":
            _keys(doc, path, ("type", "area", "magnitude_pu", "t_on_s", "duration_s"))
            return FaultPulse(_area(doc, path, n), _num(doc, "magnitude_pu", path),
                              _num(doc, "t_on_s", path, minimum=0.0),
                              _num(doc, "duration_s", path, minimum=0.0, strict=True))
        if kind == "burst":
            _keys(doc, path, ("type", "area", "low_pu", "high_pu"),
                  ("period_s", "duty", "t_start_s", "t_end_s"))
            return BurstLoad(_area(doc, path, n), _num(doc, "low_pu", path), _num(doc, "high_pu", path),
                             _num(doc, "period_s", path, minimum=0.0, strict=True, default=4.0),
                             _num(doc, "duty", path, default=0.5),
                             _num(doc, "t_start_s", path, minimum=0.0, default=0.0),
                             _num(doc, "t_end_s", path, default=40.0))
    except ValueError as exc:
        if isinstance(exc, ValidationError):
            raise
        raise ValidationError(path, str(exc)) from None
    raise ValidationError(f"{path}.type", f"unknown disturbance type {kind!r}")


def _noise(doc, path, env_seed):
    doc = {} if doc is None else doc
    _keys(doc, path, (), ("enabled", "sigma_f_hz", "sigma_delta_rad", "sigma_rocof_hz_per_s",
                          "pmu_rate_fps", "seed"))
    enabled = doc.get("enabled", False)
    if not isinstance(enabled, bool):
        raise ValidationError(f"{path}.enabled", "expected true or false")
    base = NoiseSpec()
    seed = _int(doc, "seed", path, default=base.seed)
    if env_seed is not None:
        try:
            seed = int(env_seed)
        except ValueError:
            raise ValidationError(SEED_ENV, f"not an integer: {env_seed!r}") from None
    return NoiseSpec(
        enabled=enabled,
        sigma_f=_num(doc, "sigma_f_hz", path, minimum=0.0, default=base.sigma_f),
        sigma_delta=_num(doc, "sigma_delta_rad", path, minimum=0.0, default=base.sigma_delta),
        sigma_rocof=_num(doc, "sigma_rocof_hz_per_s", path, minimum=0.0, allow_none=True),
        pmu_rate=_num(doc, "pmu_rate_fps", path, minimum=0.0, strict=True, default=base.pmu_rate),
        seed=seed,
    )


def _scenario(doc, n, sim_mode, env_seed, path="scenario"):
    _keys(doc, path, (), ("disturbance", "noise", "horizon_s", "dt_s", "feedforward"))
    disturbance = _disturbance(doc.get("disturbance"), n, f"{path}.disturbance")
    noise = _noise(doc.get("noise"), f"{path}.noise", env_seed)
    horizon = _num(doc, "horizon_s", path, minimum=0.0, strict=True, default=80.0)
    dt = _num(doc, "dt_s", path, minimum=0.0, strict=True, default=0.001)
    ff_doc = doc.get("feedforward") or {}
    fp = f"{path}.feedforward"
    _keys(ff_doc, fp, (), ("mode", "lag_s"))
    ff_mode = ff_doc.get("mode", "true_value")
    if ff_mode not in ("true_value", "delayed", "off"):
        raise ValidationError(f"{fp}.mode", f"expected true_value, delayed or off, got {ff_mode!r}")
    ff = Feedforward(ff_mode, _num(ff_doc, "lag_s", fp, minimum=0.0, default=0.0))
    try:
        return Scenario(disturbance, noise, horizon, dt, sim_mode, ff)
    except ValueError as exc:
        raise ValidationError(path, str(exc)) from None


def _output(doc, path="output"):
    doc = {} if doc is None else doc
    _keys(doc, path, (), ("dir", "decimation"))
    out_dir = doc.get("dir", "out")
    if not isinstance(out_dir, str):
        raise ValidationError(f"{path}.dir", "expected a string")
    return OutputSpec(out_dir, _int(doc, "decimation", path, minimum=1, default=10))


def parse_config(doc, env=None):
    """Validate a decoded JSON document and build the object graph."""
    env = os.environ if env is None else env
    _keys(doc, "$", ("schema", "system", "controller"), ("scenario", "output", "description"))
    if doc["schema"] != SCHEMA:
        raise ValidationError("schema", f"expected {SCHEMA!r}, got {doc['schema']!r}")
    system = _system(doc["system"])
    controller = _controller(doc["controller"], system.n_areas)
    scenario = _scenario(doc.get("scenario") or {}, system.n_areas, controller.sim_mode, env.get(SEED_ENV))
    description = doc.get("description", "")
    if not isinstance(description, str):
        raise ValidationError("description", "expected a string")
    return Config(system, controller, scenario, _output(doc.get("output")), description)


def resolve_config_path(path):
    """Existing file paths win; bare names fall back to the bundled configs."""
    p = Path(path)
    if p.exists():
        return p
    bundled = DATA_DIR / p.name
    if p.parent == Path(".") and bundled.exists():
        return bundled
    return p


def load_config(path, env=None):
    """Read, parse and validate a config file.

    Raises
    ------
    ParseError
        JSON syntax error (with line and column).
    ValidationError
        Schema or invariant violation (with the field path).
    OSError
        The file cannot be read.
    """
    text = resolve_config_path(path).read_text()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, exc.lineno, exc.colno) from None
    return parse_config(doc, env)


def _disturbance_dict(d):
    if isinstance(d, NoDisturbance):
        return {"type": "none"}
    if isinstance(d, StepLoad):
        return {"type": "step", "area": d.area + 1, "magnitude_pu": d.magnitude,
                "t_on_s": d.t_on, "t_off_s": d.t_off}
    if isinstance(d, FaultPulse):
        return {"type": "fault", "area": d.area + 1, "magnitude_pu": d.magnitude,
                "t_on_s": d.t_on, "duration_s": d.duration}
    return {"type": "burst", "area": d.area + 1, "low_pu": d.low, "high_pu": d.high,
            "period_s": d.period, "duty": d.duty, "t_start_s": d.t_start, "t_end_s": d.t_end}


def config_to_dict(cfg):
    sys_ = cfg.system
    sc = cfg.scenario
    ctrl = cfg.controller
    lqr = {}
    if ctrl.q_diag is not None:
        lqr["q_diag"] = list(ctrl.q_diag)
    if ctrl.r_diag is not None:
        lqr["r_diag"] = list(ctrl.r_diag)
    controller = {"mode": ctrl.mode, "kd": ctrl.kd}
    if lqr:
        controller["lqr"] = lqr
    doc = {
        "schema": SCHEMA,
        "system": {
            "areas": [{"inertia_s": a.inertia, "damping_pu": a.damping} for a in sys_.areas],
            "ties": [{"i": i + 1, "j": j + 1, "t_pu": c} for i, j, c in sys_.network.ties],
            "stiffness_eps": list(sys_.network.stiffness_eps),
            "f_nom_hz": sys_.f_nom,
        },
        "controller": controller,
        "scenario": {
            "disturbance": _disturbance_dict(sc.disturbance),
            "noise": {
                "enabled": sc.noise.enabled,
                "sigma_f_hz": sc.noise.sigma_f,
                "sigma_delta_rad": sc.noise.sigma_delta,
                "sigma_rocof_hz_per_s": sc.noise.sigma_rocof,
                "pmu_rate_fps": sc.noise.pmu_rate,
                "seed": sc.noise.seed,
            },
            "horizon_s": sc.horizon,
            "dt_s": sc.dt,
            "feedforward": {"mode": sc.feedforward.mode, "lag_s": sc.feedforward.lag},
        },
        "output": {"dir": cfg.output.dir, "decimation": cfg.output.decimation},
    }
    if cfg.description:
        doc["description"] = cfg.description
    return doc


def dump_config(cfg):
    return json.dumps(config_to_dict(cfg), indent=2) + "\n"
