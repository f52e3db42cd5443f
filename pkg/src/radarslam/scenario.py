"""Scenario files: TOML text describing the scene, noise, manager thresholds and seeds.

Grammar (all top-level keys optional except ``trajectory`` and ``vehicles``)::

    name = "low-clutter"
    steps = 120                    # defaults to the trajectory length
    dt = 0.16
    max_range = 20.0               # radar range, shared by simulator and manager
    initial_pose = [0.0, 0.0, 0.0]
    clutter_rate = 2.0             # mean false detections per frame
    detections_per_vehicle = 8.0   # Poisson mean at full visibility
    match_radius = 2.5             # metric matching radius
    seeds = [0, 1, 2]              # defaults to 0..99

    [noise]                        # R (2x2), Q (3x3), U (2x2)
    [manager]                      # gamma_s, gamma_c, gamma_a, gamma_m, alpha, beta,
                                   # n_c1, n_c2, m_init, n_init, m_rem, n_rem
    [[trajectory]]                 # steps, v, yaw_rate
    [[vehicles]]                   # id, center, length, width, orientation, birth, departure
    [[clutter_bursts]]             # step, center, count, radius, duration

Unknown keys are rejected. Missing optional keys take the defaults of
``Scene``, ``SlamConfig`` and ``ManagerConfig``.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Any

import numpy as np
import tomli
import tomli_w

from .landmarks import ManagerConfig
from .simulator import ClutterBurst, Scene, TrajectorySegment, VehicleTruth, as_matrix
from .slam import SlamConfig

DEFAULT_SEEDS = tuple(range(100))
BUNDLED = ("low_clutter", "high_clutter", "clutter_burst")


class ScenarioError(ValueError):
    def __init__(self, message: str, field: str | None = None, line: int | None = None):
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(field)
        super().__init__(f"{', '.join(where)}: {message}" if where else message)
        self.field = field
        self.line = line


@dataclass(frozen=True)
class ScenarioFile:
    name: str
    scene: Scene
    slam: SlamConfig
    seeds: tuple[int, ...] = DEFAULT_SEEDS
    match_radius: float = 2.5

    @property
    def manager(self) -> ManagerConfig:
        return self.slam.manager


_TOP = {"name", "steps", "dt", "max_range", "initial_pose", "clutter_rate", "detections_per_vehicle",
        "match_radius", "seeds", "noise", "manager", "trajectory", "vehicles", "clutter_bursts"}
_NOISE_SHAPES = {"R": (2, 2), "Q": (3, 3), "U": (2, 2)}
_MANAGER = {f.name for f in dataclasses.fields(ManagerConfig)} - {"r_max"}
_SEGMENT = {"steps", "v", "yaw_rate"}
_VEHICLE = {"id", "center", "length", "width", "orientation", "birth", "departure"}
_BURST = {"step", "center", "count", "radius", "duration"}


def _reject_unknown(table: dict, allowed: set[str], where: str) -> None:
    extra = sorted(set(table) - allowed)
    if extra:
        prefix = f"{where}." if where else ""
        raise ScenarioError("unknown key", field=prefix + extra[0])


def _number(value: Any, field: str, positive: bool = False, integer: bool = False) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ScenarioError(f"expected a number, got {value!r}", field=field)
    if integer and int(value) != value:
        raise ScenarioError(f"expected an integer, got {value!r}", field=field)
    if not math.isfinite(value):
        raise ScenarioError("must be finite", field=field)
    if positive and value <= 0:
        raise ScenarioError(f"must be positive, got {value!r}", field=field)
    return int(value) if integer else float(value)


def _point(value: Any, n: int, field: str) -> tuple[float, ...]:
    if not isinstance(value, list) or len(value) != n:
        raise ScenarioError(f"expected a list of {n} numbers", field=field)
    return tuple(_number(v, f"{field}[{i}]") for i, v in enumerate(value))


def _covariance(value: Any, shape: tuple[int, int], field: str) -> tuple:
    try:
        M = np.array(value, dtype=float)
    except (TypeError, ValueError):
        raise ScenarioError("expected a numeric matrix", field=field) from None
    if M.shape != shape:
        raise ScenarioError(f"expected shape {shape}, got {M.shape}", field=field)
    if not np.all(np.isfinite(M)):
        raise ScenarioError("must be finite", field=field)
    if np.any(np.diag(M) < 0):
        raise ScenarioError("negative variance on the diagonal", field=field)
    if np.max(np.abs(M - M.T)) > 1e-12:
        raise ScenarioError("must be symmetric", field=field)
    if np.linalg.eigvalsh(M)[0] < -1e-12:
        raise ScenarioError("must be positive semi-definite", field=field)
    return as_matrix(M)


def _table_list(doc: dict, key: str, required: bool) -> list[dict]:
    if key not in doc:
        if required:
            raise ScenarioError("missing required key", field=key)
        return []
    items = doc[key]
    if not isinstance(items, list) or not all(isinstance(t, dict) for t in items):
        raise ScenarioError("expected an array of tables", field=key)
    return items


def _from_doc(doc: dict) -> ScenarioFile:
    _reject_unknown(doc, _TOP, "")

    segments = []
    for i, t in enumerate(_table_list(doc, "trajectory", True)):
        where = f"trajectory[{i}]"
        _reject_unknown(t, _SEGMENT, where)
        for key in ("steps", "v"):
            if key not in t:
                raise ScenarioError("missing required key", field=f"{where}.{key}")
        segments.append(TrajectorySegment(_number(t["steps"], f"{where}.steps", positive=True, integer=True),
                                          _number(t["v"], f"{where}.v"),
                                          _number(t.get("yaw_rate", 0.0), f"{where}.yaw_rate")))
    if not segments:
        raise ScenarioError("at least one segment required", field="trajectory")

    vehicles = []
    for i, t in enumerate(_table_list(doc, "vehicles", True)):
        where = f"vehicles[{i}]"
        _reject_unknown(t, _VEHICLE, where)
        for key in ("id", "center"):
            if key not in t:
                raise ScenarioError("missing required key", field=f"{where}.{key}")
        departure = t.get("departure", math.inf)
        try:
            vehicles.append(VehicleTruth(
                str(t["id"]), _point(t["center"], 2, f"{where}.center"),
                _number(t.get("length", 4.5), f"{where}.length", positive=True),
                _number(t.get("width", 1.8), f"{where}.width", positive=True),
                _number(t.get("orientation", 0.0), f"{where}.orientation"),
                _number(t.get("birth", 0), f"{where}.birth", integer=True),
                departure if math.isinf(departure) else _number(departure, f"{where}.departure", integer=True)))
        except ValueError as exc:
            if isinstance(exc, ScenarioError):
                raise
            raise ScenarioError(str(exc), field=where) from None
    ids = [v.id for v in vehicles]
    if len(set(ids)) != len(ids):
        raise ScenarioError("vehicle ids must be unique", field="vehicles")

    bursts = []
    for i, t in enumerate(_table_list(doc, "clutter_bursts", False)):
        where = f"clutter_bursts[{i}]"
        _reject_unknown(t, _BURST, where)
        for key in ("step", "center"):
            if key not in t:
                raise ScenarioError("missing required key", field=f"{where}.{key}")
        bursts.append(ClutterBurst(_number(t["step"], f"{where}.step", integer=True),
                                   _point(t["center"], 2, f"{where}.center"),
                                   _number(t.get("count", 8), f"{where}.count", positive=True, integer=True),
                                   _number(t.get("radius", 1.0), f"{where}.radius", positive=True),
                                   _number(t.get("duration", 1), f"{where}.duration", positive=True, integer=True)))

    noise_doc = doc.get("noise", {})
    if not isinstance(noise_doc, dict):
        raise ScenarioError("expected a table", field="noise")
    _reject_unknown(noise_doc, set(_NOISE_SHAPES), "noise")
    defaults = SlamConfig()
    noise = {"R": defaults.R, "Q": defaults.Q, "U": Scene.__dataclass_fields__["U"].default_factory()}
    for key, shape in _NOISE_SHAPES.items():
        if key in noise_doc:
            noise[key] = _covariance(noise_doc[key], shape, f"noise.{key}")

    max_range = _number(doc.get("max_range", 20.0), "max_range", positive=True)
    manager_doc = doc.get("manager", {})
    if not isinstance(manager_doc, dict):
        raise ScenarioError("expected a table", field="manager")
    _reject_unknown(manager_doc, _MANAGER, "manager")
    kwargs = {}
    for key, value in manager_doc.items():
        integer = ManagerConfig.__dataclass_fields__[key].type == "int"
        kwargs[key] = _number(value, f"manager.{key}", positive=True, integer=integer)
    try:
        manager = ManagerConfig(r_max=max_range, **kwargs)
    except ValueError as exc:
        raise ScenarioError(str(exc), field="manager") from None

    dt = _number(doc.get("dt", 0.16), "dt", positive=True)
    total = sum(s.steps for s in segments)
    steps = _number(doc.get("steps", total), "steps", positive=True, integer=True)
    if steps > total:
        raise ScenarioError(f"trajectory covers only {total} steps", field="steps")
    scene = Scene(tuple(vehicles), tuple(segments), steps, dt, max_range,
                  _point(doc.get("initial_pose", [0.0, 0.0, 0.0]), 3, "initial_pose"),
                  _number(doc.get("clutter_rate", 2.0), "clutter_rate"),
                  _number(doc.get("detections_per_vehicle", 8.0), "detections_per_vehicle"),
                  tuple(bursts), noise["R"], noise["U"])
    if scene.clutter_rate < 0:
        raise ScenarioError("must not be negative", field="clutter_rate")
    if scene.detections_per_vehicle < 0:
        raise ScenarioError("must not be negative", field="detections_per_vehicle")

    seeds = doc.get("seeds", list(DEFAULT_SEEDS))
    if not isinstance(seeds, list) or not seeds:
        raise ScenarioError("expected a non-empty list of integers", field="seeds")
    seeds = tuple(_number(s, f"seeds[{i}]", integer=True) for i, s in enumerate(seeds))

    name = doc.get("name", "scenario")
    if not isinstance(name, str):
        raise ScenarioError("expected a string", field="name")
    return ScenarioFile(name, scene, SlamConfig(manager, noise["R"], noise["Q"], dt), seeds,
                        _number(doc.get("match_radius", 2.5), "match_radius", positive=True))


def parse_scenario(text: str) -> ScenarioFile:
    try:
        doc = tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        raise ScenarioError(exc.msg if hasattr(exc, "msg") else str(exc),
                            line=getattr(exc, "lineno", None)) from None
    return _from_doc(doc)


def load_scenario(path: str | Path) -> ScenarioFile:
    path = Path(path)
    if not path.exists() and path.stem in BUNDLED and path.parent == Path("."):
        return bundled_scenario(path.stem)
    return parse_scenario(path.read_text(encoding="utf-8"))


def bundled_scenario(name: str) -> ScenarioFile:
    text = resources.files("radarslam.scenarios").joinpath(f"{name}.toml").read_text(encoding="utf-8")
    return parse_scenario(text)


def _matrix(m: tuple) -> list[list[float]]:
    return [list(row) for row in m]


def to_doc(sf: ScenarioFile) -> dict:
    sc, mcfg = sf.scene, sf.manager
    doc: dict[str, Any] = {
        "name": sf.name,
        "steps": sc.steps,
        "dt": sc.dt,
        "max_range": sc.r_max,
        "initial_pose": list(sc.initial_pose),
        "clutter_rate": sc.clutter_rate,
        "detections_per_vehicle": sc.detections_per_vehicle,
        "match_radius": sf.match_radius,
        "seeds": list(sf.seeds),
        "noise": {"R": _matrix(sf.slam.R), "Q": _matrix(sf.slam.Q), "U": _matrix(sc.U)},
        "manager": {k: getattr(mcfg, k) for k in sorted(_MANAGER)},
        "trajectory": [{"steps": s.steps, "v": s.v, "yaw_rate": s.yaw_rate} for s in sc.trajectory],
    }
    vehicles = []
    for v in sc.vehicles:
        t = {"id": v.id, "center": list(v.center), "length": v.length, "width": v.width,
             "orientation": v.orientation, "birth": v.birth}
        if not math.isinf(v.departure):
            t["departure"] = int(v.departure)
        vehicles.append(t)
    doc["vehicles"] = vehicles
    if sc.clutter_bursts:
        doc["clutter_bursts"] = [{"step": b.step, "center": list(b.center), "count": b.count,
                                  "radius": b.radius, "duration": b.duration} for b in sc.clutter_bursts]
    return doc


def dump_scenario(sf: ScenarioFile) -> str:
    return tomli_w.dumps(to_doc(sf))
