"""Scenario configuration: dataclasses, JSON/YAML loading, line-anchored validation."""
from __future__ import annotations

import copy
import json
import math
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any, Optional

import yaml

from .chaos import MapFamily
from .harq import FeedbackErrorMode
from .modem import Modulation
from .optimizer import ConfigurationError, OptimizationScenario
from .rs import CodeSpec


class ConfigError(ValueError):
    """Validation failure; the message carries ``file:line:`` when known."""


MODES = ("conventional", "collaborative")


@dataclass
class NodeConfig:
    id: str
    position: Optional[tuple] = None
    p_fb: Optional[float] = None
    packets: Optional[int] = None


@dataclass
class SinkConfig:
    id: str
    position: Optional[tuple] = None


@dataclass
class LinkConfig:
    tx: str
    rx: str
    distance: Optional[float] = None
    extra_loss_db: float = 0.0
    taps: Optional[list] = None  # [[delay_chips, re, im], ...]


@dataclass
class NeighborhoodConfig:
    id: int
    sink: str
    family_seed: float
    members: list
    candidates: list = field(default_factory=list)


@dataclass
class ScenarioConfig:
    seed: int
    nodes: list
    sinks: list
    neighborhoods: list
    links: list = field(default_factory=list)
    mode: str = "conventional"
    power_control: bool = True
    packets_per_node: int = 20
    r_T: int = 4
    q: float = 1.0
    p_fb: float = 0.0
    feedback_mode: str = "flip"
    gamma_min_db: float = 10.0
    P_max: float = 1.0
    P_th: float = math.inf
    modulation: str = "bpsk"
    codes: list = field(default_factory=lambda: [[7, 3]])
    sl_menu: list = field(default_factory=lambda: [10])
    map_family: str = "logistic"
    bifurcation: Optional[float] = None
    burn_in: int = 1000
    noise_psd: float = 1e-9
    bandwidth: float = 15e3
    carrier_freq: float = 11.5
    sound_speed: float = 1500.0
    spreading_exponent: float = 1.5
    processing_margin: float = 0.5
    max_timeouts: int = 8
    trace_file: Optional[str] = None

    # ------------------------------------------------------------------
    @property
    def code_specs(self) -> list[CodeSpec]:
        return [CodeSpec(int(n), int(k), max_rounds=self.r_T) for n, k in self.codes]

    def node_ids(self) -> list[str]:
        return [n.id for n in self.nodes]

    def node(self, nid: str) -> NodeConfig:
        for n in self.nodes:
            if n.id == nid:
                return n
        raise KeyError(nid)

    def neighborhood_of(self, nid: str) -> NeighborhoodConfig:
        for nb in self.neighborhoods:
            if nid in nb.members:
                return nb
        raise KeyError(nid)

    def to_dict(self) -> dict:
        d = asdict(self)
        if not math.isfinite(self.P_th):
            d["P_th"] = "inf"
        return d

    def replace_path(self, path: str, value: Any) -> "ScenarioConfig":
        """Copy with a dotted-path field replaced, e.g. ``links.0.extra_loss_db``."""
        d = self.to_dict()
        parts = path.split(".")
        cur = d
        for p in parts[:-1]:
            cur = cur[int(p)] if isinstance(cur, list) else cur[p]
        last = parts[-1]
        if isinstance(cur, list):
            cur[int(last)] = value
        else:
            if last not in cur:
                raise ConfigError(f"unknown sweep axis {path!r}")
            cur[last] = value
        return from_dict(d)


def _anchor_map(text: str) -> dict:
    """Map dotted key paths to 1-based line numbers using the YAML composer."""
    try:
        root = yaml.compose(text, Loader=yaml.SafeLoader)
    except yaml.YAMLError:
        return {}
    out: dict = {}

    def walk(node, path):
        out[path] = node.start_mark.line + 1
        if isinstance(node, yaml.MappingNode):
            for k, v in node.value:
                sub = f"{path}.{k.value}" if path else str(k.value)
                walk(v, sub)
                out[sub] = k.start_mark.line + 1
        elif isinstance(node, yaml.SequenceNode):
            for i, v in enumerate(node.value):
                walk(v, f"{path}.{i}" if path else str(i))

    if root is not None:
        walk(root, "")
    return out


class _Validator:
    def __init__(self, source: str = "<config>", anchors: Optional[dict] = None):
        self.source = source
        self.anchors = anchors or {}

    def fail(self, path: str, msg: str):
        line = None
        p = path
        while p:
            if p in self.anchors:
                line = self.anchors[p]
                break
            p = p.rpartition(".")[0]
        loc = f"{self.source}:{line}" if line else self.source
        raise ConfigError(f"{loc}: {path}: {msg}")


def _num(v, path, V, kind=float, lo=None, hi=None, lo_open=False):
    if isinstance(v, bool):
        V.fail(path, "expected a number")
    if kind is float and isinstance(v, str) and v.strip().lower() in ("inf", "infinity"):
        v = math.inf
    try:
        x = kind(v)
    except (TypeError, ValueError):
        V.fail(path, f"expected {'an integer' if kind is int else 'a number'}, got {v!r}")
    if kind is int and isinstance(v, float) and v != int(v):
        V.fail(path, f"expected an integer, got {v!r}")
    if lo is not None and (x < lo or (lo_open and x == lo)):
        V.fail(path, f"must be {'>' if lo_open else '>='} {lo}")
    if hi is not None and x > hi:
        V.fail(path, f"must be <= {hi}")
    return x


def from_dict(d: dict, source: str = "<config>", anchors: Optional[dict] = None) -> ScenarioConfig:
    V = _Validator(source, anchors)
    if not isinstance(d, dict):
        V.fail("", "top level must be a mapping")
    d = copy.deepcopy(d)
    known = {f.name for f in fields(ScenarioConfig)}
    for key in d:
        if key not in known:
            V.fail(key, "unknown field")
    if "seed" not in d:
        V.fail("", "seed is mandatory")
    for key in ("nodes", "sinks", "neighborhoods"):
        if key not in d or not isinstance(d[key], list) or not d[key]:
            V.fail(key, "must be a non-empty list")

    def sub(cls, items, key):
        out = []
        names = {f.name for f in fields(cls)}
        for i, item in enumerate(items):
            if not isinstance(item, dict):
                V.fail(f"{key}.{i}", "expected a mapping")
            for k in item:
                if k not in names:
                    V.fail(f"{key}.{i}.{k}", "unknown field")
            try:
                out.append(cls(**item))
            except TypeError as exc:
                V.fail(f"{key}.{i}", str(exc))
        return out

    d["nodes"] = sub(NodeConfig, d["nodes"], "nodes")
    d["sinks"] = sub(SinkConfig, d["sinks"], "sinks")
    d["neighborhoods"] = sub(NeighborhoodConfig, d["neighborhoods"], "neighborhoods")
    d["links"] = sub(LinkConfig, d.get("links", []) or [], "links")
    cfg = ScenarioConfig(**d)
    _validate(cfg, V)
    return cfg


def _validate(cfg: ScenarioConfig, V: _Validator) -> None:
    cfg.seed = _num(cfg.seed, "seed", V, int, lo=0)
    if cfg.mode not in MODES:
        V.fail("mode", f"must be one of {MODES}")
    if not isinstance(cfg.power_control, bool):
        V.fail("power_control", "must be true or false")
    cfg.packets_per_node = _num(cfg.packets_per_node, "packets_per_node", V, int, lo=0)
    cfg.r_T = _num(cfg.r_T, "r_T", V, int, lo=1)
    cfg.q = _num(cfg.q, "q", V, lo=0.0, hi=1.0)
    cfg.p_fb = _num(cfg.p_fb, "p_fb", V, lo=0.0, hi=1.0)
    try:
        FeedbackErrorMode(cfg.feedback_mode)
    except ValueError:
        V.fail("feedback_mode", "must be 'flip' or 'drop'")
    cfg.gamma_min_db = _num(cfg.gamma_min_db, "gamma_min_db", V)
    if not math.isfinite(cfg.gamma_min_db):
        V.fail("gamma_min_db", "must be finite")
    cfg.P_max = _num(cfg.P_max, "P_max", V, lo=0.0, lo_open=True)
    cfg.P_th = _num(cfg.P_th, "P_th", V, lo=0.0, lo_open=True)
    try:
        Modulation(cfg.modulation)
    except ValueError:
        V.fail("modulation", "must be 'bpsk' or 'qpsk'")
    try:
        MapFamily(cfg.map_family)
    except ValueError:
        V.fail("map_family", "must be 'logistic' or 'bernoulli'")
    if not isinstance(cfg.codes, list) or not cfg.codes:
        V.fail("codes", "code menu must be non-empty")
    for i, c in enumerate(cfg.codes):
        if not isinstance(c, (list, tuple)) or len(c) != 2:
            V.fail(f"codes.{i}", "expected [n, k]")
        try:
            if int(c[0]) > int(c[1]) and cfg.r_T > int(c[0]) - int(c[1]):
                V.fail("r_T", f"exceeds the {int(c[0]) - int(c[1])} parity symbols of code {c[0]},{c[1]}")
            CodeSpec(int(c[0]), int(c[1]), max_rounds=cfg.r_T)
        except ValueError as exc:
            V.fail(f"codes.{i}", str(exc))
    if not isinstance(cfg.sl_menu, list) or not cfg.sl_menu:
        V.fail("sl_menu", "spreading-length menu must be non-empty")
    cfg.sl_menu = [_num(s, f"sl_menu.{i}", V, int, lo=1, hi=1024) for i, s in enumerate(cfg.sl_menu)]
    cfg.burn_in = _num(cfg.burn_in, "burn_in", V, int, lo=0)
    cfg.noise_psd = _num(cfg.noise_psd, "noise_psd", V, lo=0.0, lo_open=True)
    cfg.bandwidth = _num(cfg.bandwidth, "bandwidth", V, lo=0.0, lo_open=True)
    cfg.processing_margin = _num(cfg.processing_margin, "processing_margin", V, lo=0.0)
    cfg.max_timeouts = _num(cfg.max_timeouts, "max_timeouts", V, int, lo=0)

    ids = [n.id for n in cfg.nodes]
    sinks = [s.id for s in cfg.sinks]
    if len(set(ids)) != len(ids):
        V.fail("nodes", "duplicate node id")
    if set(ids) & set(sinks) or len(set(sinks)) != len(sinks):
        V.fail("sinks", "sink ids must be unique and distinct from node ids")
    for i, n in enumerate(cfg.nodes):
        if n.p_fb is not None:
            n.p_fb = _num(n.p_fb, f"nodes.{i}.p_fb", V, lo=0.0, hi=1.0)
        if n.packets is not None:
            n.packets = _num(n.packets, f"nodes.{i}.packets", V, int, lo=0)
        if n.position is not None:
            if len(n.position) not in (2, 3):
                V.fail(f"nodes.{i}.position", "expected [x, y] or [x, y, z]")
            n.position = tuple(float(x) for x in n.position)
    for i, s in enumerate(cfg.sinks):
        if s.position is not None:
            s.position = tuple(float(x) for x in s.position)
    seen: set = set()
    for i, nb in enumerate(cfg.neighborhoods):
        if nb.sink not in sinks:
            V.fail(f"neighborhoods.{i}.sink", f"unknown sink {nb.sink!r}")
        if not nb.members:
            V.fail(f"neighborhoods.{i}.members", "must be non-empty")
        for m in nb.members:
            if m not in ids:
                V.fail(f"neighborhoods.{i}.members", f"unknown node {m!r}")
            if m in seen:
                V.fail(f"neighborhoods.{i}.members", f"node {m!r} in two neighbourhoods")
            seen.add(m)
        for c in nb.candidates:
            if c not in nb.members:
                V.fail(f"neighborhoods.{i}.candidates", f"{c!r} is not a member")
        nb.family_seed = _num(nb.family_seed, f"neighborhoods.{i}.family_seed", V, lo=0.0, hi=1.0)
    if set(ids) - seen:
        V.fail("neighborhoods", f"nodes without a neighbourhood: {sorted(set(ids) - seen)}")
    endpoints = set(ids) | set(sinks)
    for i, ln in enumerate(cfg.links):
        if ln.tx not in endpoints or ln.rx not in endpoints:
            V.fail(f"links.{i}", f"unresolved endpoint in {ln.tx!r} -> {ln.rx!r}")
        if ln.distance is not None:
            ln.distance = _num(ln.distance, f"links.{i}.distance", V, lo=0.0, lo_open=True)
        ln.extra_loss_db = _num(ln.extra_loss_db, f"links.{i}.extra_loss_db", V)
        if ln.taps is not None:
            for j, t in enumerate(ln.taps):
                if not isinstance(t, (list, tuple)) or len(t) not in (2, 3) or int(t[0]) < 0:
                    V.fail(f"links.{i}.taps.{j}", "expected [delay_chips, re] or [delay_chips, re, im]")


def _read_mapping(path: Path) -> tuple[object, dict]:
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"{path}: {exc.strerror}") from None
    if path.suffix.lower() == ".json":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}:{exc.lineno}: {exc.msg}") from None
    else:
        try:
            data = yaml.safe_load(text)
        except yaml.YAMLError as exc:
            mark = getattr(exc, "problem_mark", None)
            line = f":{mark.line + 1}" if mark is not None else ""
            raise ConfigError(f"{path}{line}: {getattr(exc, 'problem', exc)}") from None
    return data, _anchor_map(text)


def load_config(path: str | Path) -> ScenarioConfig:
    """Read a JSON or YAML scenario file and validate it."""
    path = Path(path)
    data, anchors = _read_mapping(path)
    cfg = from_dict(data, str(path), anchors)
    if cfg.trace_file is not None and not Path(cfg.trace_file).is_absolute():
        cfg.trace_file = str((path.parent / cfg.trace_file).resolve())
    return cfg


OPTIMIZER_FIELDS = ("gains", "N0", "W", "J_m", "gamma_min_db", "P_max", "P_th", "codes", "sl_menu",
                    "fixed_alpha")


def optimizer_from_dict(d: dict, source: str = "<config>", anchors: Optional[dict] = None) -> OptimizationScenario:
    """Build a stand-alone optimizer problem: per-node gains plus the usual menus."""
    V = _Validator(source, anchors)
    if not isinstance(d, dict):
        V.fail("", "top level must be a mapping")
    for key in d:
        if key not in OPTIMIZER_FIELDS:
            V.fail(key, "unknown field")
    for key in ("gains", "N0", "W"):
        if key not in d:
            V.fail(key, "required field missing")
    gains = d["gains"]
    if not isinstance(gains, list) or not gains:
        V.fail("gains", "expected a non-empty list")
    kw = {"gains": [_num(g, f"gains.{i}", V, lo=0.0) for i, g in enumerate(gains)],
          "N0": _num(d["N0"], "N0", V, lo=0.0), "W": _num(d["W"], "W", V, lo=0.0, lo_open=True)}
    for key in ("J_m", "gamma_min_db", "P_max", "P_th"):
        if key in d:
            kw[key] = _num(d[key], key, V, lo=0.0 if key == "J_m" else None)
    if "codes" in d:
        codes = []
        for i, c in enumerate(d["codes"] or []):
            if not isinstance(c, (list, tuple)) or len(c) != 2:
                V.fail(f"codes.{i}", "expected [n, k]")
            try:
                codes.append(CodeSpec(int(c[0]), int(c[1])))
            except ValueError as exc:
                V.fail(f"codes.{i}", str(exc))
        kw["codes"] = codes
    if "sl_menu" in d:
        kw["sl_menu"] = [_num(v, f"sl_menu.{i}", V, kind=int, lo=1) for i, v in enumerate(d["sl_menu"] or [])]
    if "fixed_alpha" in d and d["fixed_alpha"] is not None:
        kw["fixed_alpha"] = d["fixed_alpha"]
    try:
        return OptimizationScenario(**kw)
    except ConfigurationError as exc:
        V.fail("", str(exc))


def load_optimizer_config(path: str | Path) -> OptimizationScenario:
    path = Path(path)
    data, anchors = _read_mapping(path)
    return optimizer_from_dict(data, str(path), anchors)


def dump_config(cfg: ScenarioConfig, path: str | Path) -> None:
    Path(path).write_text(json.dumps(cfg.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8")
