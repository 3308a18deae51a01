"""Scenario files: YAML documents describing one controlled-network experiment.

A scenario is parsed into a normalized document (every default filled in)
and then built into model objects. Dumping the normalized document and
parsing it again yields the same document.

Schema (``schema_version: 1``)::

    name: str                       # required
    seed: int                       # default 0
    model:
      dynamics: kuramoto | jansen_rit | linear
      n: int                        # inferred from per-node lists/adjacency if omitted
      params: {name: scalar | per-node list}
      coupling:
        mode: laplacian | pairwise-sine
        strength: float             # laplacian mode, c
        K: float                    # pairwise-sine mode, c = K / n
        graph: complete | path | ring | empty   # or
        adjacency: n x n matrix
    reference:
      params: {name: scalar}        # defaults to the model's shared params
      coupling: {strength | K}      # defaults to the model's
      initial: p-vector             # default zeros
    controller:
      pin: all | list of 0/1        # default all
      gain: float                   # required
    initial:
      states: n x p matrix          # or
      random: {low: scalar | p-vector, high: ...}   # drawn with seed
    integration: {dt: 1e-3, t_end: 10.0, record_stride: 1}
    estimation: {samples: 100000, safety_factor: 1.05, padding: 0.2,
                 pilot_t_end: null, region: null | {low, high}, method: auto | sampled}
"""

from __future__ import annotations

import copy
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np
import yaml

from .dynamics import DYNAMICS, NodeDynamics
from .graph import GRAPHS, GraphError, build_laplacian
from .model import COUPLING_MODES, LAPLACIAN, PAIRWISE_SINE, Controller, NetworkModel
from .simulate import IntegrationSettings

SCHEMA_VERSION = 1

_TOP = {"schema_version", "name", "seed", "model", "reference", "controller",
        "initial", "integration", "estimation"}
_MODEL = {"dynamics", "n", "params", "coupling"}
_COUPLING = {"mode", "strength", "K", "graph", "adjacency"}
_REFERENCE = {"params", "coupling", "initial"}
_REF_COUPLING = {"strength", "K"}
_CONTROLLER = {"pin", "gain"}
_INITIAL = {"states", "random"}
_RANDOM = {"low", "high"}
_INTEGRATION = {"dt": 1e-3, "t_end": 10.0, "record_stride": 1}
_ESTIMATION = {"samples": 100_000, "safety_factor": 1.05, "padding": 0.2,
               "pilot_t_end": None, "region": None, "method": "auto"}


class ScenarioError(ValueError):
    """Invalid scenario document; the message names the key and, if known, the line."""


@dataclass(frozen=True)
class EstimationSettings:
    samples: int = 100_000
    safety_factor: float = 1.05
    padding: float = 0.2
    pilot_t_end: float | None = None
    region: tuple | None = None
    method: str = "auto"


@dataclass(frozen=True)
class Scenario:
    name: str
    seed: int
    model: NetworkModel
    reference_model: NetworkModel
    reference_initial: np.ndarray
    controller: Controller
    initial_states: np.ndarray
    integration: IntegrationSettings
    estimation: EstimationSettings
    document: dict

    def to_yaml(self) -> str:
        return dump_document(self.document)

    def with_overrides(self, dt=None, t_end=None, gain=None, seed=None) -> "Scenario":
        doc = copy.deepcopy(self.document)
        if dt is not None:
            doc["integration"]["dt"] = float(dt)
        if t_end is not None:
            doc["integration"]["t_end"] = float(t_end)
        if gain is not None:
            doc["controller"]["gain"] = float(gain)
        if seed is not None:
            doc["seed"] = int(seed)
        return scenario_from_dict(doc)


class _Context:
    """Maps key paths to line numbers of the source document, when there is one."""

    def __init__(self, node=None):
        self.node = node

    def line(self, path) -> int | None:
        node = self.node
        line = None
        for key in path:
            if isinstance(node, yaml.MappingNode):
                for k, v in node.value:
                    if k.value == key:
                        line = k.start_mark.line + 1
                        node = v
                        break
                else:
                    return line
            elif isinstance(node, yaml.SequenceNode) and isinstance(key, int) and key < len(node.value):
                node = node.value[key]
                line = node.start_mark.line + 1
            else:
                return line
        return line

    def error(self, path, message) -> ScenarioError:
        where = ".".join(str(p) for p in path) or "<document>"
        line = self.line(path) if self.node is not None else None
        loc = f" (line {line})" if line is not None else ""
        return ScenarioError(f"{where}{loc}: {message}")


def _mapping(ctx, value, path, allowed, required=()):
    if value is None:
        value = {}
    if not isinstance(value, dict):
        raise ctx.error(path, "expected a mapping")
    for key in value:
        if key not in allowed:
            raise ctx.error(list(path) + [key], "unknown key")
    for key in required:
        if key not in value:
            raise ctx.error(path, f"missing required key {key!r}")
    return value


def _number(ctx, value, path, kind=float, positive=False, nonnegative=False):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ctx.error(path, f"expected a number, got {value!r}")
    if kind is int:
        if int(value) != value:
            raise ctx.error(path, f"expected an integer, got {value!r}")
        value = int(value)
    else:
        value = float(value)
    if not np.isfinite(value):
        raise ctx.error(path, "must be finite")
    if positive and value <= 0:
        raise ctx.error(path, "must be positive")
    if nonnegative and value < 0:
        raise ctx.error(path, "must be nonnegative")
    return value


def _matrix(ctx, value, path, shape=None):
    try:
        arr = np.asarray(value, dtype=float)
    except (TypeError, ValueError):
        raise ctx.error(path, "expected a numeric matrix") from None
    if shape is not None and arr.shape != shape:
        raise ctx.error(path, f"has shape {arr.shape}, expected {shape}")
    if not np.all(np.isfinite(arr)):
        raise ctx.error(path, "entries must be finite")
    return arr


def _infer_n(ctx, model, doc):
    if "n" in model:
        return _number(ctx, model["n"], ["model", "n"], int, positive=True)
    coupling = model.get("coupling") or {}
    if "adjacency" in coupling:
        return len(coupling["adjacency"])
    for v in (model.get("params") or {}).values():
        if isinstance(v, list) and model.get("dynamics") != "linear":
            return len(v)
    states = (doc.get("initial") or {}).get("states")
    if isinstance(states, list):
        return len(states)
    pin = (doc.get("controller") or {}).get("pin")
    if isinstance(pin, list):
        return len(pin)
    raise ctx.error(["model"], "cannot infer node count; give model.n")


def _dynamics(ctx, kind, params, path, n=None) -> NodeDynamics:
    cls = DYNAMICS[kind]
    for name, value in params.items():
        if isinstance(value, list) and kind != "linear" and n is not None and len(value) != n:
            raise ctx.error(path + [name], f"per-node list has length {len(value)}, expected {n}")
    try:
        return cls.from_params(params)
    except (KeyError, ValueError, TypeError) as exc:
        msg = exc.args[0] if exc.args else str(exc)
        raise ctx.error(path, str(msg)) from None


def normalize_document(data, ctx: _Context | None = None) -> dict:
    """Validate a raw scenario mapping and fill every default."""
    ctx = ctx or _Context()
    data = _mapping(ctx, data, [], _TOP, required=("name", "model", "controller", "initial"))
    version = data.get("schema_version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        raise ctx.error(["schema_version"], f"unsupported schema version {version!r}")
    if not isinstance(data["name"], str) or not data["name"]:
        raise ctx.error(["name"], "must be a non-empty string")
    seed = _number(ctx, data.get("seed", 0), ["seed"], int, nonnegative=True)

    model = _mapping(ctx, data["model"], ["model"], _MODEL, required=("dynamics",))
    kind = model["dynamics"]
    if kind not in DYNAMICS:
        raise ctx.error(["model", "dynamics"], f"unknown dynamics {kind!r}; known: {', '.join(DYNAMICS)}")
    n = _infer_n(ctx, model, data)
    params = _mapping(ctx, model.get("params"), ["model", "params"], set(DYNAMICS[kind].__dataclass_fields__))
    dyn = _dynamics(ctx, kind, params, ["model", "params"], n)
    p = dyn.p

    coupling = _mapping(ctx, model.get("coupling"), ["model", "coupling"], _COUPLING)
    mode = coupling.get("mode", LAPLACIAN)
    if mode not in COUPLING_MODES:
        raise ctx.error(["model", "coupling", "mode"], f"unknown mode {mode!r}")
    norm_coupling = {"mode": mode}
    if mode == PAIRWISE_SINE:
        if "strength" in coupling:
            raise ctx.error(["model", "coupling", "strength"], "pairwise-sine mode takes K, not strength")
        if p != 1:
            raise ctx.error(["model", "coupling", "mode"], "pairwise-sine coupling requires p = 1")
        norm_coupling["K"] = _number(ctx, coupling.get("K", 0.0), ["model", "coupling", "K"])
    else:
        if "K" in coupling:
            raise ctx.error(["model", "coupling", "K"], "laplacian mode takes strength, not K")
        norm_coupling["strength"] = _number(ctx, coupling.get("strength", 1.0), ["model", "coupling", "strength"])
    if "adjacency" in coupling:
        if "graph" in coupling:
            raise ctx.error(["model", "coupling"], "give either graph or adjacency, not both")
        adj = _matrix(ctx, coupling["adjacency"], ["model", "coupling", "adjacency"], (n, n))
        try:
            build_laplacian(adj)
        except GraphError as exc:
            raise ctx.error(["model", "coupling", "adjacency"], str(exc)) from None
        norm_coupling["adjacency"] = adj.tolist()
    else:
        graph = coupling.get("graph", "complete")
        if graph not in GRAPHS:
            raise ctx.error(["model", "coupling", "graph"], f"unknown graph {graph!r}; known: {', '.join(GRAPHS)}")
        norm_coupling["graph"] = graph

    reference = _mapping(ctx, data.get("reference"), ["reference"], _REFERENCE)
    ref_params = reference.get("params")
    if ref_params is None:
        ref_params = {k: v for k, v in params.items() if not isinstance(v, list) or kind == "linear"}
    ref_params = _mapping(ctx, ref_params, ["reference", "params"], set(DYNAMICS[kind].__dataclass_fields__))
    for k, v in ref_params.items():
        if isinstance(v, list) and kind != "linear":
            raise ctx.error(["reference", "params", k], "reference parameters must be scalars")
    ref_dyn = _dynamics(ctx, kind, ref_params, ["reference", "params"])
    if ref_dyn.p != p:
        raise ctx.error(["reference", "params"], f"reference state dimension {ref_dyn.p} != {p}")
    ref_coupling = _mapping(ctx, reference.get("coupling"), ["reference", "coupling"], _REF_COUPLING)
    strength_key = "K" if mode == PAIRWISE_SINE else "strength"
    other = "strength" if mode == PAIRWISE_SINE else "K"
    if other in ref_coupling:
        raise ctx.error(["reference", "coupling", other], f"{mode} mode takes {strength_key}")
    norm_ref_coupling = {strength_key: _number(ctx, ref_coupling.get(strength_key, norm_coupling[strength_key]),
                                               ["reference", "coupling", strength_key])}
    ref_init = _matrix(ctx, reference.get("initial", [0.0] * p), ["reference", "initial"], (p,))

    controller = _mapping(ctx, data["controller"], ["controller"], _CONTROLLER, required=("gain",))
    gain = _number(ctx, controller["gain"], ["controller", "gain"], nonnegative=True)
    pin = controller.get("pin", "all")
    if pin == "all":
        pin = [1] * n
    if not isinstance(pin, list) or len(pin) != n:
        raise ctx.error(["controller", "pin"], f"must be 'all' or a list of {n} zeros/ones")
    if any(v not in (0, 1) or isinstance(v, float) and v not in (0.0, 1.0) for v in pin):
        raise ctx.error(["controller", "pin"], "entries must be 0 or 1")

    initial = _mapping(ctx, data["initial"], ["initial"], _INITIAL)
    if ("states" in initial) == ("random" in initial):
        raise ctx.error(["initial"], "give exactly one of 'states' or 'random'")
    if "states" in initial:
        states = np.asarray(initial["states"], dtype=float) if _is_numeric(initial["states"]) else None
        if states is None:
            raise ctx.error(["initial", "states"], "expected a numeric matrix")
        if p == 1 and states.ndim == 1:
            states = states[:, None]
        states = _matrix(ctx, states, ["initial", "states"], (n, p))
        norm_initial = {"states": states.tolist()}
    else:
        rnd = _mapping(ctx, initial["random"], ["initial", "random"], _RANDOM, required=("low", "high"))
        low = _bound(ctx, rnd["low"], ["initial", "random", "low"], p)
        high = _bound(ctx, rnd["high"], ["initial", "random", "high"], p)
        if np.any(np.asarray(high) < np.asarray(low)):
            raise ctx.error(["initial", "random"], "high must be >= low")
        norm_initial = {"random": {"low": low, "high": high}}

    integ = _mapping(ctx, data.get("integration"), ["integration"], set(_INTEGRATION))
    norm_integ = {
        "dt": _number(ctx, integ.get("dt", _INTEGRATION["dt"]), ["integration", "dt"], positive=True),
        "t_end": _number(ctx, integ.get("t_end", _INTEGRATION["t_end"]), ["integration", "t_end"], positive=True),
        "record_stride": _number(ctx, integ.get("record_stride", 1), ["integration", "record_stride"], int, positive=True),
    }
    if norm_integ["t_end"] < norm_integ["dt"]:
        raise ctx.error(["integration", "t_end"], "must be at least dt")

    est = _mapping(ctx, data.get("estimation"), ["estimation"], set(_ESTIMATION))
    norm_est = {
        "samples": _number(ctx, est.get("samples", _ESTIMATION["samples"]), ["estimation", "samples"], int, positive=True),
        "safety_factor": _number(ctx, est.get("safety_factor", 1.05), ["estimation", "safety_factor"], positive=True),
        "padding": _number(ctx, est.get("padding", 0.2), ["estimation", "padding"], nonnegative=True),
        "pilot_t_end": None,
        "region": None,
        "method": est.get("method", "auto"),
    }
    if est.get("pilot_t_end") is not None:
        norm_est["pilot_t_end"] = _number(ctx, est["pilot_t_end"], ["estimation", "pilot_t_end"], positive=True)
    if norm_est["method"] not in ("auto", "sampled"):
        raise ctx.error(["estimation", "method"], "must be 'auto' or 'sampled'")
    if est.get("region") is not None:
        reg = _mapping(ctx, est["region"], ["estimation", "region"], _RANDOM, required=("low", "high"))
        low = _bound(ctx, reg["low"], ["estimation", "region", "low"], p)
        high = _bound(ctx, reg["high"], ["estimation", "region", "high"], p)
        norm_est["region"] = {"low": low, "high": high}

    return {
        "schema_version": SCHEMA_VERSION,
        "name": data["name"],
        "seed": seed,
        "model": {"dynamics": kind, "n": n, "params": dyn.params(), "coupling": norm_coupling},
        "reference": {"params": ref_dyn.params(), "coupling": norm_ref_coupling,
                      "initial": ref_init.tolist()},
        "controller": {"pin": [int(v) for v in pin], "gain": gain},
        "initial": norm_initial,
        "integration": norm_integ,
        "estimation": norm_est,
    }


def _is_numeric(value) -> bool:
    try:
        np.asarray(value, dtype=float)
    except (TypeError, ValueError):
        return False
    return True


def _bound(ctx, value, path, p):
    if isinstance(value, list):
        return _matrix(ctx, value, path, (p,)).tolist()
    return _number(ctx, value, path)


def build_scenario(doc: dict) -> Scenario:
    """Turn a normalized document into model objects."""
    m = doc["model"]
    n = m["n"]
    kind = m["dynamics"]
    coupling = m["coupling"]
    if "adjacency" in coupling:
        adj = np.asarray(coupling["adjacency"], dtype=float)
    else:
        adj = GRAPHS[coupling["graph"]](n)
    L = build_laplacian(adj)
    mode = coupling["mode"]
    if mode == PAIRWISE_SINE:
        c = coupling["K"] / n
        c_ref = doc["reference"]["coupling"]["K"] / n
    else:
        c = coupling["strength"]
        c_ref = doc["reference"]["coupling"]["strength"]
    dyn = DYNAMICS[kind].from_params(m["params"])
    ref_dyn = DYNAMICS[kind].from_params(doc["reference"]["params"])
    model = NetworkModel(dyn, L, c, mode)
    ref_model = NetworkModel(ref_dyn, L, c_ref, mode)
    p = model.p

    init = doc["initial"]
    if "states" in init:
        states = np.asarray(init["states"], dtype=float)
    else:
        rng = np.random.default_rng(doc["seed"])
        low = np.broadcast_to(np.asarray(init["random"]["low"], dtype=float), (p,))
        high = np.broadcast_to(np.asarray(init["random"]["high"], dtype=float), (p,))
        states = rng.uniform(low, high, size=(n, p))

    est = doc["estimation"]
    region = est["region"]
    if region is not None:
        region = (np.broadcast_to(np.asarray(region["low"], float), (p,)).copy(),
                  np.broadcast_to(np.asarray(region["high"], float), (p,)).copy())
    return Scenario(
        name=doc["name"],
        seed=doc["seed"],
        model=model,
        reference_model=ref_model,
        reference_initial=np.asarray(doc["reference"]["initial"], dtype=float),
        controller=Controller(np.asarray(doc["controller"]["pin"]), doc["controller"]["gain"]),
        initial_states=states,
        integration=IntegrationSettings(**doc["integration"]),
        estimation=EstimationSettings(
            samples=est["samples"], safety_factor=est["safety_factor"], padding=est["padding"],
            pilot_t_end=est["pilot_t_end"], region=region, method=est["method"]),
        document=doc,
    )


def scenario_from_dict(data: dict) -> Scenario:
    doc = normalize_document(copy.deepcopy(data))
    try:
        return build_scenario(doc)
    except (ValueError, GraphError) as exc:
        raise ScenarioError(str(exc)) from exc


def parse_scenario(text: str) -> Scenario:
    """Parse a YAML scenario; errors carry the offending key and line."""
    try:
        node = yaml.compose(text, Loader=yaml.SafeLoader)
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ScenarioError(f"malformed YAML: {exc}") from None
    ctx = _Context(node)
    doc = normalize_document(data, ctx)
    try:
        return build_scenario(doc)
    except (ValueError, GraphError) as exc:
        raise ScenarioError(str(exc)) from exc


def dump_document(doc: dict) -> str:
    return yaml.safe_dump(doc, sort_keys=False, default_flow_style=None, width=100)


def load_scenario(path) -> Scenario:
    return parse_scenario(Path(path).read_text())


def bundled_scenarios() -> list[str]:
    return sorted(p.name[:-5] for p in resources.files("pinctrl").joinpath("scenarios").iterdir()
                  if p.name.endswith(".yaml"))


def load_bundled(name: str) -> Scenario:
    path = resources.files("pinctrl").joinpath("scenarios", f"{name}.yaml")
    if not path.is_file():
        raise ScenarioError(f"no bundled scenario named {name!r}; available: {', '.join(bundled_scenarios())}")
    return parse_scenario(path.read_text())


def resolve_scenario(ref: str) -> Scenario:
    """Load a scenario from a file path, or by bundled name."""
    path = Path(ref)
    if path.is_file():
        return load_scenario(path)
    return load_bundled(ref)
