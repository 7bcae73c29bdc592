"""Experiment configuration: YAML parsing, validation and object resolution.

A config is a YAML mapping::

    schema_version: 1          # optional, major version 1 only
    seed: 0                    # mandatory
    budget: 256                # mandatory, samples per dyadic shell
    group: {kind: unitary, n: 2}
    metric: {type: native}     # the primary metric, see METRIC_TYPES
    metrics: {name: <metric>}  # optional named metrics for compare tasks
    tolerances: {replay: 1.0e-10}
    tasks:
      - certify: {condition: cond2, U: 1.0}

The formal schema is ``CONFIG_SCHEMA`` below; ``docs/config.md`` renders it.
Validation errors are raised as ``ConfigError`` with the dotted field path
and, when known, the source line.
"""

from dataclasses import dataclass, field
import math
from typing import Any

import yaml

from .errors import ConfigError, FiltrationError
from .groups import GROUP_KINDS, FiniteGroup, make_group

CONFIG_MAJOR = 1

METRIC_TYPES = ("native", "chord", "geodesic", "birkhoff", "kakutani", "word", "path", "bi_invariantised", "sqrt")
TASK_TYPES = ("certify", "construct", "oneparam", "compare", "nss", "sin")
CONDITIONS = ("cond2", "cond3", "cond4", "uniform_nss", "right_lipschitz", "sqrt_continuity")

# JSON-schema style description of the accepted document.
CONFIG_SCHEMA = {
    "type": "object",
    "required": ["seed", "budget", "group"],
    "properties": {
        "schema_version": {"type": "integer", "enum": [CONFIG_MAJOR]},
        "seed": {"type": "integer", "minimum": 0},
        "budget": {"type": "integer", "minimum": 1},
        "group": {
            "type": "object",
            "required": ["kind"],
            "properties": {
                "kind": {"enum": list(GROUP_KINDS)},
                "n": {"type": "integer"},
                "m": {"type": "integer"},
                "d": {"type": "integer"},
                "rank": {"type": "integer"},
                "p": {"type": "integer"},
                "depth": {"type": "integer"},
                "name": {"type": "string"},
                "table": {"type": "array"},
                "unitarity_tol": {"type": "number"},
            },
        },
        "metric": {"$ref": "#/definitions/metric"},
        "metrics": {"type": "object", "additionalProperties": {"$ref": "#/definitions/metric"}},
        "truncation": {"type": "object", "properties": {"radius": {"type": "integer"}}},
        "tolerances": {"type": "object", "additionalProperties": {"type": "number"}},
        "tasks": {"type": "array", "items": {"$ref": "#/definitions/task"}},
    },
    "definitions": {
        "metric": {
            "type": "object",
            "required": ["type"],
            "properties": {
                "type": {"enum": list(METRIC_TYPES)},
                "filtration": {"$ref": "#/definitions/filtration"},
                "generators": {"type": "array"},
                "radius": {"type": "number"},
                "base": {"$ref": "#/definitions/metric"},
                "cap": {"type": "number"},
            },
        },
        "filtration": {
            "type": "object",
            "properties": {
                "standard": {"enum": ["subgroup_tower", "integer_intervals"]},
                "law": {"enum": ["birkhoff_cubes", "kakutani_squares"]},
                "max_n": {"type": "integer"},
                "levels": {"type": "object", "additionalProperties": {"type": "array"}},
            },
        },
        "task": {
            "type": "object",
            "minProperties": 1,
            "maxProperties": 1,
            "properties": {
                "certify": {
                    "properties": {
                        "condition": {"enum": list(CONDITIONS)},
                        "U": {"type": "number"},
                        "eps": {"type": "number"},
                        "K": {"type": "number"},
                        "V": {"type": "number"},
                        "n_max": {"type": "integer"},
                        "bound_constant": {"type": "number"},
                        "fit": {"type": "boolean"},
                    }
                },
                "construct": {"type": "object"},
                "oneparam": {
                    "properties": {
                        "f": {"description": "encoded element"},
                        "tangent_norm": {"type": "number"},
                        "k": {"type": "integer"},
                        "depth": {"type": "integer"},
                        "alpha_grid": {"type": "array", "items": {"type": "number"}},
                        "V_radius": {"type": "number"},
                        "tol": {"type": "number"},
                    }
                },
                "compare": {
                    "properties": {
                        "d1": {"description": "metric name or inline metric"},
                        "d2": {"description": "metric name or inline metric"},
                        "V_radius": {"type": "number"},
                    }
                },
                "nss": {"properties": {"U": {"type": "number"}}},
                "sin": {"properties": {"O": {"type": "number"}}},
            },
        },
    },
}


# ---------------------------------------------------------------------------
# YAML with line tracking


def _line_map(node, path=(), out=None):
    """Dotted field path -> 1-based source line, from a composed YAML node."""
    out = {} if out is None else out
    out[".".join(path)] = node.start_mark.line + 1
    if isinstance(node, yaml.MappingNode):
        for k, v in node.value:
            key = str(k.value)
            out[".".join(path + (key,))] = k.start_mark.line + 1
            _line_map(v, path + (key,), out)
    elif isinstance(node, yaml.SequenceNode):
        for i, v in enumerate(node.value):
            _line_map(v, path + (str(i),), out)
    return out


@dataclass
class ExperimentConfig:
    raw: dict
    lines: dict = field(default_factory=dict, compare=False)

    @property
    def seed(self):
        return self.raw["seed"]

    @property
    def budget(self):
        return self.raw["budget"]

    @property
    def group(self):
        return self.raw["group"]

    @property
    def tasks(self):
        return self.raw.get("tasks") or []

    @property
    def tolerances(self):
        return self.raw.get("tolerances") or {}

    def line(self, path):
        """Closest known line for a dotted path (walks up to the parent)."""
        parts = path.split(".")
        while parts:
            key = ".".join(parts)
            if key in self.lines:
                return self.lines[key]
            parts.pop()
        return None

    def error(self, message, path):
        return ConfigError(message, field=path, line=self.line(path))

    def echo(self):
        return self.raw


def parse_config(text, overrides=None):
    """Parse and validate YAML text. ``overrides`` may set seed/budget."""
    try:
        node = yaml.compose(text, Loader=yaml.SafeLoader)
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        raise ConfigError(f"YAML syntax error: {exc}", line=None if mark is None else mark.line + 1) from exc
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        raise ConfigError("config must be a mapping", line=1)
    lines = _line_map(node) if node is not None else {}
    for k, v in (overrides or {}).items():
        if v is not None:
            raw[k] = v
    cfg = ExperimentConfig(raw, lines)
    validate_config(cfg)
    return cfg


def load_config(path, overrides=None):
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read(), overrides)


def _require_int(cfg, path, value, minimum):
    if isinstance(value, bool) or not isinstance(value, int) or value < minimum:
        raise cfg.error(f"expected an integer >= {minimum}, got {value!r}", path)


def _require_number(cfg, path, value, positive=True):
    if isinstance(value, bool) or not isinstance(value, (int, float)) or (positive and not value > 0):
        raise cfg.error(f"expected a positive number, got {value!r}", path)


def validate_config(cfg):
    raw = cfg.raw
    known = set(CONFIG_SCHEMA["properties"])
    for key in raw:
        if key not in known:
            raise cfg.error(f"unknown top-level field {key!r}", key)
    version = raw.get("schema_version", CONFIG_MAJOR)
    if version != CONFIG_MAJOR:
        raise cfg.error(f"unsupported config schema_version {version!r}", "schema_version")
    for key in ("seed", "budget", "group"):
        if key not in raw:
            raise cfg.error(f"missing mandatory field {key!r}", key)
    _require_int(cfg, "seed", raw["seed"], 0)
    _require_int(cfg, "budget", raw["budget"], 1)
    group = raw["group"]
    if not isinstance(group, dict) or group.get("kind") not in GROUP_KINDS:
        kind = group.get("kind") if isinstance(group, dict) else group
        raise cfg.error(f"unknown group kind {kind!r}; expected one of {', '.join(GROUP_KINDS)}", "group.kind")
    try:
        ctx = make_group(group)
    except (ValueError, TypeError) as exc:
        raise cfg.error(f"invalid group: {exc}", "group") from exc
    if "metric" in raw:
        _validate_metric(cfg, ctx, raw["metric"], "metric")
    for name, m in (raw.get("metrics") or {}).items():
        if name == "primary":
            raise cfg.error("'primary' is reserved for the top-level metric", f"metrics.{name}")
        _validate_metric(cfg, ctx, m, f"metrics.{name}")
    for name, v in (raw.get("tolerances") or {}).items():
        _require_number(cfg, f"tolerances.{name}", v)
    tasks = raw.get("tasks") or []
    if not isinstance(tasks, list):
        raise cfg.error("tasks must be a list", "tasks")
    for i, t in enumerate(tasks):
        _validate_task(cfg, ctx, t, f"tasks.{i}")


def _validate_metric(cfg, ctx, m, path):
    if isinstance(m, str):
        if m == "primary" or m in (cfg.raw.get("metrics") or {}):
            return
        m = {"type": m}
    if not isinstance(m, dict) or m.get("type") not in METRIC_TYPES:
        got = m.get("type") if isinstance(m, dict) else m
        raise cfg.error(f"unknown metric type {got!r}; expected one of {', '.join(METRIC_TYPES)}", f"{path}.type")
    t = m["type"]
    if t in ("birkhoff", "kakutani"):
        if not isinstance(m.get("filtration"), dict):
            raise cfg.error(f"{t} metric needs a filtration mapping", path)
        # finite filtrations are verified here so bad levels surface as config errors
        build_filtration(cfg, ctx, m["filtration"], t, f"{path}.filtration")
    if t in ("path", "bi_invariantised", "sqrt"):
        _validate_metric(cfg, ctx, m.get("base", "native"), f"{path}.base")
    if t == "word" and "generators" not in m:
        raise cfg.error("word metric needs generators", path)
    if t == "path" and "generators" not in m and "radius" not in m:
        raise cfg.error("path metric needs generators or a radius", path)


def _validate_task(cfg, ctx, t, path):
    if isinstance(t, str):
        t = {t: {}}
    if not isinstance(t, dict) or len(t) != 1:
        raise cfg.error("each task is a single-key mapping such as {certify: {...}}", path)
    (kind, params), = t.items()
    if kind not in TASK_TYPES:
        raise cfg.error(f"unknown task {kind!r}; expected one of {', '.join(TASK_TYPES)}", path)
    params = params or {}
    if not isinstance(params, dict):
        raise cfg.error(f"parameters of {kind} must be a mapping", f"{path}.{kind}")
    p = f"{path}.{kind}"
    if "metric" in params:
        _validate_metric(cfg, ctx, params["metric"], f"{p}.metric")
    if kind == "certify":
        cond = params.get("condition")
        if cond not in CONDITIONS:
            raise cfg.error(f"unknown condition {cond!r}; expected one of {', '.join(CONDITIONS)}", f"{p}.condition")
        if not params.get("fit"):
            need = {"cond2": ("U",), "cond3": ("eps", "K"), "cond4": ("U", "K"), "uniform_nss": ("U",),
                    "right_lipschitz": ("V",), "sqrt_continuity": ("V",)}[cond]
            for key in need:
                if key not in params:
                    raise cfg.error(f"{cond} needs {key} (or fit: true)", f"{p}.{key}")
                _require_number(cfg, f"{p}.{key}", params[key])
    elif kind == "oneparam":
        if "f" not in params and "tangent_norm" not in params:
            raise cfg.error("oneparam needs f or tangent_norm", p)
        for key in ("k", "depth"):
            if key in params:
                _require_int(cfg, f"{p}.{key}", params[key], 0 if key == "depth" else 1)
        if "tol" in params:
            _require_number(cfg, f"{p}.tol", params["tol"])
    elif kind == "compare":
        for key in ("d1", "d2"):
            ref = params.get(key)
            if ref is None:
                raise cfg.error(f"compare needs {key}", p)
            _validate_metric(cfg, ctx, ref, f"{p}.{key}")
    elif kind == "nss":
        _require_number(cfg, f"{p}.U", params.get("U"))
    elif kind == "sin":
        _require_number(cfg, f"{p}.O", params.get("O"))


# ---------------------------------------------------------------------------
# resolution into library objects


def task_items(cfg):
    """Normalised (kind, params) pairs in declared order."""
    out = []
    for t in cfg.tasks:
        if isinstance(t, str):
            t = {t: {}}
        (kind, params), = t.items()
        out.append((kind, dict(params or {})))
    return out


def build_group(cfg):
    return make_group(cfg.group)


def _decode_elements(ctx, els, cfg, path):
    try:
        return [ctx.decode(e) for e in els]
    except Exception as exc:  # payload errors of any kind become config errors
        raise cfg.error(f"cannot read element: {exc}", path) from exc


def _truncation(cfg, ctx, desc):
    from .constructions import standard_truncation

    if isinstance(ctx, FiniteGroup):
        return None
    radius = (desc or {}).get("radius") or (cfg.raw.get("truncation") or {}).get("radius")
    if radius is None:
        return None
    return standard_truncation(ctx, int(radius))


def build_filtration(cfg, ctx, desc, law, path):
    from . import filtrations as F

    law_name = F.BIRKHOFF if law == "birkhoff" else F.KAKUTANI
    if desc.get("law", law_name) != law_name:
        raise cfg.error(f"{law} metric needs law {law_name}", f"{path}.law")
    std = desc.get("standard")
    if std == "subgroup_tower":
        filt = F.subgroup_tower(ctx, law_name)
    elif std == "integer_intervals":
        filt = F.integer_intervals(ctx, int(desc.get("max_n", 6)))
    elif "levels" in desc:
        levels = {}
        for n, els in desc["levels"].items():
            levels[int(n)] = _decode_elements(ctx, els, cfg, f"{path}.levels.{n}")
        filt = F.explicit(ctx, law_name, levels)
    else:
        raise cfg.error("filtration needs 'standard' or 'levels'", path)
    if isinstance(ctx, FiniteGroup):
        try:
            filt.verify()
        except FiltrationError as exc:
            lp = f"{path}.levels.{exc.level}" if exc.level is not None else path
            raise cfg.error(f"invalid filtration: {exc}", lp) from exc
    return filt


def build_metric(cfg, ctx, desc, path="metric"):
    """Resolve a metric descriptor (string or mapping) into a MetricHandle."""
    from . import coarse, constructions, metrics

    if desc is None:
        desc = {"type": "native"}
    if isinstance(desc, str):
        if desc == "primary":
            return build_metric(cfg, ctx, cfg.raw.get("metric"), "metric")
        if desc in (cfg.raw.get("metrics") or {}):
            return build_metric(cfg, ctx, cfg.raw["metrics"][desc], f"metrics.{desc}")
        desc = {"type": desc}
    t = desc["type"]
    if t == "native":
        return metrics.native_metric(ctx)
    if t == "chord":
        return metrics.chord_metric(ctx)
    if t == "geodesic":
        return metrics.geodesic_metric(ctx)
    if t in ("birkhoff", "kakutani"):
        filt = build_filtration(cfg, ctx, desc["filtration"], t, f"{path}.filtration")
        trunc = _truncation(cfg, ctx, desc)
        build = constructions.birkhoff_metric if t == "birkhoff" else constructions.kakutani_metric
        return build(ctx, filt, trunc, verify=False)
    if t == "word":
        V = coarse.GeneratingSet.of(ctx, _decode_elements(ctx, desc["generators"], cfg, f"{path}.generators"))
        return coarse.word_metric_handle(ctx, V, _truncation(cfg, ctx, desc))
    base = build_metric(cfg, ctx, desc.get("base", "native"), f"{path}.base")
    if t == "sqrt":
        return metrics.transform_sqrt(base)
    if t == "bi_invariantised":
        cap = desc.get("cap")
        return constructions.bi_invariantize(ctx, base, cap=cap, budget=cfg.budget, seed=cfg.seed)
    if t == "path":
        if "generators" in desc:
            V = coarse.GeneratingSet.of(ctx, _decode_elements(ctx, desc["generators"], cfg, f"{path}.generators"))
        else:
            V = float(desc["radius"])
        return coarse.path_metric_handle(ctx, base, V, _truncation(cfg, ctx, desc))
    raise cfg.error(f"unknown metric type {t!r}", f"{path}.type")


def number(value, default=math.inf):
    """Config numbers may be written as the string 'inf'."""
    if value is None:
        return default
    return float(value)


def resolve(cfg) -> Any:
    """Build the group and primary metric, turning library errors into ConfigError."""
    ctx = build_group(cfg)
    d = build_metric(cfg, ctx, cfg.raw.get("metric"))
    return ctx, d
