"""Run configuration: JSON schema, validation and construction of problem objects."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import jsonschema

from .constitutive import ForchheimerLaw
from .expression import Expression, ExpressionError
from .model import DataSpec, DomainSpec, PhysicalParams, ProblemSpec, ScaledParams

CHECK_IDS = ("bounds", "ps", "genn", "thm32", "thm45", "thm51", "thm52")

_num = {"type": "number"}
_pos = {"type": "number", "exclusiveMinimum": 0}
_expr = {"type": ["string", "number"]}
_vec3 = {"type": "array", "items": _num, "minItems": 3, "maxItems": 3}


def _obj(props, required=()):
    return {"type": "object", "properties": props, "required": list(required),
            "additionalProperties": False}


SCHEMA = _obj({
    "law": _obj({
        "exponents": {"type": "array", "items": _num, "minItems": 2},
        "coefficients": {"type": "array", "items": _num, "minItems": 2},
    }, ["exponents", "coefficients"]),
    "scaled": _obj({"varpi": _pos, "phi": _pos, "G": {"type": "number", "minimum": 0},
                    "Omega": {"type": "number", "minimum": 0}}, ["varpi", "phi"]),
    "physical": _obj({"phi_tilde": _pos, "varpi": _pos, "Omega_tilde": {"type": "number", "minimum": 0},
                      "G_tilde": {"type": "number", "minimum": 0}}, ["phi_tilde", "varpi"]),
    "domain": _obj({"lower": _vec3, "extent": _vec3}),
    "rotation_axis": _vec3,
    "gravity_direction": {"type": "array", "items": _expr, "minItems": 3, "maxItems": 3},
    "data": _obj({"u0": _expr, "psi": _expr, "Psi": _expr, "source": _expr}, ["u0", "psi"]),
    "mms": _obj({"solution": {"type": "string"}, "sizes": {"type": "array", "items": {"type": "integer"}}}),
    "grid": _obj({"n": {"oneOf": [{"type": "integer", "minimum": 2},
                                  {"type": "array", "items": {"type": "integer", "minimum": 2},
                                   "minItems": 3, "maxItems": 3}]}}, ["n"]),
    "time": _obj({
        "horizon": {"oneOf": [_pos, {"const": "t0"}]},
        "snapshots": {"oneOf": [{"type": "integer", "minimum": 2},
                                {"type": "array", "items": {"type": "number", "minimum": 0}, "minItems": 2}]},
        "t0_snapshots": {"type": "integer", "minimum": 0},
        "dt": _pos,
        "cfl": _pos,
    }, ["horizon"]),
    "seed": {"type": "integer", "minimum": 0},
    "checks": {"type": "array", "items": {"enum": list(CHECK_IDS)}, "uniqueItems": True},
    "certify": _obj({"samples": {"type": "integer", "minimum": 1}, "z_max": _pos, "y_max": _pos,
                     "directions": {"type": "integer", "minimum": 0}}),
    "estimates": _obj({
        "alpha": _pos, "r_star": _pos, "kappa_t": _pos, "alpha0": _pos,
        "p": {"type": "array", "items": _pos, "minItems": 4, "maxItems": 4},
        "B": _pos, "sigma": _pos, "bar_c": _pos, "C_mp": _pos,
    }),
    "ps": _obj({"r": _pos, "s": {"type": "number", "minimum": 0}, "beta": {"type": "number", "minimum": 0},
                "eps": _pos, "probes": {"type": "integer", "minimum": 1}}),
    "genn": _obj({"draws": {"type": "integer", "minimum": 1}}),
    "tolerances": _obj({"newton": _pos, "positivity": _pos, "abort_below": _num}),
    "snapshot_format": {"enum": ["npy", "csv"]},
}, ["law", "grid", "time"])


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending field or line."""


DEFAULTS = {
    "domain": {"lower": [0.0, 0.0, 0.0], "extent": [1.0, 1.0, 1.0]},
    "rotation_axis": [0.0, 0.0, 1.0],
    "seed": 0,
    "checks": [],
    "certify": {"samples": 10000, "z_max": 10.0, "y_max": 1000.0, "directions": 100},
    "estimates": {"alpha": 20.0, "r_star": 0.9, "kappa_t": 1.1, "alpha0": 40.0,
                  "p": [1.05, 1.05, 1.05, 1.05], "B": 0.5, "sigma": 0.5},
    "ps": {"r": 2.0, "s": 2.0, "beta": 1.0, "eps": 1.0, "probes": 200},
    "genn": {"draws": 200},
    "tolerances": {"newton": 1e-12, "positivity": 1e-10, "abort_below": -1e-3},
    "snapshot_format": "npy",
}


def _merged(raw):
    cfg = json.loads(json.dumps(DEFAULTS))
    for k, v in raw.items():
        if isinstance(v, dict) and isinstance(cfg.get(k), dict):
            cfg[k].update(v)
        else:
            cfg[k] = v
    return cfg


@dataclass
class RunConfig:
    """Validated configuration plus the objects built from it."""

    raw: dict
    cfg: dict
    law: ForchheimerLaw = None
    spec: ProblemSpec = None
    mms: object = None
    extra: dict = field(default_factory=dict)

    @property
    def checks(self):
        return list(self.cfg["checks"])

    @property
    def grid_shape(self):
        n = self.cfg["grid"]["n"]
        return (n,) * 3 if isinstance(n, int) else tuple(n)


def parse_config(text, strict=True):
    """Parse and validate JSON text; build the law and problem.

    With ``strict=False`` unknown keys are dropped instead of rejected.
    """
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("the configuration must be a JSON object")
    schema = SCHEMA if strict else _lenient(SCHEMA)
    errors = sorted(jsonschema.Draft202012Validator(schema).iter_errors(raw), key=lambda e: list(e.path))
    if errors:
        msgs = [f"{'/'.join(str(p) for p in e.path) or '<root>'}: {e.message}" for e in errors]
        raise ConfigError("invalid configuration:\n  " + "\n  ".join(msgs))
    if not strict:
        raw = _strip_unknown(raw, SCHEMA)
    if "scaled" in raw and "physical" in raw:
        raise ConfigError("give either 'scaled' or 'physical' parameters, not both")
    if "data" not in raw and "mms" not in raw:
        raise ConfigError("either 'data' or 'mms' is required")
    cfg = _merged(raw)
    rc = RunConfig(raw, cfg)
    try:
        _build(rc)
    except (ValueError, ExpressionError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from exc
    return rc


def load_config(path, strict=True):
    with open(path) as fh:
        return parse_config(fh.read(), strict=strict)


def _lenient(schema):
    if isinstance(schema, dict):
        return {k: (True if k == "additionalProperties" else _lenient(v)) for k, v in schema.items()}
    if isinstance(schema, list):
        return [_lenient(v) for v in schema]
    return schema


def _strip_unknown(raw, schema):
    if not isinstance(raw, dict) or "properties" not in schema:
        return raw
    return {k: _strip_unknown(v, schema["properties"][k]) for k, v in raw.items() if k in schema["properties"]}


def _build(rc):
    from .mms import ManufacturedSolution

    c = rc.cfg
    rc.law = ForchheimerLaw(tuple(c["law"]["exponents"]), tuple(c["law"]["coefficients"]))
    if "physical" in c:
        params = PhysicalParams(**c["physical"]).scaled()
    else:
        s = c.get("scaled", {"varpi": 1.0, "phi": 1.0})
        params = ScaledParams(s["varpi"], s["phi"], s.get("G", 0.0), s.get("Omega", 0.0))
    domain = DomainSpec(tuple(c["domain"]["lower"]), tuple(c["domain"]["extent"]))
    kw = {}
    if "gravity_direction" in c:
        kw["e0"] = tuple(Expression(v) for v in c["gravity_direction"])
    axis = tuple(c["rotation_axis"])
    if "mms" in c:
        rc.mms = ManufacturedSolution(c["mms"].get("solution", "2 + sin(pi*x)*sin(pi*y)*exp(-t)"))
        rc.spec = rc.mms.problem(rc.law, params, domain, axis=axis, **({"e0": kw["e0"]} if kw else {}))
    else:
        d = c["data"]
        data = DataSpec(u0=d["u0"], psi=d["psi"], Psi=d.get("Psi"), source=d.get("source"))
        rc.spec = ProblemSpec(rc.law, params, domain, data, axis=axis, **kw)
    T = c["time"]["horizon"]
    snaps = c["time"].get("snapshots", 11)
    if isinstance(snaps, list):
        if snaps[0] != 0 or any(b <= a for a, b in zip(snaps, snaps[1:])):
            raise ConfigError("time/snapshots: times must start at 0 and increase strictly")
        if T != "t0" and snaps[-1] > T:
            raise ConfigError("time/snapshots: last snapshot exceeds the horizon")
    rc.spec.check_e0_unit([0.0, 1.0])
