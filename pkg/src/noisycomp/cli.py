"""Command-line front end: ``noisycomp {rate,capacity,code,pipeline,sweep,verify}``.

Instances are JSON documents::

    {"alphabets": {"A": ["0", "1"], ...},
     "source": {"alphabet": "A", "probs": [...]},
     "f": {"domain": "A", "codomain": "B", "table": {"0": "0", ...}},
     "F": {"input": "A", "output": "C", "rows": [[...], ...]},
     "g": {...}, "outer_source": {...}, "params": {...}}

``g`` and ``outer_source`` are optional (they default to ``f`` and the
source). Exit status is 0 on success, 2 for invalid input and 3 when the
requested construction is infeasible.
"""

import argparse
import json
import math
import os
import sys
from dataclasses import dataclass, field

from .capacity import capacity_iid
from .coding import (build_feinstein_code, dumps, exact_max_error, lemma_code_size, loads,
                     regions_disjoint)
from .errors import INFEASIBLE, NoisyCompError
from .infomeasures import conditional_entropy_given_function, typical_input_rate
from .model import NoisyComputationInstance, make_channel, make_det_function, make_pmf
from .model import alphabet as make_alphabet
from .pipeline import (SweepConfig, build_pipeline, choose_block_lengths, outer_group_count,
                       rate_error_sweep, simulate, sweep_csv, sweep_json)

TOP_KEYS = {"alphabets", "source", "f", "F", "g", "outer_source", "params"}
REQUIRED = ("alphabets", "source", "f", "F")
PARAM_TYPES = {
    "delta": float, "delta2": float, "delta_cond": float, "delta_y": float,
    "epsilon": float, "epsilons": list, "seed": int, "trials": int, "units": str,
    "rate": float, "n": int, "k": int, "schedule": list, "exact_max_n": int,
}
DEFAULT_DELTA = 0.1
DEFAULT_TRIALS = 10_000


@dataclass(frozen=True, eq=False)
class InstanceConfig:
    alphabets: dict
    source: object
    f: object
    F: object
    g: object = None
    outer_source: object = None
    params: dict = field(default_factory=dict)

    @property
    def inst(self):
        return NoisyComputationInstance(self.source, self.f, self.F)

    @property
    def outer(self):
        """(outer source, g), falling back to the inner pair."""
        return (self.outer_source or self.source, self.g or self.f)


def _schema(where, msg):
    return NoisyCompError("SCHEMA_ERROR", f"{where}: {msg}")


def _obj(doc, key, where, fields):
    val = doc[key]
    if not isinstance(val, dict):
        raise _schema(where, "expected an object")
    missing = [k for k in fields if k not in val]
    if missing:
        raise _schema(where, f"missing field {missing[0]!r}")
    extra = sorted(set(val) - set(fields))
    if extra:
        raise _schema(where, f"unknown field {extra[0]!r}")
    return val


def _alph(alphs, name, where):
    if not isinstance(name, str) or name not in alphs:
        raise _schema(where, f"undeclared alphabet {name!r}")
    return alphs[name]


def _validated(where, build):
    try:
        return build()
    except NoisyCompError as exc:
        raise NoisyCompError("VALIDATION_ERROR", f"{where}: {exc}") from exc
    except (TypeError, ValueError) as exc:
        raise NoisyCompError("VALIDATION_ERROR", f"{where}: {exc}") from exc


def _pmf(doc, key, alphs):
    spec = _obj(doc, key, key, ("alphabet", "probs"))
    alph = _alph(alphs, spec["alphabet"], f"{key}.alphabet")
    if not isinstance(spec["probs"], list):
        raise _schema(f"{key}.probs", "expected a list of numbers")
    return _validated(f"{key}.probs", lambda: make_pmf(alph, spec["probs"]))


def _fn(doc, key, alphs):
    spec = _obj(doc, key, key, ("domain", "codomain", "table"))
    dom = _alph(alphs, spec["domain"], f"{key}.domain")
    cod = _alph(alphs, spec["codomain"], f"{key}.codomain")
    table = spec["table"]
    if not isinstance(table, dict):
        raise _schema(f"{key}.table", "expected an object mapping labels to labels")
    for a, b in table.items():
        if a not in dom.symbols:
            raise _schema(f"{key}.table", f"{a!r} is not in alphabet {spec['domain']!r}")
        if b not in cod.symbols:
            raise _schema(f"{key}.table[{a!r}]", f"{b!r} is not in alphabet {spec['codomain']!r}")
    return _validated(f"{key}.table", lambda: make_det_function(dom, cod, table))


def _channel(doc, alphs):
    spec = _obj(doc, "F", "F", ("input", "output", "rows"))
    inp = _alph(alphs, spec["input"], "F.input")
    out = _alph(alphs, spec["output"], "F.output")
    rows = spec["rows"]
    if not isinstance(rows, list) or not all(isinstance(r, list) for r in rows):
        raise _schema("F.rows", "expected a list of rows")
    return _validated("F.rows", lambda: make_channel(inp, out, rows))


def _params(doc):
    params = doc.get("params", {})
    if not isinstance(params, dict):
        raise _schema("params", "expected an object")
    for key, val in params.items():
        if key not in PARAM_TYPES:
            raise _schema(f"params.{key}", "unknown parameter")
        want = PARAM_TYPES[key]
        ok = isinstance(val, want) and not isinstance(val, bool)
        if want is float:
            ok = isinstance(val, (int, float)) and not isinstance(val, bool)
        if not ok:
            raise _schema(f"params.{key}", f"expected {want.__name__}")
    if params.get("units", "nats") not in ("nats", "bits"):
        raise _schema("params.units", "expected 'nats' or 'bits'")
    return dict(params)


def instance_from_dict(doc):
    if not isinstance(doc, dict):
        raise _schema("<root>", "expected an object")
    for key in REQUIRED:
        if key not in doc:
            raise _schema("<root>", f"missing field {key!r}")
    extra = sorted(set(doc) - TOP_KEYS)
    if extra:
        raise _schema("<root>", f"unknown field {extra[0]!r}")
    raw = doc["alphabets"]
    if not isinstance(raw, dict) or not raw:
        raise _schema("alphabets", "expected a non-empty object")
    alphs = {}
    for name, labels in raw.items():
        if not isinstance(labels, list) or not all(isinstance(s, str) for s in labels):
            raise _schema(f"alphabets.{name}", "expected a list of string labels")
        alphs[name] = _validated(f"alphabets.{name}", lambda labels=labels: make_alphabet(*labels))
    source = _pmf(doc, "source", alphs)
    f = _fn(doc, "f", alphs)
    F = _channel(doc, alphs)
    g = _fn(doc, "g", alphs) if "g" in doc else None
    outer = _pmf(doc, "outer_source", alphs) if "outer_source" in doc else None
    cfg = InstanceConfig(alphs, source, f, F, g, outer, _params(doc))
    _validated("F.input", lambda: cfg.inst)
    o_src, o_fn = cfg.outer
    if o_fn.domain != o_src.alphabet:
        raise NoisyCompError("VALIDATION_ERROR", "g.domain: must be the outer_source alphabet")
    return cfg


def parse_instance(path):
    """Read and validate an instance file; errors name the offending field or line."""
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise NoisyCompError("PARSE_ERROR", f"{path}: {exc.strerror}") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise NoisyCompError("PARSE_ERROR", f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
    return instance_from_dict(doc)


# ---- output --------------------------------------------------------------

def _to_units(d, units, keys):
    """Copy of ``d`` plus a ``bits`` block when requested; nats stay in place."""
    out = dict(d)
    out["units"] = "nats"
    if units == "bits":
        out["bits"] = {k: d[k] / math.log(2) for k in keys}
    return out


def _emit(args, payload=None, text=None):
    if text is None:
        if args.output == "csv":
            if "bits" in payload:  # flat output shows the requested units
                payload = {**payload, **payload["bits"], "units": "bits"}
            keys = [k for k, v in payload.items() if not isinstance(v, (dict, list))]
            text = ",".join(keys) + "\n" + ",".join(_csv_cell(payload[k]) for k in keys) + "\n"
        else:
            text = json.dumps(payload, indent=2, sort_keys=True) + "\n"
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _csv_cell(v):
    if v is None:
        return ""
    return repr(v) if isinstance(v, float) else str(v)


# ---- commands ------------------------------------------------------------

def _param(args, cfg, name, default=None):
    val = getattr(args, name, None)
    if val is not None:
        return val
    return cfg.params.get(name, default)


def _seed(args, cfg):
    if args.seed is None and os.environ.get("NCL_REQUIRE_SEED") == "1":
        raise NoisyCompError("SEED_REQUIRED", "NCL_REQUIRE_SEED=1: pass --seed explicitly")
    return int(_param(args, cfg, "seed", 0))


def _units(args, cfg):
    return args.units or cfg.params.get("units", "nats")


def _require(value, flag):
    if value is None:
        raise NoisyCompError("MISSING_ARGUMENT", f"{flag} is required (flag or params)")
    return value


def _rate_in_nats(args, cfg):
    r = _param(args, cfg, "rate")
    if r is not None and _units(args, cfg) == "bits":
        r *= math.log(2)
    return r


def cmd_rate(args, cfg):
    rep = typical_input_rate(cfg.inst)
    d = {k: float(v) for k, v in rep.as_dict().items()}
    _emit(args, _to_units(d, _units(args, cfg), list(d)))


def cmd_capacity(args, cfg):
    res = capacity_iid(cfg.f, cfg.F, seed=_seed(args, cfg))
    d = {"value": res.value, "argmax": dict(zip(res.argmax.alphabet.symbols, res.argmax.probs.tolist())),
         "restarts": res.restarts_used, "converged": res.converged, "label": res.label}
    _emit(args, _to_units(d, _units(args, cfg), ["value"]))


def _code_delta(args, cfg):
    return _param(args, cfg, "delta_cond", _param(args, cfg, "delta"))


def cmd_code(args, cfg):
    n = int(_require(_param(args, cfg, "n"), "--n"))
    eps = float(_require(_param(args, cfg, "epsilon"), "--epsilon"))
    rate = _require(_rate_in_nats(args, cfg), "--rate")
    inst = cfg.inst
    delta = _code_delta(args, cfg)
    code = build_feinstein_code(inst, n, eps, rate, delta=delta, delta_y=cfg.params.get("delta_y"))
    err = exact_max_error(code, inst, delta=delta)
    if err > eps or not regions_disjoint(code):
        raise NoisyCompError("VERIFY_FAILED", f"built code has max error {err!r} > epsilon {eps!r}")
    h = conditional_entropy_given_function(inst.source, inst.f)
    summary = {"n": n, "epsilon": eps, "rate": rate, "M": code.size,
               "lemma_size": lemma_code_size(rate, n, h), "exhausted": code.exhausted,
               "exact_max_error": err, "disjoint": True}
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(dumps(code))
        sys.stdout.write(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    else:
        sys.stdout.write(dumps(code))


def _load_code(path):
    try:
        with open(path, encoding="utf-8") as fh:
            return loads(fh.read())
    except OSError as exc:
        raise NoisyCompError("PARSE_ERROR", f"{path}: {exc.strerror}") from exc


def cmd_verify(args, cfg):
    code = _load_code(_require(args.code, "--code"))
    delta = _code_delta(args, cfg)
    err = exact_max_error(code, cfg.inst, delta=delta)
    disjoint = regions_disjoint(code)
    ok = disjoint and err <= code.epsilon
    _emit(args, {"n": code.n, "epsilon": code.epsilon, "M": code.size,
                 "exact_max_error": err, "disjoint": disjoint, "valid": ok})
    if not ok:
        raise NoisyCompError("VERIFY_FAILED", f"max error {err!r} vs epsilon {code.epsilon!r}, "
                                              f"disjoint={disjoint}")


def _block_lengths(args, cfg):
    outer, g = cfg.outer
    k, n = _param(args, cfg, "k"), _param(args, cfg, "n")
    if k is None or n is None:
        d2 = _require(cfg.params.get("delta2"), "params.delta2 (or --k and --n)")
        bl = choose_block_lengths((outer, g), (cfg.source, cfg.f), d2)
        return bl.k, bl.n
    return int(k), int(n)


def cmd_pipeline(args, cfg):
    seed = _seed(args, cfg)
    outer, g = cfg.outer
    inst = cfg.inst
    k, n = _block_lengths(args, cfg)
    delta = float(_param(args, cfg, "delta", DEFAULT_DELTA))
    delta_cond = float(cfg.params.get("delta_cond", delta))
    eps = float(_require(_param(args, cfg, "epsilon"), "--epsilon"))
    rate = _rate_in_nats(args, cfg)
    if rate is None:  # just enough codewords for the groups
        groups = outer_group_count(outer, g, k, delta)
        rate = conditional_entropy_given_function(inst.source, inst.f) + math.log(groups + 0.5) / n
    code = build_feinstein_code(inst, n, eps, rate, delta=delta_cond, delta_y=cfg.params.get("delta_y"))
    p = build_pipeline(outer, g, inst, n, k, code, delta, delta_cond=delta_cond)
    trials = int(_param(args, cfg, "trials", DEFAULT_TRIALS))
    est = simulate(p, trials, seed, workers=args.workers)
    d = {"k": k, "n": n, "R_nats": p.rate, "gamma": p.gamma, **p.diagnostics, **est.as_dict()}
    _emit(args, _to_units(d, _units(args, cfg), ["R_nats"]))


def cmd_sweep(args, cfg):
    seed = _seed(args, cfg)
    outer, g = cfg.outer
    schedule = cfg.params.get("schedule")
    if schedule is None:
        schedule = [_block_lengths(args, cfg)]
    if not all(isinstance(s, list) and len(s) == 2 and all(isinstance(v, int) for v in s)
               for s in schedule):
        raise NoisyCompError("SCHEMA_ERROR", "params.schedule: expected a list of [k, n] pairs")
    extra = {}
    eps = _param(args, cfg, "epsilon")
    if eps is not None:
        extra["epsilons"] = (float(eps),)
    elif "epsilons" in cfg.params:
        extra["epsilons"] = tuple(float(e) for e in cfg.params["epsilons"])
    for key in ("delta_cond", "delta_y", "exact_max_n"):
        if key in cfg.params:
            extra[key] = cfg.params[key]
    sc = SweepConfig(outer, g, cfg.inst, tuple(tuple(s) for s in schedule),
                     trials=int(_param(args, cfg, "trials", DEFAULT_TRIALS)), seed=seed,
                     delta=float(_param(args, cfg, "delta", DEFAULT_DELTA)),
                     workers=args.workers, **extra)
    rows = rate_error_sweep(sc)
    _emit(args, text=sweep_json(rows) if args.output == "json" else sweep_csv(rows))


COMMANDS = {"rate": cmd_rate, "capacity": cmd_capacity, "code": cmd_code,
            "pipeline": cmd_pipeline, "sweep": cmd_sweep, "verify": cmd_verify}


def build_parser():
    ap = argparse.ArgumentParser(prog="noisycomp", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True, metavar="{" + ",".join(COMMANDS) + "}")
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--instance", required=True, metavar="PATH")
        sp.add_argument("--n", type=int)
        sp.add_argument("--k", type=int)
        sp.add_argument("--epsilon", type=float)
        sp.add_argument("--delta", type=float)
        sp.add_argument("--rate", type=float, help="in --units (nats unless bits)")
        sp.add_argument("--trials", type=int)
        sp.add_argument("--seed", type=int)
        sp.add_argument("--units", choices=("nats", "bits"))
        sp.add_argument("--output", choices=("json", "csv"),
                        default="csv" if name == "sweep" else "json")
        sp.add_argument("--out", metavar="PATH")
        sp.add_argument("--workers", type=int, default=1)
        if name == "verify":
            sp.add_argument("--code", metavar="PATH", help="serialized code to check")
    return ap


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # usage errors
        return int(exc.code or 0)
    try:
        cfg = parse_instance(args.instance)
        COMMANDS[args.command](args, cfg)
    except NoisyCompError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3 if exc.code in INFEASIBLE else 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
