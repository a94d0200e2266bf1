"""``spectral-shift`` command line.

Exit codes: 0 success, 2 invalid input, 3 precision or convergence failure,
4 failed invariant.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import experiments as exps
from .config import RunConfig
from .errors import SpectralShiftError, ValidationError
from .hilbert import Dirac, TruncatedSpace, commutator, eta, make_alpha, operator_norm, operator_records
from .invariants import Context, run_all
from .measures import PARRY_CONVENTION, measure_records

log = logging.getLogger("spectral_shift")

# ---------------------------------------------------------------------------
# bit-stable emission


def format_value(v) -> str:
    """Floats with 12 significant digits, integers in full, booleans lower case."""
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return "%.12g" % float(v)
    if isinstance(v, (list, tuple, dict)):
        return json.dumps(normalise(v), sort_keys=True, separators=(",", ":"))
    return str(v)


def normalise(obj):
    """JSON-ready copy: 12-digit floats, string keys, non-finite floats as strings."""
    if isinstance(obj, dict):
        return {str(k): normalise(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [normalise(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [normalise(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if not math.isfinite(x):
            return str(x)
        return float("%.12g" % x)
    return obj


def dumps(obj) -> str:
    return json.dumps(normalise(obj), sort_keys=True, indent=2) + "\n"


def write_csv(rows: list[dict], path: str | Path | None) -> str:
    """CSV text with a header row and LF endings; written to ``path`` when given."""
    cols: list[str] = []
    for r in rows:
        cols.extend(k for k in r if k not in cols)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(cols)
    for r in rows:
        w.writerow([format_value(r.get(c)) for c in cols])
    text = buf.getvalue()
    if path is not None:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    return text


def write_json(obj, path: str | Path | None) -> str:
    text = dumps(obj)
    if path is not None:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    return text


def provenance(cfg: RunConfig) -> dict:
    return {"config_sha256": cfg.sha256, "measure_convention": PARRY_CONVENTION}


def _emit(rows: list[dict], out: str | None, fmt: str | None = None) -> None:
    fmt = fmt or ("json" if out and out.endswith(".json") else "csv")
    text = write_json(rows, out) if fmt == "json" else write_csv(rows, out)
    if out is None:
        sys.stdout.write(text)


# ---------------------------------------------------------------------------
# subcommands


def cmd_lang(args) -> int:
    cfg = RunConfig.load(args.config)
    gen = cfg.generator()
    table = gen.language(args.max_level if args.max_level is not None else cfg.N)
    _emit(table.to_records(), args.out, args.format)
    return 0


def cmd_measure(args) -> int:
    cfg = RunConfig.load(args.config)
    _, _, meas = cfg.build(args.max_level)
    meas.check()
    _emit(measure_records(meas), args.out, args.format)
    return 0


def _space(cfg: RunConfig, N: int | None):
    N = cfg.N if N is None else N
    _, table, meas = cfg.build(N)
    space = TruncatedSpace(table, meas, N)
    return space, Dirac(space, make_alpha(cfg.alpha, N))


def _word_records(space: TruncatedSpace, op) -> list[dict]:
    leaves = space.table.levels[space.N]
    return [{"row": r["row"], "col": r["col"], "row_word": leaves[r["row"]], "col_word": leaves[r["col"]], "entry": r["entry"]} for r in operator_records(op, tol=1e-15)]


def cmd_dirac(args) -> int:
    cfg = RunConfig.load(args.config)
    space, D = _space(cfg, args.N)
    _emit(_word_records(space, D), args.out, args.format)
    return 0


def _function(space: TruncatedSpace, spec: str, seed: int):
    kind, _, word = spec.partition(":")
    if kind == "xi":
        return space.xi(word)
    if kind == "eta":
        return eta(space, word)
    if kind == "random":
        return space.random_function(np.random.default_rng(seed))
    raise ValidationError(f"function spec must be xi:WORD, eta:WORD or random, got {spec!r}")


def cmd_commutator(args) -> int:
    cfg = RunConfig.load(args.config)
    space, D = _space(cfg, args.N)
    f = _function(space, args.function, cfg.seed)
    C = commutator(space, D, f)
    summary = {"function": args.function, "lip": operator_norm(C), "osc": f.osc(), "N": space.N, **provenance(cfg)}
    if args.out:
        write_csv(_word_records(space, C), args.out)
    sys.stdout.write(dumps(summary))
    return 0


def cmd_summability(args) -> int:
    cfg = RunConfig.load(args.config)
    params = {"kind": args.kind, "s": args.s, "N": args.N if args.N is not None else cfg.N}
    rows, summary = exps.get("summability")(cfg, params)
    if args.out:
        write_csv(rows, args.out)
    sys.stdout.write(dumps({"experiment": "summability", "inputs": params, **summary, **provenance(cfg)}))
    return 0


def run_experiment(cfg: RunConfig, spec: dict, out_dir: str | None) -> dict:
    """Run one named experiment; write ``<name>.csv`` and ``<name>.json`` under ``out_dir``."""
    name = spec["name"]
    params = {k: v for k, v in spec.items() if k != "name"}
    rows, summary = exps.get(name)(cfg, params)
    doc = {
        "experiment": name,
        "inputs": {"subshift": cfg.subshift, "N": cfg.N, "alpha": cfg.alpha, "measure": cfg.measure, "seed": cfg.seed, "params": params},
        "constants": summary.get("constants", {}),
        "verdict": summary.get("verdict"),
        "rows": len(rows),
        **provenance(cfg),
    }
    out_dir = out_dir or cfg.output.get("dir")
    csv_path = spec.get("csv") or (Path(out_dir) / f"{name}.csv" if out_dir else None)
    json_path = spec.get("json") or (Path(out_dir) / f"{name}.json" if out_dir else None)
    if csv_path is not None:
        write_csv(rows, csv_path)
    if json_path is not None:
        write_json(doc, json_path)
    return doc


def cmd_experiment(args) -> int:
    cfg = RunConfig.load(args.config)
    todo = cfg.all_experiments()
    if args.name:
        todo = [e for e in todo if e["name"] == args.name] or [{"name": args.name}]
    if not todo:
        raise ValidationError("config lists no experiment; pass --name")
    docs = _run_many(cfg, todo, args.out_dir, args.threads)
    sys.stdout.write(dumps(docs[0] if len(docs) == 1 else docs))
    return 0


def _run_many(cfg: RunConfig, todo: list[dict], out_dir, threads: int) -> list[dict]:
    if threads > 1 and len(todo) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(lambda e: run_experiment(cfg, e, out_dir), todo))
    return [run_experiment(cfg, e, out_dir) for e in todo]


def cmd_run(args) -> int:
    cfg = RunConfig.load(args.config)
    todo = cfg.all_experiments()
    if not todo:
        raise ValidationError("config lists no experiment")
    docs = _run_many(cfg, todo, args.out_dir, args.threads)
    summary = {"experiments": docs, **provenance(cfg)}
    if cfg.output.get("summary"):
        write_json(summary, cfg.output["summary"])
    sys.stdout.write(dumps(summary))
    return 0


def _parse_perturbation(text: str) -> tuple[str, float]:
    word, sep, delta = text.rpartition(":")
    if not sep:
        raise ValidationError(f"--perturb-mu expects WORD:DELTA, got {text!r}")
    try:
        return word, float(delta)
    except ValueError:
        raise ValidationError(f"bad perturbation size {delta!r}") from None


def cmd_verify(args) -> int:
    cfg = RunConfig.load(args.config)
    gen, table, meas = cfg.build()
    if args.perturb_mu:
        word, delta = _parse_perturbation(args.perturb_mu)
        meas = meas.perturbed(word, delta)
    outcomes = run_all(Context(gen, table, meas, cfg.alpha, cfg.seed))
    failed = [o for o in outcomes if o.status == "fail"]
    report = {
        "invariants": [o.to_dict() for o in outcomes],
        "passed": sum(o.status == "pass" for o in outcomes),
        "failed": len(failed),
        "skipped": sum(o.status == "skipped" for o in outcomes),
        **provenance(cfg),
    }
    if args.out:
        write_json(report, args.out)
    for o in outcomes:
        sys.stderr.write(f"{o.status.upper():7s} {o.module}.{o.name}: {o.anchor} ({format_value(o.value)} vs tol {format_value(o.tol)})\n")
    sys.stdout.write(dumps(report))
    return 4 if failed else 0


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="spectral-shift", description="Truncated spectral triples on subshifts.")
    p.add_argument("--threads", type=int, default=1, help="run independent experiments in parallel")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(name, fn, help_):
        sp = sub.add_parser(name, help=help_)
        sp.add_argument("--config", required=True)
        sp.set_defaults(func=fn)
        return sp

    sp = common("lang", cmd_lang, "language table as CSV or JSON")
    sp.add_argument("--max-level", type=int)
    sp.add_argument("--out")
    sp.add_argument("--format", choices=("csv", "json"))

    sp = common("measure", cmd_measure, "cylinder masses with R and special flags")
    sp.add_argument("--max-level", type=int)
    sp.add_argument("--out")
    sp.add_argument("--format", choices=("csv", "json"))

    sp = common("dirac", cmd_dirac, "matrix entries of D on C_N")
    sp.add_argument("--N", type=int)
    sp.add_argument("--out")
    sp.add_argument("--format", choices=("csv", "json"))

    sp = common("commutator", cmd_commutator, "[D, f] entries and its norm")
    sp.add_argument("--function", default="random", help="xi:WORD, eta:WORD or random")
    sp.add_argument("--N", type=int)
    sp.add_argument("--out")

    sp = common("summability", cmd_summability, "partial sums of the zeta-type series")
    sp.add_argument("--kind", choices=("exp", "power"), default="exp")
    sp.add_argument("--s", type=float, nargs="+", required=True)
    sp.add_argument("--N", type=int)
    sp.add_argument("--out")

    sp = common("experiment", cmd_experiment, "one named experiment")
    sp.add_argument("--name", choices=sorted(exps.EXPERIMENTS))
    sp.add_argument("--out-dir")

    sp = common("run", cmd_run, "every experiment listed in the config")
    sp.add_argument("--out-dir")

    sp = common("verify", cmd_verify, "run the invariant suite")
    sp.add_argument("--perturb-mu", metavar="WORD:DELTA", help="shift one mass to check that the suite notices")
    sp.add_argument("--out")
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    if args.threads < 1:
        parser.error("--threads must be at least 1")
    try:
        return args.func(args)
    except SpectralShiftError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return exc.exit_code
    except FloatingPointError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 3


if __name__ == "__main__":
    sys.exit(main())
