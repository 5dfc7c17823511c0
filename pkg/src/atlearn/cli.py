"""Command line: learn, check, separability, generate and bench."""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from typing import Sequence

from . import __version__
from .encoding import EncodingConfig, EncodingError, build
from .formulas import ALL_OPERATORS, CORE_OPERATORS, FormulaError, parse_formula, render_formula
from .learner import LearnConfig, LearnerError, learn_minimal
from .modelcheck import ModelCheckError, check_consistency
from .samplegen import GenSpec, GenerationError, benchmark_suite, generate_sample
from .separability import (
    SeparabilityError, decide_fragment, decide_full_atl, distinguish, is_full_fragment,
)
from .solvers import SolverError, SolverSettings, write_dimacs, write_var_map
from .structures import Sample, StructureError, load_sample, serialize_sample

EXIT_OK = 0
EXIT_NEGATIVE = 1
EXIT_USAGE = 2
EXIT_BUDGET = 3
EXIT_INTERNAL = 4

OUTPUT_VERSION = 1
BENCH_COLUMNS = ["formula", "mode", "num_examples", "size_bracket", "n_found",
                 "encode_s", "solve_s", "total_s", "status"]


class UsageError(Exception):
    pass


def _operators(args) -> frozenset[str]:
    if args.ops:
        ops = frozenset(o.strip() for o in args.ops.split(",") if o.strip())
        bad = ops - ALL_OPERATORS
        if bad:
            raise UsageError(f"unknown operators {sorted(bad)}; choose from {sorted(ALL_OPERATORS)}")
    else:
        ops = CORE_OPERATORS
    if args.no_until:
        ops = (ops - {"U"}) | {"F", "G"}
    return ops


def _solver_settings(args, timeout=None) -> SolverSettings:
    if args.solver_cmd:
        return SolverSettings("external", command=args.solver_cmd, output=args.solver_output,
                              timeout_s=timeout)
    return SolverSettings("pysat", name=args.solver, timeout_s=timeout)


def _encoding_config(args, sample: Sample | None) -> EncodingConfig:
    mode = args.mode
    if mode is None:
        mode = "atl"
    pre = args.pre.replace("-", "_") if args.pre else None
    if pre is None and mode == "atl" and sample is not None and sample.num_agents > 1 and args.auto_turn_based:
        if all(c.is_turn_based for c in sample.structures):
            pre = "turn_based"
    try:
        return EncodingConfig(mode=mode, operators=_operators(args), pre=pre,
                              pin_coalitions=args.pin_coalitions,
                              existential_only=args.existential_only)
    except EncodingError as exc:
        raise UsageError(str(exc)) from exc


def _emit(args, payload: dict, text: str, code: int) -> int:
    if getattr(args, "json", False):
        payload = {"version": OUTPUT_VERSION, "command": args.command, "exit_code": code, **payload}
        print(json.dumps(payload, indent=1, sort_keys=True))
    else:
        print(text)
    return code


def _show(phi, mode: str) -> str:
    return render_formula(phi, ctl=(mode == "ctl"))


# -- learn -----------------------------------------------------------------

def cmd_learn(args) -> int:
    sample = load_sample(args.sample)
    enc = _encoding_config(args, sample)
    config = LearnConfig(
        encoding=enc, solver=_solver_settings(args, args.timeout_s),
        max_n=args.budget_n, time_budget_s=args.time_budget_s,
        precheck=not args.no_precheck,
    )
    if args.dimacs_dir:
        _dump_dimacs(sample, enc, args.dimacs_dir, args.budget_n or 3)
    res = learn_minimal(sample, config)
    payload = {
        "result": {
            "outcome": res.outcome,
            "formula": _show(res.formula, enc.mode) if res.formula is not None else None,
            "size": res.size,
            "precheck": res.precheck,
            "message": res.message,
            "total_s": round(res.total_s, 6),
            "steps": [s.as_dict() for s in res.steps],
        },
    }
    if res.outcome == "formula":
        return _emit(args, payload, _show(res.formula, enc.mode), EXIT_OK)
    if res.outcome == "not_separable":
        return _emit(args, payload, f"not separable ({res.message})", EXIT_NEGATIVE)
    return _emit(args, payload, f"budget exhausted ({res.message})", EXIT_BUDGET)


def _dump_dimacs(sample, enc, out_dir, upto) -> None:
    os.makedirs(out_dir, exist_ok=True)
    for n in range(1, upto + 1):
        ctx = build(sample, n, enc)
        with open(os.path.join(out_dir, f"n{n}.cnf"), "w") as fh:
            write_dimacs(ctx.nvars, ctx.clauses, fh)
        write_var_map(ctx.encoding.var_names(), os.path.join(out_dir, f"n{n}.vars.json"))


# -- check -----------------------------------------------------------------

def cmd_check(args) -> int:
    sample = load_sample(args.sample)
    phi = parse_formula(args.formula, sample.num_agents)
    verdict = check_consistency(sample, phi)
    payload = {"result": {
        "consistent": verdict.consistent, "violated_by": verdict.violated_by,
        "polarity": verdict.polarity, "formula": render_formula(phi),
    }}
    if verdict:
        return _emit(args, payload, "consistent", EXIT_OK)
    text = f"inconsistent: violated by {verdict.polarity} structure {verdict.violated_by!r}"
    return _emit(args, payload, text, EXIT_NEGATIVE)


# -- separability ----------------------------------------------------------

def cmd_separability(args) -> int:
    sample = load_sample(args.sample)
    ops = _operators(args)
    use_fragment = args.fragment or not is_full_fragment(ops)
    result: dict = {"operators": sorted(ops)}
    if use_fragment:
        verdict = decide_fragment(sample, ops, args.limit)
        separable = verdict.separable
        result.update({
            "decider": "fragment", "separable": separable, "family_size": verdict.family_size,
            "witness": render_formula(verdict.witness) if verdict.witness is not None else None,
            "witness_size": verdict.witness_size,
        })
    else:
        rel = distinguish(sample)
        separable = decide_full_atl(sample, rel)
        result.update({"decider": "full", "separable": separable, "rounds": rel.rounds})
        if args.dump_relation:
            with open(args.dump_relation, "w") as fh:
                json.dump(rel.as_json(), fh)
        if args.witness and separable:
            verdict = decide_fragment(sample, ops, args.limit)
            result["witness"] = render_formula(verdict.witness) if verdict.witness is not None else None
            result["witness_size"] = verdict.witness_size
    if separable and not sample.positive and sample.propositions and not result.get("witness"):
        p = min(sample.propositions)
        result["witness"] = f"{p} & !{p}"
        result["note"] = "no positive structures: the contradiction separates the sample"
    text = "separable" if separable else "not separable"
    if result.get("witness"):
        text += f"\nwitness: {result['witness']}"
    return _emit(args, {"result": result}, text, EXIT_OK if separable else EXIT_NEGATIVE)


# -- generate --------------------------------------------------------------

def cmd_generate(args) -> int:
    if args.suite:
        if not args.out:
            raise UsageError("--out DIR is required with --suite")
        manifest = benchmark_suite(args.suite, args.out, args.seed, args.counts, args.caps)
        files = [e["file"] for e in manifest["samples"]]
        payload = {"result": {"out_dir": args.out, "files": files, "count": len(files)}}
        return _emit(args, payload, f"wrote {len(files)} samples to {args.out}", EXIT_OK)
    if not args.formula:
        raise UsageError("give --suite or --formula")
    spec = GenSpec(
        seed=args.seed, kind=args.kind, max_states=args.max_states, min_states=args.min_states,
        num_agents=args.agents, propositions=tuple(args.props.split(",")), formula=args.formula,
        num_positive=args.positive, num_negative=args.negative,
    )
    data = serialize_sample(generate_sample(spec))
    if args.out:
        with open(args.out, "wb") as fh:
            fh.write(data)
        return _emit(args, {"result": {"files": [args.out]}}, f"wrote {args.out}", EXIT_OK)
    sys.stdout.write(data.decode())
    return EXIT_OK


# -- bench -----------------------------------------------------------------

def _bench_one(task: tuple) -> dict:
    path, entry, config, mode = task
    sample = load_sample(path)
    start = time.perf_counter()
    try:
        res = learn_minimal(sample, config)
    except (LearnerError, SolverError) as exc:
        return {"entry": entry, "status": "error", "message": str(exc), "n_found": "", "formula_found": "",
                "encode_s": 0.0, "solve_s": 0.0, "total_s": time.perf_counter() - start}
    status = {"formula": "ok", "not_separable": "not_separable"}.get(res.outcome, "timeout")
    if res.outcome == "formula" and not check_consistency(sample, res.formula):
        status = "inconsistent"
    return {
        "entry": entry, "status": status, "message": res.message,
        "n_found": res.size if res.size is not None else "",
        "formula_found": _show(res.formula, mode) if res.formula is not None else "",
        "encode_s": res.encode_s, "solve_s": res.solve_s, "total_s": res.total_s,
    }


def cmd_bench(args) -> int:
    manifest_path = args.manifest
    if os.path.isdir(manifest_path):
        manifest_path = os.path.join(manifest_path, "manifest.json")
    with open(manifest_path) as fh:
        manifest = json.load(fh)
    base = os.path.dirname(manifest_path)
    suite = manifest.get("suite", "atl")
    if args.mode is None:
        args.mode = "ctl" if suite == "ctl" else "atl"
    enc = _encoding_config(args, None)
    config = LearnConfig(encoding=enc, solver=_solver_settings(args, args.timeout_s),
                         max_n=args.budget_n, precheck=not args.no_precheck)
    tasks = []
    for entry in manifest["samples"]:
        if args.max_count is not None and entry["num_examples"] > args.max_count:
            continue
        if args.max_size_bracket is not None and entry["size_bracket"] > args.max_size_bracket:
            continue
        tasks.append((os.path.join(base, entry["file"]), entry, config, enc.mode))
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            rows = list(pool.map(_bench_one, tasks))
    else:
        rows = [_bench_one(t) for t in tasks]
    out = open(args.out, "w", newline="") if args.out else sys.stdout
    try:
        writer = csv.writer(out)
        writer.writerow(BENCH_COLUMNS)
        for row in rows:
            e = row["entry"]
            writer.writerow([
                e["formula"], enc.mode, e["num_examples"], e["size_bracket"], row["n_found"],
                f"{row['encode_s']:.6f}", f"{row['solve_s']:.6f}", f"{row['total_s']:.6f}",
                row["status"],
            ])
    finally:
        if out is not sys.stdout:
            out.close()
    if args.formulas_out:
        found = {r["entry"]["file"]: r["formula_found"] or None for r in rows}
        with open(args.formulas_out, "w", encoding="utf-8") as fh:
            json.dump({"mode": enc.mode, "formulas": found}, fh, indent=1, sort_keys=True)
            fh.write("\n")
    bad = [r for r in rows if r["status"] in ("inconsistent", "error")]
    slow = [r for r in rows if r["status"] == "timeout"]
    if bad:
        return EXIT_INTERNAL
    if slow:
        return EXIT_BUDGET
    return EXIT_OK


# -- parser ----------------------------------------------------------------

def _add_learning_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--mode", choices=["ctl", "atl"], default=None, help="formula language (default atl)")
    p.add_argument("--ops", help="comma list of operators among not,and,or,X,G,U,F (default not,and,X,G,U)")
    p.add_argument("--no-until", action="store_true", help="drop U and search with F and G instead")
    p.add_argument("--pre", choices=["general", "turn-based", "ctl"], help="encoding of one-step forcing")
    p.add_argument("--auto-turn-based", action="store_true",
                   help="use the turn-based encoding when every structure is turn-based")
    p.add_argument("--pin-coalitions", action="store_true", help="force coalition variables off at non-temporal nodes")
    p.add_argument("--existential-only", action="store_true", help="ctl mode: only E-quantified labels")
    p.add_argument("--timeout-s", type=float, default=None, help="per-n solver timeout")
    p.add_argument("--budget-n", "--max-size", dest="budget_n", type=int, default=None, help="largest size to try")
    p.add_argument("--no-precheck", action="store_true", help="skip the separability pre-check")
    p.add_argument("--solver", default="cadical195", help="in-process solver name")
    p.add_argument("--solver-cmd", help="external solver command; {file} is the DIMACS path, {out} a result file")
    p.add_argument("--solver-output", choices=["competition", "minisat"], default="competition")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="atlearn", description="Learn minimal CTL/ATL formulas from examples.")
    parser.add_argument("--version", action="version", version=f"atlearn {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("learn", help="learn a minimal consistent formula")
    p.add_argument("--sample", required=True)
    _add_learning_flags(p)
    p.add_argument("--time-budget-s", type=float, default=None, help="wall clock for the whole search")
    p.add_argument("--dimacs-dir", help="also write the CNF of n=1..budget (default 3) with variable maps")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_learn)

    p = sub.add_parser("check", help="check a formula against a sample")
    p.add_argument("--sample", required=True)
    p.add_argument("--formula", required=True)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("separability", help="decide whether any formula separates a sample")
    p.add_argument("--sample", required=True)
    p.add_argument("--ops", help="operator fragment (default not,and,X,G,U)")
    p.add_argument("--no-until", action="store_true")
    p.add_argument("--fragment", action="store_true", help="use the exponential fragment decider")
    p.add_argument("--witness", action="store_true", help="also build a witness formula")
    p.add_argument("--limit", type=int, default=14, help="state limit for the fragment decider")
    p.add_argument("--dump-relation", help="write the distinguishing relation as JSON pairs")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_separability)

    p = sub.add_parser("generate", help="generate samples or a benchmark suite")
    p.add_argument("--suite", choices=["ctl", "atl"])
    p.add_argument("--counts", type=int, nargs="+")
    p.add_argument("--caps", type=int, nargs="+")
    p.add_argument("--formula")
    p.add_argument("--kind", choices=["ks", "cgs_turn", "cgs"], default="ks")
    p.add_argument("--agents", type=int, default=1)
    p.add_argument("--props", default="p,q")
    p.add_argument("--min-states", type=int, default=1)
    p.add_argument("--max-states", type=int, default=5)
    p.add_argument("--positive", type=int, default=5)
    p.add_argument("--negative", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("bench", help="learn every sample of a suite and write a CSV")
    p.add_argument("--manifest", required=True, help="manifest.json or the suite directory")
    _add_learning_flags(p)
    p.set_defaults(timeout_s=2400.0)
    p.add_argument("--max-count", type=int, help="skip samples with more examples")
    p.add_argument("--max-size-bracket", type=int, help="skip samples with a larger size bracket")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out", help="CSV path (default stdout)")
    p.add_argument("--formulas-out", help="also write the learned formula of every sample as JSON")
    p.set_defaults(func=cmd_bench)
    return parser


def run(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    try:
        return args.func(args)
    except (UsageError, FormulaError, StructureError, GenerationError, SeparabilityError,
            EncodingError, ModelCheckError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (LearnerError, SolverError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
