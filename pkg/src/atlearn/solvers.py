"""SAT solver backends: in-process via pysat, or an external DIMACS solver."""

from __future__ import annotations

import io
import json
import multiprocessing
import os
import shlex
import subprocess
import tempfile
import threading
import time
from dataclasses import dataclass
from typing import Sequence

from pysat.formula import CNF
from pysat.solvers import Solver, SolverNames


class SolverError(RuntimeError):
    pass


@dataclass
class SolveResult:
    status: str                       # "sat", "unsat" or "timeout"
    model: frozenset[int] = frozenset()   # true variables
    seconds: float = 0.0

    @property
    def sat(self) -> bool:
        return self.status == "sat"


@dataclass(frozen=True)
class SolverSettings:
    backend: str = "pysat"            # "pysat" or "external"
    name: str = "cadical195"          # pysat solver name
    command: str | None = None        # external command; "{file}" is replaced by the DIMACS path
    output: str = "competition"       # external output format: "competition" or "minisat"
    timeout_s: float | None = None

    def describe(self) -> str:
        return self.name if self.backend == "pysat" else f"external:{self.command}"


def available_pysat_solvers() -> list[str]:
    names = []
    for attr in dir(SolverNames):
        if not attr.startswith("_"):
            names.append(attr)
    return sorted(names)


def write_dimacs(nvars: int, clauses: Sequence[Sequence[int]], fp, comments: Sequence[str] = ()) -> None:
    cnf = CNF(from_clauses=[list(c) for c in clauses])
    cnf.nv = max(cnf.nv, nvars)
    cnf.to_fp(fp, comments=[f"c {c}" for c in comments])


def read_dimacs(text: str) -> tuple[int, list[list[int]]]:
    cnf = CNF(from_string=text)
    nv = cnf.nv
    for line in text.splitlines():
        parts = line.split()
        if parts[:2] == ["p", "cnf"] and len(parts) >= 3:
            nv = max(nv, int(parts[2]))
            break
    return nv, [list(c) for c in cnf.clauses]


def dimacs_text(nvars: int, clauses: Sequence[Sequence[int]]) -> str:
    buf = io.StringIO()
    write_dimacs(nvars, clauses, buf)
    return buf.getvalue()


def write_var_map(names: dict[str, int], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(names, fh, indent=0, sort_keys=True)


def parse_competition_output(text: str) -> tuple[str, frozenset[int]]:
    status = None
    true_vars: set[int] = set()
    for line in text.splitlines():
        line = line.strip()
        if line.startswith("s "):
            word = line[2:].strip().upper()
            if word == "SATISFIABLE":
                status = "sat"
            elif word == "UNSATISFIABLE":
                status = "unsat"
            else:
                status = "timeout"
        elif line.startswith("v "):
            for tok in line[2:].split():
                x = int(tok)
                if x > 0:
                    true_vars.add(x)
    if status is None:
        raise SolverError("solver printed no status line")
    return status, frozenset(true_vars)


def parse_minisat_output(text: str) -> tuple[str, frozenset[int]]:
    """MiniSat result-file format: ``SAT`` / ``UNSAT`` then a literal line."""
    lines = [ln.strip() for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise SolverError("empty solver result")
    head = lines[0].upper()
    if head == "UNSAT":
        return "unsat", frozenset()
    if head == "INDET":
        return "timeout", frozenset()
    if head != "SAT":
        raise SolverError(f"unrecognized solver result {lines[0]!r}")
    true_vars = {int(t) for ln in lines[1:] for t in ln.split() if int(t) > 0}
    return "sat", frozenset(true_vars)


# pysat cannot interrupt these; a timed run goes to a child process instead
_UNINTERRUPTIBLE = ("cadical", "lingeling", "lgl")


def _child_solve(name, clauses, assumptions, conn) -> None:
    try:
        with Solver(name=name, bootstrap_with=clauses) as solver:
            ok = solver.solve(assumptions=list(assumptions))
            conn.send((ok, solver.get_model() if ok else None))
    except Exception as exc:  # reported to the parent
        conn.send(("error", str(exc)))
    finally:
        conn.close()


def _solve_pysat_killable(clauses, settings: SolverSettings, assumptions, start) -> SolveResult:
    method = "fork" if "fork" in multiprocessing.get_all_start_methods() else "spawn"
    ctx = multiprocessing.get_context(method)
    recv, send = ctx.Pipe(duplex=False)
    proc = ctx.Process(target=_child_solve, args=(settings.name, clauses, list(assumptions), send), daemon=True)
    proc.start()
    send.close()
    try:
        if not recv.poll(settings.timeout_s):
            return SolveResult("timeout", seconds=time.perf_counter() - start)
        try:
            verdict, model = recv.recv()
        except EOFError as exc:
            raise SolverError(f"solver process for {settings.name!r} died (exit {proc.exitcode})") from exc
    finally:
        if proc.is_alive():
            proc.kill()
        proc.join()
        recv.close()
    elapsed = time.perf_counter() - start
    if verdict == "error":
        raise SolverError(f"cannot start solver {settings.name!r}: {model}")
    if not verdict:
        return SolveResult("unsat", seconds=elapsed)
    return SolveResult("sat", frozenset(x for x in model if x > 0), elapsed)


def _solve_pysat(nvars, clauses, settings: SolverSettings, assumptions) -> SolveResult:
    start = time.perf_counter()
    if any(not c for c in clauses):
        return SolveResult("unsat", seconds=time.perf_counter() - start)
    if settings.timeout_s is not None and settings.name.startswith(_UNINTERRUPTIBLE):
        return _solve_pysat_killable(clauses, settings, assumptions, start)
    try:
        solver = Solver(name=settings.name, bootstrap_with=clauses)
    except Exception as exc:  # unknown solver name and similar
        raise SolverError(f"cannot start solver {settings.name!r}: {exc}") from exc
    timer = None
    try:
        if settings.timeout_s is not None:
            timer = threading.Timer(settings.timeout_s, solver.interrupt)
            timer.start()
            verdict = solver.solve_limited(assumptions=list(assumptions), expect_interrupt=True)
        else:
            verdict = solver.solve(assumptions=list(assumptions))
        elapsed = time.perf_counter() - start
        if verdict is None:
            return SolveResult("timeout", seconds=elapsed)
        if not verdict:
            return SolveResult("unsat", seconds=elapsed)
        model = solver.get_model() or []
        return SolveResult("sat", frozenset(x for x in model if x > 0), elapsed)
    finally:
        if timer is not None:
            timer.cancel()
        solver.delete()


def _solve_external(nvars, clauses, settings: SolverSettings, assumptions) -> SolveResult:
    if not settings.command:
        raise SolverError("external backend needs a solver command")
    clauses = list(clauses) + [[a] for a in assumptions]
    start = time.perf_counter()
    with tempfile.TemporaryDirectory() as tmp:
        cnf_path = os.path.join(tmp, "in.cnf")
        out_path = os.path.join(tmp, "out.txt")
        with open(cnf_path, "w") as fh:
            write_dimacs(nvars, clauses, fh)
        cmd = settings.command
        if "{file}" not in cmd:
            cmd += " {file}"
        argv = [a.replace("{file}", cnf_path).replace("{out}", out_path) for a in shlex.split(cmd)]
        try:
            proc = subprocess.run(argv, capture_output=True, text=True, timeout=settings.timeout_s)
        except subprocess.TimeoutExpired:
            return SolveResult("timeout", seconds=time.perf_counter() - start)
        except OSError as exc:
            raise SolverError(f"cannot run {argv[0]!r}: {exc}") from exc
        elapsed = time.perf_counter() - start
        if settings.output == "minisat":
            if not os.path.exists(out_path):
                raise SolverError(f"solver wrote no result file (exit {proc.returncode}): {proc.stderr.strip()}")
            with open(out_path) as fh:
                status, model = parse_minisat_output(fh.read())
        else:
            try:
                status, model = parse_competition_output(proc.stdout)
            except SolverError:
                raise SolverError(f"solver exit {proc.returncode}: {proc.stderr.strip() or 'no status line'}")
    return SolveResult(status, frozenset(v for v in model if v <= nvars), elapsed)


def solve(nvars: int, clauses: Sequence[Sequence[int]], settings: SolverSettings | None = None,
          assumptions: Sequence[int] = ()) -> SolveResult:
    """Solve a clause set; timeouts come back as status "timeout", never as unsat."""
    settings = settings or SolverSettings()
    if settings.backend == "pysat":
        return _solve_pysat(nvars, clauses, settings, assumptions)
    if settings.backend == "external":
        return _solve_external(nvars, clauses, settings, assumptions)
    raise SolverError(f"unknown backend {settings.backend!r}")
