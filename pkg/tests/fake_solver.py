"""Stand-in external SAT solver: ``fake_solver.py [--minisat OUT] [--sleep S] FILE``."""

import argparse
import sys
import time

from pysat.formula import CNF
from pysat.solvers import Solver

ap = argparse.ArgumentParser()
ap.add_argument("file")
ap.add_argument("--minisat")
ap.add_argument("--sleep", type=float, default=0.0)
args = ap.parse_args()
time.sleep(args.sleep)
cnf = CNF(from_file=args.file)
with Solver(name="minisat22", bootstrap_with=cnf.clauses) as s:
    ok = s.solve()
    model = s.get_model() if ok else None
if args.minisat:
    with open(args.minisat, "w") as fh:
        fh.write("SAT\n" + " ".join(map(str, model)) + " 0\n" if ok else "UNSAT\n")
else:
    print("c fake")
    print("s SATISFIABLE" if ok else "s UNSATISFIABLE")
    if ok:
        print("v " + " ".join(map(str, model)) + " 0")
sys.exit(10 if ok else 20)
