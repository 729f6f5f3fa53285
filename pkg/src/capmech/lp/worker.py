"""External solver command honoring the subprocess backend contract.

Usage: ``python -m capmech.lp.worker problem.mps solution.txt [--engine highs|reference]``
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from capmech.lp.backends import HighsBackend, ReferenceBackend, write_solution
from capmech.lp.mps import read_mps


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="capmech-worker")
    parser.add_argument("problem")
    parser.add_argument("solution")
    parser.add_argument("--engine", choices=("highs", "reference"), default="highs")
    args = parser.parse_args(argv)
    try:
        p = read_mps(args.problem)
        engine = HighsBackend() if args.engine == "highs" else ReferenceBackend()
        sol = engine.solve(p)
    except Exception as exc:  # reported through the exit code
        print(f"worker failed: {exc}", file=sys.stderr)
        return 1
    Path(args.solution).write_text(write_solution(sol, p), "utf-8")
    print(f"{p.name}: {sol.status.value}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
