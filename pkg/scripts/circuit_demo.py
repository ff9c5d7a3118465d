#!/usr/bin/env python3
"""Project the relay-circuit domain forward and print the lit pattern.

Usage: python3 scripts/circuit_demo.py [horizon]
"""

import os
import sys

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from eventcalc.core import Compound, Constant
from eventcalc.parser import parse_domain
from eventcalc.pool import ModelPool

FIXTURE = os.path.join(os.path.dirname(__file__), "..", "fixtures", "circuit.ec")


def main():
    horizon = int(sys.argv[1]) if len(sys.argv) > 1 else 12
    with open(FIXTURE, encoding="utf-8") as fh:
        result = parse_domain(fh.read())
    assert result.ok, [str(d) for d in result.errors]
    pool = ModelPool(result.domain)
    lit = Compound("Lit", (Constant("L"),))
    for _ in range(horizon):
        report = pool.tick()
        state = " ".join(report.models[0].true)
        marker = "*" if pool.holds_summary(lit) == "True" else " "
        print(f"t={report.t:3d} {marker} {state}")


if __name__ == "__main__":
    main()
