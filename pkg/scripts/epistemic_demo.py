#!/usr/bin/env python3
"""Walk the partially observable circuit: show the hidden-cause clause
appear, then resolve it by sensing the unknown switch.

Usage: python3 scripts/epistemic_demo.py
"""

import os
import sys

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from eventcalc.core import Compound, Constant
from eventcalc.epistemic import format_hcd
from eventcalc.parser import parse_domain
from eventcalc.pool import ModelPool

FIXTURE = os.path.join(os.path.dirname(__file__), "..", "fixtures",
                       "circuit_epistemic.ec")


def show(pool, label):
    es = pool.models[0].knowledge
    print(f"-- {label} (t={pool.clock})")
    for fl, val in sorted(es.known.items(), key=lambda kv: repr(kv[0])):
        print(f"   known {'true ' if val else 'false'}: {fl!r}")
    for h in es.hcds:
        print(f"   clause: {format_hcd(h)}")
    print()


def main():
    with open(FIXTURE, encoding="utf-8") as fh:
        result = parse_domain(fh.read())
    assert result.ok, [str(d) for d in result.errors]
    pool = ModelPool(result.domain, epistemic=True)
    pool.tick()
    show(pool, "after one tick: the relay's precondition is unobserved")
    pool.tick()
    show(pool, "after two ticks: a hidden-cause clause records the ambiguity")
    pool.sense(Compound("Closed", (Constant("S3"),)), True)
    show(pool, "after sensing Closed(S3)=true: the clause resolves the relay")


if __name__ == "__main__":
    main()
