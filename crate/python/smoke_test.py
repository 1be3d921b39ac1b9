"""Smoke test for the `intermittent` extension module.

Build and run from the repository root:

    cargo build --release -p intermittent-py
    cp target/release/libintermittent_py.so python/intermittent.so
    python3 python/smoke_test.py
"""

import math
import os
import sys

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

import intermittent as im


def main():
    m = im.Map("manpom", alpha=2.0)
    assert m.eval(0.5) == 0.0 and m.eval(1.0) == 1.0
    assert abs(m.eval(0.25) - 0.25 * (1 + 0.5 ** 2)) < 1e-15
    assert len(m.orbit(0.3, 10)) == 11
    print("map:", repr(m), "T(0.25) =", m.eval(0.25))

    y, yp = im.preimages(1.0, 100)
    assert abs(y[1] - (math.sqrt(5) - 1) / 4) < 1e-15
    assert im.return_time(m, 0.75) == 1

    t = im.tail(2.0, 10_000)
    print("tail slope:", t["fit"]["slope"], "verdict:", t["verdict"])
    assert abs(t["fit"]["slope"] + 0.5) < 0.05

    op = im.UlamOperator(m, 4096)
    u = op.renewal(1000)
    assert u[0] == 0.5 and abs(u[1] - 0.25) < 1e-12
    ev = im.conservativity(u, 2)
    print("renewal u_1000 =", u[-1], "d=2 verdict:", ev["verdict"])

    h = im.UlamOperator(im.Map("doubling"), 64).invariant_density()
    assert max(abs(v - 1.0) for v in h["h"]) < 1e-12

    row = im.measure_estimate(im.Map("manpom", alpha=2.5), 2, 10_000, 200, seed=3)
    print("LY fraction (alpha 2.5, d 2):", row["li_yorke"]["value"])
    assert 0.0 <= row["li_yorke"]["value"] <= 1.0

    rep = im.expansivity_check(1.5, 10_000)
    print("expansivity violations:", rep["violations"])

    try:
        im.Map("tent")
    except ValueError as e:
        print("bad map rejected:", e)
    else:
        raise AssertionError("unknown map accepted")

    print("smoke test passed")


if __name__ == "__main__":
    main()
