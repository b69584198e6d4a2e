"""Smoke test for the Python extension. Run after `pip install -e crates/python`."""

import json
import math

import numpy as np

import takagi_lab as tl


def main():
    f = tl.FractalFunction(2)
    value, err, _ = f.eval("1/2")
    assert value == 0.5 and err <= 1e-12
    value, err, _ = f.eval("1/3")
    assert abs(value - 2 / 3) <= 1e-12, value
    assert f.sign_walk("3/4", 2) == [-1, -1]
    d = tl.FractalFunction(3, "power:0.5").decompose_increment("1/7", "3^-5")
    assert abs(d["residual"]) <= 4e-12 and d["m"] == 5

    params = tl.ErwvrpParams(0.75, "const", 200)
    alpha = params.alpha
    idx = np.arange(1, 201)
    oracle = (alpha ** np.abs(idx[:, None] - idx[None, :])).sum()
    s2 = params.cumulative_variances(200)[200]
    assert abs(s2 - oracle) <= 1e-9 * oracle, (s2, oracle)
    assert abs(tl.k_of_p(0.75) - 3.0) < 1e-15
    signs, sums = params.simulate(7, 3)
    assert (signs, sums) == params.simulate(7, 3)
    assert len(sums) == 201 and sums[0] == 0.0

    w = tl.WeightSequence("power:1")
    assert w.partial_energy(3) == 14.0
    assert tl.build_blocks("const", 1.0, 6) == [0, 1, 2, 4, 6, 9]
    assert tl.variance_profile(2, w, 3) == [0.0, 1.0, 5.0, 14.0]

    walk = tl.ErwvrpParams(0.75, "const", 2000)
    report = json.loads(tl.clt(walk, 2000, 4000, 7))
    ks = next(c for c in report["checks"] if c["name"].startswith("KS"))
    assert ks["value"] < 0.05, ks
    report = json.loads(tl.run_config("experiment=validate-weights\nweights=const\nn=500"))
    assert all(c["verdict"] != "fail" for c in report["checks"])
    canon = tl.canonical_config("experiment=clt\np=0.6")
    assert tl.canonical_config(canon) == canon

    try:
        tl.ErwvrpParams(2.0)
    except ValueError:
        pass
    else:
        raise AssertionError("p = 2 accepted")
    assert math.isfinite(tl.phi_mixing(0.75, 3))
    print("smoke test ok")


if __name__ == "__main__":
    main()
