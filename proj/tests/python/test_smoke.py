"""End-to-end smoke test for the python bindings.

Runs standalone (no pytest): each section prints one line and the script
exits nonzero on the first failed assertion.
"""

import math
import random
import sys

import gelc


def make_gamma_data(n=60, alpha=1.0, gamma=-0.2, phi=0.2, seed=20240814):
    rng = random.Random(seed)
    y, zl, zr = [], [], []
    for _ in range(n):
        z = rng.expovariate(1.0 / 4.0)
        mu = math.exp(alpha + gamma * z)
        k = 1.0 / phi
        y.append(rng.gammavariate(k, mu / k))
        if rng.random() < 1.0 / 3.0:
            zl.append(z)
            zr.append(z)
        else:
            lo = max(0.0, z - rng.uniform(0.1, 1.5))
            hi = z + rng.uniform(0.1, 1.5)
            zl.append(lo)
            zr.append(hi)
    return y, zl, zr


def check_fit():
    y, zl, zr = make_gamma_data()
    res = gelc.fit(y, zl, zr, family="gamma")
    assert res["converged"], res["message"]
    assert res["parameter_names"] == ["(intercept)", "z", "phi"]
    est = res["estimates"]
    assert abs(est[1] - (-0.2)) < 0.15, f"gamma estimate {est[1]} far from -0.2"
    assert res["std_errors"] is not None and all(se > 0 for se in res["std_errors"])
    mass = res["support"]["mass"]
    assert abs(sum(mass) - 1.0) < 1e-8
    lls = res["outer_logliks"]
    assert all(b >= a - 1e-10 * (1 + abs(a)) for a, b in zip(lls, lls[1:]))
    assert res["self_consistency_residual"] < 1e-4
    print(f"fit: ok (gamma_hat={est[1]:.4f}, {res['outer_iterations']} outer iterations)")


def check_fit_errors():
    try:
        gelc.fit([1.0, 2.0], [3.0, 1.0], [2.0, 2.0], family="gamma")
        raise AssertionError("expected GelcError for zl > zr")
    except gelc.GelcError:
        pass
    try:
        gelc.fit([1.0, 2.0, 3.0], [2.0, 2.0, 2.0], [2.0, 2.0, 2.0], family="gamma")
        raise AssertionError("expected GelcRankError for a constant covariate")
    except gelc.GelcRankError:
        pass
    print("fit: error mapping ok")


def check_npmle():
    res = gelc.npmle([1.0, 2.0, 4.0, 0.0], [3.0, 5.0, 4.0, 2.0])
    assert res["converged"]
    assert abs(sum(res["mass"]) - 1.0) < 1e-10
    assert all(l <= r for l, r in zip(res["left"], res["right"]))
    print(f"npmle: ok ({len(res['mass'])} support cells)")


def check_metrics():
    est = [[0.9], [1.0], [1.1], [1.05], [0.95]]
    ses = [[0.5]] * 5
    rep = gelc.compute_metrics(est, ses, [1.0], ["gamma"])
    pm = rep["parameters"][0]
    assert pm["relative"] is True
    assert abs(pm["bias"]) < 1e-14
    assert abs(pm["emp_se"] - 0.07905694150420951) < 1e-12
    assert abs(pm["rmse"] - 0.07071067811865478) < 1e-12
    assert pm["coverage"] == 1.0
    print("compute_metrics: ok")


def check_run_study():
    scenario = {
        "name": "py-smoke",
        "family": "gamma",
        "n": 25,
        "replications": 2,
        "seed": 5,
        "censor_mean_width": 3.0,
        "true_theta": {"alpha": 10.0, "gamma": -0.05, "phi": 0.02},
    }
    reports = gelc.run_study([scenario])
    assert len(reports) == 1
    rep = reports[0]
    assert rep["scenario"] == "py-smoke"
    used = rep["replications_used"] + rep["non_converged"] + rep["failed"]
    assert used == 2, rep
    names = [pm["parameter"] for pm in rep["parameters"]]
    assert "z" in names and "phi" in names
    try:
        gelc.run_study_json("not json")
        raise AssertionError("expected GelcParseError")
    except gelc.GelcParseError:
        pass
    print(f"run_study: ok ({rep['replications_used']} replications used)")


def main():
    check_fit()
    check_fit_errors()
    check_npmle()
    check_metrics()
    check_run_study()
    print("smoke test passed")
    return 0


if __name__ == "__main__":
    sys.exit(main())
