#!/usr/bin/env python3
"""Smoke test for the ssr extension module.

Runs the four-state plant end to end (simulate under attack, both
reconstructors, audit) plus an adversary synthesis round trip. Exits
nonzero on the first mismatch.

Build the module first:
    cargo build -p ssr-py --release
    cp target/release/libssr.so python/ssr.so
Then:
    PYTHONPATH=python python3 python/smoke_test.py
"""

import math
import sys

import ssr


def check(cond, what):
    if not cond:
        print(f"FAIL: {what}")
        sys.exit(1)
    print(f"ok: {what}")


def close(xs, ys, tol):
    return len(xs) == len(ys) and all(abs(a - b) <= tol for a, b in zip(xs, ys))


def main():
    sys_4 = ssr.LinearSystem(
        a=[
            [2.3, -0.6, 3.8, 0.4],
            [3.2, -1.6, 0.7, 0.4],
            [1.7, 2.8, 5.2, 4.3],
            [-3.1, 2.4, 3.7, 4.8],
        ],
        c=[
            [1.0, 0.0, 0.0, 1.0],
            [1.0, 0.0, 1.0, 0.0],
            [1.0, 1.0, 0.0, 0.0],
            [0.0, 1.0, 1.0, 0.0],
            [0.0, 1.0, 0.0, 1.0],
            [0.0, 0.0, 1.0, 1.0],
        ],
        b=[[1.0], [1.0], [1.0], [1.0]],
    )
    check(sys_4.state_dim == 4 and sys_4.sensor_count == 6, "system dimensions")

    # Audit: any 4 sensors may be deleted at window 2; one more deletion
    # pushes the window to 4 but stays observable.
    audit = ssr.observability_report(sys_4, 4)
    check(audit.s_max == 5 and audit.lower_bound_b == 2, "redundancy audit")
    check(ssr.is_s_sparse_observable(sys_4, 5), "five-deletion observability")
    check(ssr.sparse_observable_lower_bound(sys_4, 5) == 4, "five-deletion window bound")
    check(ssr.min_r_for_full_rank(sys_4, [1, 2, 3, 4, 5]) == 4, "per-subset window")

    # Four attacked sensors: two drifts, two oscillations, over steps 0..5.
    gamma = [1, 3, 4, 6]
    steps = []
    for k in range(6):
        a = [0.0] * 6
        a[0] = 2000.0 + k / (k + 1.0)
        a[2] = 3000.0 + k / (k + 2.0)
        a[3] = 1500.0 * math.sin(2.0 * k + 1.0)
        a[5] = 3000.0 * math.cos(2.0 * k + 3.0)
        steps.append(a)
    attack = ssr.AttackScenario(gamma, steps)
    check(attack.gamma == gamma, "attack support")

    x0 = [25.2, -16.2, 123.3, 4.9]
    traj = ssr.simulate(sys_4, x0, 5, inputs=[3.6], attack=attack)
    check(traj.horizon == 5, "trajectory horizon")
    check(close(traj.states[0], x0, 0.0), "initial state recorded")
    meas = traj.measurements()
    check(meas.horizon == 5, "measurement horizon")

    # Majority search over size-5 deletions: hypotheses 2 and 5 agree on
    # the truth, everything else is scattered.
    cands = ssr.candidate_set(sys_4, meas, 3, 4, 5)
    check(len(cands) == 6, "six hypotheses")
    agreeing = [c.ordinal for c in cands if close(c.estimate, x0, 1e-6)]
    check(agreeing == [2, 5], "agreeing hypotheses")

    report = ssr.sesvs_reconstruct(sys_4, meas, 3, 4)
    check(report.outcome == "unique" and report.r == 4, "majority verdict")
    check(close(report.estimate, x0, 1e-6), "majority estimate")
    diag = report.diagnostics()
    check(diag["kind"] == "sesvs" and diag["threshold"] == 2, "majority diagnostics")
    winner = [c for c in diag["clusters"] if len(c["ordinals"]) >= 2]
    check(winner and winner[0]["ordinals"] == [2, 5], "winning cluster")

    # Consistency filter over size-4 deletions at a two-step window: one
    # residual round leaves exactly the attacked set (eighth subset).
    report = ssr.sesgc_reconstruct(sys_4, meas, 1, 4)
    check(report.outcome == "unique" and report.r == 2, "filter verdict")
    check(close(report.estimate, x0, 1e-6), "filter estimate")
    check(report.diagnostics()["surviving"] == [[8]], "filter survivors")
    check(ssr.enumerate_subsets(6, 4)[7] == [1, 3, 4, 6], "subset ordering")

    # Adversary synthesis on a plant with duplicated sensors: the planted
    # bias forms a fake majority, and replaying it splits the verdict.
    dup = ssr.LinearSystem(
        a=[[1.0, 1.0], [1.0, 0.0]],
        c=[[1.0, 0.0], [0.0, 1.0], [0.0, 1.0], [0.0, 1.0]],
    )
    cert = ssr.synthesize_sesvs_defeat(dup, [1], 1, 2, 1)
    check(cert is not None, "defeat certificate synthesized")
    check(ssr.check_sesvs_defeat(dup, cert), "certificate verifies")
    replay = ssr.simulate(dup, [1.0, -0.5], 1, attack=cert.scenario())
    verdict = ssr.sesvs_reconstruct(dup, replay.measurements(), 1, 1)
    check(verdict.outcome == "ambiguous", "replayed attack splits the verdict")
    reps = verdict.representatives
    check(len(reps) == 2 and close(reps[0], [1.0, -0.5], 1e-9), "truth still listed")
    measured_bias = [b - a for a, b in zip(reps[0], reps[1])]
    check(close(measured_bias, cert.bias, 1e-9), "measured bias matches certificate")

    # Guarantee arithmetic.
    check(ssr.sesvs_guarantee_holds(3, 1, 1), "three sensors tolerate one attacker")
    check(not ssr.sesvs_guarantee_holds(6, 4, 1), "six sensors cannot tolerate four")
    check(ssr.choose(6, 4) == 15, "binomial count")

    # Errors surface as ValueError with the library's message.
    try:
        ssr.sesvs_reconstruct(sys_4, meas, 3, 5)
    except ValueError as e:
        check("not 6-sparse observable" in str(e), "precondition error message")
    else:
        check(False, "oversized deletion should be refused")

    print("smoke test passed")


if __name__ == "__main__":
    main()
