"""Projected controller versus a primal-dual baseline.

The saddle-point scheme ascends a dual variable at rate gamma while the
primal descends an augmented Lagrangian.  Its behaviour hinges on tuning:
too aggressive a dual rate oscillates forever, with or without a heavy
penalty term.  The projection-based controller has no such knob — the same
step size converges from the same starts.
"""

import numpy as np

from fbopt import RunStatus, ScenarioConfig, run_trajectory

starts = [np.array([0.0, 0.0]), np.array([0.5, 0.5])]
alpha, budget, tol = 0.01, 20_000, 1e-6


def describe(log):
    tag = log.status.value
    u = log.u[-1]
    return (f"{tag:<12} iters={log.iters[-1]:>6} "
            f"final u=({u[0]:7.4f},{u[1]:7.4f}) residual={log.residual[-1]:.2e}")


print(f"{'scheme':<34} {'outcome'}")
for gamma, rho in [(5.0, 1.0), (5.0, 1000.0), (0.5, 1.0)]:
    for u0 in starts:
        config = ScenarioConfig(problem_name="cubic2d", scheme="saddle",
                                alpha=alpha, gamma=gamma, rho=rho, u0=u0,
                                max_iters=budget, stationarity_tol=tol)
        log = run_trajectory(config)
        label = f"saddle gamma={gamma:<4} rho={rho:<6}"
        print(f"{label:<34} {describe(log)}")

for u0 in starts:
    config = ScenarioConfig(problem_name="cubic2d", scheme="projected",
                            alpha=alpha, u0=u0, max_iters=budget,
                            stationarity_tol=tol)
    log = run_trajectory(config)
    assert log.status is RunStatus.CONVERGED
    print(f"{'projected (no dual rate)':<34} {describe(log)}")

print("\ngamma=5 stalls at either penalty weight; gamma=0.5 crawls home; ")
print("the projected controller converges without tuning a dual rate at all.")
