"""Drive a plant's steady state to the constrained optimum.

The controller never sees the plant equations: each iteration measures the
output, solves a small projection QP around the measurement, and nudges the
input.  Run from a few corners of the input set and watch every trajectory
land on the same KKT point.
"""

import numpy as np

from fbopt import (RunStatus, ScenarioConfig, builtin_example, eval_plant,
                   feedback_step, kkt_point_residual, run_trajectory)

problem = builtin_example()
alpha = 0.01

starts = [np.array(u0) for u0 in
          [(-1.0, -1.0), (1.0, -1.0), (-1.0, 1.0), (1.0, 1.0), (0.0, 0.0)]]

print(f"problem {problem.name}: {problem.input_dim} inputs, "
      f"{problem.output_dim} output, step size {alpha}")
print(f"{'start':>14}  {'iters':>5}  {'final input':>18}  "
      f"{'output':>8}  {'KKT residual':>12}")

for u0 in starts:
    config = ScenarioConfig(problem_name=problem.name, scheme="projected",
                            alpha=alpha, u0=u0, max_iters=100_000,
                            stationarity_tol=1e-6)
    log = run_trajectory(config)
    assert log.status is RunStatus.CONVERGED
    u_end = log.u[-1]
    y_end = eval_plant(problem.plant, u_end)

    # the converged step's multipliers certify first-order optimality
    step = feedback_step(problem, u_end, alpha)
    kkt = kkt_point_residual(problem, u_end, step.nu, step.mu)

    print(f"({u0[0]:5.2f},{u0[1]:5.2f})  {log.iters[-1]:5d}  "
          f"({u_end[0]:7.4f},{u_end[1]:7.4f})  {y_end[0]:8.4f}  {kkt:12.2e}")

print("\nevery start converges to u = (-0.5, 1.0) with output on its "
      "lower bound,")
print("certified by a KKT residual at solver precision.")
