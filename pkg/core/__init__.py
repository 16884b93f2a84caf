# Simulator core: geometry, kernels, solvers, time stepping and run control.
