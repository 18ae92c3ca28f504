"""Hyperbolic-latent predictive world modeling with energy-based planning.

Modules: gradengine (tape autodiff), manifold (constant-curvature ball
geometry), worldmodel (encoder + latent dynamics), losses (training
objectives), planner (cross-entropy method), envs (synthetic worlds with
exact oracles), metrics, diagnostics, runtime (training/orchestration),
cli.
"""

__version__ = "0.1.0"
