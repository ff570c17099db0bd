from __future__ import annotations


class SolverError(RuntimeError):
    """Numerical failure inside the solver stack (validation problems raise ValueError)."""


class IntegrationError(SolverError):
    pass


class BisectionError(SolverError):
    pass


class DegenerateMultiplierError(SolverError):
    pass
