"""Structure-preserving Cahn-Hilliard solver with a verification harness.

Core subpackages: grid calculus (``grid``), thermodynamics (``thermo``),
weighted elliptic solves and dual norms (``elliptic``), time stepping
(``stepper``), trajectory diagnostics (``diagnostics``), stationary states
(``steady``), ODE-bound and inequality certification (``odebounds``,
``inequalities``), configuration and persistence (``config``, ``fileio``),
and the HTTP service plus thin CLI (``service``, ``cli``).
"""

__version__ = "0.1.0"
