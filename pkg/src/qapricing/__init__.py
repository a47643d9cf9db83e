"""Discrete-state asset pricing with classical and simulated HHL solvers.

Modules:

- ``markov``: quadrature discretisation of AR(1) processes, shock extension,
  ergodic distributions.
- ``models``: pricing systems for CRRA, unit-IES recursive, stochastic
  volatility and rare-disaster models.
- ``estimation``: Kalman-filter likelihood, MLE, SDF calibration, parameter
  ensembles.
- ``qsolver``: statevector simulator, ideal and gate-level HHL, diagnostics.
- ``measurement``: pricing-error states, measurement operators, ambiguity scans.
- ``cli``: configuration, I/O and the ``qapricing`` command.
"""

from ._backend import BACKEND
from .errors import ConfigError, DataError, NumericalError, QapError

__version__ = "0.1.0"

__all__ = ["BACKEND", "ConfigError", "DataError", "NumericalError", "QapError", "__version__"]
