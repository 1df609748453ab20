"""Exact input-output model of photon-pair generation in coupled microring resonators.

Modules:

* :mod:`ringpair.core` -- mode, pump and system parameters.
* :mod:`ringpair.transfer` -- closed-form bus and intracavity transfer matrices.
* :mod:`ringpair.commutators` -- noise-operator commutators.
* :mod:`ringpair.observables` -- biphoton state, pair rates, CAR, heralding efficiency.
* :mod:`ringpair.highq` -- high-Q (Langevin) limit forms and convergence reports.
* :mod:`ringpair.sweep` -- configuration parsing, sweeps and dataset emission.
* :mod:`ringpair.verify` -- the invariant suite behind ``ringpair verify``.
"""

__version__ = "0.1.0"

from .commutators import CommutatorSet, commutators_closed_form, solve_commutators_numeric
from .core import ModeLabel, ModeParams, Process, PumpConfig, SystemConfig
from .errors import (ConfigError, ConfigWarning, HighQRegimeWarning, NumericalError, PoleError, RingPairError,
                     ValidationError, WeakPumpWarning)
from .observables import RateRecord, biphoton_state, closed_form_car, closed_form_herald, rate_record
from .transfer import Location, TransferPair, intracavity_transfer, output_transfer

__all__ = [
    "__version__",
    "CommutatorSet", "commutators_closed_form", "solve_commutators_numeric",
    "ModeLabel", "ModeParams", "Process", "PumpConfig", "SystemConfig",
    "ConfigError", "ConfigWarning", "HighQRegimeWarning", "NumericalError", "PoleError", "RingPairError",
    "ValidationError", "WeakPumpWarning",
    "RateRecord", "biphoton_state", "closed_form_car", "closed_form_herald", "rate_record",
    "Location", "TransferPair", "intracavity_transfer", "output_transfer",
]
