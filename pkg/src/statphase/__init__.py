"""Time-frequency stationary phase approximation with auditory filter banks."""

from .filterbank import (
    Channel,
    FilterBank,
    FilterBankSpec,
    PrototypeFilter,
    build_filterbank,
    map_mu_omega,
)

__version__ = "0.1.0"
