"""Open quantum random walks on Z^d and their central limit theorem."""

from oqrw.channel import (
    apply_adjoint,
    apply_channel,
    cesaro_distance,
    invariant_state,
    spectral_diagnostics,
    superoperator,
)
from oqrw.clt import (
    CLTReport,
    analyze,
    covariance,
    drift,
    record_clt,
    solve_poisson,
    variance_1d,
    walk_clt,
)
from oqrw.operators import (
    RecordModel,
    WalkModel,
    devectorize,
    kraus_from_unitary,
    validate_kraus,
    vectorize,
)

__version__ = "0.1.0"

__all__ = [
    "CLTReport",
    "RecordModel",
    "WalkModel",
    "analyze",
    "apply_adjoint",
    "apply_channel",
    "cesaro_distance",
    "covariance",
    "devectorize",
    "drift",
    "invariant_state",
    "kraus_from_unitary",
    "record_clt",
    "solve_poisson",
    "spectral_diagnostics",
    "superoperator",
    "validate_kraus",
    "variance_1d",
    "vectorize",
    "walk_clt",
]
