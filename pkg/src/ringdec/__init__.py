"""Thin spectrum and spontaneous decoherence of oscillators on a ring."""

from .constants import CODATA2018, PhysicalConstants
from .model import (
    ModeTable,
    RingParams,
    build_mode_table,
    build_transform_matrix,
    mode_frequencies,
    relative_periods,
    wave_vectors,
)
from .specfun import (
    SeriesControl,
    adaptive_quad,
    bessel_j,
    erfi,
    erfi_scaled_envelope,
    kummer_1f1,
    kummer_1f1_dz,
)
from .spectrum import (
    LinearizedCoeffs,
    ModeEigenProblem,
    ModeLevels,
    SolverConfig,
    ThinSpectrum,
    assemble_thin_spectrum,
    eigencondition,
    fd_bloch_oracle,
    linearize,
    mode_energy,
    solve_mode_levels,
)
from .decoherence import (
    DecoherenceTrace,
    RegimeDiagnostics,
    ThermalEnsemble,
    build_ensemble,
    decoherence_bessel,
    decoherence_erfi,
    decoherence_exact,
    delta_E,
    first_decay_time,
    regime,
)

__version__ = "0.1.0"
