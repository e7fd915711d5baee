"""Correlated pair tunneling of two spin-orbit-coupled bosons in a driven,
non-Hermitian double well: exact ten-state dynamics, second-order effective
channel models, analytical Floquet quasienergies and stability scans."""

__version__ = "0.1.0"

from .model import (  # noqa: E402
    BASIS,
    LABELS,
    Channel,
    ChannelError,
    ResonanceWarning,
    SystemParams,
    build_hamiltonian,
    channel_subspace,
)
from .propagator import (  # noqa: E402
    IntegratorConfig,
    Trajectory,
    integrate,
    make_state,
    monodromy,
    quasienergies_from_monodromy,
    time_avg_probability,
)
from .effective import (  # noqa: E402
    EffectiveCouplings,
    QuasienergySpectrum,
    ResonanceError,
    Verdict,
    bessel_j,
    couplings,
    effective_rhs,
    effective_trajectory,
    intrawell_spectrum,
    quasienergies,
)
from .atlas import (  # noqa: E402
    Axis,
    GridSpec,
    NoSignChange,
    StabilityMap,
    scan,
    solve_balance_f,
    solve_rho_zero,
    unpaired_average_curve,
)
