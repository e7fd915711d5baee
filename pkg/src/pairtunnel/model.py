"""Two-boson, two-site model with spin-orbit coupled hopping.

The Hilbert space is the fixed ten-state two-particle sector.  States are
labelled by occupation strings ``n1up n1dn n2up n2dn`` and indexed 1..10 in
the order used throughout the package (and in every exported file).
"""

from __future__ import annotations

import enum
import math
import warnings
from dataclasses import asdict, dataclass, replace
from functools import lru_cache

import numpy as np

# (n1up, n1dn, n2up, n2dn), 1-based index = position + 1
BASIS: tuple[tuple[int, int, int, int], ...] = (
    (1, 1, 0, 0),
    (2, 0, 0, 0),
    (0, 2, 0, 0),
    (0, 0, 1, 1),
    (0, 0, 2, 0),
    (0, 0, 0, 2),
    (1, 0, 1, 0),
    (1, 0, 0, 1),
    (0, 1, 1, 0),
    (0, 1, 0, 1),
)
LABELS: tuple[str, ...] = tuple("".join(map(str, s)) for s in BASIS)
DIM = len(BASIS)

# mode ordering for single-particle operators
_MODES = ((1, +1), (1, -1), (2, +1), (2, -1))  # (well, spin sign)

RESONANCE_GUARD = 1e-3


class ResonanceWarning(UserWarning):
    """2U_j sits within the guard distance of an integer multiple of omega."""


class ChannelError(ValueError):
    """Channel requested for parameters that do not isolate it."""


class Channel(str, enum.Enum):
    INTERWELL_SPIN_CONSERVING = "interwell_spin_conserving"
    INTERWELL_SPIN_FLIPPING = "interwell_spin_flipping"
    INTRAWELL_SPIN_FLIPPING = "intrawell_spin_flipping"


@dataclass(frozen=True)
class SystemParams:
    """Physical parameters, all in units of the reference frequency.

    ``alpha`` is dimensionless.  ``omega_z`` is the Zeeman drive amplitude and
    ``f`` the ac tilt amplitude; both oscillate as cos(omega t).  ``beta1`` is
    gain in well 1, ``beta2`` loss in well 2.
    """

    nu: float = 1.0
    alpha: float = 1.0
    delta: float = 0.0
    omega: float = 40.0
    omega_z: float = 40.0
    f: float = 0.0
    beta1: float = 0.0
    beta2: float = 0.0
    u1: float = 70.0
    u2: float = 0.0

    def __post_init__(self):
        for name, value in asdict(self).items():
            if not math.isfinite(value):
                raise ValueError(f"{name} must be finite, got {value}")
        if self.omega <= 0:
            raise ValueError("omega must be positive")
        if self.nu < 0 or self.beta1 < 0 or self.beta2 < 0:
            raise ValueError("nu, beta1 and beta2 must be non-negative")

    @property
    def eps(self) -> float:
        return self.nu / self.omega

    @property
    def theta(self) -> float:
        return self.delta / self.omega

    @property
    def period(self) -> float:
        return 2 * math.pi / self.omega

    def replace(self, **changes) -> SystemParams:
        return replace(self, **changes)

    def to_dict(self) -> dict[str, float]:
        return asdict(self)

    def resonance_margin(self) -> float:
        """Smallest distance of 2U1 or 2U2 from m*omega, m = 0..M."""
        m_max = 1 + math.floor(2 * max(self.u1, self.u2) / self.omega)
        m = np.arange(m_max + 1) * self.omega
        return float(min(np.min(np.abs(2 * self.u1 - m)), np.min(np.abs(2 * self.u2 - m))))

    def check_resonance(self) -> bool:
        """Warn (never raise) when the perturbative expansion is near a resonance."""
        margin = self.resonance_margin()
        if margin < RESONANCE_GUARD * self.omega:
            warnings.warn(
                f"2U_j within {margin:.3g} of a multiple of omega={self.omega}",
                ResonanceWarning,
                stacklevel=2,
            )
            return False
        return True


def index_of(label: str) -> int:
    """1-based basis index of an occupation label such as ``'0020'``."""
    try:
        return LABELS.index(label) + 1
    except ValueError:
        raise KeyError(f"unknown basis label {label!r}") from None


def basis_vector(label: str) -> np.ndarray:
    c = np.zeros(DIM, dtype=complex)
    c[index_of(label) - 1] = 1.0
    return c


def spin_rotation(alpha: float) -> np.ndarray:
    """exp(-i pi alpha sigma_y) as a real 2x2 matrix."""
    c, s = math.cos(math.pi * alpha), math.sin(math.pi * alpha)
    # integer / half-integer alpha must give exactly vanishing entries
    c = 0.0 if abs(c) < 1e-15 else c
    s = 0.0 if abs(s) < 1e-15 else s
    return np.array([[c, -s], [s, c]])


@lru_cache(maxsize=None)
def _transition_tensor() -> np.ndarray:
    """T[m, n] = matrix of a_m^dagger a_n in the ten-state basis."""
    lookup = {s: i for i, s in enumerate(BASIS)}
    T = np.zeros((4, 4, DIM, DIM))
    for col, state in enumerate(BASIS):
        for n in range(4):
            if state[n] == 0:
                continue
            amp = math.sqrt(state[n])
            lowered = list(state)
            lowered[n] -= 1
            for m in range(4):
                raised = list(lowered)
                raised[m] += 1
                T[m, n, lookup[tuple(raised)], col] = amp * math.sqrt(raised[m])
    T.setflags(write=False)
    return T


def single_particle_static(params: SystemParams) -> np.ndarray:
    """Time-independent 4x4 single-particle matrix (hopping, Raman, gain/loss)."""
    h = np.zeros((4, 4), dtype=complex)
    hop = -params.nu * spin_rotation(params.alpha)
    h[0:2, 2:4] = hop
    h[2:4, 0:2] = hop.conj().T
    h[0, 1] = h[1, 0] = params.delta / 2
    h[2, 3] = h[3, 2] = params.delta / 2
    h[0, 0] = h[1, 1] = 1j * params.beta1
    h[2, 2] = h[3, 3] = -1j * params.beta2
    return h


def single_particle_drive(params: SystemParams) -> np.ndarray:
    """Coefficient of cos(omega t) in the single-particle matrix (diagonal)."""
    return np.diag(
        [
            spin * params.omega_z + (params.f if well == 1 else -params.f)
            for well, spin in _MODES
        ]
    ).astype(complex)


def interaction_energies(params: SystemParams) -> np.ndarray:
    """Diagonal of the on-site interaction with both spin orderings summed."""
    energies = np.zeros(DIM)
    for i, (a, b, c, d) in enumerate(BASIS):
        for up, dn in ((a, b), (c, d)):
            energies[i] += params.u1 * (up * (up - 1) + dn * (dn - 1))
            energies[i] += 2 * params.u2 * up * dn
    return energies


def hamiltonian_parts(params: SystemParams) -> tuple[np.ndarray, np.ndarray]:
    """Split H(t) = H0 + cos(omega t) * H1 in the ten-state basis."""
    T = _transition_tensor()
    h0 = np.einsum("mn,mnij->ij", single_particle_static(params), T)
    h0 = h0 + np.diag(interaction_energies(params))
    h1 = np.einsum("mn,mnij->ij", single_particle_drive(params), T)
    return h0, h1


def build_hamiltonian(params: SystemParams, t: float) -> np.ndarray:
    h0, h1 = hamiltonian_parts(params)
    return h0 + math.cos(params.omega * t) * h1


def _is_integer(x: float, tol: float = 1e-12) -> bool:
    return abs(x - round(x)) < tol


CHANNEL_SUBSPACES = {
    Channel.INTERWELL_SPIN_CONSERVING: (5, 7, 2),
    Channel.INTERWELL_SPIN_FLIPPING: (5, 9, 3),
    Channel.INTRAWELL_SPIN_FLIPPING: (5, 4, 6, 2, 1, 3),
}

UNPAIRED_STATE = {
    Channel.INTERWELL_SPIN_CONSERVING: 7,
    Channel.INTERWELL_SPIN_FLIPPING: 9,
}


def validate_channel(channel: Channel, params: SystemParams) -> None:
    channel = Channel(channel)
    if channel is Channel.INTERWELL_SPIN_CONSERVING:
        ok = _is_integer(params.alpha) and params.delta == 0
        need = "integer alpha and delta = 0"
    elif channel is Channel.INTERWELL_SPIN_FLIPPING:
        ok = _is_integer(params.alpha - 0.5) and params.delta == 0
        need = "half-integer alpha and delta = 0"
    else:
        # the rho_2 suppression is checked by the caller, it needs the couplings
        ok = _is_integer(params.alpha)
        need = "integer alpha"
    if not ok:
        raise ChannelError(
            f"{channel.value} requires {need} (alpha={params.alpha}, delta={params.delta})"
        )


def channel_subspace(channel: Channel, params: SystemParams | None = None) -> tuple[int, ...]:
    """1-based basis indices spanned by a channel, in effective-amplitude order.

    Interwell channels start from ``|0020>``; the intrawell channel carries a
    superposition of doublons in both wells.  When ``params`` is given the
    channel preconditions are validated.
    """
    channel = Channel(channel)
    if params is not None:
        validate_channel(channel, params)
    return CHANNEL_SUBSPACES[channel]


def project(matrix: np.ndarray, indices) -> np.ndarray:
    idx = np.asarray(indices) - 1
    return matrix[np.ix_(idx, idx)]
