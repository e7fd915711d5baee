"""Second-order effective dynamics and analytical Floquet quasienergies.

Each channel reduces to a constant non-Hermitian matrix ``K`` acting on the
slow amplitudes A (``i dA/dt = K A``).  The drive enters only through two
Bessel sums per channel: a direct coupling (self-energy) and a cross
coupling (pair exchange).
"""

from __future__ import annotations

import cmath
import enum
import io
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import linalg, special

from .model import (
    DIM,
    Channel,
    SystemParams,
    hamiltonian_parts,
    interaction_energies,
)
from .propagator import Trajectory

EPS_DEN = 1e-6
TAIL_TOL = 1e-14

# slow amplitudes in the order used by effective_rhs (1-based basis indices)
EFFECTIVE_ORDER = {
    Channel.INTERWELL_SPIN_CONSERVING: (5, 7, 2),
    Channel.INTERWELL_SPIN_FLIPPING: (5, 9, 3),
    Channel.INTRAWELL_SPIN_FLIPPING: (1, 2, 3, 4, 5, 6),
}


class ResonanceError(ValueError):
    """A retained Bessel-sum denominator p + detuning is (numerically) zero."""


class Verdict(str, enum.Enum):
    STABLE_ALL_REAL = "StableAllReal"
    STABLE_DISSIPATIVE = "StableDissipative"
    UNSTABLE = "Unstable"


def bessel_j(order: int, x: float) -> float:
    """J_order(x); negative orders via J_{-p} = (-1)^p J_p."""
    order = int(order)
    if order < 0:
        sign = -1.0 if order % 2 else 1.0
        return sign * float(special.jv(-order, x))
    return float(special.jv(order, x))


@dataclass(frozen=True)
class EffectiveCouplings:
    """Direct (``rho_a``) and cross (``rho_b``) couplings of one channel.

    ``rho_a``/``rho_b`` are (rho1, rho2), (rho3, rho4) or (rho5, rho6) for the
    spin-conserving, spin-flipping and intrawell channels respectively.
    """

    channel: Channel
    rho_a: float
    rho_b: float
    truncation_order: int
    argument: float
    detuning: float


def bessel_argument(channel: Channel, params: SystemParams) -> tuple[float, float]:
    """(Bessel argument, denominator offset) of a channel's coupling sums."""
    channel = Channel(channel)
    w = params.omega
    if channel is Channel.INTERWELL_SPIN_CONSERVING:
        return 2 * params.f / w, 2 * params.u1 / w
    if channel is Channel.INTERWELL_SPIN_FLIPPING:
        return 2 * params.f / w - 2 * params.omega_z / w, 2 * params.u1 / w
    return 2 * params.omega_z / w, 2 * params.u1 / w - 2 * params.u2 / w


def bessel_sums(argument: float, detuning: float) -> tuple[float, float, int]:
    """sum_p J_p^2/(p+d) and sum_p J_p J_-p/(p+d) over a symmetric window.

    The window |p| <= P starts at ceil(|x|) + 40 and grows by 10 until the
    outermost terms fall below the tail bound.
    """
    p_max = math.ceil(abs(argument)) + 40
    while True:
        p = np.arange(-p_max, p_max + 1)
        den = p + detuning
        close = np.abs(den) < EPS_DEN
        if np.any(close):
            raise ResonanceError(
                f"p + {detuning:.10g} vanishes at p = {int(p[close][0])} (guard {EPS_DEN:g})"
            )
        jp = special.jv(p, argument)
        sq = jp * jp / den
        # J_{-p} J_p = (-1)^p J_p^2
        cross = np.where(p % 2 == 0, sq, -sq)
        rho_a = float(np.sum(sq))
        rho_b = float(np.sum(cross))
        tail = max(abs(sq[0]), abs(sq[-1]))
        if tail < TAIL_TOL * (1 + max(abs(rho_a), abs(rho_b))):
            return rho_a, rho_b, p_max
        p_max += 10


def couplings(channel: Channel, params: SystemParams) -> EffectiveCouplings:
    channel = Channel(channel)
    arg, det = bessel_argument(channel, params)
    rho_a, rho_b, order = bessel_sums(arg, det)
    return EffectiveCouplings(channel, rho_a, rho_b, order, arg, det)


def effective_matrix(channel: Channel, params: SystemParams, rho: EffectiveCouplings | None = None) -> np.ndarray:
    """Constant matrix K of the slow dynamics, i dA/dt = K A, in EFFECTIVE_ORDER."""
    channel = Channel(channel)
    rho = rho or couplings(channel, params)
    a, b = rho.rho_a, rho.rho_b
    b1, b2 = params.beta1, params.beta2
    if channel is not Channel.INTRAWELL_SPIN_FLIPPING:
        g = 2 * params.nu**2 / params.omega
        return np.array(
            [
                [g * a - 2j * b2, 0, g * b],
                [0, -2 * g * a + 1j * (b1 - b2), 0],
                [g * b, 0, g * a + 2j * b1],
            ],
            dtype=complex,
        )
    s = params.delta**2 / params.omega
    k = np.zeros((6, 6), dtype=complex)
    for off, gain in ((0, 2j * b1), (3, -2j * b2)):
        k[off, off] = -s * a + gain
        k[off + 1, off + 1] = k[off + 2, off + 2] = s * a / 2 + gain
        k[off + 1, off + 2] = k[off + 2, off + 1] = s * b / 2
    return k


def effective_rhs(channel: Channel, params: SystemParams, amplitudes) -> np.ndarray:
    """dA/dt of the second-order equations; ``amplitudes`` in EFFECTIVE_ORDER."""
    channel = Channel(channel)
    amps = np.asarray(amplitudes, dtype=complex)
    expected = len(EFFECTIVE_ORDER[channel])
    if amps.shape != (expected,):
        raise ValueError(f"{channel.value} expects {expected} amplitudes, got shape {amps.shape}")
    return -1j * effective_matrix(channel, params) @ amps


def effective_trajectory(channel: Channel, params: SystemParams, psi0: np.ndarray, times) -> Trajectory:
    """Solve the effective equations exactly at ``times`` (uniformly spaced).

    The returned amplitudes include the zeroth-order phase of each state,
    exp(-i (E_int t + d sin(omega t)/omega)), so they are directly comparable
    with the exact c_k; the probabilities are |A_k|^2.
    """
    channel = Channel(channel)
    order = np.asarray(EFFECTIVE_ORDER[channel]) - 1
    times = np.asarray(times, dtype=float)
    k = effective_matrix(channel, params)
    a = np.asarray(psi0, dtype=complex)[order]
    amps = np.zeros((len(times), DIM), dtype=complex)
    amps[0, order] = a
    if len(times) > 1:
        dt = times[1] - times[0]
        step = linalg.expm(-1j * k * dt)
        for i in range(1, len(times)):
            a = step @ a
            amps[i, order] = a
    _, h1 = hamiltonian_parts(params)
    bare = interaction_energies(params)[order]
    drive = np.real(np.diag(h1))[order]
    phase = np.outer(times, bare) + np.outer(np.sin(params.omega * times), drive) / params.omega
    amps[:, order] *= np.exp(-1j * phase)
    return Trajectory(times=times, amplitudes=amps, subspace=tuple(int(i) + 1 for i in order))


@dataclass(frozen=True)
class QuasienergySpectrum:
    channel: Channel
    energies: tuple[complex, ...]
    verdict: Verdict
    zeta_or_xi: complex | None = None
    couplings: EffectiveCouplings | None = None

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        buf.write("channel,E_re,E_im\n")
        for e in self.energies:
            buf.write(f"{self.channel.value},{e.real:.17g},{e.imag:.17g}\n")
        z = self.zeta_or_xi
        buf.write("zeta_re,zeta_im,verdict\n")
        if z is None:
            buf.write(f",,{self.verdict.value}\n")
        else:
            buf.write(f"{z.real:.17g},{z.imag:.17g},{self.verdict.value}\n")
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text, encoding="utf-8")
        return text


def stability_tolerance(params: SystemParams) -> float:
    return 1e-10 * max(1.0, params.omega)


def classify(energies, tol: float) -> Verdict:
    im = np.imag(np.asarray(energies, dtype=complex))
    real = np.abs(im) < tol
    if np.all(real):
        return Verdict.STABLE_ALL_REAL
    if np.any(real) and np.all(im[~real] < -tol):
        return Verdict.STABLE_DISSIPATIVE
    return Verdict.UNSTABLE


def discriminant(coupling: float, params: SystemParams) -> complex:
    """sqrt((2 nu^2 rho_b / omega)^2 - (beta1 + beta2)^2), principal branch."""
    radicand = (2 * params.nu**2 * coupling / params.omega) ** 2 - (params.beta1 + params.beta2) ** 2
    return cmath.sqrt(radicand)


def quasienergies(channel: Channel, params: SystemParams) -> QuasienergySpectrum:
    """Closed-form quasienergies of a channel with a stability verdict.

    Interwell channels give three energies (unpaired, then the doublon pair
    -zeta/+zeta); the intrawell channel delegates to ``intrawell_spectrum``.
    """
    channel = Channel(channel)
    if channel is Channel.INTRAWELL_SPIN_FLIPPING:
        return intrawell_spectrum(params)
    rho = couplings(channel, params)
    g = 2 * params.nu**2 / params.omega
    gl = 1j * (params.beta1 - params.beta2)
    z = discriminant(rho.rho_b, params)
    pair = 2 * params.u1 + gl + g * rho.rho_a
    energies = (gl - 2 * g * rho.rho_a, pair - z, pair + z)
    verdict = classify(energies, stability_tolerance(params))
    return QuasienergySpectrum(channel, energies, verdict, z, rho)


def intrawell_spectrum(params: SystemParams) -> QuasienergySpectrum:
    rho = couplings(Channel.INTRAWELL_SPIN_FLIPPING, params)
    s = params.delta**2 / params.omega
    r5, r6 = rho.rho_a, rho.rho_b
    energies = []
    for gain in (2j * params.beta1, -2j * params.beta2):
        energies += [
            2 * params.u2 + gain - s * r5,
            2 * params.u1 + gain + s / 2 * (r5 - r6),
            2 * params.u1 + gain + s / 2 * (r5 + r6),
        ]
    verdict = classify(energies, stability_tolerance(params))
    return QuasienergySpectrum(Channel.INTRAWELL_SPIN_FLIPPING, tuple(energies), verdict, None, rho)


def channel_quasienergies_numeric(channel: Channel, params: SystemParams) -> np.ndarray:
    """Eigenvalues of K plus bare energies: a matrix route to the closed forms."""
    channel = Channel(channel)
    order = np.asarray(EFFECTIVE_ORDER[channel]) - 1
    k = effective_matrix(channel, params) + np.diag(interaction_energies(params)[order])
    return np.linalg.eigvals(k)
