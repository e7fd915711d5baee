"""Fixed-step propagation of the non-Hermitian Schroedinger equation.

The right-hand side dc/dt = -i H(t) c is linear, so one classical RK4 step
from t_k to t_k + h is a fixed matrix that depends only on the phase of t_k
within the drive period.  Those matrices are assembled once per run and the
trajectory is produced by repeated matrix-vector products.  The arithmetic is
that of the textbook RK4 stages, just evaluated on the identity instead of on
a single vector.
"""

from __future__ import annotations

import io
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import linalg
from scipy.integrate import trapezoid
from scipy.optimize import linear_sum_assignment

from .model import DIM, LABELS, SystemParams, hamiltonian_parts, index_of, project

NORM_TOL = 1e-10
CONDITION_LIMIT = 1e8


class ConvergenceWarning(UserWarning):
    """Step halving changed sampled probabilities by more than the tolerance."""


class ExceptionalPointWarning(UserWarning):
    """Floquet multipliers are ill-conditioned (near-defective monodromy)."""


@dataclass(frozen=True)
class IntegratorConfig:
    steps_per_period: int = 32768
    t_end: float = 400.0
    sample_stride: int = 2048
    convergence_tol: float | None = None

    def __post_init__(self):
        if self.steps_per_period < 32:
            raise ValueError("steps_per_period must be at least 32")
        if not self.t_end > 0:
            raise ValueError("t_end must be positive")
        if self.sample_stride < 1:
            raise ValueError("sample_stride must be >= 1")

    def refined(self) -> IntegratorConfig:
        """Same sample times, half the step size."""
        return IntegratorConfig(
            2 * self.steps_per_period, self.t_end, 2 * self.sample_stride, None
        )


@dataclass
class Trajectory:
    """Sampled amplitudes over the full ten-state basis.

    States outside ``subspace`` (when one was used) carry exact zeros.
    """

    times: np.ndarray
    amplitudes: np.ndarray
    subspace: tuple[int, ...] | None = None
    convergence_error: float | None = field(default=None, compare=False)

    @property
    def probabilities(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2

    @property
    def total(self) -> np.ndarray:
        return self.probabilities.sum(axis=1)

    def probability(self, k: int | str) -> np.ndarray:
        """P_k(t) for a 1-based index or an occupation label."""
        if isinstance(k, str):
            k = index_of(k)
        return self.probabilities[:, k - 1]

    def to_csv(self, path=None) -> str:
        """Write ``t,P1..P10,Ptotal,Re_c1,Im_c1,...`` rows, 17 significant digits."""
        header = (
            ["t"]
            + [f"P{k}" for k in range(1, DIM + 1)]
            + ["Ptotal"]
            + [f"{part}_c{k}" for k in range(1, DIM + 1) for part in ("Re", "Im")]
        )
        probs = self.probabilities
        total = probs.sum(axis=1)
        ri = np.empty((len(self.times), 2 * DIM))
        ri[:, 0::2] = self.amplitudes.real
        ri[:, 1::2] = self.amplitudes.imag
        table = np.column_stack([self.times, probs, total, ri])
        buf = io.StringIO()
        buf.write(",".join(header) + "\n")
        for row in table:
            buf.write(",".join(_fmt(v) for v in row) + "\n")
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text, encoding="utf-8")
        return text


def _fmt(x: float) -> str:
    x = float(x)
    return "0" if x == 0 else f"{x:.17g}"


def read_trajectory_csv(path) -> Trajectory:
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    ri = data[:, 2 + DIM :]
    amps = ri[:, 0::2] + 1j * ri[:, 1::2]
    return Trajectory(times=data[:, 0], amplitudes=amps)


def make_state(spec, normalize: bool = True) -> np.ndarray:
    """Ten-component initial vector from a label or a ``{label: weight}`` mapping.

    Weights may be complex numbers or ``[re, im]`` pairs.
    """
    c = np.zeros(DIM, dtype=complex)
    if isinstance(spec, str):
        c[index_of(spec) - 1] = 1.0
        return c
    items = spec.items() if isinstance(spec, dict) else spec
    for label, weight in items:
        if isinstance(weight, (list, tuple)):
            weight = complex(weight[0], weight[1])
        c[index_of(label) - 1] += weight
    if normalize:
        norm = np.linalg.norm(c)
        if norm == 0:
            raise ValueError("initial state has zero norm")
        c /= norm
    return c


def _step_matrices(h0: np.ndarray, h1: np.ndarray, omega: float, n: int) -> np.ndarray:
    """RK4 propagators for the n steps of one period, stacked (n, d, d)."""
    d = h0.shape[0]
    h = 2 * math.pi / omega / n
    eye = np.eye(d, dtype=complex)
    phases = np.arange(2 * n + 1) * (math.pi / n)  # half-step grid over one period
    gen = -1j * (h0[None] + np.cos(phases)[:, None, None] * h1[None])
    a0, a_half, a1 = gen[0:-1:2], gen[1::2], gen[2::2]
    k1 = a0
    k2 = a_half @ (eye + (h / 2) * k1)
    k3 = a_half @ (eye + (h / 2) * k2)
    k4 = a1 @ (eye + h * k3)
    return eye + (h / 6) * (k1 + 2 * k2 + 2 * k3 + k4)


def _chain(steps: np.ndarray) -> np.ndarray:
    """Ordered product steps[-1] @ ... @ steps[0]."""
    m = steps[0]
    for s in steps[1:]:
        m = s @ m
    return m


def _subspace_parts(params: SystemParams, subspace):
    h0, h1 = hamiltonian_parts(params)
    if subspace is None:
        return h0, h1, np.arange(DIM)
    return project(h0, subspace), project(h1, subspace), np.asarray(subspace) - 1


def _propagate(params, psi0, cfg, subspace):
    h0, h1, idx = _subspace_parts(params, subspace)
    n = cfg.steps_per_period
    h = params.period / n
    steps = _step_matrices(h0, h1, params.omega, n)
    s = cfg.sample_stride
    n_steps = math.ceil(cfg.t_end / h - 1e-9)
    n_samples = math.ceil(n_steps / s)

    if n % s == 0:
        # one block per stride-aligned phase, all built in a single batched pass
        grouped = steps.reshape(n // s, s, *steps.shape[1:])
        table = grouped[:, 0]
        for j in range(1, s):
            table = grouped[:, j] @ table
        blocks = {j * s: table[j] for j in range(n // s)}
    else:
        blocks = {}

    def block(start: int) -> np.ndarray:
        key = start % n
        if key not in blocks:
            blocks[key] = _chain(steps[(key + np.arange(s)) % n])
        return blocks[key]

    out = np.zeros((n_samples + 1, DIM), dtype=complex)
    c = psi0[idx].astype(complex)
    out[0, idx] = c
    for i in range(1, n_samples + 1):
        c = block((i - 1) * s) @ c
        out[i, idx] = c
    times = np.arange(n_samples + 1) * (s * h)
    return Trajectory(times=times, amplitudes=out, subspace=None if subspace is None else tuple(subspace))


def integrate(
    params: SystemParams,
    psi0,
    cfg: IntegratorConfig = IntegratorConfig(),
    subspace=None,
    allow_unnormalized: bool = False,
) -> Trajectory:
    """Propagate ``psi0`` with fixed-step RK4 and sample every ``sample_stride`` steps.

    ``psi0`` is a ten-component vector (or anything ``make_state`` accepts).
    With ``subspace`` the equations are restricted to those 1-based indices;
    ``psi0`` must then vanish outside it.  If ``cfg.convergence_tol`` is set the
    run is repeated at half the step size; when the sampled probabilities move
    by more than the tolerance a ``ConvergenceWarning`` is issued and the
    refined trajectory is returned.
    """
    if not isinstance(psi0, np.ndarray):
        psi0 = make_state(psi0)
    psi0 = np.asarray(psi0, dtype=complex)
    if psi0.shape != (DIM,):
        raise ValueError(f"psi0 must have {DIM} components")
    if not allow_unnormalized and abs(np.linalg.norm(psi0) - 1) > NORM_TOL:
        raise ValueError("psi0 is not normalized (pass allow_unnormalized=True)")
    if subspace is not None:
        outside = np.ones(DIM, bool)
        outside[np.asarray(subspace) - 1] = False
        if np.any(psi0[outside] != 0):
            raise ValueError("psi0 has weight outside the requested subspace")

    traj = _propagate(params, psi0, cfg, subspace)
    if cfg.convergence_tol is None:
        return traj
    fine = _propagate(params, psi0, cfg.refined(), subspace)
    err = float(np.max(np.abs(fine.probabilities - traj.probabilities)))
    if err > cfg.convergence_tol:
        warnings.warn(
            f"step halving changed probabilities by {err:.3g} > {cfg.convergence_tol:g}",
            ConvergenceWarning,
            stacklevel=2,
        )
        fine.convergence_error = err
        return fine
    traj.convergence_error = err
    return traj


def time_avg_probability(traj: Trajectory, k: int | str, window=None) -> float:
    """Trapezoidal time average of P_k over ``window`` (default: whole run)."""
    t = traj.times
    if window is None:
        ta, tb = t[0], t[-1]
    else:
        ta, tb = window
    if not tb > ta:
        raise ValueError("empty averaging window")
    slack = 1e-9 * max(1.0, abs(t[-1]))
    if ta < t[0] - slack or tb > t[-1] + slack:
        raise ValueError("window extends beyond the trajectory")
    sel = (t >= ta - slack) & (t <= tb + slack)
    if sel.sum() < 2:
        raise ValueError("window contains fewer than two samples")
    ts, ps = t[sel], traj.probability(k)[sel]
    return float(trapezoid(ps, ts) / (ts[-1] - ts[0]))


def monodromy(params: SystemParams, subspace=None, cfg: IntegratorConfig = IntegratorConfig()) -> np.ndarray:
    """One-period propagator; column j is the state at T started from unit vector j."""
    h0, h1, _ = _subspace_parts(params, subspace)
    steps = _step_matrices(h0, h1, params.omega, cfg.steps_per_period)
    return _chain(steps)


def floquet_multipliers(m: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues of a monodromy matrix and their condition numbers."""
    lam, vl, vr = linalg.eig(m, left=True, right=True)
    vl = vl / np.linalg.norm(vl, axis=0)
    vr = vr / np.linalg.norm(vr, axis=0)
    overlap = np.abs(np.einsum("ij,ij->j", vl.conj(), vr))
    with np.errstate(divide="ignore"):
        cond = 1.0 / overlap
    return lam, cond


def _wrap(x, omega):
    """Map real parts into (-omega/2, omega/2]."""
    return omega / 2 - np.mod(omega / 2 - x, omega)


def quasienergies_from_monodromy(m: np.ndarray, omega: float, targets=None) -> np.ndarray:
    """E = i ln(lambda) / T with the real part folded into the fundamental zone.

    When ``targets`` (analytical quasienergies) are supplied, the numerical
    values are paired with them by minimal distance modulo omega and shifted by
    the multiple of omega closest to their partner; the result is returned in
    target order.
    """
    period = 2 * math.pi / omega
    lam, cond = floquet_multipliers(m)
    if np.any(cond > CONDITION_LIMIT):
        warnings.warn(
            f"Floquet multipliers ill-conditioned (max condition {np.max(cond):.3g})",
            ExceptionalPointWarning,
            stacklevel=2,
        )
    e = 1j * np.log(lam) / period
    e = _wrap(e.real, omega) + 1j * e.imag
    if targets is None:
        return np.sort_complex(e)
    targets = np.asarray(targets, dtype=complex)
    diff = e[:, None] - targets[None, :]
    real_gap = np.abs(_wrap(diff.real, omega))
    cost = np.hypot(real_gap, diff.imag)
    rows, cols = linear_sum_assignment(cost)
    out = np.empty(len(targets), dtype=complex)
    for r, c in zip(rows, cols):
        shift = np.round((targets[c].real - e[r].real) / omega) * omega
        out[c] = e[r] + shift
    return out


def state_labels(indices) -> list[str]:
    return [LABELS[i - 1] for i in indices]
