"""Stability landscapes, resonance curves and balance-condition solvers."""

from __future__ import annotations

import io
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.optimize import brentq

from .effective import (
    ResonanceError,
    Verdict,
    couplings,
    quasienergies,
)
from .model import LABELS, UNPAIRED_STATE, Channel, SystemParams, channel_subspace
from .propagator import IntegratorConfig, integrate, make_state, time_avg_probability

PBAR_THRESHOLD = 0.02
G_TOL = 1e-12
COARSE_POINTS = 400
WORKERS_ENV = "PAIRTUNNEL_WORKERS"


class NoSignChange(ValueError):
    """The target function keeps one sign over the whole bracket."""


class SolverError(RuntimeError):
    """Root refinement did not reach the requested residual."""


def workers_from_env(default: int = 1) -> int:
    try:
        return max(1, int(os.environ.get(WORKERS_ENV, default)))
    except ValueError:
        return default


def _map(fn, items, workers: int):
    # results come back in input order whatever the schedule
    if workers <= 1 or len(items) < 2:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items, chunksize=max(1, len(items) // (4 * workers))))


def set_axis(params: SystemParams, axis: str, value: float) -> SystemParams:
    """Set a parameter addressed either by field name or as ``2u1/omega`` style ratio."""
    if "/" in axis:
        num, den = axis.split("/")
        if den != "omega" or not num.startswith("2"):
            raise ValueError(f"unsupported axis {axis!r}")
        name = num[1:]
        return params.replace(**{name: value * params.omega / 2})
    if axis not in params.to_dict():
        raise ValueError(f"unknown parameter {axis!r}")
    return params.replace(**{axis: value})


def get_axis(params: SystemParams, axis: str) -> float:
    if "/" in axis:
        name = axis.split("/")[0][1:]
        return 2 * getattr(params, name) / params.omega
    return getattr(params, axis)


@dataclass(frozen=True)
class Axis:
    param: str
    lo: float
    hi: float
    count: int

    def __post_init__(self):
        if self.count < 2:
            raise ValueError("axis count must be >= 2")
        if not (math.isfinite(self.lo) and math.isfinite(self.hi)):
            raise ValueError("axis range must be finite")

    @property
    def values(self) -> np.ndarray:
        return np.linspace(self.lo, self.hi, self.count)


@dataclass(frozen=True)
class GridSpec:
    fixed: SystemParams
    channel: Channel = Channel.INTERWELL_SPIN_CONSERVING
    x_axis: Axis = Axis("2u1/omega", 0.2, 4.0, 400)
    y_axis: Axis = Axis("2f/omega", 0.0, 8.0, 400)

    def __post_init__(self):
        if self.x_axis.param == self.y_axis.param:
            raise ValueError("grid axes must address different parameters")


@dataclass
class StabilityMap:
    """Im(zeta) (or Im(xi)) on a grid; arrays are indexed [iy, ix]."""

    grid: GridSpec
    values: np.ndarray
    verdicts: np.ndarray
    resonance_mask: np.ndarray

    def stable(self) -> np.ndarray:
        return (self.verdicts != "") & (self.verdicts != Verdict.UNSTABLE.value)

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        buf.write("x,y,value,verdict,masked\n")
        xs, ys = self.grid.x_axis.values, self.grid.y_axis.values
        for iy, y in enumerate(ys):
            for ix, x in enumerate(xs):
                if self.resonance_mask[iy, ix]:
                    buf.write(f"{x:.17g},{y:.17g},,,1\n")
                else:
                    buf.write(f"{x:.17g},{y:.17g},{self.values[iy, ix]:.17g},{self.verdicts[iy, ix]},0\n")
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text, encoding="utf-8")
        return text


def _cell(args):
    channel, params = args
    try:
        spec = quasienergies(channel, params)
    except ResonanceError:
        return None
    if spec.zeta_or_xi is None:
        value = max(e.imag for e in spec.energies)
    else:
        value = spec.zeta_or_xi.imag
    return value, spec.verdict.value


def scan(spec: GridSpec, workers: int | None = None) -> StabilityMap:
    """Evaluate the analytical stability discriminant on every grid cell.

    Cells where a Bessel-sum denominator vanishes are masked rather than
    aborting the scan.
    """
    workers = workers_from_env() if workers is None else workers
    xs, ys = spec.x_axis.values, spec.y_axis.values
    jobs = []
    for y in ys:
        row = set_axis(spec.fixed, spec.y_axis.param, y)
        for x in xs:
            jobs.append((spec.channel, set_axis(row, spec.x_axis.param, x)))
    results = _map(_cell, jobs, workers)
    shape = (len(ys), len(xs))
    values = np.full(shape, np.nan)
    verdicts = np.full(shape, "", dtype=object)
    mask = np.zeros(shape, dtype=bool)
    for n, res in enumerate(results):
        iy, ix = divmod(n, len(xs))
        if res is None:
            mask[iy, ix] = True
        else:
            values[iy, ix], verdicts[iy, ix] = res
    return StabilityMap(spec, values, verdicts, mask)


@dataclass(frozen=True)
class CurvePoint:
    x: float
    pbar: float
    above_threshold: bool


def curve_to_csv(points, path=None) -> str:
    buf = io.StringIO()
    buf.write("x,Pbar,above_threshold\n")
    for pt in points:
        buf.write(f"{pt.x:.17g},{pt.pbar:.17g},{int(pt.above_threshold)}\n")
    text = buf.getvalue()
    if path is not None:
        Path(path).write_text(text, encoding="utf-8")
    return text


def _curve_point(args):
    channel, params, k, cfg = args
    sub = channel_subspace(channel, params)
    traj = integrate(params, make_state(LABELS[sub[0] - 1]), cfg, subspace=sub)
    return time_avg_probability(traj, k)


def unpaired_average_curve(
    channel: Channel,
    fixed: SystemParams,
    sweep: Axis,
    k_unpaired: int | None = None,
    cfg: IntegratorConfig = IntegratorConfig(),
    workers: int | None = None,
) -> list[CurvePoint]:
    """Full-window average of the unpaired-state probability along a sweep.

    Uses exact propagation from ``|0020>`` within the channel subspace.
    """
    channel = Channel(channel)
    if k_unpaired is None:
        k_unpaired = UNPAIRED_STATE[channel]
    workers = workers_from_env() if workers is None else workers
    xs = sweep.values
    jobs = [(channel, set_axis(fixed, sweep.param, x), k_unpaired, cfg) for x in xs]
    pbars = _map(_curve_point, jobs, workers)
    return [CurvePoint(float(x), float(pb), bool(pb > PBAR_THRESHOLD)) for x, pb in zip(xs, pbars)]


def peak_width(points, threshold: float = PBAR_THRESHOLD, center: float | None = None) -> float:
    """Width of the contiguous above-threshold region around a peak.

    The peak is the global maximum, or with ``center`` the local maximum
    reached by climbing from the sample nearest ``center``.  Edges are located
    by linear interpolation between samples.
    """
    xs = np.array([p.x for p in points])
    ys = np.array([p.pbar for p in points])
    if center is None:
        i = int(np.argmax(ys))
    else:
        i = int(np.argmin(np.abs(xs - center)))
        while True:
            nbrs = [j for j in (i - 1, i + 1) if 0 <= j < len(ys) and ys[j] > ys[i]]
            if not nbrs:
                break
            i = max(nbrs, key=lambda j: ys[j])
    if ys[i] <= threshold:
        return 0.0
    lo = i
    while lo > 0 and ys[lo - 1] > threshold:
        lo -= 1
    hi = i
    while hi < len(ys) - 1 and ys[hi + 1] > threshold:
        hi += 1

    def cross(a, b):
        return xs[a] + (threshold - ys[a]) * (xs[b] - xs[a]) / (ys[b] - ys[a])

    left = cross(lo - 1, lo) if lo > 0 else xs[0]
    right = cross(hi, hi + 1) if hi < len(ys) - 1 else xs[-1]
    return float(right - left)


def find_roots(fn, bracket, points: int = COARSE_POINTS) -> list[float]:
    """All sign-change roots of ``fn`` found on a coarse scan of ``bracket``.

    Samples that raise ``ResonanceError`` are skipped; sign changes across a
    pole are discarded by the residual check.
    """
    lo, hi = map(float, bracket)
    if not hi > lo:
        raise ValueError("bracket must satisfy lo < hi")
    xs = np.linspace(lo, hi, points + 1)
    vals = []
    for x in xs:
        try:
            vals.append(fn(x))
        except ResonanceError:
            vals.append(np.nan)
    vals = np.array(vals)
    roots = []
    for i in range(points):
        a, b = vals[i], vals[i + 1]
        if not (np.isfinite(a) and np.isfinite(b)):
            continue
        if a == 0:
            roots.append(float(xs[i]))
            continue
        if a * b > 0:
            continue
        if b == 0:
            continue  # picked up as the left end of the next interval
        try:
            root = brentq(fn, xs[i], xs[i + 1], xtol=1e-14, rtol=4 * np.finfo(float).eps, maxiter=200)
        except RuntimeError as exc:
            raise SolverError(f"no convergence on [{xs[i]}, {xs[i + 1]}]: {exc}") from exc
        if abs(fn(root)) < G_TOL:
            roots.append(float(root))
    if vals[-1] == 0:
        roots.append(float(xs[-1]))
    return roots


def _nearest(roots, hint):
    return min(roots, key=lambda r: (abs(r - hint), r))


def _cross_coupling(channel, params):
    return couplings(channel, params).rho_b


def solve_rho_zero(
    channel: Channel,
    fixed: SystemParams,
    free: str,
    bracket,
    hint: float | None = None,
) -> float:
    """Value of ``free`` in ``bracket`` where the channel's cross coupling vanishes.

    Among several roots the one nearest ``hint`` (default: bracket centre) wins.
    """
    channel = Channel(channel)

    def rho_b(x):
        return _cross_coupling(channel, set_axis(fixed, free, x))

    roots = find_roots(rho_b, bracket)
    if not roots:
        raise NoSignChange(f"cross coupling of {channel.value} keeps its sign on {list(bracket)}")
    return _nearest(roots, sum(bracket) / 2 if hint is None else hint)


def balance_residual(channel: Channel, params: SystemParams) -> float:
    """nu^4 rho_b^2 / omega^2 - beta1 beta2 (zero on the balance condition)."""
    rho_b = _cross_coupling(channel, params)
    return params.nu**4 * rho_b**2 / params.omega**2 - params.beta1 * params.beta2


def solve_balance_f(
    channel: Channel,
    fixed: SystemParams,
    bracket,
    hint: float | None = None,
) -> float:
    """Drive amplitude f in ``bracket`` satisfying the unbalanced gain-loss condition.

    With vanishing beta1 * beta2 the condition degenerates to a double root of
    rho_b; the sign-changing zero of rho_b itself is returned instead.
    """
    channel = Channel(channel)
    if channel is Channel.INTRAWELL_SPIN_FLIPPING:
        raise ValueError("balance condition is defined for the interwell channels")
    if fixed.beta1 * fixed.beta2 == 0:
        return solve_rho_zero(channel, fixed, "f", bracket, hint)

    def g(f):
        return balance_residual(channel, fixed.replace(f=f))

    roots = find_roots(g, bracket)
    if not roots:
        raise NoSignChange(f"balance residual keeps its sign on {list(bracket)}")
    return _nearest(roots, sum(bracket) / 2 if hint is None else hint)


@dataclass
class PlateauReport:
    final: float
    drift: float
    window: tuple[float, float]
    samples: np.ndarray = field(repr=False)


def plateau(times: np.ndarray, total: np.ndarray, fraction: float = 0.25) -> PlateauReport:
    """Relative spread (max - min) / mean of the total probability over the final window."""
    t_end = times[-1]
    start = t_end - fraction * (t_end - times[0])
    sel = times >= start
    tail = total[sel]
    drift = float((tail.max() - tail.min()) / tail.mean())
    return PlateauReport(float(total[-1]), drift, (float(start), float(t_end)), tail)
