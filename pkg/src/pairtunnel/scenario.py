"""Scenario configs: parsing, product generation, manifests and checks."""

from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import jsonschema
import numpy as np

from . import __version__
from .atlas import (
    PBAR_THRESHOLD,
    Axis,
    GridSpec,
    curve_to_csv,
    peak_width,
    plateau,
    scan,
    set_axis,
    solve_balance_f,
    solve_rho_zero,
    unpaired_average_curve,
)
from .effective import (
    EFFECTIVE_ORDER,
    couplings,
    effective_trajectory,
    quasienergies,
)
from .model import (
    UNPAIRED_STATE,
    Channel,
    ChannelError,
    SystemParams,
    channel_subspace,
    validate_channel,
)
from .propagator import (
    IntegratorConfig,
    integrate,
    make_state,
    monodromy,
    quasienergies_from_monodromy,
    time_avg_probability,
)

PRODUCTS = ("solve", "spectrum", "trajectory", "effective_trajectory", "curve", "map")
FILENAMES = {
    "trajectory": "trajectory.csv",
    "effective_trajectory": "effective.csv",
    "spectrum": "spectrum.csv",
    "map": "map.csv",
    "curve": "curve.csv",
    "solve": "solve.csv",
}
RHO_SUPPRESSION = 1e-6
AGREEMENT_TOL = 0.05

_AXIS_SCHEMA = {
    "type": "object",
    "required": ["param", "lo", "hi", "count"],
    "properties": {
        "param": {"type": "string"},
        "lo": {"type": "number"},
        "hi": {"type": "number"},
        "count": {"type": "integer", "minimum": 2},
    },
    "additionalProperties": False,
}

SCHEMA = {
    "$schema": "http://json-schema.org/draft-07/schema#",
    "title": "pairtunnel scenario",
    "type": "object",
    "required": ["name", "channel", "params"],
    "properties": {
        "name": {"type": "string"},
        "description": {"type": "string"},
        "channel": {"enum": [c.value for c in Channel]},
        "params": {
            "type": "object",
            "properties": {k: {"type": "number"} for k in SystemParams().to_dict()},
            "additionalProperties": False,
        },
        "initial_state": {
            "oneOf": [
                {"type": "string", "pattern": "^[0-2]{4}$"},
                {
                    "type": "array",
                    "minItems": 1,
                    "items": {
                        "type": "array",
                        "items": [
                            {"type": "string", "pattern": "^[0-2]{4}$"},
                            {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2},
                        ],
                        "minItems": 2,
                        "maxItems": 2,
                    },
                },
            ]
        },
        "allow_unnormalized": {"type": "boolean"},
        "propagation": {"enum": ["channel", "full"]},
        "integrator": {
            "type": "object",
            "properties": {
                "steps_per_period": {"type": "integer", "minimum": 32},
                "t_end": {"type": "number", "exclusiveMinimum": 0},
                "sample_stride": {"type": "integer", "minimum": 1},
                "convergence_tol": {"type": ["number", "null"]},
            },
            "additionalProperties": False,
        },
        "outputs": {"type": "array", "items": {"enum": list(PRODUCTS)}, "uniqueItems": True},
        "solve": {
            "type": "object",
            "required": ["kind", "bracket"],
            "properties": {
                "kind": {"enum": ["balance_f", "rho_zero"]},
                "free": {"type": "string"},
                "bracket": {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2},
                "hint": {"type": "number"},
                "reference_value": {"type": "number"},
            },
            "additionalProperties": False,
        },
        "curve": {
            "type": "object",
            "required": ["sweep"],
            "properties": {
                "sweep": _AXIS_SCHEMA,
                "k_unpaired": {"type": "integer", "minimum": 1, "maximum": 10},
                "series": {
                    "type": "object",
                    "required": ["param", "values"],
                    "properties": {
                        "param": {"type": "string"},
                        "values": {"type": "array", "items": {"type": "number"}, "minItems": 1},
                    },
                    "additionalProperties": False,
                },
            },
            "additionalProperties": False,
        },
        "map": {
            "type": "object",
            "required": ["x", "y"],
            "properties": {"x": _AXIS_SCHEMA, "y": _AXIS_SCHEMA},
            "additionalProperties": False,
        },
        "expect": {"type": "array", "items": {"type": "object", "required": ["kind"]}},
        "metadata": {"type": "object"},
        "seed": {"type": "integer"},
    },
    "additionalProperties": False,
}


class ConfigError(ValueError):
    """Config does not parse or does not validate."""


class PreconditionError(ValueError):
    """A requested product cannot be produced for these parameters."""


@dataclass
class ScenarioConfig:
    raw: dict
    name: str
    channel: Channel
    params: SystemParams
    psi0: np.ndarray
    integrator: IntegratorConfig
    outputs: tuple[str, ...]
    subspace: tuple[int, ...] | None
    seed: int = 0


def load_config(source) -> dict:
    """Read a JSON document from a path or accept an already-parsed dict."""
    if isinstance(source, dict):
        return copy.deepcopy(source)
    try:
        return json.loads(Path(source).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {source}: {exc}") from exc


def parse_config(raw: dict) -> ScenarioConfig:
    try:
        jsonschema.validate(raw, SCHEMA)
    except jsonschema.ValidationError as exc:
        raise ConfigError(f"config invalid at {list(exc.absolute_path)}: {exc.message}") from exc
    try:
        params = SystemParams(**raw["params"])
        integrator = IntegratorConfig(**raw.get("integrator", {}))
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    channel = Channel(raw["channel"])
    init = raw.get("initial_state", "0020")
    allow = raw.get("allow_unnormalized", False)
    psi0 = make_state(init if isinstance(init, str) else [tuple(x) for x in init], normalize=False)
    norm = float(np.linalg.norm(psi0))
    if norm == 0:
        raise ConfigError("initial state has zero norm")
    if not allow:
        psi0 = psi0 / norm
    default_prop = "full" if channel is Channel.INTRAWELL_SPIN_FLIPPING else "channel"
    prop = raw.get("propagation", default_prop)
    subspace = channel_subspace(channel) if prop == "channel" else None
    outputs = tuple(raw.get("outputs", ["spectrum", "trajectory"]))
    for product in ("solve", "curve", "map"):
        if product in outputs and product not in raw:
            raise ConfigError(f"output {product!r} requested without a {product!r} section")
    return ScenarioConfig(raw, raw["name"], channel, params, psi0, integrator, outputs, subspace, raw.get("seed", 0))


@dataclass
class Results:
    params: SystemParams
    solve: dict | None = None
    spectrum: object = None
    trajectory: object = None
    effective: object = None
    curves: list = field(default_factory=list)
    map: object = None


def _solve(cfg: ScenarioConfig, params: SystemParams) -> tuple[SystemParams, dict]:
    s = cfg.raw["solve"]
    bracket = tuple(s["bracket"])
    if s["kind"] == "balance_f":
        free = "f"
        value = solve_balance_f(cfg.channel, params, bracket, s.get("hint"))
        residual = params.nu**4 * couplings(cfg.channel, params.replace(f=value)).rho_b ** 2 / params.omega**2
        residual -= params.beta1 * params.beta2
    else:
        free = s.get("free", "u1")
        # rho_2 suppression is a statement about the spin-conserving hopping for the intrawell case
        target = Channel.INTERWELL_SPIN_CONSERVING if cfg.channel is Channel.INTRAWELL_SPIN_FLIPPING else cfg.channel
        value = solve_rho_zero(target, params, free, bracket, s.get("hint"))
        residual = couplings(target, set_axis(params, free, value)).rho_b
    record = {"kind": s["kind"], "free": free, "value": value, "residual": residual}
    if "reference_value" in s:
        record["reference_value"] = s["reference_value"]
        record["deviation"] = value - s["reference_value"]
    return set_axis(params, free, value), record


def _check_intrawell(params: SystemParams) -> float:
    rho2 = couplings(Channel.INTERWELL_SPIN_CONSERVING, params).rho_b
    if abs(rho2) >= RHO_SUPPRESSION:
        raise PreconditionError(
            f"intrawell model needs suppressed interwell pair tunneling, |rho2| = {abs(rho2):.3g}"
        )
    return rho2


def compute(cfg: ScenarioConfig, workers: int | None = None) -> Results:
    """Produce every requested product in memory; nothing is written here."""
    params = cfg.params
    validate_channel(cfg.channel, params)
    res = Results(params)
    if "solve" in cfg.outputs:
        params, res.solve = _solve(cfg, params)
        res.params = params
    if cfg.channel is Channel.INTRAWELL_SPIN_FLIPPING and (
        "spectrum" in cfg.outputs or "effective_trajectory" in cfg.outputs
    ):
        _check_intrawell(params)
    if "spectrum" in cfg.outputs:
        res.spectrum = quasienergies(cfg.channel, params)
    if "trajectory" in cfg.outputs or "effective_trajectory" in cfg.outputs:
        allow = cfg.raw.get("allow_unnormalized", False)
        res.trajectory = integrate(params, cfg.psi0, cfg.integrator, cfg.subspace, allow_unnormalized=allow)
    if "effective_trajectory" in cfg.outputs:
        res.effective = effective_trajectory(cfg.channel, params, cfg.psi0, res.trajectory.times)
    if "curve" in cfg.outputs:
        c = cfg.raw["curve"]
        sweep = Axis(**c["sweep"])
        series = c.get("series")
        bases = [params] if series is None else [set_axis(params, series["param"], v) for v in series["values"]]
        for base in bases:
            res.curves.append(
                unpaired_average_curve(cfg.channel, base, sweep, c.get("k_unpaired"), cfg.integrator, workers)
            )
    if "map" in cfg.outputs:
        m = cfg.raw["map"]
        grid = GridSpec(params, cfg.channel, Axis(**m["x"]), Axis(**m["y"]))
        res.map = scan(grid, workers)
    return res


def _solve_csv(record: dict) -> str:
    keys = ["kind", "free", "value", "residual", "reference_value", "deviation"]
    vals = []
    for k in keys:
        v = record.get(k, "")
        vals.append(f"{v:.17g}" if isinstance(v, float) else str(v))
    return ",".join(keys) + "\n" + ",".join(vals) + "\n"


def render(cfg: ScenarioConfig, res: Results) -> dict[str, str]:
    """File name -> text for every product."""
    files = {}
    if res.solve is not None:
        files[FILENAMES["solve"]] = _solve_csv(res.solve)
    if res.spectrum is not None:
        files[FILENAMES["spectrum"]] = res.spectrum.to_csv()
    if res.trajectory is not None and "trajectory" in cfg.outputs:
        files[FILENAMES["trajectory"]] = res.trajectory.to_csv()
    if res.effective is not None:
        files[FILENAMES["effective_trajectory"]] = res.effective.to_csv()
    for i, pts in enumerate(res.curves):
        name = FILENAMES["curve"] if i == 0 else f"curve_{i + 1}.csv"
        files[name] = curve_to_csv(pts)
    if res.map is not None:
        files[FILENAMES["map"]] = res.map.to_csv()
    return files


# --- expectations -------------------------------------------------------------


def _check(exp: dict, cfg: ScenarioConfig, res: Results) -> tuple[bool, object]:
    kind = exp["kind"]
    traj = res.trajectory
    if kind == "verdict":
        got = res.spectrum.verdict.value
        return got == exp["equals"], got
    if kind == "pbar":
        got = time_avg_probability(traj, exp["state"])
        ok = got < exp["below"] if "below" in exp else got > exp["above"]
        return ok, got
    if kind == "max_probability":
        got = float(np.max(traj.probability(exp["state"])))
        return got < exp["below"], got
    if kind == "plateau":
        rep = plateau(traj.times, traj.total)
        ok = rep.drift < exp["drift_below"]
        if "value" in exp:
            ok = ok and abs(rep.final - exp["value"]) <= exp["tol"]
        return ok, {"final": rep.final, "drift": rep.drift}
    if kind == "solve_near":
        got = res.solve["value"]
        return abs(got - exp["value"]) <= exp["tol"], got
    if kind == "residual_below":
        got = abs(res.solve["residual"])
        return got < exp["below"], got
    if kind == "spectrum_imag":
        im = np.array([e.imag for e in res.spectrum.energies])
        tol = exp.get("tol", 1e-10)
        n_real = int(np.sum(np.abs(im) < tol))
        n_target = int(np.sum(np.abs(im - exp["imag"]) <= tol))
        return n_real == exp["real"] and n_target == exp["count"], {"real": n_real, "at_target": n_target}
    if kind == "limit":
        sel = traj.times >= exp["after"]
        total = traj.probabilities[:, np.asarray(exp["states"]) - 1].sum(axis=1)[sel]
        dev = float(np.max(np.abs(total - exp["value"])))
        return dev <= exp["tol"], dev
    if kind == "decay_rate":
        lo, hi = exp["window"]
        sel = (traj.times >= lo) & (traj.times <= hi)
        rate = -float(np.polyfit(traj.times[sel], np.log(traj.probability(exp["state"])[sel]), 1)[0])
        return abs(rate - exp["rate"]) <= exp["rel_tol"] * exp["rate"], rate
    if kind == "map_cell":
        grid = res.map.grid
        ix = int(np.argmin(np.abs(grid.x_axis.values - exp["x"])))
        iy = int(np.argmin(np.abs(grid.y_axis.values - exp["y"])))
        got = bool(res.map.stable()[iy, ix])
        return got == exp["stable"], got
    if kind == "map_mirror":
        ys = res.map.grid.y_axis.values
        if not np.allclose(ys + ys[::-1], 2 * exp["y_center"], atol=1e-9):
            return False, "grid not symmetric about the axis"
        stable = res.map.stable()
        mismatches = int(np.sum(stable != stable[::-1]))
        return mismatches == 0, mismatches
    if kind == "map_hermitian_stable":
        got = bool(np.all(res.map.stable() | res.map.resonance_mask))
        return got, got
    if kind == "curve_peak":
        pts = res.curves[exp.get("series", 0)]
        xs = np.array([p.x for p in pts])
        ys = np.array([p.pbar for p in pts])
        near = np.abs(xs - exp["center"]) <= exp["halfwidth"]
        far = np.abs(xs - exp["center"]) >= exp["far"]
        ok = ys[near].max() > PBAR_THRESHOLD and np.any(ys[far] < PBAR_THRESHOLD)
        return bool(ok), {"peak": float(ys[near].max()), "min_far": float(ys[far].min())}
    if kind == "curve_narrower":
        widths = [peak_width(c, center=exp["center"]) for c in res.curves]
        return widths[1] < widths[0], widths
    raise ConfigError(f"unknown expectation kind {kind!r}")


def evaluate_expectations(cfg: ScenarioConfig, res: Results) -> list[dict]:
    out = []
    for exp in cfg.raw.get("expect", []):
        ok, observed = _check(exp, cfg, res)
        out.append({**exp, "passed": bool(ok), "observed": _jsonable(observed)})
    return out


def _jsonable(x):
    if isinstance(x, dict):
        return {k: _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.floating, float)):
        return float(x)
    if isinstance(x, (np.integer, int, bool, np.bool_)):
        return x.item() if hasattr(x, "item") else x
    return x


def resolved_config(cfg: ScenarioConfig, res: Results) -> dict:
    """The input config with solved parameters and explicit integrator settings.

    The solve step stays in place; its bracket scan does not depend on the
    starting value of the free parameter, so a re-run lands on the same root.
    """
    raw = copy.deepcopy(cfg.raw)
    raw["params"] = res.params.to_dict()
    raw["integrator"] = {
        "steps_per_period": cfg.integrator.steps_per_period,
        "t_end": cfg.integrator.t_end,
        "sample_stride": cfg.integrator.sample_stride,
        "convergence_tol": cfg.integrator.convergence_tol,
    }
    return raw


def sha256(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def run(source, out_dir, workers: int | None = None) -> dict:
    """Compute, then write all product files and finally ``manifest.json``.

    Returns the manifest.  Raises ConfigError, PreconditionError,
    ResonanceError, ChannelError, NoSignChange or SolverError before any file
    is written.
    """
    raw = load_config(source)
    cfg = parse_config(raw)
    res = compute(cfg, workers)
    files = render(cfg, res)
    checks = evaluate_expectations(cfg, res)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for name, text in files.items():
        (out / name).write_text(text, encoding="utf-8")
    manifest = {
        "name": cfg.name,
        "code_version": __version__,
        "seed": cfg.seed,
        "input": raw,
        "resolved": resolved_config(cfg, res),
        "solve": _jsonable(res.solve),
        "outputs": {name: sha256(text) for name, text in sorted(files.items())},
        "expectations": checks,
        "passed": all(c["passed"] for c in checks),
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return manifest


def compare(source, workers: int | None = None) -> dict:
    """Exact-versus-effective report for a channel scenario."""
    cfg = parse_config(load_config(source))
    params = cfg.params
    validate_channel(cfg.channel, params)
    if "solve" in cfg.raw:
        params, _ = _solve(cfg, params)
    traj = integrate(params, cfg.psi0, cfg.integrator, cfg.subspace, cfg.raw.get("allow_unnormalized", False))
    eff = effective_trajectory(cfg.channel, params, cfg.psi0, traj.times)
    order = EFFECTIVE_ORDER[cfg.channel]
    unpaired = UNPAIRED_STATE.get(cfg.channel)
    deviation = {
        str(k): float(np.max(np.abs(eff.probability(k) - traj.probability(k)))) for k in order
    }
    paired = [k for k in order if k != unpaired]
    max_dev = max(deviation[str(k)] for k in paired)
    report = {
        "name": cfg.name,
        "channel": cfg.channel.value,
        "params": params.to_dict(),
        "max_deviation": deviation,
        "max_deviation_paired": max_dev,
        "agreement_tol": AGREEMENT_TOL,
        "agree": max_dev < AGREEMENT_TOL,
    }
    if unpaired is not None:
        pbar = time_avg_probability(traj, unpaired)
        report["pbar_unpaired"] = {"state": unpaired, "value": pbar}
        report["near_resonance"] = pbar > PBAR_THRESHOLD
    spec = quasienergies(cfg.channel, params)
    num = quasienergies_from_monodromy(
        monodromy(params, cfg.subspace, cfg.integrator), params.omega, targets=spec.energies
    )
    resid = np.abs(num - np.array(spec.energies))
    report["quasienergies"] = {
        "analytical": [[e.real, e.imag] for e in spec.energies],
        "monodromy": [[e.real, e.imag] for e in num],
        "residuals": [float(r) for r in resid],
        "max_residual": float(np.max(resid)),
        "scale_nu3_over_omega2": params.nu**3 / params.omega**2,
    }
    return report


__all__ = [
    "SCHEMA",
    "ConfigError",
    "PreconditionError",
    "ChannelError",
    "ScenarioConfig",
    "compare",
    "compute",
    "load_config",
    "parse_config",
    "run",
]
