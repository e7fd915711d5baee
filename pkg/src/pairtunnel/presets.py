"""Scenario presets, one per figure panel (fig1a ... fig5).

Each preset carries the physical parameters of its panel.  Map axis
ranges, run lengths and sampling strides are choices of this package.
"""

from __future__ import annotations

import copy

_SC = "interwell_spin_conserving"
_SF = "interwell_spin_flipping"
_IW = "intrawell_spin_flipping"

_FIG1 = dict(nu=1.0, alpha=1.0, delta=0.0, omega=40.0, omega_z=40.0, beta1=0.01, beta2=0.01)
_FIG3 = dict(_FIG1, alpha=0.5, omega_z=200.0)
_FIG2 = dict(nu=1.0, alpha=1.0, delta=0.0, omega=40.0, omega_z=40.0, u1=70.0)
_FIG4 = dict(_FIG2, alpha=0.5)

_TRAJ = {"steps_per_period": 32768, "t_end": 400.0, "sample_stride": 4096}
_LONG = {"steps_per_period": 32768, "t_end": 800.0, "sample_stride": 8192}
_CURVE = {"steps_per_period": 32768, "t_end": 400.0, "sample_stride": 2048}


def _scaled(omega, **ratios):
    """Convert 2x/omega ratios into raw parameter values."""
    return {k: v * omega / 2 for k, v in ratios.items()}


def _map(name, desc, base, channel, y_range, expect):
    return {
        "name": name,
        "description": desc,
        "channel": channel,
        "params": dict(base, f=0.0, u1=28.0),
        "outputs": ["map"],
        "map": {
            "x": {"param": "2u1/omega", "lo": 0.2, "hi": 4.0, "count": 400},
            "y": {"param": "2f/omega", "lo": y_range[0], "hi": y_range[1], "count": 400},
        },
        "expect": expect,
    }


def _curves(name, desc, base, channel, series, k):
    return {
        "name": name,
        "description": desc,
        "channel": channel,
        "params": dict(base, f=0.0, u1=20.0),
        "integrator": _CURVE,
        "outputs": ["curve"],
        "curve": {
            "sweep": {"param": "2u1/omega", "lo": 0.6, "hi": 1.4, "count": 41},
            "k_unpaired": k,
            "series": {"param": "2f/omega", "values": series},
        },
        "expect": [
            {"kind": "curve_peak", "series": 0, "center": 1.0, "halfwidth": 0.1, "far": 0.3},
            {"kind": "curve_narrower", "center": 1.0},
        ],
    }


def _dynamics(name, desc, base, channel, f_ratio, u_ratio, k, far):
    expect = [{"kind": "verdict", "equals": "StableAllReal"}]
    if far:
        expect.append({"kind": "pbar", "state": k, "below": 0.02})
    else:
        expect.append({"kind": "pbar", "state": k, "above": 0.02})
    return {
        "name": name,
        "description": desc,
        "channel": channel,
        "params": dict(base, **_scaled(base["omega"], f=f_ratio, u1=u_ratio)),
        "initial_state": "0020",
        "integrator": _TRAJ,
        "outputs": ["spectrum", "trajectory", "effective_trajectory"],
        "expect": expect,
    }


def _balance(name, desc, base, channel, b1, b2, f_ref, plateau):
    return {
        "name": name,
        "description": desc,
        "channel": channel,
        "params": dict(base, beta1=b1, beta2=b2, f=f_ref),
        "initial_state": "0020",
        "integrator": _LONG,
        "outputs": ["solve", "spectrum", "trajectory"],
        "solve": {
            "kind": "balance_f",
            "bracket": [f_ref - 5, f_ref + 5],
            "hint": f_ref,
            "reference_value": f_ref,
        },
        "expect": [
            {"kind": "solve_near", "value": f_ref, "tol": 0.05},
            {"kind": "verdict", "equals": "StableDissipative"},
            {"kind": "plateau", **plateau},
        ],
    }


PRESETS = {
    "fig1a": _map(
        "fig1a", "Im(zeta) landscape, spin-conserving channel", _FIG1, _SC, (0.0, 8.0),
        [{"kind": "map_cell", "x": 1.4, "y": 1.6, "stable": True}],
    ),
    "fig1b": _curves(
        "fig1b", "time-averaged P7 near 2U1/omega = 1 for 2f/omega = 1.6 and 5.57", _FIG1, _SC, [1.6, 5.57], 7
    ),
    "fig1c": _dynamics("fig1c", "far-resonance pair tunneling (2f/w=1.6, 2U1/w=1.4)", _FIG1, _SC, 1.6, 1.4, 7, True),
    "fig1d": _dynamics("fig1d", "near-resonance dynamics (2f/w=1.6, 2U1/w=1.1)", _FIG1, _SC, 1.6, 1.1, 7, False),
    "fig2a": _balance(
        "fig2a", "unbalanced gain/loss, beta2/beta1 = 2", _FIG2, _SC, 0.01, 0.02, 90.491, {"drift_below": 1e-3}
    ),
    "fig2b": _balance(
        "fig2b", "unbalanced gain/loss, beta2/beta1 = 3", _FIG2, _SC, 0.005, 0.015, 78.28,
        {"drift_below": 1e-3, "value": 1.0, "tol": 0.05},
    ),
    "fig3a": _map(
        "fig3a", "Im(xi) landscape, spin-flipping channel (mirror axis 2f/omega = 10)", _FIG3, _SF, (4.0, 16.0),
        [{"kind": "map_mirror", "y_center": 10.0}],
    ),
    "fig3b": _curves(
        "fig3b", "time-averaged P9 near 2U1/omega = 1 for 2f/omega = 11.83 and 15.37", _FIG3, _SF, [11.83, 15.37], 9
    ),
    "fig3c": _dynamics("fig3c", "far-resonance spin-flip pair tunneling", _FIG3, _SF, 11.83, 1.4, 9, True),
    "fig3d": _dynamics("fig3d", "near-resonance spin-flip dynamics", _FIG3, _SF, 11.83, 1.1, 9, False),
    "fig4a": _balance(
        "fig4a", "spin-flipping, beta2/beta1 = 2", _FIG4, _SF, 0.01, 0.02, 143.3, {"drift_below": 1e-3}
    ),
    "fig4b": _balance(
        "fig4b", "spin-flipping, beta2/beta1 = 3", _FIG4, _SF, 0.005, 0.015, 118.28,
        {"drift_below": 1e-3, "value": 1.0, "tol": 0.05},
    ),
    "fig5": {
        "name": "fig5",
        "description": "intrawell spin flipping from a two-well doublon superposition",
        "channel": _IW,
        "params": dict(
            nu=1.0, alpha=1.0, delta=1.0, omega=40.0, omega_z=40.0,
            u1=51.4586, u2=24.0, f=110.0, beta1=0.0, beta2=0.1,
        ),
        "initial_state": [["0020", [0.7071067811865476, 0.0]], ["2000", [0.7071067811865476, 0.0]]],
        "integrator": {"steps_per_period": 32768, "t_end": 60.0, "sample_stride": 2048},
        "outputs": ["solve", "spectrum", "trajectory", "effective_trajectory"],
        "solve": {"kind": "rho_zero", "free": "u1", "bracket": [45.0, 58.0], "hint": 51.4586, "reference_value": 51.4586},
        "expect": [
            {"kind": "solve_near", "value": 51.4586, "tol": 0.01},
            {"kind": "residual_below", "below": 1e-8},
            {"kind": "spectrum_imag", "real": 3, "imag": -0.2, "count": 3, "tol": 1e-10},
            {"kind": "limit", "states": [2, 3], "value": 0.5, "tol": 0.02, "after": 30.0},
            {"kind": "decay_rate", "state": 5, "rate": 0.4, "rel_tol": 0.1, "window": [5.0, 30.0]},
        ],
    },
}


def get_preset(name: str) -> dict:
    try:
        return copy.deepcopy(PRESETS[name])
    except KeyError:
        raise KeyError(f"unknown preset {name!r}; choose from {', '.join(PRESETS)}") from None
