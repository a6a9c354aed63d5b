"""Kernel dispatch plus state-summary helpers.

The compiled extension is preferred; set INSTRUMENTAL_PURE_PYTHON=1 to force
the numpy fallback (the benchmark uses this to compare the two)."""

from __future__ import annotations

import math
import os

import numpy as np

from . import _kernels_py

if os.environ.get("INSTRUMENTAL_PURE_PYTHON"):
    _impl = _kernels_py
    HAVE_COMPILED = False
else:
    try:
        from . import _kernels as _impl  # type: ignore[attr-defined]

        HAVE_COMPILED = True
    except ImportError:  # pragma: no cover - depends on build environment
        _impl = _kernels_py
        HAVE_COMPILED = False

best_alice_value = _impl.best_alice_value
ineq_value_general = _impl.ineq_value_general
objective_xz = _impl.objective_xz
objective_xz_pockels = _impl.objective_xz_pockels
scan_xz = _impl.scan_xz

implementations = {"python": _kernels_py}
if HAVE_COMPILED:
    implementations["compiled"] = _impl


def noise_summary(v: float, lam: float, theta: float, gamma: float):
    """Closed-form Pauli summary (r, s, T) of the noise-model state family:

    T = diag(g v sin2t, -g v sin2t, g (v + (1-v) lam)), r = s = g v cos2t e_z."""
    s2 = math.sin(2 * theta)
    c2 = math.cos(2 * theta)
    rz = gamma * v * c2
    r = np.array([0.0, 0.0, rz])
    t = np.diag([gamma * v * s2, -gamma * v * s2, gamma * (v + (1 - v) * lam)])
    return r, r.copy(), t


def effect_params(eta_up: float, eta_down: float):
    """(alpha pair, beta) of the binned POVM: M_out = (alpha 1 +/- beta n.sigma)/2."""
    delta = eta_up - eta_down
    return np.array([1.0 + delta, 1.0 - delta]), eta_up + eta_down - 1.0


def xz_axis(angle: float) -> np.ndarray:
    return np.array([math.sin(angle), 0.0, math.cos(angle)])


def sphere_axis(polar: float, azimuth: float) -> np.ndarray:
    return np.array(
        [
            math.sin(polar) * math.cos(azimuth),
            math.sin(polar) * math.sin(azimuth),
            math.cos(polar),
        ]
    )


def best_alice_axes(c, alpha_a, beta_a, alpha_b, w_b, r, s, t):
    """Optimal Alice axes (value, axes): the objective is linear in each
    Alice Bloch vector, so the optimum aligns with its coefficient vector."""
    const, vx = _kernels_py.alice_reduction(c, alpha_a, beta_a, alpha_b, w_b, r, s, t)
    norms = np.linalg.norm(vx, axis=1)
    axes = np.zeros_like(vx)
    for i, n in enumerate(norms):
        axes[i] = vx[i] / n if n > 1e-15 else np.array([0.0, 0.0, 1.0])
    return float(const + norms.sum()), axes
