"""Maximization of the instrumental inequality over states and measurements,
plus the efficiency/noise scans built on top of it.

Search layout: Alice's three measurements enter the inequality linearly, so
for any Bob pair they are optimized out in closed form; the derivative-free
simplex search only runs over Bob's angles (and optionally the state angle
theta).  Multi-starts combine a coarse deterministic grid scan with the
4-point-per-angle seed lattice and the two structured seed settings.

No-click binning: a lost photon is recorded as outcome 1, i.e. the POVM is
M_0 = eta P_+, M_1 = P_- + (1 - eta) P_+ (eta_up = eta, eta_down = 1).  For
Alice this is forced by the feed-forward trigger logic (no click = no cell
firing = the a = 1 path); it reproduces the published critical efficiencies,
which the opposite binning cannot.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from . import kernels
from .errors import StructuralError
from .quantum import (
    BinaryQubitMeasurement,
    InstrumentalSettings,
    NoiseModel,
    canonical_settings,
    noise_state,
    pockels_correlation,
)
from .scenario import LinearInequality, canonical_inequality, evaluate_inequality

GRID_POINTS = 24
SEED_LATTICE = (0.0, math.pi / 2, math.pi, 3 * math.pi / 2)
NM_OPTIONS = {"xatol": 1e-9, "fatol": 1e-12, "maxiter": 4000, "maxfev": 4000}
VIOLATION_MARGIN = 1e-6
QUANTUM_MAX = 1 + 2 * math.sqrt(2)


def fixed_settings_curve(theta: float) -> float:
    """Closed-form inequality value of the non-optimal settings family:

        (4 + (8 + 3 sqrt2) cos t - 2 sqrt2 cos 2t - sqrt2 cos 3t) / 4

    It exceeds 3 for every 0 < t <= pi/4 and tends to 3 at t -> 0."""
    s2 = math.sqrt(2)
    return 0.25 * (
        4 + (8 + 3 * s2) * math.cos(theta) - 2 * s2 * math.cos(2 * theta) - s2 * math.cos(3 * theta)
    )


@dataclass
class OptimizeResult:
    value: float
    theta: float
    alice_axes: np.ndarray
    bob_axes: np.ndarray
    eta_a: float = 1.0
    eta_b: float = 1.0
    plane: str = "xz"

    def settings(self) -> InstrumentalSettings:
        alice = [BinaryQubitMeasurement(ax, self.eta_a, 1.0) for ax in self.alice_axes]
        bob = [BinaryQubitMeasurement(ax, self.eta_b, 1.0) for ax in self.bob_axes]
        return InstrumentalSettings(alice, bob)


def _noise_or_default(noise: NoiseModel | None, theta: float | None) -> NoiseModel:
    if noise is None:
        noise = NoiseModel()
    if theta is not None:
        noise = NoiseModel(noise.v, noise.lam, theta, noise.gamma, noise.v_pc)
    return noise


def _bob_seed_angles(theta: float):
    # canonical optimum and the fixed-curve settings for this theta
    return [(math.pi / 4, -math.pi / 4), (theta, 0.0)]


def optimize_violation(
    theta: float | None = math.pi / 4,
    plane: str = "xz",
    eta_a: float = 1.0,
    eta_b: float = 1.0,
    noise: NoiseModel | None = None,
    ineq: LinearInequality | None = None,
    grid_points: int = GRID_POINTS,
) -> OptimizeResult:
    """Best inequality value over measurement settings (and theta if None).

    theta=None optimizes the state angle as well; eta_a/eta_b < 1 switch the
    corresponding party to the binned no-click POVM; noise.v_pc < 1 replaces
    Bob's two free angles by the single physical analyzer of the feed-forward
    cell model."""
    ineq = ineq or canonical_inequality()
    c = ineq.c
    theta_free = theta is None
    model = _noise_or_default(noise, None if theta_free else theta)
    ea = (eta_a, 1.0)
    eb = (eta_b, 1.0)

    def summary(th):
        return kernels.noise_summary(model.v, model.lam, th, model.gamma)

    thetas = (
        list(np.linspace(0.05, math.pi / 4, 9)) + [math.pi / 4]
        if theta_free
        else [model.theta]
    )

    if model.v_pc < 1.0:
        return _optimize_pockels(c, model, thetas, theta_free, eb, grid_points)

    if plane not in ("xz", "full"):
        raise StructuralError("plane must be 'xz' or 'full'")

    # coarse scan + seed lattice
    angles = np.linspace(0.0, 2 * math.pi, grid_points, endpoint=False)
    seeds = []
    for th in thetas:
        r, s, t = summary(th)
        grid = kernels.scan_xz(c, angles, *ea, *eb, r, s, t)
        k = int(np.argmax(grid))
        seeds.append((angles[k // grid_points], angles[k % grid_points], th))
        for g0, g1 in _bob_seed_angles(th):
            seeds.append((g0, g1, th))
    mid = thetas[len(thetas) // 2]
    for g0 in SEED_LATTICE:
        for g1 in SEED_LATTICE:
            seeds.append((g0, g1, mid))

    def neg_xz(v):
        th = v[2] if theta_free else thetas[0]
        r, s, t = summary(th)
        return -kernels.objective_xz(c, v[0], v[1], *ea, *eb, r, s, t)

    best_val, best_arg = -np.inf, None
    for g0, g1, th in seeds:
        x0 = [g0, g1, th] if theta_free else [g0, g1]
        res = minimize(neg_xz, x0, method="Nelder-Mead", options=NM_OPTIONS)
        if -res.fun > best_val:
            best_val, best_arg = -res.fun, res.x

    th = float(best_arg[2]) if theta_free else thetas[0]
    g0, g1 = float(best_arg[0]), float(best_arg[1])
    bob_axes = np.array([kernels.xz_axis(g0), kernels.xz_axis(g1)])

    if plane == "full":
        def neg_full(v):
            th_v = v[4] if theta_free else thetas[0]
            r, s, t = summary(th_v)
            alpha_a, beta_a = kernels.effect_params(*ea)
            alpha_b, beta_b = kernels.effect_params(*eb)
            w = beta_b * np.array(
                [kernels.sphere_axis(v[0], v[1]), kernels.sphere_axis(v[2], v[3])]
            )
            return -kernels.best_alice_value(c, alpha_a, beta_a, alpha_b, w, r, s, t)

        x0 = [g0, 0.0, g1, 0.0] + ([th] if theta_free else [])
        res = minimize(neg_full, x0, method="Nelder-Mead", options=NM_OPTIONS)
        if -res.fun > best_val:
            best_val = -res.fun
            th = float(res.x[4]) if theta_free else thetas[0]
            bob_axes = np.array(
                [kernels.sphere_axis(res.x[0], res.x[1]), kernels.sphere_axis(res.x[2], res.x[3])]
            )

    r, s, t = summary(th)
    alpha_a, beta_a = kernels.effect_params(*ea)
    alpha_b, beta_b = kernels.effect_params(*eb)
    value, alice_axes = kernels.best_alice_axes(
        c, alpha_a, beta_a, alpha_b, beta_b * bob_axes, r, s, t
    )
    return OptimizeResult(float(value), th, alice_axes, bob_axes, eta_a, eta_b, plane)


def _optimize_pockels(c, model: NoiseModel, thetas, theta_free, eb, grid_points):
    """Cell-limited search: Bob has a single physical angle; a = 0 uses the
    v_pc mixture of the kicked and unkicked axes."""

    def neg(v):
        th = v[1] if theta_free else thetas[0]
        r, s, t = kernels.noise_summary(model.v, model.lam, th, model.gamma)
        return -kernels.objective_xz_pockels(c, v[0], model.v_pc, *eb, r, s, t)

    seeds = []
    for th in thetas:
        for g1 in np.linspace(0.0, 2 * math.pi, grid_points, endpoint=False):
            seeds.append((g1, th))
    best_val, best_arg = -np.inf, None
    for g1, th in seeds:
        x0 = [g1, th] if theta_free else [g1]
        res = minimize(neg, x0, method="Nelder-Mead", options=NM_OPTIONS)
        if -res.fun > best_val:
            best_val, best_arg = -res.fun, res.x
    th = float(best_arg[1]) if theta_free else thetas[0]
    g1 = float(best_arg[0])
    b1 = kernels.xz_axis(g1)
    bob_axes = np.array([b1 * np.array([-1.0, -1.0, 1.0]), b1])
    r, s, t = kernels.noise_summary(model.v, model.lam, th, model.gamma)
    alpha_b, beta_b = kernels.effect_params(*eb)
    w = beta_b * np.array([model.v_pc * bob_axes[0] + (1 - model.v_pc) * b1, b1])
    value, alice_axes = kernels.best_alice_axes(
        c, np.array([1.0, 1.0]), 1.0, alpha_b, w, r, s, t
    )
    return OptimizeResult(float(value), th, alice_axes, bob_axes, 1.0, eb[0], "xz")


# ---------------------------------------------------------------------------
# detection-efficiency thresholds
# ---------------------------------------------------------------------------


def critical_efficiency(
    direction: str,
    eta_tol: float = 5e-4,
    margin: float = VIOLATION_MARGIN,
    grid_points: int = GRID_POINTS,
) -> float:
    """Bisection for the efficiency below which no violation survives.

    direction 'a' degrades Alice only, 'b' Bob only, 'symmetric' both; the
    state angle and all settings are re-optimized at every probe."""
    if direction not in ("a", "b", "symmetric"):
        raise StructuralError("direction must be 'a', 'b' or 'symmetric'")

    def violates(eta: float) -> bool:
        ea = eta if direction in ("a", "symmetric") else 1.0
        eb = eta if direction in ("b", "symmetric") else 1.0
        res = optimize_violation(
            theta=None, eta_a=ea, eta_b=eb, grid_points=grid_points
        )
        return res.value > 3.0 + margin

    lo, hi = 0.5, 1.0
    if violates(lo):
        return lo
    while hi - lo > eta_tol:
        mid = 0.5 * (lo + hi)
        if violates(mid):
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


# ---------------------------------------------------------------------------
# landscapes
# ---------------------------------------------------------------------------


@dataclass
class Landscape:
    kind: str
    xs: np.ndarray
    ys: np.ndarray
    values: np.ndarray  # values[i, j] at (xs[i], ys[j])
    x_name: str
    y_name: str
    boundary: list = field(default_factory=list)  # I = 3 polyline segments

    def to_csv(self) -> str:
        lines = [",".join(repr(v) for v in row) for row in self.values]
        return "\n".join(lines) + "\n"

    def axes_json(self) -> dict:
        return {
            "kind": self.kind,
            "x_name": self.x_name,
            "y_name": self.y_name,
            "x": self.xs.tolist(),
            "y": self.ys.tolist(),
            "contour_level": 3.0,
            "boundary_segments": self.boundary,
        }


def _marching_squares(xs, ys, values, level=3.0):
    """Linear-interpolation contour segments of values(x, y) at the level."""
    segs = []
    ni, nj = values.shape
    for i in range(ni - 1):
        for j in range(nj - 1):
            corners = [
                (xs[i], ys[j], values[i, j]),
                (xs[i + 1], ys[j], values[i + 1, j]),
                (xs[i + 1], ys[j + 1], values[i + 1, j + 1]),
                (xs[i], ys[j + 1], values[i, j + 1]),
            ]
            pts = []
            for k in range(4):
                x1, y1, v1 = corners[k]
                x2, y2, v2 = corners[(k + 1) % 4]
                if (v1 - level) * (v2 - level) < 0:
                    f = (level - v1) / (v2 - v1)
                    pts.append((x1 + f * (x2 - x1), y1 + f * (y2 - y1)))
            if len(pts) >= 2:
                segs.append([list(pts[0]), list(pts[1])])
    return segs


def noise_landscape(
    v_values, lam_values, theta: float | None = None, grid_points: int = 16
) -> Landscape:
    """Optimized violation at every (v, lambda) source working point."""
    v_values = np.asarray(v_values, dtype=float)
    lam_values = np.asarray(lam_values, dtype=float)
    vals = np.empty((v_values.size, lam_values.size))
    for i, v in enumerate(v_values):
        for j, lam in enumerate(lam_values):
            vals[i, j] = optimize_violation(
                theta=theta, noise=NoiseModel(v=v, lam=lam), grid_points=grid_points
            ).value
    return Landscape(
        "noise", v_values, lam_values, vals, "v", "lambda",
        _marching_squares(v_values, lam_values, vals),
    )


def efficiency_landscape(
    eta_a_values, eta_b_values, noise: NoiseModel | None = None, grid_points: int = 16
) -> Landscape:
    """Optimized violation over (eta_a, eta_b) with no-click binning, at the
    source working point given by noise (default: noiseless)."""
    eta_a_values = np.asarray(eta_a_values, dtype=float)
    eta_b_values = np.asarray(eta_b_values, dtype=float)
    vals = np.empty((eta_a_values.size, eta_b_values.size))
    for i, ea in enumerate(eta_a_values):
        for j, eb in enumerate(eta_b_values):
            vals[i, j] = optimize_violation(
                theta=None, eta_a=ea, eta_b=eb, noise=noise, grid_points=grid_points
            ).value
    return Landscape(
        "efficiency", eta_a_values, eta_b_values, vals, "eta_a", "eta_b",
        _marching_squares(eta_a_values, eta_b_values, vals),
    )


# ---------------------------------------------------------------------------
# headline predictions
# ---------------------------------------------------------------------------

PUBLISHED = {
    "postselection_corrected": 3.643,
    "feedforward_corrected": 3.342,
    "postselection_raw": 3.537,
    "feedforward_raw": 3.245,
}

SOURCE_V = 0.94
SOURCE_LAM = 0.33
POCKELS_VISIBILITY = 0.87
GAMMA_RAW = 0.971


def predicted_experiment_values() -> dict:
    """The four headline model predictions for the experiment.

    Post-selection pipeline: settings re-optimized on the noisy source state
    (gamma = 1 corrected, gamma = 0.971 raw).  Feed-forward pipeline: the
    canonical settings evaluated through the imperfect-cell model with
    v_pc = 0.87 (corrected), additionally diluted by gamma (raw)."""
    ineq = canonical_inequality()
    out = {}
    corrected = optimize_violation(theta=None, noise=NoiseModel(v=SOURCE_V, lam=SOURCE_LAM))
    out["postselection_corrected"] = corrected.value
    raw = optimize_violation(
        theta=None, noise=NoiseModel(v=SOURCE_V, lam=SOURCE_LAM, gamma=GAMMA_RAW)
    )
    out["postselection_raw"] = raw.value

    settings = canonical_settings()
    state_c = noise_state(NoiseModel(v=SOURCE_V, lam=SOURCE_LAM))
    out["feedforward_corrected"] = evaluate_inequality(
        ineq, pockels_correlation(state_c, settings, POCKELS_VISIBILITY)
    )
    state_r = noise_state(NoiseModel(v=SOURCE_V, lam=SOURCE_LAM, gamma=GAMMA_RAW))
    out["feedforward_raw"] = evaluate_inequality(
        ineq, pockels_correlation(state_r, settings, POCKELS_VISIBILITY)
    )
    return {
        name: {"predicted": float(val), "published": PUBLISHED[name]}
        for name, val in out.items()
    }
