"""Pure-numpy kernels: fallback used when the compiled extension is absent.

Every function here has an identically-named compiled twin in _kernels.pyx;
tests assert the two stay numerically interchangeable.

State enters as the Pauli summary (r, s, T); measurements enter as effect
parameters: M_out = (alpha_out * 1 + sign_out * w . sigma) / 2, where w
already carries the POVM shrink factor beta = eta_up + eta_down - 1.
"""

from __future__ import annotations

import numpy as np

_SGN = np.array([1.0, -1.0])


def _bob_arrays(alpha_b, w_b):
    alpha_b = np.asarray(alpha_b, dtype=float)
    w_b = np.asarray(w_b, dtype=float)
    return alpha_b, w_b


def probs_general(c_shape_nx, alpha_a, beta_a, axes_a, alpha_b, w_b, r, s, t):
    """p(a,b|x) tensor for explicit Alice axes; used for cross-checks."""
    n_x = int(c_shape_nx)
    axes_a = np.asarray(axes_a, dtype=float)
    alpha_b, w_b = _bob_arrays(alpha_b, w_b)
    p = np.empty((n_x, 2, 2))
    tw = w_b @ np.asarray(t, dtype=float).T  # (2,3): T w_a
    wr = w_b @ np.asarray(s, dtype=float)  # (2,): w_a . s
    for x in range(n_x):
        ur = float(axes_a[x] @ np.asarray(r, dtype=float))
        ut = axes_a[x] @ tw.T  # (2,): u_x . T w_a
        for a in range(2):
            for b in range(2):
                p[x, a, b] = 0.25 * (
                    alpha_a[a] * alpha_b[b]
                    + alpha_b[b] * _SGN[a] * beta_a * ur
                    + alpha_a[a] * _SGN[b] * wr[a]
                    + _SGN[a] * _SGN[b] * beta_a * ut[a]
                )
    return p


def ineq_value_general(c, alpha_a, beta_a, axes_a, alpha_b, w_b, r, s, t):
    c = np.asarray(c, dtype=float)
    p = probs_general(c.shape[0], alpha_a, beta_a, axes_a, alpha_b, w_b, r, s, t)
    return float(np.sum(c * p))


def alice_reduction(c, alpha_a, beta_a, alpha_b, w_b, r, s, t):
    """(const, vx): value = const + sum_x |vx[x]| after choosing each Alice
    axis along vx[x]."""
    c = np.asarray(c, dtype=float)
    n_x = c.shape[0]
    alpha_b, w_b = _bob_arrays(alpha_b, w_b)
    r = np.asarray(r, dtype=float)
    s = np.asarray(s, dtype=float)
    t = np.asarray(t, dtype=float)
    tw = w_b @ t.T  # row a: T w_a
    ws = w_b @ s
    const = 0.0
    vx = np.zeros((n_x, 3))
    for x in range(n_x):
        for a in range(2):
            for b in range(2):
                cc = 0.25 * c[x, a, b]
                const += cc * alpha_a[a] * (alpha_b[b] + _SGN[b] * ws[a])
                vx[x] += cc * _SGN[a] * beta_a * (alpha_b[b] * r + _SGN[b] * tw[a])
    return const, vx


def best_alice_value(c, alpha_a, beta_a, alpha_b, w_b, r, s, t):
    const, vx = alice_reduction(c, alpha_a, beta_a, alpha_b, w_b, r, s, t)
    return float(const + np.linalg.norm(vx, axis=1).sum())


def _effect_params(eta_up, eta_down):
    delta = eta_up - eta_down
    beta = eta_up + eta_down - 1.0
    return np.array([1.0 + delta, 1.0 - delta]), beta


def objective_xz(c, g0, g1, eta_a_up, eta_a_down, eta_b_up, eta_b_down, r, s, t):
    """Inequality value, Bob axes in the xz plane at angles (g0, g1) from +z,
    Alice optimized out exactly."""
    alpha_a, beta_a = _effect_params(eta_a_up, eta_a_down)
    alpha_b, beta_b = _effect_params(eta_b_up, eta_b_down)
    w_b = beta_b * np.array(
        [[np.sin(g0), 0.0, np.cos(g0)], [np.sin(g1), 0.0, np.cos(g1)]]
    )
    return best_alice_value(c, alpha_a, beta_a, alpha_b, w_b, r, s, t)


def objective_xz_pockels(c, g1, v_pc, eta_b_up, eta_b_down, r, s, t):
    """Feed-forward objective with an imperfect cell: Bob has one physical
    analyzer angle g1; the a=0 effect is the v_pc mixture of the sigma_z
    kicked axis with the unkicked one."""
    alpha_a, beta_a = _effect_params(1.0, 1.0)
    alpha_b, beta_b = _effect_params(eta_b_up, eta_b_down)
    b1 = np.array([np.sin(g1), 0.0, np.cos(g1)])
    kicked = b1 * np.array([-1.0, -1.0, 1.0])
    w_b = beta_b * np.array([v_pc * kicked + (1 - v_pc) * b1, b1])
    return best_alice_value(c, alpha_a, beta_a, alpha_b, w_b, r, s, t)


def scan_xz(c, angles, eta_a_up, eta_a_down, eta_b_up, eta_b_down, r, s, t):
    """best_alice_value over the (g0, g1) grid; (n, n) array."""
    angles = np.asarray(angles, dtype=float)
    n = angles.size
    out = np.empty((n, n))
    for i in range(n):
        for j in range(n):
            out[i, j] = objective_xz(
                c, angles[i], angles[j], eta_a_up, eta_a_down, eta_b_up, eta_b_down, r, s, t
            )
    return out
