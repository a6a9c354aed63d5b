"""Non-signalling boxes: validation, the PR-variant table, and the LP
maximizing a wired instrumental inequality over the NS polytope."""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog

from .errors import SolverError, StructuralError
from .scenario import (
    SIGN,
    BipartiteBox,
    InstrumentalCorrelation,
    LinearInequality,
    ValidationReport,
    CheckResult,
    Wiring,
    canonical_inequality,
    evaluate_inequality,
    wire_box,
)

NS_TOL = 1e-9
_LP_OPTIONS = {
    "primal_feasibility_tolerance": 1e-10,
    "dual_feasibility_tolerance": 1e-10,
}


def validate_ns(box: BipartiteBox, tol: float = NS_TOL) -> ValidationReport:
    """Normalization plus both marginal-independence families."""
    p = box.p
    report = ValidationReport()
    neg = float(p.min())
    report.checks.append(CheckResult("nonnegative", neg >= -tol, min(neg, 0.0)))
    norms = p.sum(axis=(2, 3))
    worst = float(np.max(np.abs(norms - 1)))
    report.checks.append(CheckResult("normalized per (x,y)", worst <= tol, worst))
    pa = p.sum(axis=3)  # (x, y, a)
    worst_a = float(np.max(np.abs(pa - pa.mean(axis=1, keepdims=True))))
    report.checks.append(CheckResult("p(a|x) independent of y", worst_a <= tol, worst_a))
    pb = p.sum(axis=2)  # (x, y, b)
    worst_b = float(np.max(np.abs(pb - pb.mean(axis=0, keepdims=True))))
    report.checks.append(CheckResult("p(b|y) independent of x", worst_b <= tol, worst_b))
    return report


def pr_variant_box() -> BipartiteBox:
    """The 3-setting PR-box variant that wires to I = 5.

    x = 1 (index 0): a deterministically 0, b a free coin for either y;
    x = 2, 3 (indices 1, 2): after relabeling x -> x - 1 the table is the
    PR-type rule p(a,b|x,y) = delta_{a xor b, (x+1) y} / 2."""
    p = np.zeros((3, 2, 2, 2))
    for y in range(2):
        for b in range(2):
            p[0, y, 0, b] = 0.5
    for x_rel, x in ((0, 1), (1, 2)):
        for y in range(2):
            for a in range(2):
                for b in range(2):
                    if (a ^ b) == ((x_rel + 1) * y) % 2:
                        p[x, y, a, b] = 0.5
    return BipartiteBox(p)


def _ns_constraints(n_x: int, n_y: int, n_a: int, n_b: int):
    """Equality rows (normalization + no-signalling) over flattened p(x,y,a,b)."""
    size = n_x * n_y * n_a * n_b

    def idx(x, y, a, b):
        return ((x * n_y + y) * n_a + a) * n_b + b

    rows, vals = [], []
    for x in range(n_x):
        for y in range(n_y):
            row = np.zeros(size)
            for a in range(n_a):
                for b in range(n_b):
                    row[idx(x, y, a, b)] = 1.0
            rows.append(row)
            vals.append(1.0)
    # p(a|x) independent of y
    for x in range(n_x):
        for a in range(n_a):
            for y in range(1, n_y):
                row = np.zeros(size)
                for b in range(n_b):
                    row[idx(x, 0, a, b)] += 1.0
                    row[idx(x, y, a, b)] -= 1.0
                rows.append(row)
                vals.append(0.0)
    # p(b|y) independent of x
    for y in range(n_y):
        for b in range(n_b):
            for x in range(1, n_x):
                row = np.zeros(size)
                for a in range(n_a):
                    row[idx(0, y, a, b)] += 1.0
                    row[idx(x, y, a, b)] -= 1.0
                rows.append(row)
                vals.append(0.0)
    return np.array(rows), np.array(vals)


def _wired_objective(ineq: LinearInequality, wiring: Wiring, n_y: int) -> np.ndarray:
    """Coefficients over box variables of ineq(wire_box(box, f))."""
    n_x, n_a, n_b = ineq.c.shape
    obj = np.zeros((n_x, n_y, n_a, n_b))
    for x in range(n_x):
        for a in range(n_a):
            obj[x, wiring(a), a, :] += ineq.c[x, a, :]
    return obj.reshape(-1)


@dataclass
class NSMaxResult:
    value: float
    box: BipartiteBox
    wiring: Wiring


def ns_max_lp(
    ineq: LinearInequality | None = None,
    wiring: Wiring | None = None,
    n_y: int = 2,
    canonicalize: bool = True,
) -> NSMaxResult:
    """Maximum of a wired inequality over the non-signalling polytope.

    The polytope is used in raw H-representation (24 variables for the
    (3,2;2,2) case).  With canonicalize=True the optimum box is made unique
    by a lexicographic-minimum pass over the optimal face."""
    ineq = ineq or canonical_inequality()
    wiring = wiring or Wiring((0, 1))
    n_x, n_a, n_b = ineq.c.shape
    a_eq, b_eq = _ns_constraints(n_x, n_y, n_a, n_b)
    obj = _wired_objective(ineq, wiring, n_y)
    size = obj.size

    res = linprog(-obj, A_eq=a_eq, b_eq=b_eq, bounds=[(0, 1)] * size,
                  method="highs", options=_LP_OPTIONS)
    if res.status != 0:
        raise SolverError(f"NS maximization failed: {res.message}")
    value = -res.fun
    x_opt = res.x

    if canonicalize:
        rows = [obj]
        vals = [value]
        for k in range(size):
            res_k = linprog(
                _unit(size, k),
                A_eq=np.vstack([a_eq, rows]),
                b_eq=np.concatenate([b_eq, vals]),
                bounds=[(0, 1)] * size,
                method="highs",
                options=_LP_OPTIONS,
            )
            if res_k.status != 0:  # pragma: no cover
                raise SolverError(f"lexicographic pass failed at {k}: {res_k.message}")
            rows.append(_unit(size, k))
            vals.append(res_k.x[k])
            x_opt = res_k.x
    box = BipartiteBox(np.clip(x_opt, 0, 1).reshape(n_x, n_y, n_a, n_b))
    return NSMaxResult(float(value), box, wiring)


def ns_max_over_wirings(ineq: LinearInequality | None = None, n_y: int = 2):
    """ns_max_lp for every wiring f: A -> Y; returns dict and the best."""
    ineq = ineq or canonical_inequality()
    n_a = ineq.c.shape[1]
    results = {}
    for f in itertools.product(range(n_y), repeat=n_a):
        results[f] = ns_max_lp(ineq, Wiring(f), n_y=n_y, canonicalize=False)
    best = max(results.values(), key=lambda r: r.value)
    return results, best


def _unit(n, k):
    v = np.zeros(n)
    v[k] = 1.0
    return v


# ---------------------------------------------------------------------------
# local boxes (brute-force comparisons)
# ---------------------------------------------------------------------------


def local_deterministic_boxes(n_x: int = 3, n_y: int = 2, n_a: int = 2, n_b: int = 2):
    """All product deterministic boxes p(a,b|x,y) = d_{a,f(x)} d_{b,g(y)}."""
    out = []
    for fa in itertools.product(range(n_a), repeat=n_x):
        for gb in itertools.product(range(n_b), repeat=n_y):
            p = np.zeros((n_x, n_y, n_a, n_b))
            for x in range(n_x):
                for y in range(n_y):
                    p[x, y, fa[x], gb[y]] = 1.0
            out.append(BipartiteBox(p))
    return out


def local_wired_max(ineq: LinearInequality | None = None, n_y: int = 2):
    """Brute-force max of the wired inequality over local deterministic boxes
    and all wirings (classical sanity bound for ns_max_lp)."""
    ineq = ineq or canonical_inequality()
    n_x, n_a, n_b = ineq.c.shape
    best = -np.inf
    for box in local_deterministic_boxes(n_x, n_y, n_a, n_b):
        for f in itertools.product(range(n_y), repeat=n_a):
            val = evaluate_inequality(ineq, wire_box(box, Wiring(f)))
            best = max(best, val)
    return best


def bell_local_max(coeffs: np.ndarray) -> float:
    """Max of a Bell functional sum c(x,y,a,b) p(a,b|x,y) over local boxes."""
    coeffs = np.asarray(coeffs, dtype=float)
    n_x, n_y, n_a, n_b = coeffs.shape
    best = -np.inf
    for box in local_deterministic_boxes(n_x, n_y, n_a, n_b):
        best = max(best, float(np.sum(coeffs * box.p)))
    return best


def chsh_coefficients() -> np.ndarray:
    """CHSH as a coefficient tensor over p(a,b|x,y)."""
    sab = np.outer(SIGN, SIGN)
    c = np.zeros((2, 2, 2, 2))
    for x in range(2):
        for y in range(2):
            c[x, y] = (-1 if (x, y) == (1, 1) else 1) * sab
    return c


def mixture_box(boxes, weights) -> BipartiteBox:
    weights = np.asarray(weights, dtype=float)
    if abs(weights.sum() - 1) > 1e-12 or np.any(weights < 0):
        raise StructuralError("mixture weights must be a distribution")
    p = sum(w * b.p for w, b in zip(weights, boxes))
    return BipartiteBox(p)


def tab1_strategy_boxes():
    """The two local deterministic Bell boxes whose equal mixture, post-
    selected on y = a, hits CHSH = 4: (a = x, b = 0) and (a = 1-x, b = y)."""
    p1 = np.zeros((2, 2, 2, 2))
    p2 = np.zeros((2, 2, 2, 2))
    for x in range(2):
        for y in range(2):
            p1[x, y, x, 0] = 1.0
            p2[x, y, 1 - x, y] = 1.0
    return BipartiteBox(p1), BipartiteBox(p2)
