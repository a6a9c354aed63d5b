"""Linear programs quantifying how much the instrumental assumptions must be
relaxed to explain observed data.

Three response-function families appear:

* instrumental: a = d_a(x), b = d_b(a)           (n_a^n_x * n_b^n_a members)
* x-to-b-relaxed: a = d_a(x), b = d_b(a, x)      (n_a^n_x * n_b^(n_a n_x))
* measurement-dependent: gamma = (gamma_x, lambda) with lambda instrumental
  (n_x * n_a^n_x * n_b^n_a members)

The direct-influence objective is the weight-average over strategies of each
strategy's worst interventional shift sup_{x,x',a,b} |p(b|a,x,l)-p(b|a,x',l)|
(a 0/1 indicator for deterministic responses).  Taking the sup outside the
average instead gives a strictly weaker LP that contradicts the closed form
min C = max[(I-3)/4, 0]; it stays available as objective="sup-outside".
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.optimize import linprog

from .errors import (
    NonClassicalCorrelationError,
    ScenarioMismatchError,
    SolverError,
    StructuralError,
)
from .polytope import enumerate_strategies, vertex_matrix
from .scenario import (
    CANONICAL_SCENARIO,
    InstrumentalCorrelation,
    LinearInequality,
    Scenario,
    canonical_inequality,
)

LP_TOL = 1e-7
_LP_OPTIONS = {
    "primal_feasibility_tolerance": 1e-10,
    "dual_feasibility_tolerance": 1e-10,
}

FAMILY_INSTRUMENTAL = "instrumental"
FAMILY_RELAXED = "x-to-b-relaxed"
FAMILY_MEASUREMENT = "measurement-dependent"

MODE_FULL = "full-distribution"
MODE_INEQ = "inequality-value"
_MODE_ALIASES = {"full": MODE_FULL, "ineq": MODE_INEQ, MODE_FULL: MODE_FULL, MODE_INEQ: MODE_INEQ}


@dataclass(frozen=True)
class ResponseFunctionDistribution:
    """Weight vector over an indexed strategy family."""

    family: str
    q: np.ndarray
    scenario: Scenario = CANONICAL_SCENARIO

    def __post_init__(self):
        q = np.asarray(self.q, dtype=float)
        expected = family_size(self.family, self.scenario)
        if q.shape != (expected,):
            raise StructuralError(
                f"family {self.family} for {self.scenario} needs {expected} weights, got {q.shape}"
            )
        if np.any(q < -1e-12) or abs(q.sum() - 1.0) > 1e-9:
            raise StructuralError("weights must be nonnegative and sum to 1")
        q = q.copy()
        q.setflags(write=False)
        object.__setattr__(self, "q", q)


def family_size(family: str, scenario: Scenario = CANONICAL_SCENARIO) -> int:
    if family == FAMILY_INSTRUMENTAL:
        return scenario.n_strategies
    if family == FAMILY_RELAXED:
        return scenario.n_a**scenario.n_x * scenario.n_b ** (scenario.n_a * scenario.n_x)
    if family == FAMILY_MEASUREMENT:
        return scenario.n_x * scenario.n_strategies
    raise StructuralError(f"unknown family {family!r}")


@dataclass(frozen=True)
class RelaxedStrategy:
    """a = d_a(x) and b = d_b(a, x): the X -> B arrow is allowed."""

    d_a: tuple
    d_b: tuple  # d_b[a][x]

    def correlation(self, scenario: Scenario) -> np.ndarray:
        p = np.zeros((scenario.n_x, scenario.n_a, scenario.n_b))
        for x in range(scenario.n_x):
            a = self.d_a[x]
            p[x, a, self.d_b[a][x]] = 1.0
        return p

    def x_dependent(self) -> bool:
        return any(len(set(row)) > 1 for row in self.d_b)


@lru_cache(maxsize=None)
def relaxed_strategies(scenario: Scenario = CANONICAL_SCENARIO) -> tuple:
    out = []
    for d_a in itertools.product(range(scenario.n_a), repeat=scenario.n_x):
        for flat in itertools.product(range(scenario.n_b), repeat=scenario.n_a * scenario.n_x):
            d_b = tuple(
                tuple(flat[a * scenario.n_x : (a + 1) * scenario.n_x])
                for a in range(scenario.n_a)
            )
            out.append(RelaxedStrategy(d_a, d_b))
    return tuple(out)


@lru_cache(maxsize=None)
def relaxed_matrix(scenario: Scenario = CANONICAL_SCENARIO) -> np.ndarray:
    """Columns are the deterministic correlations of the relaxed family."""
    strats = relaxed_strategies(scenario)
    w = np.zeros((scenario.n_x * scenario.n_a * scenario.n_b, len(strats)))
    for j, st in enumerate(strats):
        w[:, j] = st.correlation(scenario).reshape(-1)
    w.setflags(write=False)
    return w


@lru_cache(maxsize=None)
def _relaxed_indicator(scenario: Scenario) -> np.ndarray:
    ind = np.array([1.0 if st.x_dependent() else 0.0 for st in relaxed_strategies(scenario)])
    ind.setflags(write=False)
    return ind


@lru_cache(maxsize=None)
def _relaxed_pair_rows(scenario: Scenario) -> np.ndarray:
    """Rows of per-(a, x<x') disagreement indicators (sup-outside objective)."""
    strats = relaxed_strategies(scenario)
    rows = []
    for a in range(scenario.n_a):
        for x1 in range(scenario.n_x):
            for x2 in range(x1 + 1, scenario.n_x):
                rows.append(
                    [1.0 if st.d_b[a][x1] != st.d_b[a][x2] else 0.0 for st in strats]
                )
    m = np.array(rows)
    m.setflags(write=False)
    return m


@dataclass
class RelaxationResult:
    value: float
    q_opt: ResponseFunctionDistribution
    constraint_mode: str
    objective: str = "per-strategy"

    def reproduced(self, corr: InstrumentalCorrelation, ineq: LinearInequality | None = None,
                   tol: float = LP_TOL) -> bool:
        """Check the optimizer output actually meets its constraint."""
        fam = self.q_opt.family
        s = self.q_opt.scenario
        if fam == FAMILY_RELAXED:
            model_p = relaxed_matrix(s) @ self.q_opt.q
        elif fam == FAMILY_INSTRUMENTAL:
            model_p = vertex_matrix(s).T.astype(float) @ self.q_opt.q
        else:
            model_p = measurement_matrix(s) @ self.q_opt.q
        target = corr.p.reshape(-1)
        if self.constraint_mode == MODE_FULL:
            return bool(np.max(np.abs(model_p - target)) <= tol)
        ineq = ineq or canonical_inequality()
        v = ineq.c.reshape(-1)
        return bool(abs(v @ model_p - v @ target) <= tol)


def _solve(c, a_ub=None, b_ub=None, a_eq=None, b_eq=None, n_free: int = 0):
    n = len(c)
    bounds = [(0, None)] * (n - n_free) + [(None, None)] * n_free
    res = linprog(
        c,
        A_ub=a_ub,
        b_ub=b_ub,
        A_eq=a_eq,
        b_eq=b_eq,
        bounds=bounds,
        method="highs",
        options=_LP_OPTIONS,
    )
    return res


# ---------------------------------------------------------------------------
# ACE
# ---------------------------------------------------------------------------


def ace_lower_bound_formula(corr: InstrumentalCorrelation) -> float:
    """Observable lower bound on the average causal effect (binary outcomes):

        ACE >= 2 p(0,0|1) - 2 + p(1,1|1) + p(b=1|2)."""
    p = corr.p
    if p.shape[0] < 2 or p.shape[1] != 2 or p.shape[2] != 2:
        raise StructuralError("ACE bound needs binary outcomes and settings x=1,2")
    return float(2 * p[0, 0, 0] - 2 + p[0, 1, 1] + p[1, :, 1].sum())


def min_ace_lp(corr: InstrumentalCorrelation) -> RelaxationResult:
    """Smallest ACE among classical instrumental models reproducing p.

    ACE(q) = sup_{a,a',b} |sum_l q_l (d_{b,D_b(a,l)} - d_{b,D_b(a',l)})|;
    the do-marginals are averaged before the modulus, so this is an epigraph
    LP.  Raises NonClassicalCorrelationError outside the polytope."""
    s = corr.scenario
    strategies = enumerate_strategies(s)
    verts = vertex_matrix(s).T.astype(float)  # (cells, n)
    n = len(strategies)
    # do-response rows: row[(a, b)] over strategies = d_{b, d_b(a)}
    do = np.zeros((s.n_a, s.n_b, n))
    for j, st in enumerate(strategies):
        for a in range(s.n_a):
            do[a, st.d_b[a], j] = 1.0

    rows = []
    for a1 in range(s.n_a):
        for a2 in range(a1 + 1, s.n_a):
            for b in range(s.n_b):
                rows.append(do[a1, b] - do[a2, b])
    rows = np.array(rows)

    n_var = n + 1  # q and epigraph t
    a_ub = np.zeros((2 * len(rows), n_var))
    a_ub[: len(rows), :n] = rows
    a_ub[len(rows):, :n] = -rows
    a_ub[:, -1] = -1.0
    a_eq = np.zeros((verts.shape[0] + 1, n_var))
    a_eq[:-1, :n] = verts
    a_eq[-1, :n] = 1.0
    b_eq = np.concatenate([corr.p.reshape(-1), [1.0]])
    obj = np.zeros(n_var)
    obj[-1] = 1.0

    res = _solve(obj, a_ub=a_ub, b_ub=np.zeros(2 * len(rows)), a_eq=a_eq, b_eq=b_eq)
    if res.status == 2:
        raise NonClassicalCorrelationError(
            "correlation is outside the instrumental polytope; ACE is undefined classically"
        )
    if res.status != 0:  # pragma: no cover
        raise SolverError(f"min-ACE LP failed: {res.message}")
    q = ResponseFunctionDistribution(FAMILY_INSTRUMENTAL, _clean_weights(res.x[:n]), s)
    return RelaxationResult(float(res.fun), q, MODE_FULL)


# ---------------------------------------------------------------------------
# direct influence X -> B
# ---------------------------------------------------------------------------


def min_direct_influence_lp(
    corr: InstrumentalCorrelation,
    mode: str = MODE_INEQ,
    ineq: LinearInequality | None = None,
    objective: str = "per-strategy",
) -> RelaxationResult:
    """Minimum direct-influence strength C_{X->B} explaining the data.

    mode "inequality-value" constrains only the inequality value V W q = V p
    (this reproduces min C = max[(I-3)/4, 0]); "full-distribution" constrains
    W q = p."""
    s = corr.scenario
    mode = _MODE_ALIASES.get(mode) or _err_mode(mode)
    ineq = ineq or canonical_inequality()
    if ineq.c.shape != corr.p.shape:
        raise ScenarioMismatchError("inequality and correlation scenarios differ")
    w = relaxed_matrix(s)
    n = w.shape[1]

    if mode == MODE_FULL:
        a_eq_lhs = np.vstack([w, np.ones((1, n))])
        b_eq = np.concatenate([corr.p.reshape(-1), [1.0]])
    else:
        v = ineq.c.reshape(-1)
        a_eq_lhs = np.vstack([v @ w, np.ones(n)])
        b_eq = np.array([float(v @ corr.p.reshape(-1)), 1.0])

    if objective == "per-strategy":
        obj = _relaxed_indicator(s)
        res = _solve(obj, a_eq=a_eq_lhs, b_eq=b_eq)
        if res.status == 2:
            raise NonClassicalCorrelationError("no relaxed model reproduces the constraint")
        if res.status != 0:  # pragma: no cover
            raise SolverError(f"direct-influence LP failed: {res.message}")
        q = ResponseFunctionDistribution(FAMILY_RELAXED, _clean_weights(res.x), s)
        return RelaxationResult(float(res.fun), q, mode, objective)

    if objective != "sup-outside":
        raise StructuralError(f"unknown objective {objective!r}")
    rows = _relaxed_pair_rows(s)
    n_var = n + 1
    a_ub = np.hstack([rows, -np.ones((rows.shape[0], 1))])
    a_eq = np.hstack([a_eq_lhs, np.zeros((a_eq_lhs.shape[0], 1))])
    obj = np.zeros(n_var)
    obj[-1] = 1.0
    res = _solve(obj, a_ub=a_ub, b_ub=np.zeros(rows.shape[0]), a_eq=a_eq, b_eq=b_eq)
    if res.status != 0:  # pragma: no cover
        raise SolverError(f"direct-influence LP failed: {res.message}")
    q = ResponseFunctionDistribution(FAMILY_RELAXED, _clean_weights(res.x[:n]), s)
    return RelaxationResult(float(res.fun), q, mode, objective)


def min_direct_influence_at_value(
    value: float,
    scenario: Scenario = CANONICAL_SCENARIO,
    ineq: LinearInequality | None = None,
) -> float:
    """Inequality-value-mode minimum C for a bare inequality value (no full
    correlation needed, e.g. published experimental numbers)."""
    ineq = ineq or canonical_inequality()
    w = relaxed_matrix(scenario)
    n = w.shape[1]
    v = ineq.c.reshape(-1)
    a_eq = np.vstack([v @ w, np.ones(n)])
    res = _solve(_relaxed_indicator(scenario), a_eq=a_eq, b_eq=np.array([value, 1.0]))
    if res.status == 2:
        raise StructuralError(f"inequality value {value} is outside the algebraic range")
    if res.status != 0:  # pragma: no cover
        raise SolverError(f"direct-influence LP failed: {res.message}")
    return float(res.fun)


# ---------------------------------------------------------------------------
# measurement dependence M_{X:Lambda}
# ---------------------------------------------------------------------------


@lru_cache(maxsize=None)
def _measurement_family(scenario: Scenario):
    """gamma = (gamma_x, lambda): lambda runs over instrumental strategies."""
    return tuple(
        (x, st) for x in range(scenario.n_x) for st in enumerate_strategies(scenario)
    )


def measurement_matrix(scenario: Scenario = CANONICAL_SCENARIO, p_x: np.ndarray | None = None) -> np.ndarray:
    """T with T[(x,a,b), (gx,l)] = d_{x,gx} d_{a,Da(x,l)} d_{b,Db(a,l)} / p(x)."""
    p_x = _default_px(scenario, p_x)
    fam = _measurement_family(scenario)
    verts = vertex_matrix(scenario).T.astype(float)
    cells = scenario.n_a * scenario.n_b
    t = np.zeros((scenario.n_x * cells, len(fam)))
    n_strat = scenario.n_strategies
    for j, (gx, _st) in enumerate(fam):
        block = verts[gx * cells : (gx + 1) * cells, j % n_strat]
        t[gx * cells : (gx + 1) * cells, j] = block / p_x[gx]
    return t


def _default_px(scenario: Scenario, p_x):
    if p_x is None:
        return np.full(scenario.n_x, 1.0 / scenario.n_x)
    p_x = np.asarray(p_x, dtype=float)
    if p_x.shape != (scenario.n_x,) or np.any(p_x <= 0) or abs(p_x.sum() - 1) > 1e-9:
        raise StructuralError("p_x must be a strictly positive distribution over settings")
    return p_x


def min_measurement_dependence_lp(
    corr: InstrumentalCorrelation,
    p_x: np.ndarray | None = None,
    mode: str = MODE_FULL,
    ineq: LinearInequality | None = None,
) -> RelaxationResult:
    """Minimum total-variation correlation M_{X:L} = sum |p(x,l) - p(x)p(l)|
    over measurement-dependent models reproducing the data.

    The joint weights q(x,l) are the LP variables; |.| terms are linearized
    with one auxiliary variable per (x,l).  Both modes pin the x-marginals of
    q to the design distribution p(x) (the model is inconsistent otherwise)."""
    s = corr.scenario
    mode = _MODE_ALIASES.get(mode) or _err_mode(mode)
    p_x = _default_px(s, p_x)
    n_strat = s.n_strategies
    n = s.n_x * n_strat
    t_mat = measurement_matrix(s, p_x)

    # abs linearization: u_{x,l} >= +/- (q_{x,l} - p_x(x) * sum_x' q_{x',l})
    n_var = n + n
    a_ub = np.zeros((2 * n, n_var))
    for x in range(s.n_x):
        for lam in range(n_strat):
            k = x * n_strat + lam
            row = np.zeros(n)
            row[k] += 1.0
            for x2 in range(s.n_x):
                row[x2 * n_strat + lam] -= p_x[x]
            a_ub[2 * k, :n] = row
            a_ub[2 * k, n + k] = -1.0
            a_ub[2 * k + 1, :n] = -row
            a_ub[2 * k + 1, n + k] = -1.0

    eq_rows = [np.concatenate([np.ones(n), np.zeros(n)])]
    eq_vals = [1.0]
    for x in range(s.n_x):  # marginal consistency with the design p(x)
        row = np.zeros(n_var)
        row[x * n_strat : (x + 1) * n_strat] = 1.0
        eq_rows.append(row)
        eq_vals.append(p_x[x])
    if mode == MODE_FULL:
        a = np.hstack([t_mat, np.zeros((t_mat.shape[0], n))])
        eq_rows.extend(a)
        eq_vals.extend(corr.p.reshape(-1))
    else:
        ineq = ineq or canonical_inequality()
        v = ineq.c.reshape(-1)
        eq_rows.append(np.concatenate([v @ t_mat, np.zeros(n)]))
        eq_vals.append(float(v @ corr.p.reshape(-1)))

    obj = np.concatenate([np.zeros(n), np.ones(n)])
    res = _solve(obj, a_eq=np.array(eq_rows), b_eq=np.array(eq_vals))
    if res.status == 2:
        raise NonClassicalCorrelationError("no measurement-dependent model matches the constraint")
    if res.status != 0:  # pragma: no cover
        raise SolverError(f"measurement-dependence LP failed: {res.message}")
    q = ResponseFunctionDistribution(FAMILY_MEASUREMENT, _clean_weights(res.x[:n]), s)
    return RelaxationResult(float(res.fun), q, mode)


def pinsker_bound(m: float) -> float:
    """Mutual-information lower bound I(X:L) >= m^2 log2(e) / 2 (bits)."""
    if not 0 <= m <= 2:
        raise StructuralError("total variation must lie in [0, 2]")
    return 0.5 * m * m * np.log2(np.e)


# ---------------------------------------------------------------------------
# intervention test for the X -> B loophole
# ---------------------------------------------------------------------------


@dataclass
class InterventionReport:
    do_conditionals: np.ndarray  # p(b | x, do(a)) indexed (a, x, b)
    max_x_dependence: float
    independent: bool

    def __str__(self):
        verdict = "independent" if self.independent else "X -> B dependence detected"
        return f"{verdict} (max shift {self.max_x_dependence:.3g})"


def intervention_independence_test(
    q: ResponseFunctionDistribution, tol: float = 1e-9
) -> InterventionReport:
    """Under do(a), p(b|x) must not depend on x unless X -> B is present."""
    if q.family != FAMILY_RELAXED:
        raise StructuralError("intervention test expects the x-to-b-relaxed family")
    s = q.scenario
    strats = relaxed_strategies(s)
    do = np.zeros((s.n_a, s.n_x, s.n_b))
    for weight, st in zip(q.q, strats):
        if weight == 0.0:
            continue
        for a in range(s.n_a):
            for x in range(s.n_x):
                do[a, x, st.d_b[a][x]] += weight
    spread = float(np.max(do.max(axis=1) - do.min(axis=1)))
    return InterventionReport(do, spread, spread <= tol)


def embed_instrumental(q: np.ndarray, scenario: Scenario = CANONICAL_SCENARIO) -> ResponseFunctionDistribution:
    """Lift instrumental weights into the relaxed family (x-independent d_b)."""
    strategies = enumerate_strategies(scenario)
    relaxed = relaxed_strategies(scenario)
    index = {st: j for j, st in enumerate(relaxed)}
    out = np.zeros(len(relaxed))
    for weight, st in zip(q, strategies):
        lifted = RelaxedStrategy(
            st.d_a, tuple(tuple(st.d_b[a] for _ in range(scenario.n_x)) for a in range(scenario.n_a))
        )
        out[index[lifted]] += weight
    return ResponseFunctionDistribution(FAMILY_RELAXED, out, scenario)


def relaxed_algebraic_max(ineq: LinearInequality | None = None, scenario: Scenario = CANONICAL_SCENARIO):
    """Exact maximum of an inequality over the relaxed strategy family."""
    ineq = ineq or canonical_inequality()
    w = relaxed_matrix(scenario)
    vals = ineq.c.reshape(-1) @ w
    if ineq.is_integral():
        vals = np.round(vals).astype(np.int64)
    best = vals.max()
    strats = relaxed_strategies(scenario)
    arg = [strats[i] for i in np.flatnonzero(vals == best)]
    return (int(best) if ineq.is_integral() else float(best)), arg


def _clean_weights(q: np.ndarray) -> np.ndarray:
    q = np.clip(q, 0.0, None)
    return q / q.sum()


def _err_mode(mode):
    raise StructuralError(f"unknown constraint mode {mode!r}; use 'full' or 'ineq'")
