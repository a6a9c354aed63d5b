"""Vertices and facets of the classical instrumental polytope.

Vertices are deterministic response strategies a = d_a(x), b = d_b(a); their
images are 0/1 tensors, so the facet side of the dual description can be run
entirely in exact integer/rational arithmetic.  Membership of float points is
decided by an LP with tolerance 1e-9.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from math import gcd

import numpy as np
from scipy.optimize import linprog

from .errors import (
    EnumerationCapError,
    SolverError,
    StructuralError,
    UnsupportedScenarioError,
)
from .scenario import (
    CANONICAL_SCENARIO,
    InstrumentalCorrelation,
    LinearInequality,
    Scenario,
    evaluate_inequality,
)

MEMBERSHIP_TOL = 1e-9
DIMENSION_CAP = 12
STRATEGY_CAP = 10**6


@dataclass(frozen=True)
class DeterministicStrategy:
    """Response functions d_a: x -> a and d_b: a -> b, stored as tuples."""

    d_a: tuple
    d_b: tuple

    def correlation(self) -> InstrumentalCorrelation:
        n_x, n_a = len(self.d_a), len(self.d_b)
        n_b = max(self.d_b) + 1 if max(self.d_b) + 1 > 2 else 2
        p = np.zeros((n_x, n_a, n_b))
        for x in range(n_x):
            a = self.d_a[x]
            p[x, a, self.d_b[a]] = 1.0
        return InstrumentalCorrelation(p)


def enumerate_strategies(scenario: Scenario = CANONICAL_SCENARIO, cap: int = STRATEGY_CAP):
    """All deterministic strategies in lexicographic order of (d_a, d_b)."""
    if scenario.n_strategies > cap:
        raise EnumerationCapError(
            f"{scenario.n_strategies} strategies exceed the cap of {cap}"
        )
    out = []
    for d_a in itertools.product(range(scenario.n_a), repeat=scenario.n_x):
        for d_b in itertools.product(range(scenario.n_b), repeat=scenario.n_a):
            out.append(DeterministicStrategy(d_a, d_b))
    return out


def strategy_to_correlation(strategy: DeterministicStrategy) -> InstrumentalCorrelation:
    return strategy.correlation()


@lru_cache(maxsize=None)
def vertex_matrix(scenario: Scenario = CANONICAL_SCENARIO) -> np.ndarray:
    """Integer matrix whose rows are the flattened vertex correlations."""
    strategies = enumerate_strategies(scenario)
    m = np.zeros((len(strategies), scenario.n_x * scenario.n_a * scenario.n_b), dtype=np.int64)
    for i, s in enumerate(strategies):
        m[i] = strategy_to_correlation(s).p.reshape(-1).astype(np.int64)
    m.setflags(write=False)
    return m


def classical_max(ineq: LinearInequality, scenario: Scenario | None = None):
    """Exact maximum of an inequality over all deterministic strategies.

    Returns (value, argmax strategies); integer coefficient tensors are
    evaluated in integer arithmetic so the bound is exact."""
    scenario = scenario or ineq.scenario
    strategies = enumerate_strategies(scenario)
    verts = vertex_matrix(scenario)
    if ineq.is_integral():
        vals = verts @ ineq.c.reshape(-1).astype(np.int64)
        best = int(vals.max())
    else:
        vals = verts @ ineq.c.reshape(-1)
        best = float(vals.max())
    attaining = [strategies[i] for i in np.flatnonzero(vals == vals.max())]
    return best, attaining


@dataclass
class MembershipCertificate:
    verdict: str  # "inside" | "outside"
    distance: float
    witness: LinearInequality | None = None
    weights: np.ndarray | None = None

    @property
    def inside(self) -> bool:
        return self.verdict == "inside"


def membership_lp(
    corr: InstrumentalCorrelation,
    scenario: Scenario | None = None,
    tol: float = MEMBERSHIP_TOL,
) -> MembershipCertificate:
    """Decide polytope membership of p; outside points get a separating facet.

    First a feasibility LP over convex vertex weights; on infeasibility a
    second LP maximizes c.p - max_d c.v_d over box-normalized functionals,
    which is the Farkas witness."""
    scenario = scenario or corr.scenario
    verts = vertex_matrix(scenario).astype(float)
    n, dim = verts.shape
    target = corr.p.reshape(-1)

    a_eq = np.vstack([verts.T, np.ones(n)])
    b_eq = np.concatenate([target, [1.0]])
    res = linprog(
        np.zeros(n),
        A_eq=a_eq,
        b_eq=b_eq,
        bounds=[(0, None)] * n,
        method="highs",
        options={"primal_feasibility_tolerance": tol, "dual_feasibility_tolerance": tol},
    )
    if res.status == 0:
        return MembershipCertificate("inside", 0.0, weights=res.x)
    if res.status != 2:  # pragma: no cover - solver trouble
        raise SolverError(f"membership feasibility LP failed: {res.message}")

    # Witness LP: max c.p + c0 with c.v + c0 <= 0 on every vertex, |c| <= 1.
    obj = -np.concatenate([target, [1.0]])
    a_ub = np.hstack([verts, np.ones((n, 1))])
    res2 = linprog(
        obj,
        A_ub=a_ub,
        b_ub=np.zeros(n),
        bounds=[(-1, 1)] * dim + [(None, None)],
        method="highs",
    )
    if res2.status != 0:  # pragma: no cover
        raise SolverError(f"membership witness LP failed: {res2.message}")
    c = res2.x[:dim]
    violation = -res2.fun
    bound_val = float(np.max(verts @ c))
    witness = LinearInequality(
        c.reshape(corr.p.shape), bound_val, name="membership witness"
    )
    return MembershipCertificate("outside", float(violation), witness=witness)


# ---------------------------------------------------------------------------
# exact facet enumeration (double description on the polar cone)
# ---------------------------------------------------------------------------


def _reduced_vertices(scenario: Scenario) -> tuple[np.ndarray, int]:
    """Vertices with the (a,b) = (n_a-1, n_b-1) coordinate dropped per x."""
    full = vertex_matrix(scenario)
    n_cells = scenario.n_a * scenario.n_b
    keep = [
        x * n_cells + a * scenario.n_b + b
        for x in range(scenario.n_x)
        for a in range(scenario.n_a)
        for b in range(scenario.n_b)
        if not (a == scenario.n_a - 1 and b == scenario.n_b - 1)
    ]
    return full[:, keep], len(keep)


def _primitive(vec: list) -> tuple:
    """Scale a rational vector to a primitive integer vector (positive scale)."""
    fracs = [Fraction(v) for v in vec]
    den = 1
    for f in fracs:
        den = den * f.denominator // gcd(den, f.denominator)
    ints = [int(f * den) for f in fracs]
    g = 0
    for v in ints:
        g = gcd(g, abs(v))
    if g > 1:
        ints = [v // g for v in ints]
    return tuple(ints)


def _initial_basis(rows: list[tuple]) -> list[int]:
    """Indices of a maximal independent row subset (exact Gaussian elim)."""
    dim = len(rows[0])
    basis_rows: list[list[Fraction]] = []
    pivots: list[int] = []
    chosen = []
    for idx, row in enumerate(rows):
        v = [Fraction(x) for x in row]
        for br, pc in zip(basis_rows, pivots):
            if v[pc]:
                coef = v[pc] / br[pc]
                v = [a - coef * b for a, b in zip(v, br)]
        pivot = next((j for j, x in enumerate(v) if x), None)
        if pivot is not None:
            basis_rows.append(v)
            pivots.append(pivot)
            chosen.append(idx)
            if len(chosen) == dim:
                break
    return chosen


def _invert_fraction_matrix(m: list[list[Fraction]]) -> list[list[Fraction]]:
    n = len(m)
    aug = [row[:] + [Fraction(int(i == j)) for j in range(n)] for i, row in enumerate(m)]
    for col in range(n):
        pivot = next(r for r in range(col, n) if aug[r][col] != 0)
        aug[col], aug[pivot] = aug[pivot], aug[col]
        pv = aug[col][col]
        aug[col] = [x / pv for x in aug[col]]
        for r in range(n):
            if r != col and aug[r][col]:
                f = aug[r][col]
                aug[r] = [x - f * y for x, y in zip(aug[r], aug[col])]
    return [row[n:] for row in aug]


def _extreme_rays(rows: list[tuple]) -> list[tuple]:
    """Extreme rays of the pointed cone {y : row . y >= 0 for all rows}.

    Incremental double description with the combinatorial adjacency test;
    all arithmetic is exact (int / Fraction)."""
    dim = len(rows[0])
    base_idx = _initial_basis(rows)
    if len(base_idx) < dim:
        raise StructuralError("cone is not pointed: polytope not full-dimensional")
    base = [[Fraction(x) for x in rows[i]] for i in base_idx]
    inv = _invert_fraction_matrix(base)
    rays = [_primitive([inv[r][j] for r in range(dim)]) for j in range(dim)]

    order = base_idx + [i for i in range(len(rows)) if i not in base_idx]
    processed: list[int] = list(base_idx)

    def tight_mask(ray: tuple, idxs: list[int]) -> int:
        m = 0
        for pos, i in enumerate(idxs):
            if sum(a * b for a, b in zip(rows[i], ray)) == 0:
                m |= 1 << pos
        return m

    masks = [tight_mask(r, processed) for r in rays]

    for i in order[dim:]:
        row = rows[i]
        vals = [sum(a * b for a, b in zip(row, r)) for r in rays]
        keep_idx = [k for k, v in enumerate(vals) if v >= 0]
        pos_idx = [k for k, v in enumerate(vals) if v > 0]
        neg_idx = [k for k, v in enumerate(vals) if v < 0]

        new_rays: list[tuple] = []
        for kp in pos_idx:
            for kn in neg_idx:
                common = masks[kp] & masks[kn]
                # adjacency: no third ray is tight on every common constraint
                adjacent = True
                for ko in range(len(rays)):
                    if ko in (kp, kn):
                        continue
                    if masks[ko] & common == common:
                        adjacent = False
                        break
                if not adjacent:
                    continue
                vp, vn = vals[kp], vals[kn]
                combo = [vp * n - vn * p for p, n in zip(rays[kp], rays[kn])]
                new_rays.append(_primitive(combo))

        processed.append(i)
        bit = 1 << (len(processed) - 1)
        rays2, masks2 = [], []
        for k in keep_idx:
            rays2.append(rays[k])
            masks2.append(masks[k] | (bit if vals[k] == 0 else 0))
        for r in new_rays:
            rays2.append(r)
            masks2.append(tight_mask(r, processed))
        rays, masks = rays2, masks2

    return rays


def _canonical_gauge(c_full: np.ndarray, bound, scenario: Scenario):
    """Deterministic representative of (c, bound) modulo per-x normalization.

    The gauge zeroes the (n_a-1, n_b-1) cell of every x block, then rescales
    to a primitive integer vector (positive scale only: the direction of the
    inequality is not free)."""
    c = [[Fraction(v) for v in row] for row in np.reshape(c_full, (scenario.n_x, -1)).tolist()]
    b = Fraction(bound)
    last = scenario.n_a * scenario.n_b - 1
    for x in range(scenario.n_x):
        shift = c[x][last]
        if shift:
            c[x] = [v - shift for v in c[x]]
            b -= shift
    flat = [v for row in c for v in row] + [b]
    prim = _primitive(flat)
    coeffs = np.array(prim[:-1], dtype=np.int64).reshape(scenario.n_x, scenario.n_a, scenario.n_b)
    return coeffs, int(prim[-1])


@lru_cache(maxsize=None)
def enumerate_facets(scenario: Scenario = CANONICAL_SCENARIO) -> tuple:
    """Complete facet list of the instrumental polytope, exact integers.

    Facets are returned in the canonical gauge (see _canonical_gauge) sorted
    lexicographically; the trivial ray of the polar cone (0 <= 1) is dropped."""
    dim = scenario.n_x * (scenario.n_a * scenario.n_b - 1)
    if dim > DIMENSION_CAP:
        raise UnsupportedScenarioError(
            f"reduced dimension {dim} exceeds facet enumeration cap {DIMENSION_CAP}"
        )
    reduced, _ = _reduced_vertices(scenario)
    rows = [tuple(int(v) for v in vert) + (1,) for vert in reduced]
    rays = _extreme_rays(rows)

    facets = []
    last = scenario.n_a * scenario.n_b - 1
    for ray in rays:
        c_red, c0 = ray[:-1], ray[-1]
        if all(v == 0 for v in c_red):
            continue  # trivial 0 <= 1 ray
        # reduced inequality (-c_red) . p_red <= c0; lift with zero on dropped cells
        full = np.zeros((scenario.n_x, scenario.n_a * scenario.n_b), dtype=np.int64)
        pos = 0
        for x in range(scenario.n_x):
            for cell in range(scenario.n_a * scenario.n_b):
                if cell == last:
                    continue
                full[x, cell] = -c_red[pos]
                pos += 1
        coeffs, bound = _canonical_gauge(full.reshape(-1), c0, scenario)
        facets.append(
            LinearInequality(coeffs.astype(float), float(bound), name="facet")
        )
    facets.sort(key=lambda f: (tuple(f.c.reshape(-1).astype(int)), int(f.bound)))
    return tuple(facets)


def violated_facets(
    corr: InstrumentalCorrelation, scenario: Scenario | None = None, tol: float = MEMBERSHIP_TOL
):
    """Facets whose bound the correlation exceeds (empty iff inside)."""
    scenario = scenario or corr.scenario
    return [
        f
        for f in enumerate_facets(scenario)
        if evaluate_inequality(f, corr) > f.bound + tol
    ]


# ---------------------------------------------------------------------------
# relabeling symmetries
# ---------------------------------------------------------------------------


def _symmetry_group(scenario: Scenario):
    """Relabelings preserving the instrumental polytope.

    Settings permute freely and b may be relabeled per a; the a relabeling
    must be global (a per-x flip would make b depend on x through the label
    change, leaving the polytope)."""
    xs = list(itertools.permutations(range(scenario.n_x)))
    pas = list(itertools.permutations(range(scenario.n_a)))
    pbs = list(
        itertools.product(itertools.permutations(range(scenario.n_b)), repeat=scenario.n_a)
    )
    return [(sx, pa, pb) for sx in xs for pa in pas for pb in pbs]


def _apply_relabeling(tensor: np.ndarray, g) -> np.ndarray:
    sx, pa, pb = g
    n_x, n_a, n_b = tensor.shape
    out = np.empty_like(tensor)
    for x in range(n_x):
        for a in range(n_a):
            ao = pa[a]
            for b in range(n_b):
                out[x, a, b] = tensor[sx[x], ao, pb[ao][b]]
    return out


def _facet_key(ineq: LinearInequality, scenario: Scenario):
    coeffs, bound = _canonical_gauge(ineq.c.reshape(-1), Fraction(ineq.bound), scenario)
    return tuple(coeffs.reshape(-1).tolist()) + (bound,)


@dataclass
class FacetClass:
    class_id: int
    representative: LinearInequality
    members: list


def symmetry_reduce(facets, scenario: Scenario = CANONICAL_SCENARIO) -> list:
    """Partition facets into orbits of the relabeling group.

    Returns FacetClass entries ordered by their canonical representative, so
    class ids are stable across runs."""
    group = _symmetry_group(scenario)
    classes: dict[tuple, list] = {}
    reps: dict[tuple, tuple] = {}
    for f in facets:
        orbit_keys = []
        for g in group:
            moved = LinearInequality(_apply_relabeling(f.c, g), f.bound)
            orbit_keys.append(_facet_key(moved, scenario))
        rep = min(orbit_keys)
        classes.setdefault(rep, []).append(f)
        reps.setdefault(rep, rep)
    out = []
    for class_id, rep in enumerate(sorted(classes)):
        key = rep
        coeffs = np.array(key[:-1], dtype=float).reshape(scenario.n_x, scenario.n_a, scenario.n_b)
        rep_ineq = LinearInequality(coeffs, float(key[-1]), name=f"class {class_id}")
        out.append(FacetClass(class_id, rep_ineq, classes[key]))
    return out


def facet_class_of(ineq: LinearInequality, classes, scenario: Scenario = CANONICAL_SCENARIO):
    """Find which symmetry class a given inequality belongs to, else None."""
    group = _symmetry_group(scenario)
    keys = {_facet_key(LinearInequality(_apply_relabeling(ineq.c, g), ineq.bound), scenario)
            for g in group}
    for cls in classes:
        if _facet_key(cls.representative, scenario) in keys:
            return cls
    return None
