"""Core objects of the instrumental scenario.

Conventions used throughout the package:

* outcome 0 maps to eigenvalue +1, outcome 1 to eigenvalue -1 (this is what
  makes <AB>_x = sum_{a,b} (-1)^(a+b) p(a,b|x));
* settings are stored 0-based internally, file formats and printed labels
  use the 1-based x in {1, 2, 3};
* correlations are immutable value objects, every operation is pure.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from .errors import ScenarioMismatchError, StructuralError, UnsupportedScenarioError

NORMALIZATION_TOL = 1e-9

SIGN = (1, -1)  # outcome -> eigenvalue


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Scenario:
    """Cardinalities of the instrumental scenario (x settings, a/b outcomes)."""

    n_x: int = 3
    n_a: int = 2
    n_b: int = 2

    def __post_init__(self):
        if min(self.n_x, self.n_a, self.n_b) < 1 or min(self.n_a, self.n_b) < 2:
            raise StructuralError("outcome cardinalities must be >= 2")

    @property
    def n_strategies(self) -> int:
        """Number of deterministic instrumental strategies n_a^n_x * n_b^n_a."""
        return self.n_a**self.n_x * self.n_b**self.n_a

    @property
    def binary(self) -> bool:
        return self.n_a == 2 and self.n_b == 2


CANONICAL_SCENARIO = Scenario(3, 2, 2)


@dataclass(frozen=True)
class InstrumentalCorrelation:
    """Observed conditionals p(a,b|x) stored as a (n_x, n_a, n_b) tensor."""

    p: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.p, dtype=float)
        if p.ndim != 3:
            raise StructuralError(f"p must have shape (n_x, n_a, n_b), got {p.shape}")
        object.__setattr__(self, "p", _frozen(p))

    @property
    def scenario(self) -> Scenario:
        return Scenario(*self.p.shape)

    def __eq__(self, other) -> bool:
        return isinstance(other, InstrumentalCorrelation) and np.array_equal(self.p, other.p)

    def __hash__(self):
        return hash(self.p.tobytes())

    # -- serialization ------------------------------------------------------

    def to_json(self) -> str:
        n_x, n_a, n_b = self.p.shape
        return json.dumps(
            {"n_x": n_x, "n_a": n_a, "n_b": n_b, "p": self.p.tolist()},
            separators=(",", ":"),
        )

    @classmethod
    def from_json(cls, text: str) -> "InstrumentalCorrelation":
        obj = json.loads(text)
        p = np.array(obj["p"], dtype=float)
        if p.shape != (obj["n_x"], obj["n_a"], obj["n_b"]):
            raise StructuralError("JSON p tensor does not match declared shape")
        return cls(p)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["x", "a", "b", "p"])
        n_x, n_a, n_b = self.p.shape
        for x in range(n_x):
            for a in range(n_a):
                for b in range(n_b):
                    w.writerow([x + 1, a, b, repr(self.p[x, a, b])])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "InstrumentalCorrelation":
        rows = list(csv.DictReader(io.StringIO(text)))
        if not rows:
            raise StructuralError("empty CSV")
        n_x = max(int(r["x"]) for r in rows)
        n_a = max(int(r["a"]) for r in rows) + 1
        n_b = max(int(r["b"]) for r in rows) + 1
        p = np.full((n_x, n_a, n_b), np.nan)
        for r in rows:
            p[int(r["x"]) - 1, int(r["a"]), int(r["b"])] = float(r["p"])
        if np.isnan(p).any():
            raise StructuralError("CSV is missing (x,a,b) cells")
        return cls(p)


@dataclass(frozen=True)
class BipartiteBox:
    """Bipartite conditional distribution p(a,b|x,y), indexed (x, y, a, b)."""

    p: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.p, dtype=float)
        if p.ndim != 4:
            raise StructuralError(f"box must have shape (n_x, n_y, n_a, n_b), got {p.shape}")
        object.__setattr__(self, "p", _frozen(p))

    @property
    def n_x(self) -> int:
        return self.p.shape[0]

    @property
    def n_y(self) -> int:
        return self.p.shape[1]


@dataclass(frozen=True)
class Wiring:
    """Map from Alice's output a to Bob's input y."""

    f: tuple

    def __init__(self, f: Iterable[int] | Callable[[int], int], n_a: int = 2):
        if callable(f):
            f = tuple(f(a) for a in range(n_a))
        object.__setattr__(self, "f", tuple(int(v) for v in f))

    def __call__(self, a: int) -> int:
        return self.f[a]


@dataclass(frozen=True)
class LinearInequality:
    """Coefficient tensor c(x,a,b) with classical bound: sum c*p <= bound."""

    c: np.ndarray
    bound: float
    name: str = ""

    def __post_init__(self):
        c = np.asarray(self.c, dtype=float)
        if c.ndim != 3:
            raise StructuralError(f"coefficients must have shape (n_x, n_a, n_b), got {c.shape}")
        object.__setattr__(self, "c", _frozen(c))
        object.__setattr__(self, "bound", float(self.bound))

    @property
    def scenario(self) -> Scenario:
        return Scenario(*self.c.shape)

    def is_integral(self) -> bool:
        return bool(
            np.all(self.c == np.round(self.c)) and self.bound == round(self.bound)
        )


@dataclass
class CheckResult:
    name: str
    passed: bool
    worst: float


@dataclass
class ValidationReport:
    checks: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def __str__(self) -> str:
        lines = []
        for c in self.checks:
            lines.append(f"{'PASS' if c.passed else 'FAIL'} {c.name} (worst {c.worst:.3g})")
        return "\n".join(lines)


def validate_correlation(corr: InstrumentalCorrelation, tol: float = NORMALIZATION_TOL) -> ValidationReport:
    """Check nonnegativity and per-setting normalization of p(a,b|x)."""
    p = corr.p
    report = ValidationReport()
    neg = float(np.min(p))
    report.checks.append(CheckResult("nonnegative", neg >= -tol, min(neg, 0.0)))
    norms = p.sum(axis=(1, 2))
    worst = float(np.max(np.abs(norms - 1.0)))
    report.checks.append(CheckResult("normalized per x", worst <= tol, worst))
    return report


def correlator(corr: InstrumentalCorrelation, which: str, x: int) -> float:
    """<A>_x, <B>_x or <AB>_x with x given as the paper's 1-based label."""
    s = corr.scenario
    if not s.binary:
        raise UnsupportedScenarioError("correlators need binary outcomes")
    if not 1 <= x <= s.n_x:
        raise StructuralError(f"setting x={x} outside 1..{s.n_x}")
    block = corr.p[x - 1]
    sa = np.array(SIGN)[:, None]
    sb = np.array(SIGN)[None, :]
    if which == "A":
        return float(np.sum(sa * block))
    if which == "B":
        return float(np.sum(sb * block))
    if which == "AB":
        return float(np.sum(sa * sb * block))
    raise StructuralError(f"unknown correlator {which!r}")


def evaluate_inequality(ineq: LinearInequality, corr: InstrumentalCorrelation) -> float:
    """Value of sum_{x,a,b} c(x,a,b) p(a,b|x)."""
    if ineq.c.shape != corr.p.shape:
        raise ScenarioMismatchError(
            f"inequality for {ineq.c.shape} applied to correlation of shape {corr.p.shape}"
        )
    return float(np.sum(ineq.c * corr.p))


def canonical_inequality() -> LinearInequality:
    """The 3-setting instrumental inequality

        -<B>_1 + 2<B>_2 + <A>_1 - <AB>_1 + 2<AB>_3 <= 3

    expanded into probability coefficients."""
    c = np.zeros((3, 2, 2))
    for a in range(2):
        for b in range(2):
            sa, sb = SIGN[a], SIGN[b]
            c[0, a, b] = -sb + sa - sa * sb
            c[1, a, b] = 2 * sb
            c[2, a, b] = 2 * sa * sb
    return LinearInequality(c, 3.0, name="three-setting instrumental")


def correlator_form(ineq: LinearInequality) -> str:
    """Render a binary-outcome inequality in <A>_x / <B>_x / <AB>_x notation."""
    s = ineq.scenario
    if not s.binary:
        raise UnsupportedScenarioError("correlator rendering needs binary outcomes")
    terms = []
    const = 0.0
    for x in range(s.n_x):
        block = ineq.c[x]
        k = block.mean()
        alpha = float(np.sum(np.array(SIGN)[:, None] * block)) / 4
        beta = float(np.sum(np.array(SIGN)[None, :] * block)) / 4
        gamma = float(np.sum(np.outer(SIGN, SIGN) * block)) / 4
        const += k
        for coef, label in ((alpha, f"<A>_{x+1}"), (beta, f"<B>_{x+1}"), (gamma, f"<AB>_{x+1}")):
            if abs(coef) > 1e-12:
                sign = "+" if coef > 0 else "-"
                mag = abs(coef)
                mag_s = f"{mag:g}" if abs(mag - 1) > 1e-12 else ""
                terms.append(f"{sign} {mag_s}{label}".replace("  ", " "))
    rhs = ineq.bound - const
    lhs = " ".join(terms).lstrip("+ ") or "0"
    return f"{lhs} <= {rhs:g}"


def wire_box(box: BipartiteBox, wiring: Wiring) -> InstrumentalCorrelation:
    """Feed Alice's output into Bob's input: p(a,b|x) = box(a,b|x,f(a))."""
    n_x, n_y, n_a, n_b = box.p.shape
    if any(not 0 <= wiring(a) < n_y for a in range(n_a)):
        raise StructuralError("wiring range exceeds the box's n_y")
    p = np.empty((n_x, n_a, n_b))
    for a in range(n_a):
        p[:, a, :] = box.p[:, wiring(a), a, :]
    return InstrumentalCorrelation(p)


def postselect_bell(box: BipartiteBox, p_y_given_a: np.ndarray | None = None) -> InstrumentalCorrelation:
    """Instrumental correlation from a Bell box with y drawn from p(y|a).

    The default p(y|a) = delta_{y,a} is the post-selection used to simulate
    the feed-forward channel; it coincides with wire_box under the identity
    wiring.  A general conditional marginalizes y."""
    n_x, n_y, n_a, n_b = box.p.shape
    if p_y_given_a is None:
        if n_y != n_a:
            raise StructuralError("delta postselection needs n_y == n_a")
        p_y_given_a = np.eye(n_a)
    w = np.asarray(p_y_given_a, dtype=float)
    if w.shape != (n_a, n_y):
        raise StructuralError(f"p(y|a) must have shape ({n_a}, {n_y})")
    if np.any(w < -NORMALIZATION_TOL) or np.max(np.abs(w.sum(axis=1) - 1)) > NORMALIZATION_TOL:
        raise StructuralError("p(y|a) is not a valid conditional")
    # p(a,b|x) = sum_y p(y|a) box(a,b|x,y)
    p = np.einsum("ay,xyab->xab", w, box.p)
    return InstrumentalCorrelation(p)


def postselect_conditionals(box: BipartiteBox) -> BipartiteBox:
    """Bell-scenario conditionals after keeping only runs with y = a.

    Returns q(a,b|x,y) = box(a,b|x,y) delta_{a,y} / box(a=y|x,y); this is the
    (in general signalling) distribution an experiment sees when it discards
    every run whose post-selected setting disagrees with Alice's outcome."""
    n_x, n_y, n_a, n_b = box.p.shape
    if n_y != n_a:
        raise StructuralError("y = a postselection needs n_y == n_a")
    q = np.zeros_like(box.p)
    for x in range(n_x):
        for y in range(n_y):
            mass = box.p[x, y, y, :].sum()
            if mass <= 0:
                raise StructuralError(f"postselection has zero mass at (x={x}, y={y})")
            q[x, y, y, :] = box.p[x, y, y, :] / mass
    return BipartiteBox(q)


def chsh_value(box: BipartiteBox) -> float:
    """<AB>_{00} + <AB>_{01} + <AB>_{10} - <AB>_{11} for a (2,2,2,2) box."""
    if box.p.shape != (2, 2, 2, 2):
        raise UnsupportedScenarioError("CHSH needs the (2,2;2,2) Bell scenario")
    sab = np.outer(SIGN, SIGN)
    e = np.einsum("xyab,ab->xy", box.p, sab)
    return float(e[0, 0] + e[0, 1] + e[1, 0] - e[1, 1])


def random_correlation(scenario: Scenario = CANONICAL_SCENARIO, rng=None) -> InstrumentalCorrelation:
    """Uniform (Dirichlet) sample from the normalized correlation simplex."""
    rng = np.random.default_rng(rng)
    p = rng.dirichlet(np.ones(scenario.n_a * scenario.n_b), size=scenario.n_x)
    return InstrumentalCorrelation(p.reshape(scenario.n_x, scenario.n_a, scenario.n_b))


def mix(p: InstrumentalCorrelation, q: InstrumentalCorrelation, weight: float) -> InstrumentalCorrelation:
    """Convex combination weight*p + (1-weight)*q."""
    if p.p.shape != q.p.shape:
        raise ScenarioMismatchError("cannot mix correlations from different scenarios")
    return InstrumentalCorrelation(weight * p.p + (1 - weight) * q.p)


def uniform_correlation(scenario: Scenario = CANONICAL_SCENARIO) -> InstrumentalCorrelation:
    p = np.full((scenario.n_x, scenario.n_a, scenario.n_b), 1.0 / (scenario.n_a * scenario.n_b))
    return InstrumentalCorrelation(p)


def relabel_b(corr: InstrumentalCorrelation) -> InstrumentalCorrelation:
    """Flip Bob's outcome b -> 1-b (binary scenarios)."""
    return InstrumentalCorrelation(corr.p[:, :, ::-1])
