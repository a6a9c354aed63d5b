"""Two-qubit states, feed-forward measurements and the noise models.

The Born rule path here works on explicit 4x4 density matrices and 2x2
effects; it is the reference implementation that the fast kernels are
checked against.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import StructuralError
from .scenario import InstrumentalCorrelation, SIGN

HERMITICITY_TOL = 1e-12
TRACE_TOL = 1e-12
PSD_TOL = -1e-10

SX = np.array([[0, 1], [1, 0]], dtype=complex)
SY = np.array([[0, -1j], [1j, 0]], dtype=complex)
SZ = np.array([[1, 0], [0, -1]], dtype=complex)
ID2 = np.eye(2, dtype=complex)
PAULIS = (SX, SY, SZ)

INV_SQRT2 = 1.0 / math.sqrt(2.0)


def _frozen_complex(m) -> np.ndarray:
    m = np.ascontiguousarray(m, dtype=complex)
    m.setflags(write=False)
    return m


@dataclass(frozen=True)
class TwoQubitState:
    """Density matrix of the source pair, the quantum stand-in for the
    latent common cause."""

    rho: np.ndarray

    def __post_init__(self):
        rho = np.asarray(self.rho, dtype=complex)
        if rho.shape != (4, 4):
            raise StructuralError(f"two-qubit state must be 4x4, got {rho.shape}")
        if np.max(np.abs(rho - rho.conj().T)) > HERMITICITY_TOL:
            raise StructuralError("state is not Hermitian")
        if abs(np.trace(rho).real - 1.0) > TRACE_TOL or abs(np.trace(rho).imag) > TRACE_TOL:
            raise StructuralError("state trace is not 1")
        if np.linalg.eigvalsh(rho).min() < PSD_TOL:
            raise StructuralError("state has a negative eigenvalue")
        object.__setattr__(self, "rho", _frozen_complex(rho))

    def reduced_b(self) -> np.ndarray:
        """Partial trace over Alice's qubit."""
        r = self.rho.reshape(2, 2, 2, 2)
        return np.einsum("ibid->bd", r)

    def reduced_a(self) -> np.ndarray:
        r = self.rho.reshape(2, 2, 2, 2)
        return np.einsum("aibi->ab", r)

    def correlation_summary(self):
        """(r, s, T): Alice/Bob Bloch vectors and the Pauli correlation matrix."""
        r = np.array([np.trace(np.kron(P, ID2) @ self.rho).real for P in PAULIS])
        s = np.array([np.trace(np.kron(ID2, P) @ self.rho).real for P in PAULIS])
        t = np.array(
            [[np.trace(np.kron(P, Q) @ self.rho).real for Q in PAULIS] for P in PAULIS]
        )
        return r, s, t

    def to_json(self) -> str:
        return json.dumps(
            {"rho": [[[v.real, v.imag] for v in row] for row in self.rho.tolist()]},
            separators=(",", ":"),
        )

    @classmethod
    def from_json(cls, text: str) -> "TwoQubitState":
        rows = json.loads(text)["rho"]
        return cls(np.array([[complex(re, im) for re, im in row] for row in rows]))


@dataclass(frozen=True)
class BinaryQubitMeasurement:
    """Two-outcome qubit measurement: Bloch axis plus POVM efficiencies.

    eta_up applies to the +1 eigenprojector, eta_down to the -1 one;
    (1, 1) is the projective limit."""

    axis: np.ndarray
    eta_up: float = 1.0
    eta_down: float = 1.0

    def __post_init__(self):
        axis = np.asarray(self.axis, dtype=float)
        if axis.shape != (3,):
            raise StructuralError("axis must be a 3-vector")
        if abs(np.linalg.norm(axis) - 1.0) > 1e-12:
            raise StructuralError("axis must be a unit vector")
        if not (0 <= self.eta_up <= 1 and 0 <= self.eta_down <= 1):
            raise StructuralError("efficiencies must lie in [0, 1]")
        axis = axis.copy()
        axis.setflags(write=False)
        object.__setattr__(self, "axis", axis)

    def observable(self) -> np.ndarray:
        return self.axis[0] * SX + self.axis[1] * SY + self.axis[2] * SZ

    def to_dict(self) -> dict:
        return {"axis": self.axis.tolist(), "eta_up": self.eta_up, "eta_down": self.eta_down}


def effects_from_measurement(m: BinaryQubitMeasurement):
    """POVM pair (M_0, M_1) with no-click weight folded in:

        M_0 = eta_up P_+ + (1 - eta_down) P_-
        M_1 = eta_down P_- + (1 - eta_up) P_+

    The eigenprojectors are computed in closed form; the pair always sums to
    the identity exactly."""
    op = m.observable()
    p_plus = (ID2 + op) / 2
    p_minus = (ID2 - op) / 2
    m0 = m.eta_up * p_plus + (1 - m.eta_down) * p_minus
    m1 = ID2 - m0
    return m0, m1


@dataclass(frozen=True)
class InstrumentalSettings:
    """Measurement choices: one Alice measurement per x, one Bob measurement
    per Alice outcome (the feed-forward index)."""

    alice: tuple
    bob: tuple

    def __init__(self, alice, bob):
        object.__setattr__(self, "alice", tuple(alice))
        object.__setattr__(self, "bob", tuple(bob))

    def to_json(self) -> str:
        return json.dumps(
            {
                "alice": [m.to_dict() for m in self.alice],
                "bob": [m.to_dict() for m in self.bob],
            },
            separators=(",", ":"),
        )

    @classmethod
    def from_json(cls, text: str) -> "InstrumentalSettings":
        obj = json.loads(text)
        mk = lambda d: BinaryQubitMeasurement(np.array(d["axis"]), d["eta_up"], d["eta_down"])
        return cls([mk(d) for d in obj["alice"]], [mk(d) for d in obj["bob"]])


@dataclass(frozen=True)
class NoiseModel:
    """Source and apparatus imperfections.

    v:     weight of the target pure state
    lam:   colored-noise fraction inside the 1-v remainder
    theta: entanglement angle of |phi_theta> = cos t |00> + sin t |11>
    gamma: retained-signal fraction (accidental-count white noise)
    v_pc:  probability that the feed-forward cell applies its sigma_z kick
    """

    v: float = 1.0
    lam: float = 0.0
    theta: float = math.pi / 4
    gamma: float = 1.0
    v_pc: float = 1.0

    def __post_init__(self):
        for name in ("v", "lam", "gamma", "v_pc"):
            val = getattr(self, name)
            if not 0 <= val <= 1:
                raise StructuralError(f"{name}={val} outside [0, 1]")


# -- state constructors ------------------------------------------------------


def ket_phi(theta: float) -> np.ndarray:
    """cos(theta)|00> + sin(theta)|11>  (|0> = spin up)."""
    k = np.zeros(4, dtype=complex)
    k[0] = math.cos(theta)
    k[3] = math.sin(theta)
    return k


def ket_phi_perp(theta: float) -> np.ndarray:
    k = np.zeros(4, dtype=complex)
    k[0] = math.sin(theta)
    k[3] = -math.cos(theta)
    return k


def pure_state(ket: np.ndarray) -> TwoQubitState:
    ket = np.asarray(ket, dtype=complex)
    ket = ket / np.linalg.norm(ket)
    return TwoQubitState(np.outer(ket, ket.conj()))


def phi_plus() -> TwoQubitState:
    return pure_state(ket_phi(math.pi / 4))


def werner_state(v: float) -> TwoQubitState:
    return TwoQubitState(v * phi_plus().rho + (1 - v) * np.eye(4) / 4)


def noise_state(model: NoiseModel) -> TwoQubitState:
    """Source state with colored/white noise and accidental-count dilution."""
    ph = np.outer(ket_phi(model.theta), ket_phi(model.theta).conj())
    php = np.outer(ket_phi_perp(model.theta), ket_phi_perp(model.theta).conj())
    core = model.v * ph + (1 - model.v) * (
        model.lam * (ph + php) / 2 + (1 - model.lam) * np.eye(4) / 4
    )
    return TwoQubitState(model.gamma * core + (1 - model.gamma) * np.eye(4) / 4)


# -- measurement presets -----------------------------------------------------


def canonical_settings(eta_a=(1.0, 1.0), eta_b=(1.0, 1.0)) -> InstrumentalSettings:
    """Settings achieving I = 1 + 2 sqrt(2) on |phi+>:

    Alice -(sx+sz)/sqrt2, sx, sz; Bob (sx+sz)/sqrt2 and (sz-sx)/sqrt2."""
    alice = [
        BinaryQubitMeasurement(np.array([-INV_SQRT2, 0, -INV_SQRT2]), *eta_a),
        BinaryQubitMeasurement(np.array([1.0, 0, 0]), *eta_a),
        BinaryQubitMeasurement(np.array([0, 0, 1.0]), *eta_a),
    ]
    bob = [
        BinaryQubitMeasurement(np.array([INV_SQRT2, 0, INV_SQRT2]), *eta_b),
        BinaryQubitMeasurement(np.array([-INV_SQRT2, 0, INV_SQRT2]), *eta_b),
    ]
    return InstrumentalSettings(alice, bob)


def fixed_curve_settings(theta: float) -> InstrumentalSettings:
    """Non-optimal settings that still violate for every entangled |phi_theta>:
    Bob measures cos(t) sz + sin(t) sx for a = 0 and sz for a = 1."""
    alice = canonical_settings().alice
    bob = [
        BinaryQubitMeasurement(np.array([math.sin(theta), 0, math.cos(theta)])),
        BinaryQubitMeasurement(np.array([0, 0, 1.0])),
    ]
    return InstrumentalSettings(alice, bob)


def werner_example_settings() -> InstrumentalSettings:
    """Two-setting example used for the ACE bound: Alice sz, sx; Bob
    -sin(pi/8) sx + cos(pi/8) sz and (sx+sz)/sqrt2."""
    alice = [
        BinaryQubitMeasurement(np.array([0, 0, 1.0])),
        BinaryQubitMeasurement(np.array([1.0, 0, 0])),
    ]
    bob = [
        BinaryQubitMeasurement(np.array([-math.sin(math.pi / 8), 0, math.cos(math.pi / 8)])),
        BinaryQubitMeasurement(np.array([INV_SQRT2, 0, INV_SQRT2])),
    ]
    return InstrumentalSettings(alice, bob)


# -- Born rule ----------------------------------------------------------------


def born_instrumental(state: TwoQubitState, settings: InstrumentalSettings) -> InstrumentalCorrelation:
    """p(a,b|x) = Tr[(M^x_a (x) M^a_b) rho]; Bob's measurement is indexed by
    Alice's outcome (feed-forward)."""
    n_x = len(settings.alice)
    alice_effects = [effects_from_measurement(m) for m in settings.alice]
    bob_effects = [effects_from_measurement(m) for m in settings.bob]
    p = np.empty((n_x, 2, 2))
    for x in range(n_x):
        for a in range(2):
            for b in range(2):
                op = np.kron(alice_effects[x][a], bob_effects[a][b])
                p[x, a, b] = np.trace(op @ state.rho).real
    return InstrumentalCorrelation(p)


def do_conditional(state: TwoQubitState, bob: BinaryQubitMeasurement) -> np.ndarray:
    """p(b|do(a)) = Tr[M^do(a)_b rho_B]: interventions only see Bob's reduced
    state."""
    rho_b = state.reduced_b()
    effects = effects_from_measurement(bob)
    return np.array([np.trace(e @ rho_b).real for e in effects])


def qace(state: TwoQubitState, bob_by_a) -> float:
    """sup over (a, a', b) of |Tr[(M^do(a)_b - M^do(a')_b) rho_B]|."""
    dists = [do_conditional(state, m) for m in bob_by_a]
    best = 0.0
    for i in range(len(dists)):
        for j in range(len(dists)):
            best = max(best, float(np.max(np.abs(dists[i] - dists[j]))))
    return best


def werner_ace_example(v: float):
    """Two-setting Werner-state example: returns (correlation, ACE bound).

    The bound evaluates to ~0.9112 v - 0.75, positive above v ~ 0.823."""
    from .relax import ace_lower_bound_formula

    state = werner_state(v)
    corr = born_instrumental(state, werner_example_settings())
    return corr, ace_lower_bound_formula(corr)


# -- Pockels-cell imperfection -------------------------------------------------


def pockels_state(state: TwoQubitState, v_pc: float) -> np.ndarray:
    """Cell-failure mixture (1-v_pc) rho + v_pc (1 (x) sz) rho (1 (x) sz).

    With weight v_pc on the kicked term, measuring Bob's no-voltage
    observable on this state reproduces the published feed-forward numbers;
    v_pc is the probability that the cell fires correctly."""
    kick = np.kron(ID2, SZ)
    return (1 - v_pc) * state.rho + v_pc * kick @ state.rho @ kick


def pockels_correlation(
    state: TwoQubitState, settings: InstrumentalSettings, v_pc: float
) -> InstrumentalCorrelation:
    """Feed-forward correlation with an imperfect switching cell.

    Rows with a = 0 are computed from the cell-failure mixture with Bob's
    *no-voltage* measurement (index a = 1); rows with a = 1 use the state
    directly.  Bob's a = 0 measurement object is never consulted: physically
    it is the sigma_z kick acting on the no-voltage analyzer."""
    rho_pc = pockels_state(state, v_pc)
    alice_effects = [effects_from_measurement(m) for m in settings.alice]
    bob_novolt = effects_from_measurement(settings.bob[1])
    n_x = len(settings.alice)
    p = np.empty((n_x, 2, 2))
    for x in range(n_x):
        for b in range(2):
            p[x, 0, b] = np.trace(np.kron(alice_effects[x][0], bob_novolt[b]) @ rho_pc).real
            p[x, 1, b] = np.trace(np.kron(alice_effects[x][1], bob_novolt[b]) @ state.rho).real
    return InstrumentalCorrelation(p)


def pockels_povm(settings: InstrumentalSettings, v_pc: float):
    """Equivalent POVM picture for Bob's a = 0 measurement:

        E^0_b = v_pc P_b(kicked axis) + (1 - v_pc) P_b(no-voltage axis)

    where the kicked axis is the sigma_z conjugate of the no-voltage one."""
    novolt = settings.bob[1]
    kicked_axis = novolt.axis * np.array([-1.0, -1.0, 1.0])
    kicked = effects_from_measurement(BinaryQubitMeasurement(kicked_axis))
    plain = effects_from_measurement(novolt)
    return tuple(v_pc * kicked[b] + (1 - v_pc) * plain[b] for b in range(2))


def pockels_correlation_povm(
    state: TwoQubitState, settings: InstrumentalSettings, v_pc: float
) -> InstrumentalCorrelation:
    """Same statistics as pockels_correlation, obtained by replacing Bob's
    a = 0 projectors with the mixed POVM effects (identity on the state)."""
    effects0 = pockels_povm(settings, v_pc)
    alice_effects = [effects_from_measurement(m) for m in settings.alice]
    bob_novolt = effects_from_measurement(settings.bob[1])
    n_x = len(settings.alice)
    p = np.empty((n_x, 2, 2))
    for x in range(n_x):
        for b in range(2):
            p[x, 0, b] = np.trace(np.kron(alice_effects[x][0], effects0[b]) @ state.rho).real
            p[x, 1, b] = np.trace(np.kron(alice_effects[x][1], bob_novolt[b]) @ state.rho).real
    return InstrumentalCorrelation(p)


# -- random generators (tests, duality sweeps) --------------------------------


def random_state(rng=None) -> TwoQubitState:
    """Random mixed state rho = G G^dag / tr, Ginibre ensemble."""
    rng = np.random.default_rng(rng)
    g = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
    rho = g @ g.conj().T
    rho = rho / np.trace(rho).real
    rho = (rho + rho.conj().T) / 2
    return TwoQubitState(rho)


def random_axis(rng=None) -> np.ndarray:
    rng = np.random.default_rng(rng)
    v = rng.normal(size=3)
    return v / np.linalg.norm(v)


def random_settings(rng=None, n_x: int = 3, projective: bool = True) -> InstrumentalSettings:
    rng = np.random.default_rng(rng)
    etas = lambda: (1.0, 1.0) if projective else tuple(rng.uniform(0, 1, size=2))
    alice = [BinaryQubitMeasurement(random_axis(rng), *etas()) for _ in range(n_x)]
    bob = [BinaryQubitMeasurement(random_axis(rng), *etas()) for _ in range(2)]
    return InstrumentalSettings(alice, bob)


# -- named presets (CLI) -------------------------------------------------------


def state_preset(name: str) -> TwoQubitState:
    """Resolve 'phi-plus', 'werner:v=0.9', 'noise:v=0.94,lam=0.33,...'."""
    base, _, args = name.partition(":")
    kwargs = {}
    if args:
        for item in args.split(","):
            k, _, v = item.partition("=")
            kwargs[k.strip()] = float(v)
    if base == "phi-plus":
        return phi_plus()
    if base == "werner":
        return werner_state(kwargs.get("v", 1.0))
    if base == "noise":
        return noise_state(NoiseModel(**kwargs))
    if base == "phi-theta":
        return pure_state(ket_phi(kwargs.get("theta", math.pi / 4)))
    raise StructuralError(f"unknown state preset {name!r}")


def settings_preset(name: str) -> InstrumentalSettings:
    base, _, args = name.partition(":")
    kwargs = {}
    if args:
        for item in args.split(","):
            k, _, v = item.partition("=")
            kwargs[k.strip()] = float(v)
    if base in ("canonical", "canonical-settings"):
        return canonical_settings()
    if base == "fixed-curve":
        return fixed_curve_settings(kwargs.get("theta", math.pi / 4))
    if base == "werner-example":
        return werner_example_settings()
    raise StructuralError(f"unknown settings preset {name!r}")
