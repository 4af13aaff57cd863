"""Dense state-vector simulation of few-qubit circuits.

Conventions, fixed once for the whole package:

* Qubit 0 is the leftmost tensor factor, i.e. the most significant bit of
  the computational basis index (big-endian).
* Rotation gates use ``R_P(phi) = exp(+i phi P / 2)``, so
  ``Ry(phi) = [[cos(phi/2), sin(phi/2)], [-sin(phi/2), cos(phi/2)]]``.
* Measurements are exact projections onto an assigned outcome; there is no
  sampling.  A zero-probability branch yields a flagged null state instead
  of raising, so branch-enumeration loops stay uniform.

States are immutable; every operation returns a fresh ``StateVector``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

MAX_QUBITS = 24

NORM_ATOL = 1e-12
#: Branch weights below this are treated as exactly zero.  All shipped
#: patterns/circuits have branch probabilities >= 2**-20, far above it.
NULL_PROB = 1e-24

_H = np.array([[1, 1], [1, -1]], dtype=complex) / math.sqrt(2)
_X = np.array([[0, 1], [1, 0]], dtype=complex)
_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
_Z = np.array([[1, 0], [0, -1]], dtype=complex)
_SWAP = np.array(
    [[1, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, 1]], dtype=complex
)


class SimulationError(Exception):
    """Contract violation in a simulator operation."""


@dataclass(frozen=True)
class StateVector:
    """Complex amplitudes over the 2**n computational basis states."""

    n_qubits: int
    amps: np.ndarray

    def __post_init__(self):
        if self.n_qubits < 0 or self.n_qubits > MAX_QUBITS:
            raise SimulationError(f"qubit count {self.n_qubits} outside [0, {MAX_QUBITS}]")
        amps = np.asarray(self.amps, dtype=complex)
        if amps.shape != (2**self.n_qubits,):
            raise SimulationError(f"amplitude vector has shape {amps.shape}, expected (2**{self.n_qubits},)")
        amps.setflags(write=False)
        object.__setattr__(self, "amps", amps)

    @property
    def is_null(self) -> bool:
        return self.norm_sq() < NULL_PROB

    def norm_sq(self) -> float:
        return float(np.vdot(self.amps, self.amps).real)

    def check_normalized(self, atol: float = NORM_ATOL) -> None:
        if abs(self.norm_sq() - 1.0) > atol:
            raise SimulationError(f"state norm**2 = {self.norm_sq()} deviates from 1 beyond {atol}")

    @staticmethod
    def null(n_qubits: int) -> "StateVector":
        """Flagged empty state returned by zero-probability branches."""
        return StateVector(n_qubits, np.zeros(2**n_qubits, dtype=complex))


def zero_state(n_qubits: int) -> StateVector:
    amps = np.zeros(2**n_qubits, dtype=complex)
    amps[0] = 1.0
    return StateVector(n_qubits, amps)


def basis_state(bits: str | int, n_qubits: int | None = None) -> StateVector:
    """Computational basis state from a bit string ('110') or basis index."""
    if isinstance(bits, str):
        n = len(bits)
        index = int(bits, 2) if n else 0
    else:
        if n_qubits is None:
            raise SimulationError("basis index needs an explicit qubit count")
        n, index = n_qubits, bits
    amps = np.zeros(2**n, dtype=complex)
    amps[index] = 1.0
    return StateVector(n, amps)


def plus_state(n_qubits: int) -> StateVector:
    amps = np.full(2**n_qubits, 2.0 ** (-n_qubits / 2), dtype=complex)
    return StateVector(n_qubits, amps)


def product_state(single_qubit_states: list[np.ndarray]) -> StateVector:
    amps = np.array([1.0 + 0j])
    for chi in single_qubit_states:
        chi = np.asarray(chi, dtype=complex).reshape(2)
        amps = np.kron(amps, chi)
    return StateVector(len(single_qubit_states), amps)


# ---------------------------------------------------------------------------
# Gates

@dataclass(frozen=True)
class Gate:
    """A unitary from the fixed gate set, acting on `targets`, optionally
    conditioned on `controls` matching `polarity` (1 = |1>-control)."""

    kind: str
    targets: tuple[int, ...]
    controls: tuple[int, ...] = ()
    polarity: tuple[int, ...] = ()
    angle: float | None = None
    phases: tuple[float, float] | None = None  # PHASE: diag(e^{i a0}, e^{i a1})

    def __post_init__(self):
        if set(self.targets) & set(self.controls):
            raise SimulationError(f"gate {self.kind}: targets and controls overlap")
        if len(set(self.targets)) != len(self.targets) or len(set(self.controls)) != len(self.controls):
            raise SimulationError(f"gate {self.kind}: repeated qubit index")
        if len(self.polarity) != len(self.controls):
            raise SimulationError(f"gate {self.kind}: polarity mask length mismatch")

    @property
    def qubits(self) -> tuple[int, ...]:
        return self.targets + self.controls

    def base_matrix(self) -> np.ndarray:
        """Unitary applied on the target factors (controls handled separately)."""
        kind = self.kind
        if kind == "X":
            return _X
        if kind == "Y":
            return _Y
        if kind == "Z":
            return _Z
        if kind == "H":
            return _H
        if kind in ("RX", "RY", "RZ"):
            c, s = math.cos(self.angle / 2), math.sin(self.angle / 2)
            if kind == "RX":
                return np.array([[c, 1j * s], [1j * s, c]])
            if kind == "RY":
                return np.array([[c, s], [-s, c]], dtype=complex)
            return np.array([[np.exp(1j * self.angle / 2), 0], [0, np.exp(-1j * self.angle / 2)]])
        if kind == "PHASE":
            a0, a1 = self.phases
            return np.array([[np.exp(1j * a0), 0], [0, np.exp(1j * a1)]])
        if kind == "SWAP":
            return _SWAP
        raise SimulationError(f"unknown gate kind {kind!r}")


def x(q: int) -> Gate:
    return Gate("X", (q,))


def y(q: int) -> Gate:
    return Gate("Y", (q,))


def z(q: int) -> Gate:
    return Gate("Z", (q,))


def h(q: int) -> Gate:
    return Gate("H", (q,))


def rx(q: int, angle: float) -> Gate:
    return Gate("RX", (q,), angle=angle)


def ry(q: int, angle: float) -> Gate:
    return Gate("RY", (q,), angle=angle)


def rz(q: int, angle: float) -> Gate:
    return Gate("RZ", (q,), angle=angle)


def phase_diag(q: int, alpha0: float, alpha1: float) -> Gate:
    return Gate("PHASE", (q,), phases=(alpha0, alpha1))


def cz(a: int, b: int) -> Gate:
    return Gate("Z", (b,), controls=(a,), polarity=(1,))


def cnot(control: int, target: int) -> Gate:
    return Gate("X", (target,), controls=(control,), polarity=(1,))


def swap(a: int, b: int) -> Gate:
    return Gate("SWAP", (a, b))


def toffoli(c1: int, c2: int, target: int) -> Gate:
    return Gate("X", (target,), controls=(c1, c2), polarity=(1, 1))


def mcx(controls: tuple[int, ...], target: int, polarity: tuple[int, ...] | None = None) -> Gate:
    if polarity is None:
        polarity = (1,) * len(controls)
    return Gate("X", (target,), controls=tuple(controls), polarity=tuple(polarity))


def controlled(gate: Gate, control: int, polarity: int = 1) -> Gate:
    return Gate(
        gate.kind,
        gate.targets,
        controls=gate.controls + (control,),
        polarity=gate.polarity + (polarity,),
        angle=gate.angle,
        phases=gate.phases,
    )


def cry(control: int, target: int, angle: float) -> Gate:
    return controlled(ry(target, angle), control)


# ---------------------------------------------------------------------------
# Circuits

@dataclass(frozen=True)
class Measure:
    qubit: int


@dataclass(frozen=True)
class ClassicallyControlled:
    """Apply `gate` iff the XOR of the referenced measurement outcomes
    (by position in the circuit's measurement order), xor `flip`, is 1."""

    gate: Gate
    outcome_indices: tuple[int, ...]
    flip: bool = False

    def fires(self, outcomes: tuple[int, ...]) -> bool:
        parity = bool(self.flip)
        for i in self.outcome_indices:
            parity ^= bool(outcomes[i])
        return parity


@dataclass(frozen=True)
class Circuit:
    n_qubits: int
    ops: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "ops", tuple(self.ops))
        seen_measures = 0
        for op in self.ops:
            if isinstance(op, Measure):
                self._check_indices((op.qubit,))
                seen_measures += 1
            elif isinstance(op, ClassicallyControlled):
                self._check_indices(op.gate.qubits)
                if any(i >= seen_measures for i in op.outcome_indices):
                    raise SimulationError("classically controlled gate references a later measurement")
            elif isinstance(op, Gate):
                self._check_indices(op.qubits)
            else:
                raise SimulationError(f"unsupported circuit op {op!r}")

    def _check_indices(self, qubits: tuple[int, ...]) -> None:
        for q in qubits:
            if not 0 <= q < self.n_qubits:
                raise SimulationError(f"qubit index {q} out of range for {self.n_qubits} qubits")

    @property
    def n_measurements(self) -> int:
        return sum(1 for op in self.ops if isinstance(op, Measure))

    @property
    def gates(self) -> list[Gate]:
        return [op for op in self.ops if isinstance(op, Gate)]

    def extended(self, ops) -> "Circuit":
        return Circuit(self.n_qubits, self.ops + tuple(ops))


# ---------------------------------------------------------------------------
# Application

def _apply_matrix(amps: np.ndarray, n: int, mat: np.ndarray,
                  targets: tuple[int, ...], controls: tuple[int, ...] = (),
                  polarity: tuple[int, ...] = ()) -> np.ndarray:
    """Apply `mat` on the target axes of the slice selected by the controls."""
    work = amps.copy().reshape((2,) * n)
    index = [slice(None)] * n
    for c, p in zip(controls, polarity):
        index[c] = p
    index = tuple(index)
    sub = work[index]
    remaining = [q for q in range(n) if q not in controls]
    positions = [remaining.index(t) for t in targets]
    k = len(targets)
    sub_t = np.moveaxis(sub, positions, range(k))
    shape = sub_t.shape
    transformed = mat @ sub_t.reshape(2**k, -1)
    work[index] = np.moveaxis(transformed.reshape(shape), range(k), positions)
    return work.reshape(-1)


def apply_gate(state: StateVector, gate: Gate) -> StateVector:
    """Transform the state by the gate's unitary; norm is preserved."""
    for q in gate.qubits:
        if not 0 <= q < state.n_qubits:
            raise SimulationError(f"qubit index {q} out of range for {state.n_qubits} qubits")
    amps = _apply_matrix(state.amps, state.n_qubits, gate.base_matrix(),
                         gate.targets, gate.controls, gate.polarity)
    return StateVector(state.n_qubits, amps)


def measure_branch(state: StateVector, qubit: int, outcome: int) -> tuple[StateVector, float]:
    """Project `qubit` onto `outcome` and renormalize.

    Returns the post-measurement state and the branch probability; a
    zero-probability branch returns (null state, 0.0).
    """
    if not 0 <= qubit < state.n_qubits:
        raise SimulationError(f"qubit index {qubit} out of range")
    if outcome not in (0, 1):
        raise SimulationError(f"outcome must be a bit, got {outcome!r}")
    psi = state.amps.reshape((2,) * state.n_qubits)
    index = [slice(None)] * state.n_qubits
    index[qubit] = outcome
    kept = psi[tuple(index)]
    prob = float(np.vdot(kept, kept).real)
    if prob < NULL_PROB:
        return StateVector.null(state.n_qubits), 0.0
    out = np.zeros_like(psi)
    out[tuple(index)] = kept / math.sqrt(prob)
    return StateVector(state.n_qubits, out.reshape(-1)), prob


def drop_qubit(state: StateVector, qubit: int, outcome: int) -> StateVector:
    """Remove a qubit known to be in |outcome> (e.g. after measure_branch).

    Errors if the state carries weight on the complementary branch.
    """
    psi = state.amps.reshape((2,) * state.n_qubits)
    index = [slice(None)] * state.n_qubits
    index[qubit] = 1 - outcome
    discarded = psi[tuple(index)]
    if float(np.vdot(discarded, discarded).real) > 1e-20:
        raise SimulationError(f"qubit {qubit} is not definitely |{outcome}>")
    index[qubit] = outcome
    return StateVector(state.n_qubits - 1, np.ascontiguousarray(psi[tuple(index)]).reshape(-1))


def run_circuit(circuit: Circuit, initial: StateVector,
                outcome_assignment: tuple[int, ...] = ()) -> tuple[StateVector, float]:
    """Execute the circuit, projecting each Measure onto the assigned bit.

    Returns (final state, joint probability of the assigned branch).  A
    zero-probability branch short-circuits to (null state, 0.0).
    """
    if initial.n_qubits != circuit.n_qubits:
        raise SimulationError("initial state size does not match circuit")
    if len(outcome_assignment) != circuit.n_measurements:
        raise SimulationError(
            f"expected {circuit.n_measurements} assigned outcomes, got {len(outcome_assignment)}")
    state = initial
    prob = 1.0
    seen: list[int] = []
    for op in circuit.ops:
        if isinstance(op, Measure):
            bit = outcome_assignment[len(seen)]
            state, p = measure_branch(state, op.qubit, bit)
            seen.append(bit)
            prob *= p
            if state.is_null:
                return StateVector.null(circuit.n_qubits), 0.0
        elif isinstance(op, ClassicallyControlled):
            if op.fires(tuple(seen)):
                state = apply_gate(state, op.gate)
        else:
            state = apply_gate(state, op)
    return state, prob


def circuit_unitary(circuit: Circuit) -> np.ndarray:
    """Full 2**n unitary of a measurement-free circuit (n <= 12)."""
    n = circuit.n_qubits
    if n > 12:
        raise SimulationError("circuit_unitary supports at most 12 qubits")
    if circuit.n_measurements:
        raise SimulationError("circuit contains measurements")
    dim = 2**n
    cols = np.eye(dim, dtype=complex)
    for op in circuit.ops:
        mat = op.base_matrix()
        for k in range(dim):
            cols[:, k] = _apply_matrix(cols[:, k], n, mat, op.targets, op.controls, op.polarity)
    return cols


def fidelity_up_to_global_phase(a: StateVector, b: StateVector) -> float:
    """|<a|b>| for equally sized states."""
    if a.n_qubits != b.n_qubits:
        raise SimulationError("states have different qubit counts")
    return float(abs(np.vdot(a.amps, b.amps)))


def states_close(a: StateVector, b: StateVector, tol: float = 1e-10) -> bool:
    """Equality up to global phase at the package-wide fidelity tolerance."""
    return fidelity_up_to_global_phase(a, b) >= 1.0 - tol
