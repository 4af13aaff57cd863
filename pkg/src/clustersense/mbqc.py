"""Cluster states and adaptive measurement patterns, verified branch by branch.

A pattern is a graph (every vertex starts in |+>, CZ on every edge, optional
injected input states), an ordered list of single-qubit measurements in the
x-y plane, and per-output correction words.  Measuring a vertex at angle phi
means applying Rz(phi) then H and reading the computational basis; one such
step on a wire teleports H Z^s Rz(phi) onto the neighbour.  Angles may flip
sign with the parity of earlier outcomes, and corrections are words of
X/Z/H factors with outcome-parity exponents, applied after all measurements.

Verification enumerates every outcome branch (sharing prefixes and dropping
measured qubits, so the sweep costs about n_measured * 2**n_vertices
amplitude operations in total) and checks that corrected outputs agree with
a target state or unitary.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import probes, simcore
from .simcore import StateVector

BRANCH_ENUM_CAP = 16


class PatternError(Exception):
    pass


@dataclass(frozen=True)
class Graph:
    n_vertices: int
    edges: frozenset[tuple[int, int]]

    def __post_init__(self):
        norm = set()
        for a, b in self.edges:
            if a == b:
                raise PatternError("self-loop")
            if not (0 <= a < self.n_vertices and 0 <= b < self.n_vertices):
                raise PatternError(f"edge ({a},{b}) references a missing vertex")
            norm.add((min(a, b), max(a, b)))
        object.__setattr__(self, "edges", frozenset(norm))


def path_graph(n: int) -> Graph:
    return Graph(n, frozenset((i, i + 1) for i in range(n - 1)))


@dataclass(frozen=True)
class AngleSpec:
    """Measurement angle `base * (-1)**(parity of sign_deps outcomes + flip)`."""

    base: float
    sign_deps: tuple[int, ...] = ()
    flip: bool = False

    def resolve(self, outcomes: dict[int, int]) -> float:
        parity = bool(self.flip)
        for v in self.sign_deps:
            parity ^= bool(outcomes[v])
        return -self.base if parity else self.base


@dataclass(frozen=True)
class CorrectionFactor:
    """One factor of a byproduct-correction word: X/Z/H raised to the parity
    of `deps` outcomes (xor `flip`); H factors typically use flip=True."""

    kind: str
    deps: tuple[int, ...] = ()
    flip: bool = False

    def __post_init__(self):
        if self.kind not in ("X", "Z", "H"):
            raise PatternError(f"correction factor kind {self.kind!r}")

    def fires(self, outcomes: dict[int, int]) -> bool:
        parity = bool(self.flip)
        for v in self.deps:
            parity ^= bool(outcomes[v])
        return parity


@dataclass(frozen=True)
class MeasurementPattern:
    graph: Graph
    inputs: tuple[int, ...]
    measurements: tuple[tuple[int, AngleSpec], ...]
    outputs: tuple[int, ...]
    corrections: dict[int, tuple[CorrectionFactor, ...]] = field(default_factory=dict)

    def __post_init__(self):
        measured = [v for v, _ in self.measurements]
        if len(set(measured)) != len(measured):
            raise PatternError("vertex measured twice")
        if set(measured) & set(self.outputs):
            raise PatternError("output vertex is measured")
        if set(measured) | set(self.outputs) != set(range(self.graph.n_vertices)):
            raise PatternError("every vertex must be measured or an output")
        seen: set[int] = set()
        for v, spec in self.measurements:
            if any(d not in seen for d in spec.sign_deps):
                raise PatternError(f"angle of vertex {v} depends on a later outcome")
            seen.add(v)
        for out, word in self.corrections.items():
            if out not in self.outputs:
                raise PatternError(f"correction on non-output vertex {out}")
            for factor in word:
                if any(d not in seen for d in factor.deps):
                    raise PatternError("correction depends on an unmeasured vertex")

    @property
    def n_measured(self) -> int:
        return len(self.measurements)


def cluster_state(graph: Graph, injected: dict[int, np.ndarray] | None = None) -> StateVector:
    """|+> on every vertex (or the injected state), then CZ across each edge."""
    n = graph.n_vertices
    if n > simcore.MAX_QUBITS:
        raise PatternError(f"{n} vertices exceed the dense-simulation cap")
    injected = injected or {}
    plus = np.array([1.0, 1.0], dtype=complex) / math.sqrt(2)
    state = simcore.product_state([np.asarray(injected.get(v, plus), dtype=complex) for v in range(n)])
    for a, b in sorted(graph.edges):
        state = simcore.apply_gate(state, simcore.cz(a, b))
    return state


_CORRECTION_GATES = {"X": simcore.x, "Z": simcore.z, "H": simcore.h}


def _apply_corrections(state: StateVector, pattern: MeasurementPattern,
                       outcomes: dict[int, int], axis_of: dict[int, int]) -> StateVector:
    for out in pattern.outputs:
        for factor in pattern.corrections.get(out, ()):
            if factor.fires(outcomes):
                state = simcore.apply_gate(state, _CORRECTION_GATES[factor.kind](axis_of[out]))
    return state


def _reorder_outputs(state: StateVector, pattern: MeasurementPattern,
                     axis_of: dict[int, int]) -> StateVector:
    axes = [axis_of[v] for v in pattern.outputs]
    psi = state.amps.reshape((2,) * state.n_qubits)
    psi = np.moveaxis(psi, axes, range(len(axes)))
    return StateVector(state.n_qubits, np.ascontiguousarray(psi).reshape(-1))


def run_pattern(pattern: MeasurementPattern, outcome_assignment: tuple[int, ...],
                injected: dict[int, np.ndarray] | None = None) -> tuple[StateVector, float]:
    """Execute one outcome branch and return the corrected output state.

    Measured qubits are removed, so the result lives on the output vertices
    in `pattern.outputs` order.  Zero-probability branches return a flagged
    null state.
    """
    if len(outcome_assignment) != pattern.n_measured:
        raise PatternError(f"expected {pattern.n_measured} outcomes")
    state = cluster_state(pattern.graph, injected)
    axis_of = {v: v for v in range(pattern.graph.n_vertices)}
    outcomes: dict[int, int] = {}
    prob = 1.0
    for (vertex, spec), bit in zip(pattern.measurements, outcome_assignment):
        axis = axis_of[vertex]
        angle = spec.resolve(outcomes)
        state = simcore.apply_gate(state, simcore.rz(axis, angle))
        state = simcore.apply_gate(state, simcore.h(axis))
        state, p = simcore.measure_branch(state, axis, bit)
        prob *= p
        if state.is_null:
            return StateVector.null(len(pattern.outputs)), 0.0
        state = simcore.drop_qubit(state, axis, bit)
        outcomes[vertex] = bit
        for v, a in axis_of.items():
            if a > axis:
                axis_of[v] = a - 1
        del axis_of[vertex]
    state = _apply_corrections(state, pattern, outcomes, axis_of)
    return _reorder_outputs(state, pattern, axis_of), prob


@dataclass(frozen=True)
class VerifyReport:
    pattern_vertices: int
    branches: int
    min_fidelity: float
    probability_sum: float
    passed: bool

    def __str__(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return (f"{self.pattern_vertices} vertices, {self.branches} branches: "
                f"min fidelity {self.min_fidelity:.12f}, probability sum "
                f"{self.probability_sum:.12f} -> {status}")


def _enumerate_branches(pattern: MeasurementPattern, injected: dict[int, np.ndarray] | None,
                        target_state: StateVector):
    """Depth-first sweep over all outcome branches, sharing prefix states.

    Yields (min fidelity vs target, branch probability) per leaf.
    """
    root = cluster_state(pattern.graph, injected)

    def recurse(state: StateVector, axis_of: dict[int, int], outcomes: dict[int, int],
                prob: float, depth: int):
        if depth == pattern.n_measured:
            corrected = _apply_corrections(state, pattern, outcomes, axis_of)
            corrected = _reorder_outputs(corrected, pattern, axis_of)
            yield simcore.fidelity_up_to_global_phase(corrected, target_state), prob
            return
        vertex, spec = pattern.measurements[depth]
        axis = axis_of[vertex]
        angle = spec.resolve(outcomes)
        rotated = simcore.apply_gate(state, simcore.rz(axis, angle))
        rotated = simcore.apply_gate(rotated, simcore.h(axis))
        for bit in (0, 1):
            branch, p = simcore.measure_branch(rotated, axis, bit)
            if branch.is_null:
                continue
            branch = simcore.drop_qubit(branch, axis, bit)
            sub_axes = {v: (a - 1 if a > axis else a) for v, a in axis_of.items() if v != vertex}
            yield from recurse(branch, sub_axes, {**outcomes, vertex: bit}, prob * p, depth + 1)

    axis_of = {v: v for v in range(pattern.graph.n_vertices)}
    yield from recurse(root, axis_of, {}, 1.0, 0)


def verify_pattern(pattern: MeasurementPattern,
                   target: StateVector | np.ndarray,
                   input_states: list[list[np.ndarray]] | None = None,
                   tol: float = 1e-10) -> VerifyReport:
    """Branch-exhaustive check of a pattern against a target.

    `target` is either the expected output StateVector (for patterns without
    inputs) or a unitary matrix on the input qubits, in which case a fiducial
    set of product input states is driven through the pattern (a supplied
    `input_states` list overrides the default fiducials).
    """
    if pattern.n_measured > BRANCH_ENUM_CAP:
        raise PatternError(
            f"{pattern.n_measured} measured vertices exceed the 2**{BRANCH_ENUM_CAP} enumeration cap")

    cases: list[tuple[dict[int, np.ndarray] | None, StateVector]] = []
    if isinstance(target, StateVector):
        cases.append((None, target))
    else:
        unitary = np.asarray(target, dtype=complex)
        k = len(pattern.inputs)
        if unitary.shape != (2**k, 2**k):
            raise PatternError(f"target unitary shape {unitary.shape} does not match {k} inputs")
        for combo in input_states if input_states is not None else _fiducial_inputs(k):
            injected = dict(zip(pattern.inputs, combo))
            in_state = simcore.product_state(list(combo))
            out = unitary @ in_state.amps
            cases.append((injected, StateVector(k, out)))

    min_fid = 1.0
    worst_total = 1.0
    branches = 0
    for injected, expected in cases:
        total = 0.0
        branches = 0
        for fid, prob in _enumerate_branches(pattern, injected, expected):
            min_fid = min(min_fid, fid)
            total += prob
            branches += 1
        if abs(total - 1.0) >= abs(worst_total - 1.0):
            worst_total = total
    passed = (min_fid >= 1.0 - tol) and (abs(worst_total - 1.0) <= 1e-10)
    return VerifyReport(pattern.graph.n_vertices, branches, min_fid, worst_total, passed)


_KET0 = np.array([1.0, 0.0], dtype=complex)
_KET1 = np.array([0.0, 1.0], dtype=complex)
_KETP = np.array([1.0, 1.0], dtype=complex) / math.sqrt(2)
_KETIP = np.array([1.0, 1.0j], dtype=complex) / math.sqrt(2)


def _fiducial_inputs(k: int) -> list[list[np.ndarray]]:
    """Product states sufficient to pin down a unitary up to global phase."""
    if k == 0:
        return [[]]
    singles = [_KET0, _KET1, _KETP, _KETIP]
    if k == 1:
        return [[s] for s in singles]
    combos: list[list[np.ndarray]] = []
    for i in range(2**k):
        combos.append([_KET1 if (i >> (k - 1 - j)) & 1 else _KET0 for j in range(k)])
    combos.append([_KETP] * k)
    combos.append([_KETIP] + [_KETP] * (k - 1))
    combos.append([_KETP] * (k - 1) + [_KETIP])
    return combos


# ---------------------------------------------------------------------------
# Shipped patterns

def teleport_pattern(phi: float) -> MeasurementPattern:
    """One teleportation step: input on vertex 0, measured at angle phi.

    The corrected output is H Rz(phi) |psi> — the Hadamard is intrinsic to a
    single step, only the Pauli byproduct X^s is corrected.
    """
    return MeasurementPattern(
        graph=path_graph(2),
        inputs=(0,),
        measurements=((0, AngleSpec(phi)),),
        outputs=(1,),
        corrections={1: (CorrectionFactor("X", deps=(0,)),)},
    )


def teleport_unitary(phi: float) -> np.ndarray:
    """Matrix implemented by teleport_pattern: H Rz(phi)."""
    rz = np.array([[np.exp(1j * phi / 2), 0], [0, np.exp(-1j * phi / 2)]])
    return np.array([[1, 1], [1, -1]]) / math.sqrt(2) @ rz


def y_rotation_pattern(phi: float) -> MeasurementPattern:
    """Ry(phi) on a 4-vertex wire (input vertex 0, output vertex 3).

    Angles pi/2, (-1)^{s0} phi, (-1)^{s1+1} pi/2; corrected by X^{s0+s2}
    Z^{s1} and the trailing H, which together undo the byproduct
    X^{s0+s2} Z^{s1} H.
    """
    return MeasurementPattern(
        graph=path_graph(4),
        inputs=(0,),
        measurements=(
            (0, AngleSpec(math.pi / 2)),
            (1, AngleSpec(phi, sign_deps=(0,))),
            (2, AngleSpec(math.pi / 2, sign_deps=(1,), flip=True)),
        ),
        outputs=(3,),
        corrections={3: (
            CorrectionFactor("X", deps=(0, 2)),
            CorrectionFactor("Z", deps=(1,)),
            CorrectionFactor("H", flip=True),
        )},
    )


def ry_matrix(phi: float) -> np.ndarray:
    c, s = math.cos(phi / 2), math.sin(phi / 2)
    return np.array([[c, s], [-s, c]], dtype=complex)


def cnot_pattern() -> MeasurementPattern:
    """Effective CNOT on four vertices of a 2D cluster.

    Vertex 0 is the control (input and output), vertex 1 the target input,
    vertex 3 the target output; 1 and 2 are measured at angle 0.
    """
    graph = Graph(4, frozenset({(1, 2), (2, 3), (0, 2)}))
    return MeasurementPattern(
        graph=graph,
        inputs=(0, 1),
        measurements=((1, AngleSpec(0.0)), (2, AngleSpec(0.0))),
        outputs=(0, 3),
        corrections={
            0: (CorrectionFactor("Z", deps=(1,)),),
            3: (CorrectionFactor("X", deps=(2,)), CorrectionFactor("Z", deps=(1,))),
        },
    )


CNOT_MATRIX = np.array(
    [[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex
)


def ghz_pattern(N: int) -> MeasurementPattern:
    """GHZ state of N qubits from a 1D cluster of 2N-1 vertices.

    The odd vertices are measured at angle 0; output vertex 2m is flipped
    when the running outcome parity s_1 + ... + s_m is odd.
    """
    if N < 2:
        raise PatternError("GHZ pattern needs N >= 2")
    graph = path_graph(2 * N - 1)
    measurements = tuple((v, AngleSpec(0.0)) for v in range(1, 2 * N - 1, 2))
    corrections = {}
    for m in range(1, N):
        deps = tuple(range(1, 2 * m, 2))
        corrections[2 * m] = (CorrectionFactor("X", deps=deps),)
    return MeasurementPattern(
        graph=graph,
        inputs=(),
        measurements=measurements,
        outputs=tuple(range(0, 2 * N - 1, 2)),
        corrections=corrections,
    )


# -- sine-state pattern ------------------------------------------------------
#
# The preparation cascade (one Y-rotation per probe qubit, each controlled on
# its predecessor) is compiled wire by wire.  Every rotation uses a block of
# three measured vertices; a controlled rotation becomes
# rotate(-phi/2) . CZ . rotate(+phi/2) using the cluster's own vertical edge,
# and one extra angle-0 vertex per non-final wire clears the block's Hadamard
# byproduct so the wire can act as a control.  Byproduct bookkeeping uses the
# step identity (measure at alpha => H Z^s Rz(alpha)) and the usual
# Pauli/H/CZ commutation rules; the outcome is validated branch-exhaustively.


class _PatternBuilder:
    def __init__(self):
        self.n_vertices = 0
        self.edges: set[tuple[int, int]] = set()
        self.measurements: list[tuple[int, AngleSpec]] = []

    def new_vertex(self, attach_to: int | None = None) -> int:
        v = self.n_vertices
        self.n_vertices += 1
        if attach_to is not None:
            self.edges.add((min(attach_to, v), max(attach_to, v)))
        return v

    def measure(self, vertex: int, spec: AngleSpec) -> None:
        self.measurements.append((vertex, spec))


def _xor(a: tuple[int, ...], b: tuple[int, ...]) -> tuple[int, ...]:
    return tuple(sorted(set(a) ^ set(b)))


@dataclass
class _Carrier:
    """A live wire end: its vertex and the accumulated byproduct
    X^(x deps) Z^(z deps) (H^has_h) in front of the logical state."""

    vertex: int
    x_deps: tuple[int, ...] = ()
    z_deps: tuple[int, ...] = ()
    has_h: bool = False


def _rotation_block(builder: _PatternBuilder, carrier: _Carrier, chi: float) -> _Carrier:
    """Append three measured vertices realizing logical Ry(chi) on the carrier.

    Input byproduct X^c Z^d is absorbed by adapting the three angles
    ((-1)^c pi/2, (-1)^{t1+d} chi, (-1)^{t2+c+1} pi/2); the new byproduct is
    X^{t1+t3+d} Z^{t2+c} H.
    """
    if carrier.has_h:
        raise PatternError("rotation block requires an H-free carrier")
    q1 = carrier.vertex
    q2 = builder.new_vertex(attach_to=q1)
    q3 = builder.new_vertex(attach_to=q2)
    out = builder.new_vertex(attach_to=q3)
    builder.measure(q1, AngleSpec(math.pi / 2, sign_deps=carrier.x_deps))
    builder.measure(q2, AngleSpec(chi, sign_deps=_xor((q1,), carrier.z_deps)))
    builder.measure(q3, AngleSpec(math.pi / 2, sign_deps=_xor((q2,), carrier.x_deps), flip=True))
    return _Carrier(
        vertex=out,
        x_deps=_xor(_xor((q1,), (q3,)), carrier.z_deps),
        z_deps=_xor((q2,), carrier.x_deps),
        has_h=True,
    )


def _hadamard_fixup(builder: _PatternBuilder, carrier: _Carrier) -> _Carrier:
    """One angle-0 step; cancels the carrier's H byproduct (X and Z swap)."""
    if not carrier.has_h:
        raise PatternError("fixup expects an H byproduct")
    q = carrier.vertex
    out = builder.new_vertex(attach_to=q)
    builder.measure(q, AngleSpec(0.0))
    return _Carrier(
        vertex=out,
        x_deps=_xor((q,), carrier.z_deps),
        z_deps=carrier.x_deps,
        has_h=False,
    )


def _correction_word(carrier: _Carrier) -> tuple[CorrectionFactor, ...]:
    word = [CorrectionFactor("X", deps=carrier.x_deps), CorrectionFactor("Z", deps=carrier.z_deps)]
    if carrier.has_h:
        word.append(CorrectionFactor("H", flip=True))
    return tuple(f for f in word if f.deps or f.flip)


def sine_pattern(N: int) -> MeasurementPattern:
    """Measurement pattern preparing the N-qubit sine probe from a bare cluster.

    Uses 8N-5 vertices for N >= 2 (4 for N=1), within the 3*(4N-2) budget of
    a three-row cluster strip.
    """
    if N < 1:
        raise PatternError("N must be >= 1")
    phis = probes.angles_from_amplitudes(probes.sine_coefficients(N)).phis
    builder = _PatternBuilder()
    carriers: list[_Carrier] = []

    # wire 1: |+> --block--> G(phi_1)|0>; the block's H byproduct is absorbed
    # by the |+> input (H Ry(chi) |+> = Ry(-chi)|0>), leaving X/Z only
    first = _Carrier(vertex=builder.new_vertex())
    blk = _rotation_block(builder, first, phis[0])
    carriers.append(_Carrier(blk.vertex, blk.x_deps, blk.z_deps, has_h=False))

    for k in range(2, N + 1):
        phi = phis[k - 1]
        # pre-rotation on a fresh wire: |+> -> G(-phi/2)|0>
        fresh = _Carrier(vertex=builder.new_vertex())
        pre = _rotation_block(builder, fresh, -phi / 2)
        pre = _Carrier(pre.vertex, pre.x_deps, pre.z_deps, has_h=False)
        # vertical edge to the previous wire = the logical CZ of the cascade;
        # each side picks up a Z with the partner's X parity
        prev = carriers[-1]
        builder.edges.add((min(prev.vertex, pre.vertex), max(prev.vertex, pre.vertex)))
        carriers[-1] = _Carrier(prev.vertex, prev.x_deps, _xor(prev.z_deps, pre.x_deps), prev.has_h)
        pre = _Carrier(pre.vertex, pre.x_deps, _xor(pre.z_deps, prev.x_deps), False)
        # post-rotation completes C[G(phi)] (target starts in |0>)
        post = _rotation_block(builder, pre, -phi / 2)
        if k < N:
            post = _hadamard_fixup(builder, post)
        carriers.append(post)

    corrections = {c.vertex: _correction_word(c) for c in carriers}
    return MeasurementPattern(
        graph=Graph(builder.n_vertices, frozenset(builder.edges)),
        inputs=(),
        measurements=tuple(builder.measurements),
        outputs=tuple(c.vertex for c in carriers),
        corrections=corrections,
    )


def sine_pattern_vertex_budget(N: int) -> int:
    """Vertex allowance 3*(4N-2) of the three-row cluster strip."""
    return 3 * (4 * N - 2)


# ---------------------------------------------------------------------------
# Serialization (line-oriented, for golden-file tests)

def _deps_str(deps: tuple[int, ...], flip: bool) -> str:
    parts = ",".join(str(d) for d in deps) if deps else "-"
    return f"{parts}^1" if flip else parts


def pattern_to_text(pattern: MeasurementPattern) -> str:
    lines = [f"vertices {pattern.graph.n_vertices}"]
    lines += [f"edge {a} {b}" for a, b in sorted(pattern.graph.edges)]
    lines += [f"input {v}" for v in pattern.inputs]
    for v, spec in pattern.measurements:
        lines.append(f"measure {v} base={spec.base!r} sign={_deps_str(spec.sign_deps, spec.flip)}")
    for v in pattern.outputs:
        word = ";".join(f"{f.kind}:{_deps_str(f.deps, f.flip)}"
                        for f in pattern.corrections.get(v, ()))
        lines.append(f"output {v} correct={word or '-'}")
    return "\n".join(lines) + "\n"
