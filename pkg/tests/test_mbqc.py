import math

import numpy as np
import pytest

from clustersense import mbqc, probes, simcore
from clustersense.mbqc import (
    AngleSpec,
    CorrectionFactor,
    Graph,
    MeasurementPattern,
    PatternError,
    cluster_state,
    cnot_pattern,
    ghz_pattern,
    path_graph,
    pattern_to_text,
    run_pattern,
    sine_pattern,
    teleport_pattern,
    teleport_unitary,
    verify_pattern,
    y_rotation_pattern,
)


def test_two_vertex_cluster():
    state = cluster_state(path_graph(2))
    np.testing.assert_allclose(state.amps, np.array([1, 1, 1, -1]) / 2, atol=1e-15)


def test_square_cluster_symmetry():
    # the 4-cycle graph state is invariant under swapping both diagonals
    square = Graph(4, frozenset({(0, 1), (1, 2), (2, 3), (0, 3)}))
    state = cluster_state(square)
    permuted = state.amps.reshape((2,) * 4).transpose((2, 3, 0, 1)).reshape(-1)
    np.testing.assert_allclose(state.amps, permuted, atol=1e-15)


def test_cluster_with_injected_input():
    psi = np.array([0.6, 0.8j])
    state = cluster_state(path_graph(3), injected={0: psi})
    expected = simcore.product_state([psi, np.array([1, 1]) / math.sqrt(2),
                                      np.array([1, 1]) / math.sqrt(2)])
    expected = simcore.apply_gate(expected, simcore.cz(0, 1))
    expected = simcore.apply_gate(expected, simcore.cz(1, 2))
    np.testing.assert_allclose(state.amps, expected.amps, atol=1e-14)


def test_cluster_size_cap():
    with pytest.raises(PatternError):
        cluster_state(path_graph(simcore.MAX_QUBITS + 1))


def test_graph_rejects_self_loops():
    with pytest.raises(PatternError):
        Graph(2, frozenset({(1, 1)}))


def test_teleport_reference_branch():
    # angle 0, outcome 0: output is H|psi>; for |0> input that is |+>
    pattern = teleport_pattern(0.0)
    out, prob = run_pattern(pattern, (0,), injected={0: np.array([1.0, 0.0])})
    assert prob == pytest.approx(0.5, abs=1e-12)
    np.testing.assert_allclose(out.amps, np.array([1, 1]) / math.sqrt(2), atol=1e-12)


def test_teleport_pattern_verifies_against_its_unitary():
    for phi in (0.0, 1.1, -2.4):
        report = verify_pattern(teleport_pattern(phi), teleport_unitary(phi))
        assert report.passed


def test_y_rotation_pattern_all_branches():
    rng = np.random.default_rng(11)
    for phi in rng.uniform(-math.pi, math.pi, size=6):
        report = verify_pattern(y_rotation_pattern(phi), mbqc.ry_matrix(phi))
        assert report.passed
        assert report.branches == 8


def test_y_rotation_matches_simulator_gate():
    phi = 0.77
    psi = np.array([0.48, 0.6 + 0.64j])
    psi /= np.linalg.norm(psi)
    out, _ = run_pattern(y_rotation_pattern(phi), (1, 0, 1), injected={0: psi})
    expected = simcore.apply_gate(simcore.StateVector(1, psi), simcore.ry(0, phi))
    assert simcore.fidelity_up_to_global_phase(out, expected) >= 1 - 1e-10


def test_cnot_pattern_all_branches():
    report = verify_pattern(cnot_pattern(), mbqc.CNOT_MATRIX)
    assert report.passed
    assert report.branches == 4


@pytest.mark.parametrize("N", [2, 3, 4])
def test_ghz_pattern(N):
    report = verify_pattern(ghz_pattern(N), probes.ghz_state(N))
    assert report.passed
    assert report.probability_sum == pytest.approx(1.0, abs=1e-10)


def test_ghz_pattern_vertex_count():
    for N in range(2, 9):
        assert ghz_pattern(N).graph.n_vertices == 2 * N - 1


@pytest.mark.parametrize("N", [1, 2, 3])
def test_sine_pattern(N):
    target = probes.unary_embedding(probes.sine_coefficients(N))
    report = verify_pattern(sine_pattern(N), target)
    assert report.passed
    assert report.min_fidelity >= 1 - 1e-10


def test_sine_pattern_vertex_budget():
    for N in range(1, 9):
        pattern = sine_pattern(N)
        assert pattern.graph.n_vertices <= mbqc.sine_pattern_vertex_budget(N)


def test_run_pattern_agrees_with_enumeration():
    pattern = sine_pattern(2)
    target = probes.unary_embedding(probes.sine_coefficients(2))
    total = 0.0
    for branch in range(2**pattern.n_measured):
        bits = tuple((branch >> k) & 1 for k in range(pattern.n_measured))
        out, prob = run_pattern(pattern, bits)
        total += prob
        assert simcore.fidelity_up_to_global_phase(out, target) >= 1 - 1e-10
    assert total == pytest.approx(1.0, abs=1e-10)


def test_corrupted_correction_fails_some_branch():
    pattern = ghz_pattern(3)
    broken = MeasurementPattern(
        graph=pattern.graph,
        inputs=pattern.inputs,
        measurements=pattern.measurements,
        outputs=pattern.outputs,
        corrections={**pattern.corrections,
                     4: (CorrectionFactor("Z", deps=(1,)),)},
    )
    report = verify_pattern(broken, probes.ghz_state(3))
    assert not report.passed


def test_branch_enumeration_cap():
    with pytest.raises(PatternError):
        verify_pattern(sine_pattern(4), probes.unary_embedding(probes.sine_coefficients(4)))


def test_angle_dependencies_must_be_measured_first():
    with pytest.raises(PatternError):
        MeasurementPattern(
            graph=path_graph(2),
            inputs=(),
            measurements=((0, AngleSpec(0.0, sign_deps=(1,))),),
            outputs=(1,),
        )


def test_x_past_cz_identity():
    # moving X past CZ: CZ (X x 1) = (X x Z) CZ up to global phase
    lhs = simcore.circuit_unitary(simcore.Circuit(2, [simcore.x(0), simcore.cz(0, 1)]))
    rhs = simcore.circuit_unitary(simcore.Circuit(2, [simcore.cz(0, 1), simcore.z(1), simcore.x(0)]))
    overlap = abs(np.trace(lhs.conj().T @ rhs)) / 4
    assert overlap == pytest.approx(1.0, abs=1e-12)


def test_bare_cluster_qfi_is_linear():
    from clustersense import estimate

    for N in range(2, 11):
        state = cluster_state(path_graph(N))
        assert estimate.qfi_statevector(state) == pytest.approx(N, abs=1e-9)


def test_pattern_serialization_golden():
    assert pattern_to_text(teleport_pattern(0.0)) == (
        "vertices 2\n"
        "edge 0 1\n"
        "input 0\n"
        "measure 0 base=0.0 sign=-\n"
        "output 1 correct=X:0\n"
    )
    assert pattern_to_text(ghz_pattern(3)) == (
        "vertices 5\n"
        "edge 0 1\n"
        "edge 1 2\n"
        "edge 2 3\n"
        "edge 3 4\n"
        "measure 1 base=0.0 sign=-\n"
        "measure 3 base=0.0 sign=-\n"
        "output 0 correct=-\n"
        "output 2 correct=X:1\n"
        "output 4 correct=X:1,3\n"
    )


def test_sine_pattern_serialization_is_stable():
    text_a = pattern_to_text(sine_pattern(3))
    text_b = pattern_to_text(sine_pattern(3))
    assert text_a == text_b
    assert text_a.startswith("vertices 19\n")
