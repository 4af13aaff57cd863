"""Command-line front end: estimation-curve data as deterministic CSV, plus
the compression and measurement-pattern verification suites.

Exit codes: 0 on success, 1 on verification failure, 2 on usage errors.
CSV cells are formatted with 12 significant digits ('%.12g', NaN spelled
"nan"), so identical configurations produce byte-identical files.
"""

from __future__ import annotations

import argparse
import math
import sys
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import compress, estimate, mbqc, probes, simcore


def _fmt(value) -> str:
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, float) and math.isnan(value):
        return "nan"
    return f"{value:.12g}"


def _write_csv(header: list[str], rows, out: str | None) -> None:
    """Write rows as they arrive (rows may be a lazy iterable), so large
    grids stream instead of accumulating."""
    sink = open(out, "w") if out else sys.stdout
    try:
        sink.write(",".join(header) + "\n")
        for row in rows:
            sink.write(",".join(_fmt(v) for v in row) + "\n")
    finally:
        if out:
            sink.close()


def _parse_floats(text: str) -> list[float]:
    return [float(part) for part in text.split(",") if part.strip()]


def _n_grid(n_min: int, n_max: int, n_step: int) -> list[int]:
    """Dense up to 20, then every 5th value, unless an explicit step is given;
    the endpoint is always included."""
    if n_step > 0:
        grid = list(range(n_min, n_max + 1, n_step))
    else:
        dense = list(range(n_min, min(n_max, 20) + 1))
        grid = dense + [n for n in range(25, n_max + 1, 5) if n >= n_min]
    if grid and grid[-1] != n_max:
        grid.append(n_max)
    return grid


def _pool_map(func, cells, jobs: int):
    """Ordered results; lazy generator when serial, ordered pool map otherwise."""
    if jobs <= 1:
        return (func(cell) for cell in cells)
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(func, cells))


# ---------------------------------------------------------------------------
# local estimation

def _local_row(N: int) -> tuple:
    theta = math.pi / (3 * N)  # keeps sin(N theta) away from zero
    fi = estimate.fisher_information(estimate.parity_probs_fn(N), theta)
    qfi_ghz = estimate.qfi_pure(probes.ghz_subspace(N))
    qfi_product = N * estimate.qfi_statevector(simcore.plus_state(1))
    return (N, fi, qfi_ghz, qfi_product)


def cmd_local(args) -> int:
    rows = _pool_map(_local_row, list(range(args.n_min, args.n_max + 1)), args.jobs)
    _write_csv(["N", "fi_ghz_parity", "qfi_ghz", "qfi_product"], rows, args.out)
    return 0


# ---------------------------------------------------------------------------
# Bayesian phase estimation

def _phase_block(cell) -> list[tuple]:
    sigma, ns, theta0 = cell
    classical = estimate.classical_parallel_curve(ns, sigma)
    rows = []
    for N, v_classical in zip(ns, classical):
        v_quantum = estimate.qft_phase_variance(N, sigma, theta0)
        bound = estimate.van_trees_bound(N, sigma)
        rows.append((N, sigma, 1.0 / v_quantum, 1.0 / v_classical, 1.0 / bound))
    return rows


def cmd_bayes_phase(args) -> int:
    sigmas = _parse_floats(args.sigma) if args.sigma else [k / 10 for k in range(1, 11)]
    ns = _n_grid(args.n_min, args.n_max, args.n_step)
    cells = [(sigma, ns, args.theta0) for sigma in sigmas]
    blocks = _pool_map(_phase_block, cells, args.jobs)
    rows = (row for block in blocks for row in block)
    _write_csv(["N", "sigma", "inv_V_quantum", "inv_V_classical_parallel", "inv_V_bound"],
               rows, args.out)
    return 0


# ---------------------------------------------------------------------------
# Bayesian frequency estimation

def _freq_cell(cell) -> tuple:
    N, delta = cell
    quantum = estimate.optimize_tau(N, delta, probes.sine_coefficients(N),
                                    estimate.qft_povm(N))
    classical = estimate.optimize_tau_classical(N)
    return (N, delta, quantum.tau, 1.0 / quantum.vbar, classical.tau, 1.0 / classical.vbar)


def cmd_bayes_freq(args) -> int:
    deltas = _parse_floats(args.delta) if args.delta else [1.0]
    ns = _n_grid(args.n_min, args.n_max, args.n_step)
    cells = [(N, delta) for delta in deltas for N in ns]
    rows = _pool_map(_freq_cell, cells, args.jobs)
    _write_csv(["N", "delta", "tau_quantum", "delta2_over_V_quantum",
                "tau_classical", "delta2_over_V_classical"], rows, args.out)
    return 0


# ---------------------------------------------------------------------------
# MSE validity limit

def cmd_mse_limit(args) -> int:
    if args.sigma:
        sigmas = _parse_floats(args.sigma)
    else:
        sigmas = [round(0.05 * k, 10) for k in range(1, 81)]
    values = estimate.mse_limit_curve(sigmas)
    rows = list(zip(sigmas, values))
    _write_csv(["sigma", "vmin_over_prior_variance"], rows, args.out)
    return 0


# ---------------------------------------------------------------------------
# Holevo phase variance (wrapped prior)

def _holevo_block(cell) -> list[tuple]:
    sigma, ns, theta0, tol = cell
    prior = estimate.wrapped_gaussian_prior(sigma, theta0)
    return [(N, sigma, 1.0 / estimate.holevo_bayes_round(N, prior, tol=tol)) for N in ns]


def cmd_holevo(args) -> int:
    sigmas = _parse_floats(args.sigma) if args.sigma else [k * math.pi / 8 for k in range(1, 9)]
    ns = _n_grid(args.n_min, args.n_max, args.n_step)
    tol = args.tol if args.tol else 1e-8
    cells = [(sigma, ns, args.theta0, tol) for sigma in sigmas]
    blocks = _pool_map(_holevo_block, cells, args.jobs)
    rows = (row for block in blocks for row in block)
    _write_csv(["N", "sigma", "inv_Vphi_post"], rows, args.out)
    return 0


# ---------------------------------------------------------------------------
# Compression verification

def cmd_compress_verify(args) -> int:
    N = args.N
    tol = args.tol if args.tol else 1e-10
    rng = np.random.default_rng(args.seed)
    circuit, layout = compress.build_compressor(N)
    report = compress.count_resources(circuit, layout.step_slices)
    print(f"compressor N={N}: lambda={layout.lam}, qubits={layout.n_qubits}, "
          f"gates={report.gate_count}, toffolis={report.toffoli_count}, depth={report.depth}")
    ok = True

    for n in range(N + 1):
        bits = "1" * n + "0" * (N - n)
        expected = compress.classical_compress_oracle(bits)
        result = compress.compress_statevector(probes.unary_basis_state(n, N), layout, circuit)
        target = simcore.basis_state(format(expected, f"0{layout.lam}b"))
        fid = simcore.fidelity_up_to_global_phase(result, target)
        good = fid >= 1.0 - tol
        ok &= good
        print(f"  unary {bits} -> binary {expected}: fidelity {fid:.12f} "
              f"{'ok' if good else 'MISMATCH'}")

    for trial in range(20):
        raw = rng.normal(size=N + 1) + 1j * rng.normal(size=N + 1)
        coeffs = raw / np.linalg.norm(raw)
        state = probes.unary_embedding(probes.SubspaceState(N, coeffs))
        result = compress.compress_statevector(state, layout, circuit)
        target_amps = np.zeros(2**layout.lam, dtype=complex)
        target_amps[: N + 1] = coeffs
        fid = simcore.fidelity_up_to_global_phase(result, simcore.StateVector(layout.lam, target_amps))
        good = fid >= 1.0 - tol
        ok &= good
        if not good or trial == 19:
            print(f"  random superposition {trial + 1}/20: fidelity {fid:.12f} "
                  f"{'ok' if good else 'MISMATCH'}")

    print("PASS" if ok else "FAIL")
    return 0 if ok else 1


# ---------------------------------------------------------------------------
# Pattern verification

def _verify_named_pattern(name: str, N: int, seed: int, tol: float) -> list[mbqc.VerifyReport]:
    rng = np.random.default_rng(seed)
    if name == "teleport":
        angles = [0.0, math.pi / 2] + list(rng.uniform(-math.pi, math.pi, size=3))
        return [mbqc.verify_pattern(mbqc.teleport_pattern(phi), mbqc.teleport_unitary(phi), tol=tol)
                for phi in angles]
    if name == "yrot":
        angles = list(rng.uniform(-math.pi, math.pi, size=10))
        return [mbqc.verify_pattern(mbqc.y_rotation_pattern(phi), mbqc.ry_matrix(phi), tol=tol)
                for phi in angles]
    if name == "cnot":
        return [mbqc.verify_pattern(mbqc.cnot_pattern(), mbqc.CNOT_MATRIX, tol=tol)]
    if name == "ghz":
        pattern = mbqc.ghz_pattern(N)
        return [mbqc.verify_pattern(pattern, probes.ghz_state(N), tol=tol)]
    if name == "sine":
        pattern = mbqc.sine_pattern(N)
        target = probes.unary_embedding(probes.sine_coefficients(N))
        return [mbqc.verify_pattern(pattern, target, tol=tol)]
    raise ValueError(f"unknown pattern {name!r}")


def cmd_mbqc_verify(args) -> int:
    tol = args.tol if args.tol else 1e-10
    try:
        reports = _verify_named_pattern(args.pattern, args.N, args.seed, tol)
    except ValueError as exc:
        print(exc, file=sys.stderr)
        return 2
    ok = True
    for report in reports:
        ok &= report.passed
        print(f"  {args.pattern}: {report}")
    print("PASS" if ok else "FAIL")
    return 0 if ok else 1


# ---------------------------------------------------------------------------

def _add_common(parser: argparse.ArgumentParser, n_min: int, n_max: int) -> None:
    parser.add_argument("--n-min", type=int, default=n_min)
    parser.add_argument("--n-max", type=int, default=n_max)
    parser.add_argument("--n-step", type=int, default=0,
                        help="explicit N stride (default: dense to 20, then every 5th)")
    parser.add_argument("--sigma", type=str, default="",
                        help="comma-separated prior widths")
    parser.add_argument("--delta", type=str, default="",
                        help="comma-separated frequency prior widths")
    parser.add_argument("--theta0", type=float, default=0.0)
    parser.add_argument("--out", type=str, default="")
    parser.add_argument("--tol", type=float, default=0.0,
                        help="tolerance override (0 keeps per-command defaults)")
    parser.add_argument("--jobs", type=int, default=1)
    parser.add_argument("--seed", type=int, default=0,
                        help="seed for the randomized verification inputs")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="clustersense",
        description="Cluster-state metrology: estimation curves and verification suites.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("local", help="GHZ/parity Fisher information vs qubit number")
    _add_common(p, 1, 8)
    p.set_defaults(func=cmd_local)

    p = sub.add_parser("bayes-phase", help="Gaussian-prior phase estimation curves")
    _add_common(p, 1, 200)
    p.set_defaults(func=cmd_bayes_phase)

    p = sub.add_parser("bayes-freq", help="frequency estimation with optimized interrogation time")
    _add_common(p, 1, 64)
    p.set_defaults(func=cmd_bayes_freq)

    p = sub.add_parser("mse-limit", help="minimal posterior MSE vs prior width")
    _add_common(p, 1, 1)
    p.set_defaults(func=cmd_mse_limit)

    p = sub.add_parser("holevo", help="wrapped-prior Holevo phase variance curves")
    _add_common(p, 1, 100)
    p.set_defaults(func=cmd_holevo)

    p = sub.add_parser("compress-verify", help="unary-to-binary compressor checks")
    p.add_argument("N", type=int)
    _add_common(p, 1, 1)
    p.set_defaults(func=cmd_compress_verify)

    p = sub.add_parser("mbqc-verify", help="branch-exhaustive measurement-pattern checks")
    p.add_argument("pattern", choices=["teleport", "yrot", "cnot", "ghz", "sine"])
    p.add_argument("N", type=int, nargs="?", default=3)
    _add_common(p, 1, 1)
    p.set_defaults(func=cmd_mbqc_verify)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
