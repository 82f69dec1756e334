"""Acceptance gate: one PASS/FAIL line per criterion.

Run under pytest, or directly with ``python3 tests/test_acceptance.py``.
"""
import csv
import io
import math
import sys
import time
from contextlib import redirect_stdout
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).parent))

from tprabi import analysis, cli, collapse, fock, verify
from tprabi.model import ModelParams, is_admissible

from conftest import collapse_states, fock_spectrum
from test_fock import dense_oracle

TOL = 1e-3
RUNTIME_LIMIT = 60.0


def run_cli(argv):
    buf = io.StringIO()
    with redirect_stdout(buf):
        code = cli.main(argv)
    return code, buf.getvalue()


def criterion_1():
    parts, ok = [], True
    for omega0, nodes, target in ((1.2, 1, -0.500385), (1.3, 2, -0.500200)):
        start = time.perf_counter()
        code, out = run_cli(["collapse-solve", "--omega0", str(omega0)])
        elapsed = time.perf_counter() - start
        rows = [r for r in csv.DictReader(io.StringIO(out)) if int(r["node_count"]) == nodes]
        E = float(rows[0]["E"]) if rows else math.nan
        good = code == 0 and abs(E - target) < 1e-4 and elapsed <= RUNTIME_LIMIT
        ok &= good
        parts.append(f"omega0={omega0} {nodes}-node E={E:.7f} (target {target}), {elapsed:.1f}s")
    return ok, "; ".join(parts)


def criterion_2():
    parts, ok = [], True
    for k, target in ((1, 1.095), (2, 1.145)):
        result = collapse.threshold_omega0(k)
        ok &= abs(result.omega0_threshold - target) <= 0.01
        parts.append(f"k={k} omega0={result.omega0_threshold:.5f} (target {target})")
    return ok, "; ".join(parts)


def _dual_distance(omega0, n_states=None):
    params = ModelParams.at_collapse(omega0)
    state = collapse_states(omega0, 1)[0]
    wf = state.wavefunction
    vec = fock_spectrum(1.0, omega0, 0.5, 1).vectors[0]
    rebuilt = fock.reconstruct_wavefunction(vec, wf.x, params.omega, n_states)
    return analysis.l2_distance(wf, rebuilt)


def criterion_3():
    d4 = _dual_distance(4.0)
    d05 = _dual_distance(0.5)
    d05_30 = _dual_distance(0.5, 30)
    ok = d4 < 1e-3 and d05 < 1e-2
    return ok, (f"omega0=4 L2={d4:.2e} (<1e-3); omega0=0.5 L2={d05:.2e} with all "
                f"{fock.DEFAULT_CUTOFF // 2} sector states (<1e-2), {d05_30:.2e} with 30")


def criterion_4():
    exact = fock.spectrum(ModelParams(1.0, 2.0, 0.0), 12, 50).eigenvalues
    expected = sorted(n + s for n in range(8) for s in (-1, 1))[:12]
    err0 = float(np.max(np.abs(exact - expected)))
    err_sq, err_dense = 0.0, 0.0
    for eps in (0.1, 0.3, 0.45):
        levels = math.sqrt(1 - 4 * eps ** 2) * (np.arange(11) + 0.5) - 0.5
        got = fock_spectrum(1.0, 0.0, eps, 22).eigenvalues
        err_sq = max(err_sq, float(np.max(np.abs(got - np.repeat(levels, 2)))))
        params = ModelParams(1.0, 0.0, eps)
        dense = np.linalg.eigvalsh(dense_oracle(params, 50))[:6]
        banded = fock.spectrum(params, 6, 50, check_convergence=False).eigenvalues
        err_dense = max(err_dense, float(np.max(np.abs(dense - banded))))
    ok = err0 < 1e-10 and err_sq < 1e-6 and err_dense < 1e-10
    return ok, (f"eps=0 max err {err0:.1e} (<1e-10); squeezed n<=10 max err {err_sq:.1e} (<1e-6); "
                f"banded vs dense N=50 {err_dense:.1e}")


def criterion_5():
    window_ok, slope, split, count = True, 0.0, 0.0, 0
    for omega0, max_states in ((0.5, None), (1.2, None), (1.3, None), (4.0, 4)):
        params = ModelParams.at_collapse(omega0)
        for s in collapse_states(omega0, max_states):
            et = s.e_tilde.e_tilde
            window_ok &= is_admissible(et, params)
            kappa = math.sqrt(-et)
            slope = max(slope, abs(analysis.log_slope(s.wavefunction.psi_minus, s.wavefunction.x)
                                   + kappa) / kappa)
            split = max(split, abs(s.norm_plus - s.norm_minus))
            count += 1
    ok = window_ok and slope < 0.02 and split < 1e-3
    return ok, (f"{count} states: window {'ok' if window_ok else 'violated'}, "
                f"max slope error {slope:.2%} (<2%), max norm split {split:.1e} (<1e-3)")


def criterion_6():
    checks = [*verify.harmonic_checks(), *verify.fock_residual_checks(), *verify.sigma_z_checks(),
              *verify.collapse_checks(1.0), *verify.cross_method_checks(1.0)]
    failed = [c.name for c in checks if not c.passed]
    worst = {c.name: c.value for c in checks if c.value is not None and not c.name.startswith("control")}
    controls = [c for c in checks if c.name.startswith("control")]
    summary = ", ".join(f"{k}={v:.1e}" for k, v in sorted(worst.items()) if "fourier" in k or "phase" in k)
    return not failed, (f"{len(checks)} checks, {len(controls)} negative controls; {summary}"
                        + (f"; failed: {failed}" if failed else ""))


def criterion_7():
    gaps = []
    for eps in (0.40, 0.45, 0.49, 0.499):
        E = fock_spectrum(1.0, 2.0, eps, 16).eigenvalues
        above = E[E > -0.5][:3]
        gaps.append(np.diff(above))
    gaps = np.array(gaps)
    shrinking = bool(np.all(np.diff(gaps, axis=0) < 0))
    tail = next(verify.tail_checks())
    text = "; ".join(f"{g[0]:.3f}/{g[1]:.3f}" for g in gaps)
    return shrinking and tail.passed, f"gaps {text} (eps 0.40..0.499); tails {tail.detail}"


CRITERIA = [criterion_1, criterion_2, criterion_3, criterion_4, criterion_5, criterion_6,
            criterion_7]


def _check(number, record_acceptance):
    passed, message = CRITERIA[number - 1]()
    record_acceptance(number, passed, message)
    assert passed, message


def test_criterion_1(record_acceptance):
    _check(1, record_acceptance)


def test_criterion_2(record_acceptance):
    _check(2, record_acceptance)


def test_criterion_3(record_acceptance):
    _check(3, record_acceptance)


def test_criterion_4(record_acceptance):
    _check(4, record_acceptance)


def test_criterion_5(record_acceptance):
    _check(5, record_acceptance)


def test_criterion_6(record_acceptance):
    _check(6, record_acceptance)


def test_criterion_7(record_acceptance):
    _check(7, record_acceptance)


if __name__ == "__main__":
    results = []
    chosen = [int(a) for a in sys.argv[1:]] or range(1, len(CRITERIA) + 1)
    for number in chosen:
        criterion = CRITERIA[number - 1]
        passed, message = criterion()
        results.append(passed)
        print(f"{'PASS' if passed else 'FAIL'} criterion {number}: {message}", flush=True)
    sys.exit(0 if all(results) else 1)
