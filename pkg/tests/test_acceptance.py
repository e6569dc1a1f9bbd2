"""Acceptance gate: one PASS/FAIL line per criterion, printed in the terminal summary."""

import csv
import functools
import time

import numpy as np
import pytest

from fragilis import cli
from fragilis.bounds import (
    kato_inverse_bounds,
    neumann_inverse_bound,
    resolvent_norm_bound,
    upper_bound_estimated,
    upper_bound_true,
)
from fragilis.exceptions import InfeasibleConstraintError
from fragilis.fragility import fragility_row, perturb, perturb_complex, perturb_real
from fragilis.lds import ContinuousSystem, is_discrete_stable
from fragilis.sim import FAMILIES, SystemSpec, gen_system, simulate, sysid_noise_curve
from fragilis.sysid import estimate_window
from oracles import fragility_by_determinant

pytestmark = pytest.mark.acceptance

STRUCTS = ("row", "column")


def _stable_system(rng, n):
    spec = SystemSpec(n, float(rng.uniform(0.1, 0.99)), int(rng.integers(2**31)), FAMILIES[rng.integers(3)])
    return gen_system(spec)


def _resolvent_column(A, r, k, structure):
    """u = (A - rI)^-1 e_k (row) or (A - rI)^-T e_k (column) via a plain solve."""
    n = A.shape[0]
    M = A - r * np.eye(n)
    if structure == "column":
        M = M.T
    return np.linalg.solve(M, np.eye(n)[k])


# -- case generators, cached so criterion 4 sees exactly the results of 1-3 --

@functools.lru_cache(maxsize=None)
def placement_cases():
    rng = np.random.default_rng(101)
    cases = []
    start = time.perf_counter()
    while len(cases) < 500:
        n = int(rng.integers(2, 13))
        A = _stable_system(rng, n)
        k = int(rng.integers(n))
        structure = STRUCTS[rng.integers(2)]
        if len(cases) % 2 == 0:
            r = float(rng.choice([-1, 1]) * rng.uniform(0.5, 2.0))
        else:
            r = complex(rng.uniform(0.5, 1.5) * np.exp(1j * rng.uniform(0.05, np.pi - 0.05)))
        try:
            res = perturb(A, r, k, structure)
        except InfeasibleConstraintError:
            continue
        cases.append((A, res))
    return cases, time.perf_counter() - start


@functools.lru_cache(maxsize=None)
def closed_form_cases():
    rng = np.random.default_rng(202)
    cases = []
    for i in range(200):
        n = int(rng.integers(2, 13))
        A = _stable_system(rng, n)
        k = int(rng.integers(n))
        r = float(rng.choice([-1, 1]) * rng.uniform(1.0, 2.0))
        structure = STRUCTS[i % 2]
        cases.append((A, r, k, structure, perturb_real(A, r, k, structure), perturb_complex(A, complex(r, 0.0), k, structure)))
    return cases


@functools.lru_cache(maxsize=None)
def minimality_cases():
    rng = np.random.default_rng(303)
    cases = []
    while len(cases) < 200:
        n = int(rng.integers(2, 13))
        A = _stable_system(rng, n)
        k = int(rng.integers(n))
        structure = STRUCTS[len(cases) % 2]
        r = complex(np.exp(1j * rng.uniform(0.05, np.pi - 0.05)))
        try:
            res = perturb_complex(A, r, k, structure)
        except InfeasibleConstraintError:
            continue
        cases.append((A, r, k, structure, res))
    return cases


def test_criterion_1_placement(criterion):
    cases, elapsed = placement_cases()
    worst = 0.0
    for A, res in cases:
        lam = np.linalg.eigvals(A + res.delta)
        worst = max(worst, float(np.min(np.abs(lam - res.target.r))))
    n_complex = sum(res.target.r.imag != 0 for _, res in cases)
    ok = worst <= 1e-8 and elapsed < 10
    criterion(1, ok, f"eigenvalue placement on {len(cases)} systems ({n_complex} complex targets): "
                     f"max min|lam - r| = {worst:.2e} (tol 1e-8), {elapsed:.2f}s (limit 10s)")
    assert ok


def test_criterion_2_closed_form(criterion):
    worst_rel, worst_match, worst_oracle = 0.0, 0.0, 0.0
    for A, r, k, structure, real_res, cplx_res in closed_form_cases():
        expected = 1.0 / np.linalg.norm(_resolvent_column(A, r, k, structure))
        worst_rel = max(worst_rel, abs(real_res.fragility - expected) / expected)
        worst_match = max(worst_match, np.linalg.norm(cplx_res.gamma - real_res.gamma) / real_res.fragility)
        ref = fragility_by_determinant(A, r, k, structure)
        worst_oracle = max(worst_oracle, abs(np.linalg.norm(ref) - real_res.fragility) / expected)
    ok = worst_rel <= 1e-12 and worst_match <= 1e-10
    criterion(2, ok, f"closed form on 200 instances: max rel err vs 1/||(A-rI)^-1 e_k|| = {worst_rel:.2e} (tol 1e-12), "
                     f"complex-path vs real-path gamma = {worst_match:.2e} (tol 1e-10), "
                     f"determinant oracle agreement = {worst_oracle:.1e}")
    assert ok


def test_criterion_3_minimality(criterion):
    rng = np.random.default_rng(304)
    worst_gap = -np.inf
    worst_feas = 0.0
    for A, r, k, structure, res in minimality_cases():
        u = _resolvent_column(A.astype(complex), r, k, structure)
        B = np.vstack([u.imag, u.real])
        _, s, Vt = np.linalg.svd(B)
        rank = int(np.sum(s > 1e-12 * s[0]))
        N = Vt[rank:].T
        for _ in range(50):
            c = rng.standard_normal(N.shape[1]) * 10.0 ** rng.uniform(-8, 1)
            alt = res.gamma + N @ c
            worst_feas = max(worst_feas, float(np.max(np.abs(B @ alt - [0.0, -1.0]))))
            worst_gap = max(worst_gap, res.fragility - np.linalg.norm(alt))
    ok = worst_gap <= 1e-12
    criterion(3, ok, f"minimality on 200 complex targets x 50 alternatives: max(||G|| - ||G'||) = {worst_gap:.2e} "
                     f"(tol 1e-12), alternatives feasible to {worst_feas:.1e}")
    assert ok


def test_criterion_4_norm_equivalence(criterion):
    results = [res for _, res in placement_cases()[0]]
    for case in closed_form_cases():
        results.extend(case[4:])
    results.extend(case[4] for case in minimality_cases())
    worst = 0.0
    for res in results:
        g = np.linalg.norm(res.gamma)
        op = np.linalg.norm(res.delta, 2)
        fro = np.linalg.norm(res.delta, "fro")
        worst = max(worst, abs(op - g), abs(fro - g), abs(res.fragility - g))
    ok = worst <= 1e-12
    criterion(4, ok, f"||Delta||_op = ||Delta||_F = ||gamma|| on {len(results)} results: max abs diff = {worst:.2e} (tol 1e-12)")
    assert ok


def test_criterion_5_bound_sandwich(criterion, tmp_path):
    out = tmp_path / "sweep.csv"
    start = time.perf_counter()
    code = cli.main(["--quiet", "validate-bounds", "--out", str(out)])
    elapsed = time.perf_counter() - start
    with open(out, newline="") as fh:
        rows = list(csv.DictReader(fh))
    flag_valid = sum(r["flag_r_gt_norm_A"] == "1" and r["flag_r_real"] == "1" for r in rows)
    violations = sum(r["violations"] != "" for r in rows)
    ok = code == 0 and violations == 0 and elapsed < 10 and len(rows) == 3 * 3 * 2 * 3 * 50
    criterion(5, ok, f"default validate-bounds sweep: exit {code}, {len(rows)} records, {flag_valid} flag-valid, "
                     f"{violations} violations, {elapsed:.2f}s (limit 10s)")
    assert ok


def test_criterion_6_hand_fixtures(criterion):
    checks = {}
    rs = [0.5, 1.0, 2.0, -1.0, 1.5, 3.0, -0.25]
    checks["zero matrix |r|"] = all(
        fragility_row(np.zeros((n, n)), r, k, s) == abs(r)
        for n in (2, 3, 5) for r in rs for k in range(n) for s in STRUCTS
    )
    checks["scaled identity |r-a|"] = all(
        fragility_row(a * np.eye(3), r, 1) == abs(r - a)
        for a in (0.5, -0.25, 0.75) for r in rs if r != a
    )
    checks["zero matrix r=0.7"] = fragility_row(np.zeros((3, 3)), 0.7, 2) == 0.7
    # off the dyadic grid the resolvent rounds 1/(a - r) once, so allow one ulp there
    rng = np.random.default_rng(606)
    ulps = max(
        abs(fragility_row(a * np.eye(2), r, 0) - abs(r - a)) / np.spacing(abs(r - a))
        for a, r in rng.uniform(-3, 3, size=(2000, 2))
    )
    checks["random scaled identity within 1 ulp"] = ulps <= 1
    rot = np.array([[0.0, 0.5], [-0.5, 0.0]])
    checks["rotation r=1"] = all(abs(fragility_row(rot, 1.0, k) - 1 / np.sqrt(0.8)) <= 1e-9 for k in (0, 1))
    checks["rotation r=0.8i"] = all(abs(fragility_row(rot, 0.8j, k) - 0.78) <= 1e-9 for k in (0, 1))
    checks["upper_true(0.5I, 2) = 18"] = abs(upper_bound_true(0.5 * np.eye(2), 2).value - 18.0) <= 1e-12
    est = upper_bound_estimated(0.5 * np.eye(2), np.diag([0.1, 0.0]), 0.2, 2).value
    # 7.314 is the rounded form of (2/3) / (1 - 0.1 * 2/3) * 3.2^2
    exact = (2 / 3) / (1 - 0.1 * 2 / 3) * 3.2**2
    checks["upper_estimated = 7.314..."] = abs(est - exact) <= 1e-6 and round(est, 3) == 7.314
    failed = [name for name, good in checks.items() if not good]
    ok = not failed
    criterion(6, ok, f"hand fixtures {len(checks) - len(failed)}/{len(checks)}"
                     + (f", failed: {failed}" if failed else f", upper_estimated = {est:.7f}"))
    assert ok


def test_criterion_7_lemmas(criterion):
    rng = np.random.default_rng(707)
    rtol = 1e-12
    bad = {"neumann": 0, "resolvent": 0, "kato": 0}
    for _ in range(1000):
        n = int(rng.integers(1, 9))
        A = rng.standard_normal((n, n))
        A *= rng.uniform(0, 0.999) / np.linalg.norm(A, 2)
        actual = np.linalg.norm(np.linalg.inv(np.eye(n) - A), 2)
        bad["neumann"] += int(actual > neumann_inverse_bound(A) * (1 + rtol))

        A = rng.standard_normal((n, n))
        z = np.linalg.norm(A, 2) * rng.uniform(1.001, 3) * np.exp(1j * rng.uniform(0, 2 * np.pi))
        actual = np.linalg.norm(np.linalg.inv(A - z * np.eye(n)), 2)
        bad["resolvent"] += int(actual > resolvent_norm_bound(A, z) * (1 + rtol))

        T = rng.standard_normal((n, n)) + 2 * np.eye(n)
        t_inv = np.linalg.inv(T)
        A = rng.standard_normal((n, n))
        A *= rng.uniform(0, 0.999) / (np.linalg.norm(A, 2) * np.linalg.norm(t_inv, 2))
        inv_b, diff_b = kato_inverse_bounds(T, A)
        S_inv = np.linalg.inv(T + A)
        bad["kato"] += int(np.linalg.norm(S_inv, 2) > inv_b * (1 + rtol)
                        or np.linalg.norm(S_inv - t_inv, 2) > diff_b * (1 + rtol) + 1e-15)

    eq = 0.0
    for n in (1, 3, 6):
        for a in (0.1, 0.5, 0.9):
            I = np.eye(n)
            eq = max(eq, abs(np.linalg.norm(np.linalg.inv(I - a * I), 2) / neumann_inverse_bound(a * I) - 1))
            z = 1.0 + a
            eq = max(eq, abs(np.linalg.norm(np.linalg.inv(a * I - z * I), 2) / resolvent_norm_bound(a * I, z) - 1))
            T, A = 2 * I, -a * I
            inv_b, diff_b = kato_inverse_bounds(T, A)
            S_inv = np.linalg.inv(T + A)
            eq = max(eq, abs(np.linalg.norm(S_inv, 2) / inv_b - 1),
                     abs(np.linalg.norm(S_inv - np.linalg.inv(T), 2) / diff_b - 1))
    ok = not any(bad.values()) and eq <= 1e-12
    criterion(7, ok, f"Neumann/resolvent/Kato on 1000 samples each: violations {bad}, "
                     f"scaled-identity equality rel err {eq:.1e} (tol 1e-12)")
    assert ok


def test_criterion_8_discretization(criterion):
    rng = np.random.default_rng(808)
    disagreements = 0
    stable_counts = {True: 0, False: 0}
    for i in range(200):
        n = int(rng.integers(1, 9))
        for dt in (1e-3, 1e-2):
            # spectrum of A_c * dt scattered around the disc |1 + z| < 1
            A_c = (rng.standard_normal((n, n)) * rng.uniform(0.2, 1.5) - rng.uniform(0, 1.5) * np.eye(n)) / dt
            rep = is_discrete_stable(ContinuousSystem(A_c), dt)
            direct = np.linalg.eigvals(np.eye(n) + A_c * dt)
            quad = np.sort(np.sqrt((1 + rep.eigenvalues.real * dt) ** 2 + (rep.eigenvalues.imag * dt) ** 2))
            ref = np.sort(np.abs(direct))
            disagreements += int(np.any((quad < 1) != (ref < 1))) + int(rep.stable != bool(np.all(ref < 1)))
            stable_counts[rep.stable] += 1
    ok = disagreements == 0 and min(stable_counts.values()) > 0
    criterion(8, ok, f"discretization criterion vs |lam(I + A_c dt)| on 200 systems x 2 dt: "
                     f"{disagreements} disagreements ({stable_counts[True]} stable, {stable_counts[False]} unstable)")
    assert ok


def test_criterion_9_noiseless_sysid(criterion):
    rng = np.random.default_rng(909)
    worst, full_rank = 0.0, 0
    for _ in range(100):
        n = int(rng.integers(2, 11))
        A = _stable_system(rng, n)
        X = simulate(A, rng.standard_normal(n), n + 5)
        rep = estimate_window(X)
        if rep.degenerate:
            continue
        full_rank += 1
        worst = max(worst, np.linalg.norm(rep.A_hat - A, 2) / np.linalg.norm(A, 2))
    curve = sysid_noise_curve(SystemSpec(4, 0.9, 9), [0.0, 1e-2], trials=20)
    gap0 = curve[0].median_fragility_gap
    ok = worst <= 1e-8 and gap0 <= 1e-8 and full_rank > 0
    criterion(9, ok, f"noiseless sysid on 100 systems ({full_rank} full-rank windows): max ||A_hat - A||/||A|| = "
                     f"{worst:.2e} (tol 1e-8); noise curve fragility gap at scale 0 = {gap0:.2e} (tol 1e-8)")
    assert ok


def test_criterion_10_pipeline_determinism(criterion, tmp_path):
    blobs = {}
    for threads in (1, 8):
        for rep in range(2):
            d = tmp_path / f"t{threads}_{rep}"
            d.mkdir()
            series = d / "sim.bin"
            assert cli.main(["--quiet", "--threads", str(threads), "--seed", "11", "simulate", "--out", str(series)]) == 0
            files = [series]
            for ext in ("csv", "json"):
                out = d / f"hm.{ext}"
                assert cli.main(["--quiet", "--threads", str(threads), "compute", str(series), "--out", str(out)]) == 0
                files.append(out)
            files.append(d / "hm.csv.normalized.csv")
            blobs[(threads, rep)] = [f.read_bytes() for f in files]
    reference = blobs[(1, 0)]
    ok = all(b == reference for b in blobs.values())
    n_windows = len(reference[1].splitlines()) - 1
    criterion(10, ok, f"simulate -> compute with --threads 1 and 8, twice each: "
                      f"{'byte-identical' if ok else 'outputs differ'} ({n_windows} windows, 4 files per run)")
    assert ok
