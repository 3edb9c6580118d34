"""End-to-end acceptance criteria; each test records one pass/fail line."""
import math
from pathlib import Path

import numpy as np

from conftest import record
from oracles import constant_cocycle, discriminant_scan, random_symplectic, rotation_matrix
from scipy.integrate import quad_vec
from test_cli import artifacts_identical
from thermolab import cs_linalg as cl
from thermolab.analysis import (
    Section,
    beta_surgery,
    classify_periodic,
    cone_fd_check,
    cone_invariance_test,
    find_periodic,
    lyapunov_spectrum,
)
from thermolab.cocycle import (
    BumpProfile,
    FranksPerturbation,
    constant_path,
    fd_oracle,
    franks_tangent,
    integrate_cocycle,
)
from thermolab.flow import integrate_orbit, unit_state
from thermolab.geometry import TrigPolynomial
from thermolab.scenarios import flat, product_torus, ridge

X_SECTION = Section(axis=0, value=0.0)
SCENARIOS = sorted((Path(__file__).resolve().parent.parent / "scenarios").glob("*.toml"))


def test_c01_energy_conservation():
    sc = flat(c1=1.0)
    orb = integrate_orbit(sc, unit_state(sc, 0.1, 0.2, 0.7), 100.0, 1e-3)
    ok = not orb.renormalized and orb.drift <= 1e-8
    record(1, "energy conservation", ok, f"max |g(v,v)-1| = {orb.drift:.2e} (tol 1e-8)")
    assert ok


def test_c02_fiber_tanh():
    sc = product_torus(1.0)
    lam0 = 0.3
    orb = integrate_orbit(sc, unit_state(sc, 0.0, 0.0, math.acos(math.tanh(-5 + lam0))), 10.0, 1e-3, t0=-5.0)
    err = float(np.max(np.abs(orb.states[:, 2] - np.tanh(orb.times + lam0))))
    ok = err <= 1e-6 and orb.times[0] == -5.0 and abs(orb.times[-1] - 5.0) < 1e-9
    record(2, "fiber coordinate follows tanh", ok, f"max error {err:.2e} on [-5, 5] (tol 1e-6)")
    assert ok


def test_c03_attractor_convergence():
    sc = product_torus(0.5)
    orb = integrate_orbit(sc, unit_state(sc, 0.0, 0.0, math.acos(-0.9)), 50.0, 1e-3)
    v0 = float(orb.states[-1, 2])
    ok = v0 >= 1 - 1e-8
    record(3, "attractor convergence", ok, f"v0(50) = 1 - {1 - v0:.2e} (need >= 1 - 1e-8)")
    assert ok


def test_c04_oseledets_pairing(suite):
    worst, names = 0.0, []
    for case in suite:
        rep = lyapunov_spectrum(case.scenario, case.state, 1e4, 5e-3)
        worst = max(worst, rep.pairing_residual)
        if rep.pairing_residual <= 1e-3:
            names.append(case.name)
    sc = product_torus(0.5)
    rep = lyapunov_spectrum(sc, unit_state(sc, 0.0, 0.0, 0.0), 1e4, 5e-3)
    att = float(np.max(np.abs(np.sort(rep.exponents) - [-0.5, 0.0])))
    ok = len(names) >= 10 and len(names) == len(suite) and att <= 1e-2
    record(4, "Oseledets pairing", ok,
           f"{len(names)}/{len(suite)} scenarios paired, worst {worst:.1e} (tol 1e-3); attractor error {att:.1e} (tol 1e-2)")
    assert ok


def test_c05_conformal_identity(suite):
    worst_c = worst_d = 0.0
    for case in suite:
        coc = integrate_cocycle(case.scenario, integrate_orbit(case.scenario, case.state, 10.0, 1e-3))
        worst_c = max(worst_c, float(coc.conformal_residuals()[-1]))
        worst_d = max(worst_d, float(coc.det_residuals()[-1]))
    ok = worst_c <= 1e-6 and worst_d <= 1e-6
    record(5, "conformal cocycle identity", ok,
           f"t=10: symplectic residual {worst_c:.1e}, det residual {worst_d:.1e} (tol 1e-6)")
    assert ok


def test_c06_fd_oracle(suite):
    worst = 0.0
    for case in suite:
        T = integrate_cocycle(case.scenario, integrate_orbit(case.scenario, case.state, 5.0, 1e-3)).final
        D = fd_oracle(case.scenario, case.state, 5.0, 1e-3)
        worst = max(worst, float(np.linalg.norm(D - T) / np.linalg.norm(T)))
    ok = worst <= 1e-4
    record(6, "cocycle vs finite-difference oracle", ok, f"worst relative error {worst:.1e} at T=5 (tol 1e-4)")
    assert ok


def test_c07_periodic_machinery():
    U = TrigPolynomial([[0, 1, 0.02, 0.01], [1, 1, 0.01, 0.0]])
    cases = [(product_torus(0.5), (0.0, 0.3, 0.2)), (ridge(U=U), (0.0, 0.74, 0.05)), (flat(), (0.3, 0.2, 0.0))]
    res = gap = 0.0
    orbits = []
    for sc, st in cases:
        orb = find_periodic(sc, unit_state(sc, *st), X_SECTION)
        orbits.append(orb)
        res = max(res, orb.residual)
        lam = np.linalg.eigvals(orb.return_derivative.entries)
        gap = max(gap, abs(math.log(abs(lam[0] * lam[1])) - orb.s_period))
    sink = classify_periodic(cl.validate_cs(np.diag([0.5, 1 / 3])))
    parabolic = classify_periodic(orbits[2])
    circle = classify_periodic(orbits[0])
    moduli = sorted(circle.moduli)
    hand = (
        sink.kind == "sink"
        and abs(sink.mu - 1 / 6) < 1e-12
        and parabolic.kind == "non-hyperbolic"
        and np.allclose(orbits[2].return_derivative.entries, [[1, 1], [0, 1]], atol=1e-9)
        and circle.kind == "non-hyperbolic"
        and abs(moduli[0] - math.exp(-0.5)) < 1e-6
        and abs(moduli[1] - 1) < 1e-6
    )
    ok = res <= 1e-10 and gap <= 1e-6 and hand
    record(7, "periodic orbits", ok,
           f"residual {res:.1e} (tol 1e-10), |log(l1 l2) - s(L)| {gap:.1e} (tol 1e-6), "
           f"classification {'matches' if hand else 'differs'}")
    assert ok


def test_c08_beta_surgery():
    e, alpha = 0.5, 0.2
    sc = product_torus(e)
    orb = find_periodic(sc, unit_state(sc, 0.0, 0.3, 0.2), X_SECTION)
    out = beta_surgery(sc, orb, alpha)
    form = abs(out.beta_shift - alpha)
    dyn = abs(abs(out.dlogdet) - alpha)
    ok = form <= 1e-8 and dyn <= 1e-3
    record(8, "beta surgery", ok, f"form-level error {form:.1e} (tol 1e-8), |dlog| error {dyn:.1e} (tol 1e-3)")
    assert ok


def _one_letter(M):
    return cl.PeriodicLinearSystem((0,), (cl.validate_cs(M),))


def test_c09_cs_linalg():
    rng = np.random.default_rng(2024)
    worst, done = 0.0, 0
    while done < 10_000:
        n = int(rng.integers(1, 4))
        S = random_symplectic(rng, n)
        if np.linalg.cond(S) > 1e6:
            continue
        mu = float(np.exp(rng.uniform(-1.5, 1.5)))
        p = cl.eigen_pairing(cl.validate_cs(math.sqrt(mu) * S, tol=1e-8))
        worst = max(worst, max(abs(a * b - mu) for a, b in p.pairs))
        done += 1
    split = cl.SplitSpec([0], [1])
    ok1, r1 = cl.l_domination_test(_one_letter(np.diag([0.5, 2.0])), split, 1)
    ident = [cl.l_domination_test(_one_letter(np.eye(2)), split, l) for l in (1, 2, 3, 4)]
    slow = [cl.l_domination_test(_one_letter(np.diag([0.9, 1 / 0.9])), split, l) for l in (1, 2, 3, 4)]
    dom = (
        ok1 and abs(r1 - 0.25) < 1e-12
        and all(not v and abs(r - 1) < 1e-12 for v, r in ident)
        and [v for v, _ in slow] == [False, False, False, True]
        and abs(slow[-1][1] - 0.81**4) < 1e-12
    )
    mismatches = 0
    for _ in range(1000):
        M = rng.normal(size=(2, 2))
        if np.linalg.det(M) <= 0:
            M[0] *= -1
        alpha = rng.uniform(0.01, 1.5)
        mismatches += cl.mane_complexify(M, alpha, 1e-3) != discriminant_scan(M, alpha, 1e-3)
    mismatches += cl.mane_complexify(1.1 * rotation_matrix(0.7), 0.1) != 0.0
    ok = worst <= 1e-8 and dom and mismatches == 0
    record(9, "conformally symplectic linear algebra", ok,
           f"pairing worst {worst:.1e} over 1e4 (tol 1e-8); domination examples "
           f"{'match' if dom else 'differ'}; complexify mismatches {mismatches}/1000")
    assert ok


def _four_dim_path():
    ts = np.linspace(0, 1, 1001)

    def A_of(t):
        q = np.array([[0.3 + 0.2 * np.sin(2 * np.pi * t), 0.1], [0.1, -0.2]])
        return np.block([[np.zeros((2, 2)), np.eye(2)], [q, -0.4 * np.eye(2)]])

    return ts, [A_of(t) for t in ts]


def test_c10_franks_tangent():
    bumps = BumpProfile()
    Z0, _ = franks_tangent(constant_path([[0, 1], [-1.0, -0.3]]), FranksPerturbation.scalar(), bumps)
    zero = not np.any(Z0)

    rng = np.random.default_rng(7)
    path = _four_dim_path()
    worst = 0.0
    for _ in range(1000):
        sym = [rng.normal(size=(2, 2)) for _ in range(3)]
        sym = [m + m.T for m in sym]
        d, lam = rng.normal(), rng.normal()
        scale = math.sqrt(sum(float(np.sum(m * m)) for m in sym) + 2 * d * d + lam * lam)
        zeta = FranksPerturbation(*(m / scale for m in sym), [[0, d / scale], [d / scale, 0]], lam / scale)
        _, Y = franks_tangent(path, zeta, bumps, nsteps=500)
        worst = max(worst, cl.infinitesimal_cs_check(Y, 1e-8).residual)

    A = np.array([[0, 1], [0.4, -0.3]])
    pulse = BumpProfile(radius=0.2, center=0.5)
    a = 0.7
    Z, _ = franks_tangent(constant_path(A), FranksPerturbation.scalar(a=a), pulse, nsteps=1000)

    def integrand(t):
        T = constant_cocycle(A, t)
        B = np.array([[0, 0], [a * float(pulse.hbar(t)) * float(pulse.delta(t)), 0]])
        return np.linalg.solve(T, B @ T)

    I, _ = quad_vec(integrand, 0.3, 0.7, epsabs=1e-13)
    quad_err = float(np.abs(Z - constant_cocycle(A, 1.0) @ I).max())
    ok = zero and worst <= 1e-8 and quad_err <= 1e-6
    record(10, "Franks tangent map", ok,
           f"zeta=0 gives Z=0: {zero}; worst ICS residual {worst:.1e} over 1e3 draws (tol 1e-8); "
           f"quadrature error {quad_err:.1e} (tol 1e-6)")
    assert ok


def test_c11_cone_rate(suite):
    worst, unstable = 0.0, []
    for case in suite:
        orb = integrate_orbit(case.scenario, case.state, 3.0, 1e-3)
        worst = max(worst, cone_fd_check(case.scenario, orb, [0.6, 0.8]))
        verdicts = {cone_invariance_test(case.scenario, orb, 0.2, stride=s).verdict for s in (20, 10, 5)}
        if len(verdicts) != 1:
            unstable.append(case.name)
    ok = worst <= 1e-5 and not unstable
    record(11, "cone rate formula", ok,
           f"worst FD gap {worst:.1e} (tol 1e-5); verdict changes under refinement: {unstable or 'none'}")
    assert ok


def test_c12_determinism(tmp_path):
    differing = [p.stem for p in SCENARIOS if not artifacts_identical(p, tmp_path / p.stem)]
    ok = not differing
    record(12, "deterministic artifacts", ok,
           f"{len(SCENARIOS) - len(differing)}/{len(SCENARIOS)} scenarios byte-identical across two runs")
    assert ok
