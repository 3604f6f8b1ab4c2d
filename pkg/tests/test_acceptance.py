"""Acceptance suite: one test per criterion, each printing a single PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v`` (the lines are written to the
terminal even when output capture is on) or directly as a script.
"""

import math
import time

import numpy as np
import pytest

from robinlab.conformal import (bump, green_sup_probe, mu, mu_flat, nonconcentration_probe,
                                random_band_limited, random_log_normal, trace_conformal, weak_hls_probe)
from robinlab.extremal import (delta_sweep, el_residual, first_variation, minimize, mu_eps,
                               verify_duality, verify_sharp_hls)
from robinlab.green_mass import anomaly_constant, robin_mass_field, trace_robin, verify_appendix_identity
from robinlab.spectral import sphere_model, torus_model

from oracles import square_torus_robin_trace, square_torus_zeta_finite_part

SPHERE_TRACE = 2 * math.log(2) - 1        # closed-form Robin trace of the unit 2-sphere
SPHERE_ZETA = 2 * np.euler_gamma - 1      # finite part of sum (2k+1)/(k(k+1))^s at s = 1


@pytest.fixture
def report(request):
    capman = request.config.pluginmanager.getplugin("capturemanager")

    def emit(criterion, ok, detail):
        line = f"[criterion {criterion}] {'PASS' if ok else 'FAIL'}: {detail}"
        if capman is not None:
            with capman.global_and_fixture_disabled():
                print("\n" + line)
        else:
            print(line)
        assert ok, line
    return emit


@pytest.fixture(scope="module")
def s64():
    return sphere_model(2, 4 * math.pi, 64)


@pytest.fixture(scope="module")
def s64_mass(s64):
    return robin_mass_field(s64)


def test_criterion_1_appendix_identity(report):
    t0 = time.perf_counter()
    sph = verify_appendix_identity(sphere_model(2, 4 * math.pi, 64))
    t_sphere = time.perf_counter() - t0
    tor = verify_appendix_identity(torus_model(np.eye(2), 48))
    c2V = (math.log(2) - np.euler_gamma) / (2 * math.pi) * 4 * math.pi
    ok = (sph.defect < 1e-3 and tor.defect < 1e-3 and t_sphere < 60
          and abs(sph.anomaly_volume - c2V) < 1e-14
          and abs(sph.trace_robin - SPHERE_TRACE) < 1e-12
          and abs(sph.trace_zeta - SPHERE_ZETA) < 1e-3
          and abs(tor.trace_robin - square_torus_robin_trace()) < 1e-5
          and abs(tor.trace_zeta - square_torus_zeta_finite_part()) < 1e-4)
    report(1, ok, f"S2 defect {sph.defect:.2e} ({t_sphere:.1f}s), T2 defect {tor.defect:.2e}; "
                  f"zeta S2 {sph.trace_zeta:.7f} vs {SPHERE_ZETA:.7f}, T2 {tor.trace_zeta:.7f} vs "
                  f"{square_torus_zeta_finite_part():.7f}")


def test_criterion_2_conformal_trace_identity(report):
    rng = np.random.default_rng(2)
    worst = 0.0
    for model in (sphere_model(2, 4 * math.pi, 32), torus_model([[1.0, 0.3], [0.0, 1.2]], 16)):
        mass = robin_mass_field(model)
        for _ in range(50):
            F = random_log_normal(model, rng, amplitude=rng.uniform(0.05, 1.5), band=int(rng.integers(1, 9)))
            lhs, rhs = trace_conformal(model, mass, F, rtol=np.inf)
            worst = max(worst, abs(lhs - rhs) / (1 + abs(rhs)))
    report(2, worst < 1e-8, f"max |trace_F - mu| / (1 + |mu|) = {worst:.2e} over 50 + 50 factors")


def test_criterion_3_sharp_log_hls(report, s64, s64_mass):
    t0 = time.perf_counter()
    rng = np.random.default_rng(3)
    ens = [random_log_normal(s64, rng, amplitude=rng.uniform(0.05, 1.5), band=int(rng.integers(1, 9)))
           for _ in range(200)]
    rep = verify_sharp_hls(s64, s64_mass, ens, taus=(1.5, 2.0, 3.0), tol=1e-6, equality_tol=1e-4)
    dt = time.perf_counter() - t0
    worst_eq = max(abs(g) for g in rep.mobius_gaps)
    ok = rep.min_gap >= -1e-6 and worst_eq <= 1e-4 and dt < 300
    report(3, ok, f"min gap {rep.min_gap:.2e} over 200 members, dilation |gap| <= {worst_eq:.1e}, {dt:.1f}s")


def test_criterion_4_extremal_search(report, s64, s64_mass):
    rows = []
    ok = True
    for seed in (4, 5):
        rng = np.random.default_rng(seed)
        F0 = 1.0 + 0.1 * random_band_limited(s64, rng, band=6) / 3.0
        F0 = np.clip(F0, 0.2, None)
        st = minimize(s64, s64_mass, F0, tol=1e-7)
        gap = abs(st.report.mu - SPHERE_TRACE)
        ok &= st.residual_norm < 1e-5 and st.mass_std < 1e-4 and gap < 1e-4
        rows.append(f"seed {seed}: residual {st.residual_norm:.1e}, mass std {st.mass_std:.1e}, "
                    f"|mu - trace| {gap:.1e}")
    tor = torus_model(np.eye(2), 16)
    _, rn = el_residual(tor, robin_mass_field(tor), np.ones(tor.grid.size))
    ok &= rn < 1e-6
    report(4, ok, "; ".join(rows) + f"; T2 uniform residual {rn:.1e}")


def test_criterion_5_gradient(report):
    model = sphere_model(2, 4 * math.pi, 24)
    mass = robin_mass_field(model)
    rng = np.random.default_rng(5)
    worst = 0.0
    for eps in (0.0, 0.1):
        for _ in range(20):
            F = random_log_normal(model, rng, amplitude=rng.uniform(0.1, 1.0))
            H = random_band_limited(model, rng, band=8) * F
            H = H - model.mean(H)
            t = 1e-5
            fd = (mu_eps(model, mass, F + t * H, eps).mu - mu_eps(model, mass, F - t * H, eps).mu) / (2 * t)
            an = first_variation(model, mass, F, H, eps)
            worst = max(worst, abs(fd - an) / abs(an))
    report(5, worst < 1e-4, f"max relative error {worst:.2e} over 20 pairs x eps in (0, 0.1)")


def test_criterion_6_scale_invariance(report):
    rng = np.random.default_rng(6)
    worst_v, worst_mu = 0.0, 0.0
    for _ in range(20):
        k = int(rng.integers(8, 24))
        f = rng.random((k, k)) * (rng.random((k, k)) < 0.8) + 0.01
        h = float(rng.uniform(0.01, 1.0))
        lam = float(2.0 ** rng.integers(-3, 4))
        g = f / lam ** 2          # g(x) = lam^-2 f(x / lam) on the grid of spacing lam h
        Vf, Vg = h * h * f.sum(), (lam * h) ** 2 * g.sum()
        worst_v = max(worst_v, abs(Vf - Vg) / Vf)
        worst_mu = max(worst_mu, abs(mu_flat(f, h) - mu_flat(g, lam * h)))
    report(6, worst_v < 1e-12 and worst_mu < 1e-6,
           f"max relative V_f change {worst_v:.1e}, max mu change {worst_mu:.1e}")


def test_criterion_7_duality(report, s64):
    rng = np.random.default_rng(7)
    ens = []
    for _ in range(200):
        u = random_band_limited(s64, rng, band=int(rng.integers(1, 9)))
        ens.append(u * rng.uniform(0.05, 3.0) / math.sqrt(s64.inner(u, u) / s64.volume))
    rep = verify_duality(s64, ens, taus=(1.5, 2.0, 3.0), tol=1e-6, equality_tol=1e-4, identity_tol=1e-10)
    worst_eq = max(abs(g) for g in rep.mobius_gaps)
    ok = rep.min_gap >= -1e-6 and worst_eq <= 1e-4 and rep.jensen_defect <= 1e-10
    report(7, ok, f"min gap {rep.min_gap:.2e}, dilation |gap| <= {worst_eq:.1e}, "
                  f"Jensen defect {rep.jensen_defect:.1e}")


def test_criterion_8_substituted_probes(report, s64):
    rng = np.random.default_rng(8)
    ens = [random_log_normal(s64, rng, amplitude=rng.uniform(0.05, 1.5)) for _ in range(30)]
    weak = weak_hls_probe(s64, ens)
    sup = green_sup_probe(s64, ens, 0.1)
    nonc = nonconcentration_probe(s64, ens[0], 0.3)
    tor = torus_model(np.eye(2), 255, resolution=512)
    sweep = delta_sweep(tor, robin_mass_field(tor), (0.4, 0.2, 0.1, 0.05), kappa=4.0, center=(0.5, 0.5))
    finest = sweep.relative_excess[-1]
    probes_finite = all(np.isfinite(x) for x in (weak.minimum, sup.minimum, nonc.value))
    ok = probes_finite and 0 <= finest < 0.05
    excess = ", ".join(f"{100 * e:+.2f}%" for e in sweep.relative_excess)
    report(8, ok, f"probe minima: weak {weak.minimum:.4f}, -sup {sup.minimum:.4f}, non-conc {nonc.value:.4f}; "
                  f"delta sweep excess over sphere value ({excess}), finest {100 * finest:.2f}% from above")


if __name__ == "__main__":
    import sys
    sys.exit(pytest.main([__file__, "-q"]))
