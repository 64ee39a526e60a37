"""Acceptance suite: every quantitative gate at its stated tolerance, one
pass/fail line printed per criterion.

All randomness is seed-fixed through the stream derivation, so each run is a
deterministic replay. Two sub-checks are measured defects of the stated
gates and fail as stated (the assertion messages carry the analysis; see the supplementary
tests that demonstrate the underlying convergence is real):
  - criterion 3, Laplace-transform band at n=1e4 / 1e5 replicas / 3 SE;
  - criterion 6, recurrent-side median threshold 0.05 (the limit median of
    the statistic is ~0.16).
"""

import subprocess
import sys

import numpy as np
import pytest

from spinwalk import bessel as B
from spinwalk import model as M
from spinwalk import nonuniq as NU
from spinwalk import riemann as R
from spinwalk import rng as RNG
from spinwalk import skewprod as SK
from spinwalk import sphere_sde as SP
from spinwalk import stats as ST
from spinwalk import walk as W

pytestmark = pytest.mark.acceptance

SEED = 7


def streams(tag):
    return lambda k: RNG.stream(SEED, tag, k)


def announce(criterion, ok, detail):
    import conftest

    line = f"[{'PASS' if ok else 'FAIL'}] {criterion}: {detail}"
    conftest.CRITERION_LINES.append(line)
    print("\n" + line)


@pytest.fixture(scope="module")
def law_rot2d():
    """Stationary angular law of rotation2d b=0.5, thinned at 3 relaxation times."""
    return SP.estimate_stationary(M.rotation2d(0.5), burn_in=30, n_samples=100_000,
                                  thin=24.0, rng=RNG.stream(SEED, "law2d"), h=1e-3,
                                  chains=2048)


@pytest.fixture(scope="module")
def fp_density_rot2d():
    return SP.stationary_density_circle(M.rotation2d(0.5), n_grid=512)


def test_criterion_01_geometry_identities():
    worst = {}
    for model in M.builtin_models():
        reports = R.geometry_identity_suite(model, n_points=1000,
                                            rng=RNG.stream(SEED, "geo" + model.family),
                                            n_leibniz=25)
        for rep in reports:
            key = rep.name
            worst[key] = max(worst.get(key, 0.0), rep.statistic)
            assert rep.pass_, (model.family, rep.name, rep.statistic, rep.threshold)
    announce("criterion 1 (geometry identities)", True,
             "; ".join(f"{k}={v:.2e}" for k, v in worst.items()))


def test_criterion_02_radial_law():
    cfg = W.WalkConfig(model=M.rotation2d(0.5), square_root="rotation")
    law = W.marginal_samples(cfg, 10_000, 100_000, streams("marginal"))
    radii = np.linalg.norm(law.samples, axis=1)
    rep = ST.ks_test_1d(radii, lambda x: B.bessel_cdf_t1(1.25, x))
    ok = rep.statistic < 0.02
    announce("criterion 2 (radial law)", ok, f"KS distance {rep.statistic:.5f} < 0.02")
    assert ok, rep.statistic


@pytest.fixture(scope="module")
def exit_law_run():
    cfg = W.WalkConfig(model=M.rotation2d(0.5), square_root="rotation")
    return W.exit_stats(cfg, 10_000, 1.0, 100_000, streams("exit-law"), horizon=60.0)


def test_criterion_03_exit_time_laplace(exit_law_run):
    taus = exit_law_run.samples[:, 0][~exit_law_run.meta["censored"]]
    lines = []
    ok = True
    for lam in (0.5, 1.0, 2.0):
        mc = np.exp(-lam * taus)
        cf = B.exit_time_laplace(1.25, 1.0, lam)
        se = mc.std(ddof=1) / np.sqrt(mc.size)
        ratio = (mc.mean() - cf) / se
        lines.append(f"lam={lam}: dev/SE={ratio:+.2f}")
        ok = ok and abs(ratio) < 3.0
    announce("criterion 3 (exit-time Laplace, 3 SE)", ok, "; ".join(lines))
    assert ok, (
        "Documented defect of the stated gate: the walk's integer first passage carries an "
        "overshoot bias ~0.58/sqrt(n) in the effective barrier, putting the "
        "Laplace transform ~5.5 MC standard errors below the closed form at "
        "n=1e4 with 1e5 replicas (the closed form itself is verified against "
        "fine-step radial MC to <0.6 SE; see test_supplementary_exit_law_"
        "convergence for the same statistic passing at larger n). Measured: "
        + "; ".join(lines)
    )


def test_criterion_03_exit_direction_and_independence(exit_law_run, fp_density_rot2d):
    ok_mask = ~exit_law_run.meta["censored"]
    taus = exit_law_run.samples[:, 0][ok_mask]
    dirs = exit_law_run.samples[:, 1:][ok_mask]
    rep = ST.sphere_chi2(dirs, density=fp_density_rot2d, bins=72)
    dc = ST.distance_correlation(taus, dirs, rng=RNG.stream(SEED, "dcor"))
    ok = rep.pass_ and dc < 0.05
    announce("criterion 3 (exit direction + independence)", ok,
             f"direction chi2 p={rep.p:.3f} > 0.01; dCor={dc:.4f} < 0.05")
    assert rep.pass_, (rep.statistic, rep.p)
    assert dc < 0.05, dc


def test_supplementary_exit_law_convergence():
    """Same Laplace statistic at n=1e5 (1e4 replicas): the 3 SE band holds,
    demonstrating the n^-1/2 bias vanishing and the limit being correct."""
    cfg = W.WalkConfig(model=M.rotation2d(0.5), square_root="rotation")
    law = W.exit_stats(cfg, 100_000, 1.0, 10_000, streams("exit-law-big"), horizon=60.0)
    taus = law.samples[:, 0][~law.meta["censored"]]
    lines = []
    for lam in (0.5, 1.0, 2.0):
        mc = np.exp(-lam * taus)
        cf = B.exit_time_laplace(1.25, 1.0, lam)
        ratio = (mc.mean() - cf) / (mc.std(ddof=1) / np.sqrt(mc.size))
        lines.append(f"lam={lam}: dev/SE={ratio:+.2f}")
        assert abs(ratio) < 3.0, lines
    announce("supplementary (exit law at n=1e5)", True, "; ".join(lines))


def test_criterion_04_stationarity(law_rot2d, fp_density_rot2d):
    rep = ST.sphere_chi2(law_rot2d.samples, density=fp_density_rot2d, bins=72)
    assert rep.pass_, (rep.statistic, rep.p)

    worst = {}
    for model, law in ((M.rotation2d(0.5), law_rot2d), (M.rotation4d(0.5), None)):
        if law is None:
            law = SP.estimate_stationary(model, burn_in=30, n_samples=10_000, thin=12.0,
                                         rng=RNG.stream(SEED, "law4d"), h=1e-3, chains=2048)
        diag = SP.ergodicity_diagnostic(model, law, test_fns=SP.monomial_dictionary(model.d, 3),
                                        h=1e-4, max_points=10_000)
        worst[model.d] = diag.statistic
        assert diag.pass_, (model.d, diag.statistic)
    announce("criterion 4 (stationarity)", True,
             f"FP chi2 p={rep.p:.3f} > 0.01; generator residual max|t| d2={worst[2]:.2f}, "
             f"d4={worst[4]:.2f} < 4")


def test_criterion_05_skew_product_equals_direct_sde():
    cases = [
        (M.isotropic(2), 1.0, 0.0),
        (M.rotation2d(0.5), 4.0, 0.2),
        (M.rotation4d(0.5), 4.0, 0.2),
    ]
    details = []
    for model, r0, barrier in cases:
        gen = RNG.stream(SEED, "skew" + model.family)
        x0 = np.zeros(model.d)
        x0[0] = r0
        skew = SK.skew_product_endpoints(model, r0, 1.0, 10_000, gen, phi0=x0 / r0,
                                         h=1e-3, min_radius=barrier)
        direct = SK.euler_direct_endpoints(model, x0, 1.0, 10_000, gen, h=1e-3,
                                           min_radius=barrier)
        rep = ST.energy_distance_test(skew, direct, n_perm=199,
                                      rng=RNG.stream(SEED, "skewperm" + model.family))
        details.append(f"{model.family}: p={rep.p:.3f}")
        assert rep.pass_, (model.family, rep.statistic, rep.p)
    announce("criterion 5 (skew product = direct SDE)", True, "; ".join(details))


@pytest.fixture(scope="module")
def recurrence_runs():
    rec = W.return_statistics(W.WalkConfig(model=M.rotation2d(0.5), square_root="rotation"),
                              100_000, 0.05, 200, streams("recur"))
    tra = W.return_statistics(W.WalkConfig(model=M.rotation4d(0.8), square_root="rotation"),
                              100_000, 0.05, 200, streams("transi"))
    return rec, tra


def test_criterion_06_recurrence_classification(recurrence_runs):
    rec, tra = recurrence_runs
    ok_tra = tra["median_min"] > 0.2
    ok_rec = rec["median_min"] < 0.05
    announce("criterion 6 (recurrence classification)", ok_rec and ok_tra,
             f"recurrent median {rec['median_min']:.3f} (stated gate < 0.05, limit law ~0.16); "
             f"transient median {tra['median_min']:.3f} > 0.2")
    assert ok_tra, tra["median_min"]
    assert ok_rec, (
        "Documented defect of the stated gate: the recurrent-side bound 'median < 0.05' "
        "contradicts the limit law of the statistic: the median of "
        "min_{[1/2,1]} r_t for dimension 1.25 is ~0.163 (exact-transition "
        "simulation at two grid resolutions), which the walk reproduces: "
        f"measured {rec['median_min']:.3f}. Separation vs the transient regime "
        f"({tra['median_min']:.3f}) holds with wide margin; see "
        "test_supplementary_recurrence_separation."
    )


def test_supplementary_recurrence_separation(recurrence_runs):
    """The classification content of criterion 6 at the true quantiles: the
    recurrent walk's late-window minimum sits near the limit median ~0.16,
    far below the transient ~0.72, and only the recurrent walk occupies the
    near-origin shell."""
    rec, tra = recurrence_runs
    assert rec["median_min"] < 0.3 < 0.45 < tra["median_min"]
    assert rec["occupation_fraction"].mean() > 10 * tra["occupation_fraction"].mean()
    assert np.mean(rec["minima"] < 0.05) > 0.3  # a large fraction of paths do dip below
    announce("supplementary (recurrence separation)", True,
             f"recurrent {rec['median_min']:.3f} << transient {tra['median_min']:.3f}; "
             f"near-origin occupation ratio "
             f"{rec['occupation_fraction'].mean() / max(tra['occupation_fraction'].mean(), 1e-12):.0f}x")


def test_criterion_07_rapid_spinning():
    s_list = np.array([1e-2, 1e-10, 1e-30, 1e-100, 1e-250])
    gen = RNG.stream(SEED, "spin")
    exceed = 0
    for _ in range(100):
        path = SK.rapid_spinning_profile(1.5, 1.0, s_list, gen, t_min=1e-280, ratio=1.05)
        vals, _flags = B.rapid_spinning_curve(path, 1.0, s_list)
        assert np.all(np.diff(vals) >= 0)  # monotone as s decreases
        exceed += vals[-1] > 1e3
    ok = exceed >= 99
    announce("criterion 7 (rapid spinning)", ok,
             f"rho_s(1) > 1e3 at the smallest anchor on {exceed}/100 paths (need >= 99)")
    assert ok, exceed


def test_criterion_08_nonuniqueness():
    model = M.rotation4d(0.5)
    p = np.array([0.0, 1.0, 0.0, 0.0])
    reports = NU.check_equivariance(model, p, rng=RNG.stream(SEED, "equi"))
    for rep in reports:
        assert rep.pass_, (rep.name, rep.statistic)
    alg_worst = max(r.statistic for r in reports if r.name != "trace_a2_recurrence_window")
    xs, ys, sup = NU.pair_endpoints(model, p, np.zeros(4), 1.0, 1e-3, 10_000,
                                    RNG.stream(SEED, "pair"))
    frac_distinct = float((sup > 0).mean())
    rep = ST.energy_distance_test(xs, ys, n_perm=199, rng=RNG.stream(SEED, "pairperm"))
    ok = alg_worst < 1e-12 and frac_distinct >= 0.99 and rep.pass_
    announce("criterion 8 (non-uniqueness)", ok,
             f"identities {alg_worst:.1e} < 1e-12; distinct on {frac_distinct:.0%} of replicas; "
             f"law-equality p={rep.p:.3f} > 0.01")
    assert ok, (alg_worst, frac_distinct, rep.p)


def test_criterion_09_pitman_yor():
    delta = 1.5
    model = M.rotation2d(np.sqrt(0.5))  # V = 1.5
    assert abs(model.delta - delta) < 1e-12
    law = SP.estimate_stationary(model, burn_in=30, n_samples=20_000, thin=16.0,
                                 rng=RNG.stream(SEED, "pylaw"), h=1e-3, chains=1024)
    gen = RNG.stream(SEED, "pyrec")

    # structural checks + divergence flags on 1e3 records
    flags = 0
    for _ in range(1000):
        rec = SK.sample_marked_excursion(model, {"level_range": (0.5, 2.0)}, gen, law,
                                         step=5e-3)
        rep = SK.split_at_max_check(rec)
        assert rep.pass_, rep.provenance
        flags += rec.diverges_left and rec.diverges_right
    ok_flags = flags == 1000

    # lifetime / M^2 scale invariance across maxima
    lifetimes = {}
    for m_level in (0.5, 1.0, 2.0):
        vals = [SK.pitman_yor_excursion(delta, m_level, 2e-3 * m_level**2, gen).times[-1]
                for _ in range(500)]
        lifetimes[m_level] = np.asarray(vals) / m_level**2
    ks_a = ST.ks_test_2samp(lifetimes[0.5], lifetimes[1.0])
    ks_b = ST.ks_test_2samp(lifetimes[0.5], lifetimes[2.0])

    # angular mark at the argmax follows the stationary law (1e4 records)
    fp = SP.stationary_density_circle(model, n_grid=512)
    marks = np.empty((10_000, 2))
    for k in range(10_000):
        rec = SK.sample_marked_excursion(model, {"level_range": (0.5, 2.0)}, gen, law,
                                         step=0.04)
        j = int(np.argmin(np.abs(rec.mapped.times - rec.argmax_time)))
        marks[k] = rec.mapped.values[j] / np.linalg.norm(rec.mapped.values[j])
    chi = ST.sphere_chi2(marks, density=fp, bins=72)

    ok = ok_flags and ks_a.pass_ and ks_b.pass_ and chi.pass_
    announce("criterion 9 (split-at-the-maximum excursions)", ok,
             f"structure 1000/1000; divergence flags {flags}/1000; scaling KS p="
             f"{ks_a.p:.3f}/{ks_b.p:.3f}; mark chi2 p={chi.p:.3f}")
    assert ok, (flags, ks_a.p, ks_b.p, chi.p)


def _run_cli(args):
    proc = subprocess.run([sys.executable, "-m", "spinwalk.cli"] + args,
                          capture_output=True, text=True)
    return proc


def test_criterion_10_cli_determinism(tmp_path):
    outs = []
    for name, threads in (("a", "1"), ("b", "2")):
        csv = tmp_path / f"{name}.csv"
        proc = _run_cli(["--seed", "7", "--threads", threads, "walk", "--model", "rotation2d",
                         "--b", "0.5", "--n", "2000", "--replicas", "5000", "--out", str(csv)])
        assert proc.returncode == 0, proc.stderr
        outs.append(csv.read_bytes())
    assert outs[0] == outs[1]

    reps = []
    for name in ("c", "d"):
        csv = tmp_path / f"{name}.csv"
        proc = _run_cli(["--seed", "11", "exit-law", "--delta", "2.5", "--a", "1.0",
                         "--lambda", "0.5,1", "--replicas", "3000", "--dt", "1e-3",
                         "--out", str(csv)])
        assert proc.returncode == 0, proc.stderr
        reps.append(csv.read_bytes())
    assert reps[0] == reps[1]

    laws = []
    for name in ("e", "f"):
        csv = tmp_path / f"{name}.csv"
        proc = _run_cli(["--seed", "3", "stationary", "--model", "rotation2d", "--b", "0.5",
                         "--burn-in", "10", "--thin", "1.0", "--chains", "64",
                         "--replicas", "256", "--out", str(csv)])
        assert proc.returncode == 0, proc.stderr
        laws.append(csv.read_bytes())
    assert laws[0] == laws[1]
    announce("criterion 10 (CLI determinism)", True,
             "walk (threads 1 vs 2), exit-law and stationary byte-identical under fixed seed")
