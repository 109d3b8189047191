"""Acceptance criteria 1-9 at their stated sizes and tolerances.

Each test prints a single ``criterion N: PASS|FAIL ...`` line and then asserts.
The Monte Carlo criteria are marked slow; the whole module takes on the order
of half an hour on one core.
"""

import numpy as np
import pytest

from polygaf.cli import run
from polygaf.experiments import (
    FormSpec,
    StokesSetup,
    clt_run,
    cross_route,
    deviation_curve,
    dilog_bounds,
    hole_curve,
    intensity_counts,
    intensity_stokes,
    kernel_identities,
    mean_value_sweep,
    variance_chain,
)
from polygaf.hole import decay_fit
from polygaf.stats import bipotential_variance, epsilon_mean_value, predicted_variance
from polygaf import forms

SEED = 20240611


def report(capsys, number, ok, detail):
    with capsys.disabled():
        print(f"\ncriterion {number}: {'PASS' if ok else 'FAIL'} {detail}")


def test_criterion_1_kernel_identities(capsys):
    rows = np.array(kernel_identities(1000, SEED))
    series, product, moebius = rows[:, 1].max(), rows[:, 2].max(), rows[:, 3].max()
    margin = dilog_bounds(10_000)
    ok = series <= 1e-10 and product <= 1e-12 and moebius <= 1e-12 and margin >= 0
    assert set(rows[:, 0].astype(int)) == {1, 2, 3}
    report(capsys, 1, ok, f"series {series:.2e} product {product:.2e} moebius {moebius:.2e} "
                          f"dilog margin {margin:.2e}")
    assert ok


@pytest.mark.slow
def test_criterion_2_first_intensity(capsys):
    count = intensity_counts(8.0, 0.5, 20_000, SEED)
    setup = StokesSetup.build((5.0, 8.0), FormSpec("smooth", (0.5, 0.5)), (20, 32))
    stokes = intensity_stokes(setup, 10_000, SEED)
    ok = abs(count["z_score"]) <= 3 and abs(stokes["z_score"]) <= 3
    report(capsys, 2, ok, f"count mean {count['mean']:.4f} vs {count['expected']:.4f} (z {count['z_score']:.2f}, "
                          f"failed {count['failed']}); stokes mean {stokes['mean']:.4f} vs "
                          f"{stokes['expected']:.4f} (z {stokes['z_score']:.2f})")
    assert ok


@pytest.mark.slow
def test_criterion_3_cross_route(capsys):
    setup = StokesSetup.build(20.0, FormSpec("smooth", (0.5,)), (256, 512))
    pairs = cross_route(setup, 1000, SEED)
    st, zs = pairs[:, 0], pairs[:, 1]
    good = np.abs(zs - st) <= 1e-3 * (1 + np.abs(zs))
    frac = float(np.mean(good))
    ok = frac >= 0.99
    report(capsys, 3, ok, f"agreement fraction {frac:.4f}, worst gap {np.max(np.abs(zs - st)):.2e}")
    assert ok


@pytest.mark.slow
def test_criterion_4ab_variance_chain_n1(capsys):
    setup = StokesSetup.build(20.0, FormSpec("smooth", (0.9,)), (96, 192))
    summary, _ = variance_chain(setup, 100_000, SEED)
    ratio_a = summary["mc_over_bipotential"]
    form = forms.smooth_bump((0.9,), 1)
    r25 = bipotential_variance(form, 25.0) / predicted_variance(form, 25.0)
    r100 = bipotential_variance(form, 100.0) / predicted_variance(form, 100.0)
    ok_a = abs(ratio_a - 1) <= 0.05
    ok_b = 0.9 <= r100 <= 1.1 and abs(r100 - 1) < abs(r25 - 1)
    report(capsys, "4a", ok_a, f"MC/bipotential {ratio_a:.4f} at L=20 "
                               f"(MC {summary['mc_variance']:.5f} +- {summary['mc_variance_se']:.5f})")
    report(capsys, "4b", ok_b, f"bipotential/predicted {r25:.4f} at L=25, {r100:.4f} at L=100")
    assert ok_a and ok_b


@pytest.mark.slow
def test_criterion_4c_variance_chain_n2(capsys):
    setup = StokesSetup.build((30.0, 30.0), FormSpec("smooth", (0.95, 0.95)), (24, 96),
                              tol=1e-16, relative=True, margin=0.0)
    summary, _ = variance_chain(setup, 1200, SEED)
    mc_bip = summary["mc_over_bipotential"]
    bip_pred = summary["bipotential_over_predicted"]
    ok = abs(mc_bip - 1) <= 0.1 and abs(bip_pred - 1) <= 0.1
    report(capsys, "4c", ok, f"MC/bipotential {mc_bip:.4f}, bipotential/predicted {bip_pred:.4f} at L=(30,30)")
    assert ok


@pytest.mark.slow
def test_criterion_5_normality(capsys):
    setup = StokesSetup.build(100.0, FormSpec("smooth", (0.9,)), (192, 384))
    summary, _ = clt_run(setup, 2000, SEED)
    ok = summary["ks_pvalue"] > 0.01
    report(capsys, 5, ok, f"KS distance {summary['ks_distance']:.4f}, p {summary['ks_pvalue']:.3f}, "
                          f"normalized variance {summary['normalized_variance']:.3f}")
    assert ok


@pytest.mark.slow
def test_criterion_6_mean_value_lemma(capsys):
    sides = mean_value_sweep(5.0, 0.4, 1000, SEED)
    lhs, rhs = sides[:, 0], sides[:, 1]
    holds = lhs <= rhs + 1e-6
    t = np.linspace(1e-3, 0.999, 10_000)
    eps_ok = bool(np.all(epsilon_mean_value(t) <= t**2 / (1 - t**2)))
    ok = bool(np.all(holds)) and eps_ok
    report(capsys, 6, ok, f"{int(holds.sum())}/1000 samples satisfy the inequality, "
                          f"max lhs-rhs {np.max(lhs - rhs):.2e}; epsilon bound {'holds' if eps_ok else 'fails'}")
    assert ok


@pytest.mark.slow
def test_criterion_7_hole_decay(capsys):
    Ls = [1.0, 2.0, 3.0, 4.0]
    est = hole_curve(0.5, Ls, 1_000_000, SEED)
    logp = np.array([np.log(e.probability) for e in est])
    fit = decay_fit(list(zip(Ls, logp)))
    worst_excluded = max(e.excluded_fraction for e in est)
    decreasing = bool(np.all(np.diff(logp) < 0))
    ok = decreasing and 1.5 <= fit.beta <= 2.5 and worst_excluded < 0.01
    probs = ", ".join(f"{e.probability:.5f}" for e in est)
    report(capsys, 7, ok, f"P = {probs}; beta {fit.beta:.3f}; max uncertain fraction {worst_excluded:.2e}")
    assert ok


@pytest.mark.slow
def test_criterion_8_deviation_decay(capsys):
    est = deviation_curve(0.5, 0.5, [2.0, 4.0, 8.0], 100_000, SEED)
    p = [e.probability for e in est]
    decreasing = p[0] > p[1] > p[2]
    disjoint = est[2].ci_high < est[0].ci_low
    ok = decreasing and disjoint
    report(capsys, 8, ok, "P = " + ", ".join(f"{e.probability:.5f} [{e.ci_low:.5f}, {e.ci_high:.5f}]" for e in est))
    assert ok


SMALL = {
    "kernel-check": {"pairs": "60"},
    "sample": {"trials": "3", "L": "3", "radius": "0.6"},
    "intensity": {"form": "count", "L": "4", "trials": "300", "chunk": "70"},
    "variance": {"L": "5", "trials": "300", "chunk": "70", "grid_radial": "32", "grid_angular": "64", "bip_radial": "48"},
    "clt": {"L": "5", "trials": "600", "chunk": "130", "grid_radial": "32", "grid_angular": "64", "bip_radial": "48"},
    "deviation": {"L_list": "2,4", "trials": "400", "chunk": "90"},
    "hole": {"L_list": "1,2,3", "trials": "1000", "chunk": "300"},
    "mean-value": {"L": "5", "trials": "6", "chunk": "4"},
}


def test_criterion_9_reproducibility(tmp_path, capsys):
    mismatched = []
    for sub, cfg in sorted(SMALL.items()):
        dirs = []
        for tag, workers in (("a", 1), ("b", 8)):
            out = tmp_path / f"{sub}-{tag}"
            out.mkdir()
            assert run(sub, None, dict(cfg, workers=str(workers), out=str(out), seed="11")) == 0
            dirs.append(out)
        names = sorted(p.name for p in dirs[0].iterdir())
        if not names or names != sorted(p.name for p in dirs[1].iterdir()):
            mismatched.append(sub)
            continue
        if any((dirs[0] / f).read_bytes() != (dirs[1] / f).read_bytes() for f in names):
            mismatched.append(sub)
    ok = not mismatched
    report(capsys, 9, ok, f"{len(SMALL)} subcommands byte-identical at 1 vs 8 workers"
                          + (f"; mismatched: {', '.join(mismatched)}" if mismatched else ""))
    assert ok
