"""The ten acceptance criteria at their stated tolerances.

Each test records a PASS/FAIL line that is printed in the terminal summary.
"""
import hashlib
import math

import mpmath
import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES
from pukcommit import (
    AcceptRegion,
    AnalyzerConfig,
    DhdModel,
    OptimizationPolicy,
    QuadPoint,
    SetupParams,
    commit,
    critical_mu,
    delta,
    enhancement,
    erf,
    expected_enhancement,
    gen_puk,
    majority_prob,
    optimize_mask,
    p_in,
    p_in_max,
    p_in_opt,
    rho,
    rho_opt,
    sample_dhd,
)
from pukcommit.experiments import (
    ExperimentSpec,
    concealing_accuracy,
    empirical_cheat_maxima,
    run,
    speckle_statistics,
)
from pukcommit.protocol import binomial_se, reveal_trials
from pukcommit.seeding import substream

SEED = 7

std_erf = np.vectorize(math.erf, otypes=[float])


def record(number, title, ok, detail):
    ACCEPTANCE_LINES[number] = f"[{'PASS' if ok else 'FAIL'}] criterion {number:2d}: {title} ({detail})"
    print(ACCEPTANCE_LINES[number])
    assert ok, detail


def test_criterion_01_speckle_statistics():
    cfg = AnalyzerConfig()
    stats = speckle_statistics(cfg, 10_000, substream(SEED, 1))
    mean_ok = all(abs(m) <= 3 * se for m, se in zip(stats["mean"], stats["mean_se"]))
    assert stats["expected_var"] == pytest.approx(0.192, rel=1e-12)
    var_ok = abs(stats["var"] / 0.192 - 1) <= 0.05
    record(1, "speckle statistics", mean_ok and var_ok,
           f"mean={np.round(stats['mean'], 5).tolist()} se={np.round(stats['mean_se'], 5).tolist()}, "
           f"var={stats['var']:.5f} vs 0.192")


def test_criterion_02_enhancement_law():
    details, ok = [], True
    for N in (256, 625):
        gains = []
        for k in range(100):
            key = gen_puk(2, N, 0.2, substream(SEED, 2, N, k))
            gains.append(enhancement(key, optimize_mask(key, 0), 0, 1500.0, 0.05))
        law = expected_enhancement(N)
        rel = np.mean(gains) / law - 1
        ok &= abs(rel) <= 0.03
        worst = 0.0
        seq = OptimizationPolicy("sequential-coordinate")
        for k in range(5):
            key = gen_puk(2, N, 0.2, substream(SEED, 3, N, k))
            a, b = optimize_mask(key, 0).phases, optimize_mask(key, 0, seq).phases
            worst = max(worst, float(np.max(np.abs(np.angle(np.exp(1j * (a - b)))))))
        ok &= worst <= 1e-9
        details.append(f"N={N}: mean {np.mean(gains):.2f} vs {law:.2f} ({rel:+.2%}), phase gap {worst:.1e}")
    record(2, "enhancement law", ok, "; ".join(details))


def test_criterion_03_honest_acceptance():
    setup = SetupParams()
    assert setup.w_tilde == pytest.approx(8.0)
    analytic = 1 - p_in_opt(setup)
    analytic_ok = analytic == pytest.approx(1.27e-4, rel=0.01)
    cfg = AnalyzerConfig(setup, nu=1)
    accepted = total = 0
    for k in range(100):
        key = gen_puk(cfg.n, cfg.setup.N, 0.2, substream(SEED, 4, k, 0))
        s = int(substream(SEED, 4, k, 1).integers(cfg.n))
        c = commit(s, key, cfg, substream(SEED, 4, k, 2))
        flags = reveal_trials(c, s, key, cfg, 10_000, substream(SEED, 4, k, 3))
        accepted += int(flags.sum())
        total += len(flags)
    rate, p = accepted / total, p_in_opt(setup)
    se = binomial_se(p, total)
    record(3, "honest acceptance", analytic_ok and abs(rate - p) <= 3 * se,
           f"1-p_in_opt={analytic:.4e}, empirical 1-rate={1 - rate:.4e} over {total} reveals, "
           f"|diff|={abs(rate - p) / se:.2f} SE")


def test_criterion_04_p_in_vs_monte_carlo():
    setup = SetupParams()
    rng = substream(SEED, 5)
    region = AcceptRegion(QuadPoint(3.0, -1.0), setup.w)
    worst = 0.0
    for _ in range(10):
        mean = QuadPoint(*(np.array([3.0, -1.0]) + rng.uniform(-setup.w, setup.w, 2)))
        z = sample_dhd(mean, DhdModel(setup.eta), 1_000_000, rng)
        freq = region.contains(z).mean()
        p = p_in(region, mean, setup)
        se = math.sqrt(max(p * (1 - p), 1e-300) / len(z))
        worst = max(worst, abs(freq - p) / se)
    record(4, "acceptance integral vs Monte Carlo", worst <= 3, f"worst deviation {worst:.2f} SE over 10 means")


def test_criterion_05_bound_maximality():
    angles = np.linspace(0, 2 * np.pi, 720, endpoint=False)
    PHI, PSI = np.meshgrid(angles, angles, indexing="ij")
    worst, diagonal = 0.0, True
    for mu in (1000.0, 1500.0, 2000.0, 2650.0):
        params = SetupParams(mu=mu)
        est = np.stack([rho_opt(params) * np.cos(PHI), rho_opt(params) * np.sin(PHI)], -1)
        resp = np.stack([rho(params) * np.cos(PSI), rho(params) * np.sin(PSI)], -1)
        s = 1 / math.sqrt(params.eta)
        box = np.ones(PHI.shape)
        for axis in range(2):
            d = (est[..., axis] - resp[..., axis]) / s
            half = params.w / (2 * s)
            # stdlib erf keeps this oracle independent of the package's own
            box *= 0.5 * (std_erf((d + half) / math.sqrt(2)) - std_erf((d - half) / math.sqrt(2)))
        worst = max(worst, abs(box.max() - p_in_max(params)))
        i, j = np.unravel_index(np.argmax(box), box.shape)
        diagonal &= angles[i] == angles[j] and math.isclose(angles[i] % (math.pi / 2), math.pi / 4)
    record(5, "bound maximality", worst <= 1e-6 and diagonal,
           f"max |grid max - p_in_max| = {worst:.1e}, maximizer on phi=psi=l*pi/4: {diagonal}")


MUS = [1000.0, 1500.0, 2000.0, 2650.0]
NUS = [1, 3, 5]


@pytest.fixture(scope="module")
def binding_runs():
    runs = {}
    for N in (256, 625):
        cfg = AnalyzerConfig(SetupParams(N=N))
        table, gains = empirical_cheat_maxima(cfg, SEED, 1, MUS, NUS, n_keys=500, trials=100_000)
        runs[N] = (cfg, table, gains[0])
    return runs


@pytest.mark.slow
def test_criterion_06_binding(binding_runs):
    ok, notes = True, []
    for N, (cfg, table, E) in binding_runs.items():
        params = cfg.setup.replace(enhancement=E)
        for nu in NUS:
            emp = [table[(mu, nu)]["empirical_max"] for mu in MUS]
            bounds = [majority_prob(p_in_max(params.replace(mu=mu)), nu) for mu in MUS]
            ok &= all(e <= b for e, b in zip(emp, bounds))
            ok &= all(a >= b for a, b in zip(emp, emp[1:]))
        claim = table[(2650.0, 1)]["empirical_max"]
        notes.append(f"N={N} E={E:.1f}: mu=2650,nu=1 empirical {claim:.1e} "
                     f"({'meets' if claim < 1e-3 else 'FLAG: does not meet'} <1e-3)")
    record(6, "binding bound and monotonicity", ok, "; ".join(notes))


@pytest.mark.slow
def test_criterion_07_multi_key_improvement_small(binding_runs):
    ok, notes = True, []
    alpha = 1e-3
    for N, (cfg, table, E) in binding_runs.items():
        params = cfg.setup.replace(enhancement=E)
        ratios = []
        for mu in MUS:
            at_mu = params.replace(mu=mu)
            # largest of 500*(n-1) Rayleigh radii with scale rho/4 exceeds this with probability alpha
            r_K = rho(at_mu) / 4 * math.sqrt(2 * math.log(500 * (cfg.n - 1) / alpha))
            for nu in NUS:
                cell = table[(mu, nu)]
                bound = majority_prob(p_in_max(at_mu), nu)
                ok &= cell["single_p_cheat"] <= cell["multi_p_cheat"] <= bound
                ok &= cell["multi_max_radius"] <= r_K
                if nu == 1 and cell["single_p_cheat"] > 0:
                    ratios.append(cell["multi_p_cheat"] / cell["single_p_cheat"])
        notes.append(f"N={N}: multi/single at nu=1 in [{min(ratios):.1f}, {max(ratios):.1f}]")
    record(7, "multi-key improvement bounded", ok, "; ".join(notes))


def test_criterion_08_concealing():
    n, count = 8, 2000
    cfg = AnalyzerConfig(SetupParams(N=64), n=n, M=1000)
    acc = concealing_accuracy(cfg, count, substream(SEED, 8))
    tested = count - count // 2
    se = binomial_se(1 / n, tested)
    record(8, "concealing", abs(acc - 1 / n) <= 3 * se,
           f"accuracy {acc:.3f} vs chance {1 / n:.3f} (3 SE = {3 * se:.3f}, {tested} held out)")


def test_criterion_09_exact_math():
    mpmath.mp.dps = 40
    xs = np.linspace(-8, 8, 3201)
    erf_err = float(np.max(np.abs(erf(xs) - np.array([float(mpmath.erf(x)) for x in xs]))))
    maj_ok = True
    for nu in (1, 3, 5, 7):
        for p in np.linspace(0, 1, 41):
            exact = mpmath.fsum(
                mpmath.binomial(nu, k) * mpmath.mpf(p) ** k * (1 - mpmath.mpf(p)) ** (nu - k)
                for k in range(nu // 2 + 1, nu + 1)
            )
            maj_ok &= math.isclose(majority_prob(p, nu), float(exact), rel_tol=1e-14, abs_tol=1e-300)
    rt = 0.0
    rng = substream(SEED, 9)
    for _ in range(200):
        params = SetupParams(enhancement=rng.uniform(17, 1000), eta=rng.uniform(0.5, 0.99))
        omega = rng.uniform(0.1, 20)
        rt = max(rt, abs(delta(params.replace(mu=critical_mu(omega, params))) / omega - 1))
    record(9, "exact-math oracles", erf_err <= 1e-12 and maj_ok and rt <= 1e-12,
           f"erf max err {erf_err:.1e}, majority exact: {maj_ok}, critical_mu round trip {rt:.1e}")


def test_criterion_10_determinism(tmp_path):
    small = AnalyzerConfig(SetupParams(N=64), n=16, M=200, nu=3)
    options = {
        "response-map": {"samples": 5},
        "honest-run": {},
        "cheat-single": {},
        "cheat-multi": {"n_keys": 5, "trials": 1000},
        "bound-sweep": {"mu_grid": [1000.0, 3000.0], "nu_list": [1, 3], "empirical_mu": [3000.0], "n_keys": 3,
                        "trials": 500},
        "stats-check": {"keys": 2000, "opt_keys": 100, "conceal_count": 400},
    }
    same = True
    for kind, opts in options.items():
        digests = []
        for rerun in ("a", "b"):
            out = tmp_path / kind / rerun
            run(ExperimentSpec(kind, small, seed=SEED, replicates=2, output_path=out, options=opts))
            digests.append({p.name: hashlib.sha256(p.read_bytes()).hexdigest() for p in sorted(out.iterdir())})
        same &= digests[0] == digests[1]
    record(10, "determinism", same, f"{len(options)} experiment kinds re-run with seed {SEED}")
