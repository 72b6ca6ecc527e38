import json
import math

import numpy as np
import pytest

from pukcommit import (
    AnalyzerConfig,
    Commitment,
    ConfigMismatchError,
    OptimizationPolicy,
    ParameterError,
    PukKey,
    RejectReason,
    SetupParams,
    commit,
    gen_puk,
    honest_accept_prob,
    majority_prob,
    p_in_max,
    p_in_opt,
    reveal_verify,
)
from pukcommit.experiments import concealing_accuracy
from pukcommit.protocol import binomial_se, config_violations, reveal_trials, true_response
from pukcommit.seeding import substream


def test_config_defaults():
    cfg = AnalyzerConfig()
    assert cfg.n == cfg.setup.N == 625
    assert cfg.M == 1000 and cfg.nu == 1


@pytest.mark.parametrize("bad", [dict(nu=2), dict(nu=0), dict(M=0), dict(n=1)])
def test_config_rejects_invalid(bad):
    with pytest.raises(ParameterError):
        AnalyzerConfig(**bad)


def test_config_violations_lists_problems():
    v = config_violations({"nu": 4, "M": 0, "bogus": 1, "setup": {"eta": 0.3}})
    assert len(v) == 4
    assert config_violations(AnalyzerConfig().to_dict()) == []
    assert config_violations({"n": "many"})


def test_config_round_trip_and_fingerprint():
    cfg = AnalyzerConfig(SetupParams(N=32), n=8, M=50, nu=3, policy=OptimizationPolicy(phase_levels=8))
    again = AnalyzerConfig.from_dict(json.loads(json.dumps(cfg.to_dict())))
    assert again == cfg and again.fingerprint == cfg.fingerprint
    assert cfg.with_setup(mu=1501.0).fingerprint != cfg.fingerprint


def test_commit_is_deterministic(small_key, small_config):
    a = commit(3, small_key, small_config, substream(1, 0))
    b = commit(3, small_key, small_config, substream(1, 0))
    assert a == b
    assert a.key_fingerprint == small_key.fingerprint
    assert a.params_fingerprint == small_config.fingerprint


def test_commit_validates_inputs(small_key, small_config, rng):
    with pytest.raises(ParameterError):
        commit(16, small_key, small_config, rng)
    with pytest.raises(ParameterError):
        commit(0, gen_puk(16, 32, 0.2, rng), small_config, rng)


def test_estimate_close_to_true_response(small_key, small_config):
    for seed in range(20):
        c = commit(5, small_key, small_config, substream(seed, 0))
        z = true_response(small_key, c.mask, 5, small_config.setup)
        sd = (1 / math.sqrt(small_config.setup.eta)) / math.sqrt(small_config.M)
        assert abs(c.estimate.center.x - z.x) < 4 * sd
        assert abs(c.estimate.center.y - z.y) < 4 * sd


def test_honest_reveal_accepts(small_key, small_config):
    accepted = [
        reveal_verify(commit(s, small_key, small_config, substream(s, 0)), s, small_key, small_config,
                      substream(s, 1)).accepted
        for s in range(small_config.n)
    ]
    assert all(accepted)


def test_reveal_draws_nu_samples(small_key):
    cfg = AnalyzerConfig(SetupParams(N=64), n=16, M=100, nu=5)
    c = commit(2, small_key, cfg, substream(0, 0))
    out = reveal_verify(c, 2, small_key, cfg, substream(0, 1))
    assert out.samples.shape == (5, 2)
    assert out.accepted == (2 * out.hits > 5)
    assert out.reason is None
    d = out.to_dict()
    assert len(d["samples"]) == 5 and d["reason"] is None


def test_false_claim_rejected_in_far_regime():
    cfg = AnalyzerConfig(SetupParams(N=64, mu=50_000.0), n=16, M=1000, nu=3)
    key = gen_puk(16, 64, 0.2, substream(2, 0))
    assert p_in_max(cfg.setup) < 1e-6
    c = commit(0, key, cfg, substream(2, 1))
    for claimed in range(1, 16):
        out = reveal_verify(c, claimed, key, cfg, substream(2, 2, claimed))
        assert not out.accepted
        assert out.reason is RejectReason.MAJORITY_FAIL


def test_substituted_key_is_rejected(small_key, small_config, rng):
    c = commit(1, small_key, small_config, rng)
    other = gen_puk(16, 64, 0.2, rng)
    out = reveal_verify(c, 1, other, small_config, rng)
    assert not out.accepted and out.reason is RejectReason.FINGERPRINT_MISMATCH and out.hits == 0
    assert not reveal_trials(c, 1, other, small_config, 10, rng).any()


def test_changed_configuration_raises(small_key, small_config, rng):
    c = commit(1, small_key, small_config, rng)
    with pytest.raises(ConfigMismatchError):
        reveal_verify(c, 1, small_key, small_config.with_setup(mu=1600.0), rng)


def test_vectorized_trials_match_sequential(small_key):
    cfg = AnalyzerConfig(SetupParams(N=64, mu=200.0), n=16, M=100, nu=3)
    c = commit(4, small_key, cfg, substream(3, 0))
    for claimed in (4, 7):
        rng_a, rng_b = substream(3, 1), substream(3, 1)
        seq = [reveal_verify(c, claimed, small_key, cfg, rng_a).accepted for _ in range(200)]
        vec = reveal_trials(c, claimed, small_key, cfg, 200, rng_b)
        assert vec.tolist() == seq


def test_commitment_json_round_trip(tmp_path, small_key, small_config, rng):
    c = commit(9, small_key, small_config, rng)
    path = tmp_path / "c.json"
    c.save(path)
    again = Commitment.load(path)
    assert again == c
    assert set(json.loads(path.read_text())) == {"format_version", "mask", "estimate", "key_fp", "params_fp"}
    bad = c.to_dict() | {"format_version": 99}
    with pytest.raises(ParameterError):
        Commitment.from_dict(bad)


def test_key_survives_serialization_for_reveal(tmp_path, small_key, small_config, rng):
    c = commit(9, small_key, small_config, rng)
    small_key.save(tmp_path / "k.json")
    loaded = PukKey.load(tmp_path / "k.json")
    assert reveal_verify(c, 9, loaded, small_config, rng).reason is not RejectReason.FINGERPRINT_MISMATCH


def test_honest_accept_prob():
    assert honest_accept_prob(AnalyzerConfig()) == pytest.approx(p_in_opt(SetupParams()))
    assert 1 - honest_accept_prob(AnalyzerConfig(nu=3)) == pytest.approx(4.814e-8, rel=1e-3)
    assert honest_accept_prob(AnalyzerConfig(nu=5)) == majority_prob(p_in_opt(SetupParams()), 5)


def test_honest_acceptance_rate(small_key):
    cfg = AnalyzerConfig(SetupParams(N=64, w=4 / math.sqrt(0.6)), n=16, M=1000, nu=1)
    c = commit(0, small_key, cfg, substream(8, 0))
    flags = reveal_trials(c, 0, small_key, cfg, 100_000, substream(8, 1))
    p = honest_accept_prob(cfg)
    # estimate error shifts the centre slightly; allow for it on top of sampling noise
    assert abs(flags.mean() - p) < 3 * binomial_se(p, len(flags)) + 2e-3


def test_binomial_se():
    assert binomial_se(0.5, 100) == 0.05
    assert binomial_se(1.0, 10) == 0.0


def test_commitment_does_not_reveal_secret():
    cfg = AnalyzerConfig(SetupParams(N=64), n=8, M=100, nu=1)
    acc = concealing_accuracy(cfg, 2000, substream(11, 0))
    n_test = 1000
    assert acc <= 1 / 8 + 3 * math.sqrt((1 / 8) * (7 / 8) / n_test)


def test_concealing_check_detects_leaky_keys():
    # rows carry a deterministic mode-dependent phase ramp, so the mask leaks s
    cfg = AnalyzerConfig(SetupParams(N=64), n=8, M=100, nu=1)
    ramp = np.exp(2j * np.pi * np.outer(np.arange(8), np.arange(64)) / 64)

    def leaky(rng):
        noise = (rng.standard_normal((8, 64)) + 1j * rng.standard_normal((8, 64))) * 0.05
        return PukKey(ramp * 0.1 + noise, 0.2)

    assert concealing_accuracy(cfg, 400, substream(11, 1), key_factory=leaky) > 0.9
