"""Binding attacks: a dishonest committer looks for a false target mode whose
response under the committed mask lands as close as possible to the
acceptance region.

The adversary is given the analyzer's exact physical model, and the
single-outcome acceptance of each candidate is evaluated analytically from
its known mean response.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .analysis import AcceptRegion, SetupParams, delta, majority_prob, p_in, p_in_max
from .errors import ParameterError
from .protocol import AnalyzerConfig, Commitment, majority_trials
from .speckle import PukKey, QuadPoint, gen_puk, mean_fields, quadrature_array


@dataclass(frozen=True)
class CheatRecord:
    false_target: int
    key_id: int
    response: QuadPoint
    p_single: float
    p_cheat: float

    def row(self) -> list:
        return [
            self.key_id,
            self.false_target,
            repr(self.response.x),
            repr(self.response.y),
            repr(self.p_single),
            repr(self.p_cheat),
        ]


RECORD_COLUMNS = ["key_id", "s_prime", "x", "y", "p_single", "p_cheat"]


def candidate_responses(key: PukKey, s: int, commitment: Commitment, setup: SetupParams):
    """Mean responses of every mode except ``s`` under the committed mask.

    Returns ``(modes, responses, p_single)`` with ``responses`` of shape ``(n-1, 2)``.
    """
    if key.n < 2:
        raise ParameterError("need at least two output modes to pick a false target")
    s = key.check_mode(s)
    responses = quadrature_array(mean_fields(key, commitment.mask, setup.mu, setup.tau))
    modes = np.delete(np.arange(key.n), s)
    responses = responses[modes]
    p = np.atleast_1d(p_in(AcceptRegion(commitment.estimate.center, setup.w), responses, setup))
    return modes, responses, p


def _best(key: PukKey, s: int, commitment: Commitment, config: AnalyzerConfig, key_id: int) -> CheatRecord:
    modes, responses, p = candidate_responses(key, s, commitment, config.setup)
    # argmax keeps the first maximizer, i.e. ties go to the lowest mode index
    i = int(np.argmax(p))
    p_single = float(p[i])
    return CheatRecord(int(modes[i]), key_id, QuadPoint.from_array(responses[i]), p_single, majority_prob(p_single, config.nu))


def best_false_target(key: PukKey, s: int, commitment: Commitment, config: AnalyzerConfig) -> CheatRecord:
    """Exhaustive search over ``S \\ {s}`` on the committed key itself."""
    if commitment.key_fingerprint != key.fingerprint:
        raise ParameterError("commitment was not produced from this key")
    return _best(key, s, commitment, config, key_id=0)


def multi_puk_search(
    reference_key: PukKey,
    s: int,
    commitment: Commitment,
    n_keys: int,
    config: AnalyzerConfig,
    rng: np.random.Generator,
) -> list[CheatRecord]:
    """Best false target on each of ``n_keys`` fresh keys, with the mask fixed to the committed one.

    Key ``k`` is drawn from the ``k``-th child stream of ``rng``; records are
    returned in key order with ``key_id = k + 1`` (0 denotes the reference key).
    """
    if n_keys < 1:
        raise ParameterError(f"n_keys must be >= 1, got {n_keys}")
    reference_key.check_mode(s)
    records = []
    for k, child in enumerate(rng.spawn(n_keys)):
        key = gen_puk(reference_key.n, reference_key.N, reference_key.ell_over_L, child)
        records.append(_best(key, s, commitment, config, key_id=k + 1))
    return records


def empirical_cheat_frequency(
    response: QuadPoint, commitment: Commitment, config: AnalyzerConfig, trials: int, rng: np.random.Generator
) -> float:
    """Monte Carlo frequency with which Alice accepts a reveal whose true mean is ``response``."""
    hits = majority_trials(response, config.region(commitment), config, trials, rng)
    return float(np.mean(2 * hits > config.nu))


class BoundRow(NamedTuple):
    mu: float
    nu: int
    delta: float
    p_in_max: float
    bound: float


def cheat_bound_sweep(mu_grid, nu_list, params: SetupParams) -> list[BoundRow]:
    """Upper bound ``majority_prob(p_in_max, nu)`` on the cheating probability over a grid."""
    rows = []
    for mu in mu_grid:
        at_mu = params.replace(mu=float(mu))
        pmax = p_in_max(at_mu)
        for nu in nu_list:
            rows.append(BoundRow(float(mu), int(nu), delta(at_mu), pmax, majority_prob(pmax, nu)))
    return rows


def write_records_csv(path, records) -> None:
    with open(path, "w", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(RECORD_COLUMNS)
        for rec in records:
            writer.writerow(rec.row())
