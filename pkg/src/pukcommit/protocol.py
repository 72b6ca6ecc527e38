"""Commit and reveal phases run over a simulated PUK analyzer.

The simulator plays both the analyzer and nature: the reveal phase samples
detection outcomes around the mean response the key actually produces under
the committed mask.
"""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np

from .analysis import AcceptRegion, SetupParams, majority_prob, p_in_opt, setup_violations
from .detection import DhdModel, MeanEstimate, estimate_mean, sample_dhd
from .errors import ConfigMismatchError, ParameterError
from .speckle import PhaseMask, PukKey, QuadPoint, mean_field, mean_quadratures
from .wavefront import OptimizationPolicy, optimize_mask

COMMITMENT_FORMAT_VERSION = 1


class RejectReason(str, Enum):
    MAJORITY_FAIL = "majority-fail"
    FINGERPRINT_MISMATCH = "fingerprint-mismatch"
    CONFIG_MISMATCH = "config-mismatch"


def config_violations(d: dict) -> list[str]:
    """Invariant violations of a raw configuration mapping."""
    out = setup_violations({**SetupParams().to_dict(), **d.get("setup", {})})
    unknown = set(d) - {"setup", "n", "M", "nu", "policy"}
    if unknown:
        out.append(f"unknown config fields {sorted(unknown)}")
    try:
        n, M, nu = d.get("n"), int(d.get("M", 1)), int(d.get("nu", 1))
        n = None if n is None else int(n)
    except (TypeError, ValueError) as exc:
        return out + [f"malformed config: {exc!r}"]
    if n is not None and n < 2:
        out.append(f"n must be >= 2, got {n}")
    if M < 1:
        out.append(f"M must be >= 1, got {M}")
    if nu < 1 or nu % 2 == 0:
        out.append(f"nu must be a positive odd integer, got {nu}")
    try:
        OptimizationPolicy(**d.get("policy", {}))
    except (ParameterError, TypeError) as exc:
        out.append(str(exc))
    return out


@dataclass(frozen=True)
class AnalyzerConfig:
    """All public parameters of a protocol run. The bid alphabet is ``{0, ..., n-1}``."""

    setup: SetupParams = field(default_factory=SetupParams)
    n: int | None = None
    M: int = 1000
    nu: int = 1
    policy: OptimizationPolicy = field(default_factory=OptimizationPolicy)

    def __post_init__(self):
        if self.n is None:
            object.__setattr__(self, "n", self.setup.N)
        problems = config_violations(self.to_dict())
        if problems:
            raise ParameterError("; ".join(problems))

    @property
    def model(self) -> DhdModel:
        return DhdModel(self.setup.eta)

    def region(self, commitment: Commitment) -> AcceptRegion:
        return AcceptRegion(commitment.estimate.center, self.setup.w)

    def to_dict(self) -> dict:
        return {
            "setup": self.setup.to_dict(),
            "n": self.n,
            "M": self.M,
            "nu": self.nu,
            "policy": self.policy.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> AnalyzerConfig:
        return cls(
            setup=SetupParams.from_dict(d.get("setup", {})),
            n=d.get("n"),
            M=int(d.get("M", 1000)),
            nu=int(d.get("nu", 1)),
            policy=OptimizationPolicy(**d.get("policy", {})),
        )

    @property
    def fingerprint(self) -> str:
        return hashlib.sha256(json.dumps(self.to_dict(), sort_keys=True).encode()).hexdigest()

    def with_setup(self, **changes) -> AnalyzerConfig:
        return AnalyzerConfig(self.setup.replace(**changes), self.n, self.M, self.nu, self.policy)


@dataclass(frozen=True)
class Commitment:
    """What Bob hands to Alice: the optimized mask and the estimated optimized response.

    The key and configuration fingerprints let the reveal phase detect a
    substituted key or a changed public setup.
    """

    mask: PhaseMask
    estimate: MeanEstimate
    key_fingerprint: str
    params_fingerprint: str

    def to_dict(self) -> dict:
        return {
            "format_version": COMMITMENT_FORMAT_VERSION,
            "mask": [float(p) for p in self.mask.phases],
            "estimate": self.estimate.to_dict(),
            "key_fp": self.key_fingerprint,
            "params_fp": self.params_fingerprint,
        }

    @classmethod
    def from_dict(cls, d: dict) -> Commitment:
        if d.get("format_version") != COMMITMENT_FORMAT_VERSION:
            raise ParameterError(f"unsupported commitment format version {d.get('format_version')!r}")
        return cls(
            PhaseMask(np.asarray(d["mask"], dtype=float)),
            MeanEstimate.from_dict(d["estimate"]),
            d["key_fp"],
            d["params_fp"],
        )

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=1))

    @classmethod
    def load(cls, path) -> Commitment:
        return cls.from_dict(json.loads(Path(path).read_text()))


@dataclass(frozen=True, eq=False)
class VerifyOutcome:
    accepted: bool
    hits: int
    samples: np.ndarray
    reason: RejectReason | None = None

    def to_dict(self) -> dict:
        return {
            "accepted": self.accepted,
            "hits": self.hits,
            "reason": None if self.reason is None else self.reason.value,
            "samples": [[float(x), float(y)] for x, y in self.samples],
        }


def _check_key(key: PukKey, config: AnalyzerConfig) -> None:
    if key.n != config.n or key.N != config.setup.N:
        raise ParameterError(f"key shape {(key.n, key.N)} does not match config {(config.n, config.setup.N)}")
    if key.ell_over_L != config.setup.ell_over_L:
        raise ParameterError(f"key ell_over_L={key.ell_over_L} differs from config {config.setup.ell_over_L}")


def _check_secret(s: int, config: AnalyzerConfig) -> int:
    if not 0 <= s < config.n:
        raise ParameterError(f"secret {s} outside the bid alphabet 0..{config.n - 1}")
    return int(s)


def true_response(key: PukKey, mask: PhaseMask, s: int, setup: SetupParams) -> QuadPoint:
    """Mean quadratures of output mode ``s`` under ``mask``."""
    return mean_quadratures(mean_field(key, mask, s, setup.mu, setup.tau))


def commit(secret: int, key: PukKey, config: AnalyzerConfig, rng: np.random.Generator) -> Commitment:
    """Optimize the mask for ``secret`` and estimate the focused response from ``M`` probes."""
    s = _check_secret(secret, config)
    _check_key(key, config)
    mask = optimize_mask(key, s, config.policy)
    mean = true_response(key, mask, s, config.setup)
    samples = sample_dhd(mean, config.model, config.M, rng)
    return Commitment(mask, estimate_mean(samples, config.model), key.fingerprint, config.fingerprint)


def majority_trials(mean, region: AcceptRegion, config: AnalyzerConfig, trials: int, rng) -> np.ndarray:
    """Hit counts of ``trials`` independent verifications of ``nu`` outcomes each around ``mean``."""
    samples = sample_dhd(mean, config.model, trials * config.nu, rng).reshape(trials, config.nu, 2)
    return region.contains(samples).sum(axis=1)


def _prepare_reveal(commitment: Commitment, claimed: int, key: PukKey, config: AnalyzerConfig):
    if commitment.params_fingerprint != config.fingerprint:
        raise ConfigMismatchError(
            f"{RejectReason.CONFIG_MISMATCH.value}: commitment was made under a different public configuration"
        )
    s = _check_secret(claimed, config)
    if len(commitment.mask) != config.setup.N:
        raise ParameterError(f"commitment mask has {len(commitment.mask)} phases, config has N={config.setup.N}")
    if commitment.key_fingerprint != key.fingerprint:
        return None
    _check_key(key, config)
    return true_response(key, commitment.mask, s, config.setup)


def reveal_verify(
    commitment: Commitment, claimed: int, key: PukKey, config: AnalyzerConfig, rng: np.random.Generator
) -> VerifyOutcome:
    """Alice's check: ``nu`` detections under the committed mask at the claimed mode.

    A key whose fingerprint differs from the committed one is rejected
    without probing; a configuration mismatch raises
    :class:`~pukcommit.errors.ConfigMismatchError`.
    """
    mean = _prepare_reveal(commitment, claimed, key, config)
    if mean is None:
        return VerifyOutcome(False, 0, np.empty((0, 2)), RejectReason.FINGERPRINT_MISMATCH)
    samples = sample_dhd(mean, config.model, config.nu, rng)
    hits = int(config.region(commitment).contains(samples).sum())
    accepted = 2 * hits > config.nu
    return VerifyOutcome(accepted, hits, samples, None if accepted else RejectReason.MAJORITY_FAIL)


def reveal_trials(
    commitment: Commitment, claimed: int, key: PukKey, config: AnalyzerConfig, trials: int, rng: np.random.Generator
) -> np.ndarray:
    """Acceptance flags of ``trials`` independent reveals, vectorized.

    Draws exactly the outcomes that ``trials`` successive calls of
    :func:`reveal_verify` with the same generator would draw.
    """
    mean = _prepare_reveal(commitment, claimed, key, config)
    if mean is None:
        return np.zeros(trials, dtype=bool)
    hits = majority_trials(mean, config.region(commitment), config, trials, rng)
    return 2 * hits > config.nu


def honest_accept_prob(config: AnalyzerConfig) -> float:
    return majority_prob(p_in_opt(config.setup), config.nu)


def binomial_se(p: float, trials: int) -> float:
    return math.sqrt(max(p * (1.0 - p), 0.0) / trials)
