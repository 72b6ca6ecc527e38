"""Phase-mask optimization for a key/target pair and the resulting enhancement."""
from __future__ import annotations

import cmath
import math
from dataclasses import asdict, dataclass

import numpy as np

from .errors import ParameterError
from .speckle import TWO_PI, PhaseMask, PukKey, mean_field, wrap_phase

CONJUGATE_EXACT = "conjugate-exact"
SEQUENTIAL_COORDINATE = "sequential-coordinate"
METHODS = (CONJUGATE_EXACT, SEQUENTIAL_COORDINATE)

# early stop for the coordinate sweeps (radians)
_SWEEP_TOL = 1e-14


@dataclass(frozen=True)
class OptimizationPolicy:
    """How the analyzer shapes the wavefront.

    ``phase_levels`` of 0 means continuous phases, otherwise the SLM offers
    that many uniformly spaced levels. ``iterations`` caps the number of
    sweeps of the sequential optimizer.
    """

    method: str = CONJUGATE_EXACT
    phase_levels: int = 0
    iterations: int = 50

    def __post_init__(self):
        if self.method not in METHODS:
            raise ParameterError(f"unknown optimization method {self.method!r}; expected one of {METHODS}")
        if self.phase_levels == 1 or self.phase_levels < 0:
            raise ParameterError(f"phase_levels must be 0 or >= 2, got {self.phase_levels}")
        if self.method == SEQUENTIAL_COORDINATE and self.iterations < 1:
            raise ParameterError(f"iterations must be >= 1, got {self.iterations}")

    def to_dict(self) -> dict:
        return asdict(self)


def _levels(q: int) -> np.ndarray:
    return TWO_PI * np.arange(q) / q


def _quantize(phases: np.ndarray, q: int) -> np.ndarray:
    step = TWO_PI / q
    return wrap_phase(np.round(np.asarray(phases) / step) % q * step)


def _conjugate(row: np.ndarray, q: int) -> np.ndarray:
    phases = wrap_phase(-np.angle(row))
    return _quantize(phases, q) if q else phases


def _sequential(row: np.ndarray, policy: OptimizationPolicy) -> np.ndarray:
    """Coordinate ascent on |sum_j r_j exp(i phi_j)|, starting from a flat mask.

    Each update sets one phase to the value maximizing the total amplitude
    with every other phase held fixed, so the amplitude never decreases.
    """
    q = policy.phase_levels
    r = [complex(z) for z in row]
    arg_r = [cmath.phase(z) for z in r]
    phi = [0.0] * len(r)
    if q:
        level_phasors = [cmath.exp(1j * a) for a in _levels(q)]
        level_values = list(_levels(q))
    total = sum(r)
    for _ in range(policy.iterations):
        biggest_step = 0.0
        for j, rj in enumerate(r):
            rest = total - rj * cmath.exp(1j * phi[j])
            if q:
                best = max(range(q), key=lambda l: abs(rest + rj * level_phasors[l]))
                new = level_values[best]
            else:
                new = (cmath.phase(rest) - arg_r[j]) % TWO_PI if rest != 0 else -arg_r[j] % TWO_PI
            step = abs(cmath.phase(cmath.exp(1j * (new - phi[j]))))
            biggest_step = max(biggest_step, step)
            phi[j] = new
            total = rest + rj * cmath.exp(1j * new)
        # re-sum to keep the running total from drifting
        total = sum(rj * cmath.exp(1j * p) for rj, p in zip(r, phi))
        if biggest_step < _SWEEP_TOL:
            break
    phases = np.asarray(phi)
    if not q:
        # fix the free global phase so the focused field is real and positive
        phases = phases - cmath.phase(total)
    return wrap_phase(phases)


def optimize_mask(key: PukKey, s: int, policy: OptimizationPolicy | None = None) -> PhaseMask:
    """Phase mask maximizing the intensity of output mode ``s``."""
    policy = policy or OptimizationPolicy()
    s = key.check_mode(s)
    row = key.rows[s]
    if policy.method == CONJUGATE_EXACT:
        return PhaseMask(_conjugate(row, policy.phase_levels))
    return PhaseMask(_sequential(row, policy))


def response_variance(N: int, tau: float, ell_over_L: float) -> float:
    """Per-quadrature disorder variance per photon, ``(tau/N)(1 - l/L)``."""
    return tau / N * (1.0 - ell_over_L)


def enhancement(key: PukKey, mask: PhaseMask, s: int, mu: float, tau: float) -> float:
    """Ratio of the response intensity to its random-mask ensemble average, ``|<Z_s>|^2 / (2 mu V)``."""
    V = response_variance(key.N, tau, key.ell_over_L)
    if not mu * V > 0:
        raise ParameterError(f"degenerate setup: mu*V = {mu * V}")
    b = mean_field(key, mask, s, mu, tau)
    return 2.0 * abs(b) ** 2 / (2.0 * mu * V)


def expected_enhancement(N: int, phase_levels: int = 0) -> float:
    """Ensemble mean enhancement of the phase-conjugate mask.

    For i.i.d. circular Gaussian entries ``E[(sum|r_j|)^2] / E|sum r_j|^2 =
    1 + (pi/4)(N - 1)``; rounding to ``q`` levels multiplies the coherent
    part by ``(q sin(pi/q) / pi)^2``.
    """
    factor = 1.0 if not phase_levels else (phase_levels * math.sin(math.pi / phase_levels) / math.pi) ** 2
    return 1.0 + math.pi / 4.0 * (N - 1) * factor


def mask_to_dict(mask: PhaseMask, policy: OptimizationPolicy, s: int, key_fingerprint: str) -> dict:
    return {
        "phases": [float(p) for p in mask.phases],
        "method": policy.method,
        "phase_levels": policy.phase_levels,
        "s": int(s),
        "key_fingerprint": key_fingerprint,
    }


def mask_from_dict(d: dict) -> PhaseMask:
    return PhaseMask(np.asarray(d["phases"], dtype=float))

