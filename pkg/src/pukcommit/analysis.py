r"""Closed-form quantities of the scheme.

Radii of the non-optimized and optimized response clouds, their
detection-scaled separation, the photon number needed for a given
separation, acceptance-region probabilities and the binomial majority vote.

All lengths are in quadrature units; ``w_tilde = w * sqrt(eta)`` and
displacements multiplied by ``sqrt(eta)`` are in units of the detection
standard deviation.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, replace

import numpy as np

from .errors import ParameterError
from .speckle import QuadPoint
from .wavefront import expected_enhancement, response_variance

_SQRT2 = math.sqrt(2.0)
_TWO_OVER_SQRT_PI = 2.0 / math.sqrt(math.pi)

# erf uses the power series below _SERIES_CUTOFF; erfc switches to the
# continued fraction at _ERFC_CF_CUTOFF to keep relative precision in the tail
_SERIES_CUTOFF = 3.0
_ERFC_CF_CUTOFF = 1.5
_SERIES_TERMS = 110
_CF_DEPTH = 80


@dataclass(frozen=True)
class SetupParams:
    """Public physical parameters of the analyzer.

    ``enhancement`` is the declared enhancement factor used by the analytic
    formulas; when omitted it defaults to the ensemble mean reached by the
    phase-conjugate mask for ``N`` input modes.
    """

    N: int = 625
    mu: float = 1500.0
    tau: float = 0.05
    ell_over_L: float = 0.2
    eta: float = 0.6
    w: float = 8.0 / math.sqrt(0.6)
    enhancement: float | None = None

    def __post_init__(self):
        if self.enhancement is None:
            object.__setattr__(self, "enhancement", expected_enhancement(self.N))
        problems = setup_violations(asdict(self))
        if problems:
            raise ParameterError("; ".join(problems))

    @property
    def V(self) -> float:
        return response_variance(self.N, self.tau, self.ell_over_L)

    @property
    def w_tilde(self) -> float:
        return self.w * math.sqrt(self.eta)

    def replace(self, **changes) -> SetupParams:
        return replace(self, **changes)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> SetupParams:
        return cls(**d)


def setup_violations(d: dict) -> list[str]:
    """Invariant violations of a raw setup mapping (empty list if valid)."""
    out = []
    unknown = set(d) - {"N", "mu", "tau", "ell_over_L", "eta", "w", "enhancement"}
    if unknown:
        out.append(f"unknown setup fields {sorted(unknown)}")
    try:
        N, mu, tau = int(d["N"]), float(d["mu"]), float(d["tau"])
        ell, eta, w = float(d["ell_over_L"]), float(d["eta"]), float(d["w"])
    except (KeyError, TypeError, ValueError) as exc:
        return [f"malformed setup: {exc!r}"]
    if N < 1:
        out.append(f"N must be >= 1, got {N}")
    if not mu > 0:
        out.append(f"mu must be > 0, got {mu}")
    if not 0 < tau <= 1:
        out.append(f"tau must lie in (0, 1], got {tau}")
    if not 0 < ell < 1:
        out.append(f"ell_over_L must lie in (0, 1), got {ell}")
    if not 0.5 <= eta < 1:
        out.append(f"eta must lie in [0.5, 1), got {eta}")
    if not w > 0:
        out.append(f"w must be > 0, got {w}")
    E = d.get("enhancement")
    if E is not None and not float(E) >= 1:
        out.append(f"enhancement must be >= 1, got {E}")
    return out


@dataclass(frozen=True)
class AcceptRegion:
    """Axis-aligned square of full width ``width`` centred on the committed estimate."""

    center: QuadPoint
    width: float

    def __post_init__(self):
        if not self.width > 0:
            raise ParameterError(f"acceptance region width must be > 0, got {self.width}")

    def contains(self, points) -> np.ndarray:
        pts = np.asarray(points, dtype=float)
        half = self.width / 2.0
        return (np.abs(pts[..., 0] - self.center.x) <= half) & (np.abs(pts[..., 1] - self.center.y) <= half)


def rho(params: SetupParams) -> float:
    return 4.0 * math.sqrt(params.mu * params.V)


def rho_opt(params: SetupParams) -> float:
    return math.sqrt(params.enhancement * params.mu * params.V)


def delta(params: SetupParams) -> float:
    """Separation ``(rho_o - rho) sqrt(eta)``; negative when the enhancement is below 16."""
    return (rho_opt(params) - rho(params)) * math.sqrt(params.eta)


def critical_mu(omega: float, params: SetupParams) -> float:
    """Smallest mean photon number for which ``delta >= omega``."""
    if not omega > 0:
        raise ParameterError(f"omega must be > 0, got {omega}")
    gap = math.sqrt(params.enhancement) - 4.0
    if not gap > 0:
        raise ParameterError(f"enhancement {params.enhancement} <= 16: separation is unreachable")
    return omega**2 / (params.eta * params.V * gap**2)


def _erf_series(x: np.ndarray) -> np.ndarray:
    # erf(x) = 2/sqrt(pi) exp(-x^2) sum_k 2^k x^(2k+1) / (2k+1)!!, all terms positive
    term = x.copy()
    total = x.copy()
    x2 = 2.0 * x * x
    for k in range(1, _SERIES_TERMS):
        term = term * x2 / (2 * k + 1)
        total += term
    return _TWO_OVER_SQRT_PI * np.exp(-x * x) * total


def _erfc_cf(x: np.ndarray) -> np.ndarray:
    # erfc(x) = exp(-x^2)/sqrt(pi) / (x + (1/2)/(x + 1/(x + (3/2)/(x + ...)))), x > 0
    tail = x.copy()
    for k in range(_CF_DEPTH, 0, -1):
        tail = x + (k / 2.0) / tail
    return np.exp(-x * x) / math.sqrt(math.pi) / tail


def _as_float_array(x):
    arr = np.asarray(x, dtype=float)
    return arr, arr.ndim == 0


def erfc(x):
    """Complementary error function with full relative precision in the upper tail."""
    arr, scalar = _as_float_array(x)
    a = np.abs(np.atleast_1d(arr))
    out = np.empty_like(a)
    low = a < _ERFC_CF_CUTOFF
    out[low] = 1.0 - _erf_series(a[low])
    high = ~low & np.isfinite(a)
    out[high] = _erfc_cf(a[high])
    out[np.isinf(a)] = 0.0
    out[np.isnan(a)] = np.nan
    neg = np.atleast_1d(arr) < 0
    out[neg] = 2.0 - out[neg]
    return float(out[0]) if scalar else out.reshape(arr.shape)


def erf(x):
    """Error function, absolute accuracy better than 1e-15 on the real line."""
    arr, scalar = _as_float_array(x)
    flat = np.atleast_1d(arr)
    a = np.abs(flat)
    out = np.empty_like(a)
    low = a < _SERIES_CUTOFF
    out[low] = _erf_series(a[low])
    high = ~low & np.isfinite(a)
    out[high] = 1.0 - _erfc_cf(a[high])
    out[np.isinf(a)] = 1.0
    out[np.isnan(a)] = np.nan
    out = np.copysign(out, flat)
    return float(out[0]) if scalar else out.reshape(arr.shape)


def _box_factor(half_width, offset):
    """``(1/2)[erf(h + u) + erf(h - u)]`` computed as ``(1/2)[erfc(|u| - h) - erfc(|u| + h)]``."""
    u = np.abs(offset)
    return 0.5 * (erfc(u - half_width) - erfc(u + half_width))


def p_in(region: AcceptRegion, mean, params: SetupParams):
    """Probability that one detection outcome around ``mean`` lands in ``region``.

    ``mean`` may be a :class:`QuadPoint` or an array of shape ``(..., 2)``;
    the result has the matching leading shape.
    """
    pts = mean.to_array() if isinstance(mean, QuadPoint) else np.asarray(mean, dtype=float)
    root_eta = math.sqrt(params.eta)
    h = region.width * root_eta / (2.0 * _SQRT2)
    dx = (region.center.x - pts[..., 0]) * root_eta / _SQRT2
    dy = (region.center.y - pts[..., 1]) * root_eta / _SQRT2
    out = _box_factor(h, dx) * _box_factor(h, dy)
    return float(out) if np.ndim(out) == 0 else out


def p_in_opt(params: SetupParams) -> float:
    return float(erf(params.w_tilde / (2.0 * _SQRT2)) ** 2)


def p_in_max(params: SetupParams) -> float:
    """Largest single-outcome acceptance for a false response within ``rho`` of the origin."""
    h = params.w_tilde / (2.0 * _SQRT2)
    return float(_box_factor(h, delta(params) / 2.0) ** 2)


def majority_prob(p, nu: int):
    """Probability that more than half of ``nu`` independent Bernoulli(p) trials succeed."""
    nu = int(nu)
    if nu < 1 or nu % 2 == 0:
        raise ParameterError(f"nu must be a positive odd integer, got {nu}")
    arr, scalar = _as_float_array(p)
    if np.any((arr < 0) | (arr > 1)) or np.any(np.isnan(arr)):
        raise ParameterError("probability outside [0, 1]")
    q = 1.0 - arr
    total = np.zeros_like(arr)
    if nu <= 1000:
        for j in range(nu // 2 + 1):
            total = total + math.comb(nu, j) * q**j * arr ** (nu - j)
    else:
        with np.errstate(divide="ignore"):
            lp, lq = np.log(arr), np.log(q)
        logs = []
        for j in range(nu // 2 + 1):
            lc = math.lgamma(nu + 1) - math.lgamma(j + 1) - math.lgamma(nu - j + 1)
            # 0 * log(0) contributes a factor of one
            tq = j * lq if j else np.zeros_like(lq)
            tp = (nu - j) * lp
            logs.append(lc + tq + tp)
        logs = np.stack(logs)
        top = np.max(logs, axis=0)
        finite = np.isfinite(top)
        safe_top = np.where(finite, top, 0.0)
        total = np.where(finite, np.exp(safe_top) * np.sum(np.exp(logs - safe_top), axis=0), 0.0)
    total = np.clip(total, 0.0, 1.0)
    return float(total) if scalar else total
