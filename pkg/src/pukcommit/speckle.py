r"""Random scattering keys and their linear input-output response.

A key is an ``n x N`` complex reflection matrix whose entries are i.i.d.
circular complex Gaussians with :math:`E|r_{s,j}|^2 = (1 - l/L)/N`. Under
uniform illumination of the SLM each input mode carries
:math:`\langle a_j \rangle = \sqrt{\mu\tau/N}`, so the mean field in output
mode ``s`` is

.. math::
    \langle b_s \rangle = \sqrt{\mu\tau/N} \sum_j r_{s,j} e^{i\phi_j}.
"""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np

from .errors import ParameterError

KEY_FORMAT = "puk-key"
KEY_FORMAT_VERSION = 1

TWO_PI = 2.0 * math.pi


def wrap_phase(phases) -> np.ndarray:
    """Reduce angles to ``[0, 2*pi)``."""
    out = np.mod(np.asarray(phases, dtype=float), TWO_PI)
    # np.mod can round tiny negative inputs up to exactly 2*pi
    out[out >= TWO_PI] = 0.0
    return out


@dataclass(frozen=True)
class QuadPoint:
    """A point in the quadrature phase plane."""

    x: float
    y: float

    def __post_init__(self):
        object.__setattr__(self, "x", float(self.x))
        object.__setattr__(self, "y", float(self.y))
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise ParameterError(f"quadrature point must be finite, got ({self.x}, {self.y})")

    @classmethod
    def from_array(cls, xy) -> QuadPoint:
        x, y = np.asarray(xy, dtype=float).reshape(2)
        return cls(x, y)

    def to_array(self) -> np.ndarray:
        return np.array([self.x, self.y])

    def __abs__(self) -> float:
        return math.hypot(self.x, self.y)


@dataclass(frozen=True, eq=False)
class PhaseMask:
    """SLM phase configuration, one phase per input mode, stored in ``[0, 2*pi)``."""

    phases: np.ndarray

    def __post_init__(self):
        phases = wrap_phase(self.phases).ravel()
        if phases.size == 0 or not np.all(np.isfinite(phases)):
            raise ParameterError("phase mask must be a non-empty sequence of finite angles")
        phases.flags.writeable = False
        object.__setattr__(self, "phases", phases)

    def __len__(self) -> int:
        return self.phases.size

    def __eq__(self, other) -> bool:
        return isinstance(other, PhaseMask) and np.array_equal(self.phases, other.phases)

    def __hash__(self) -> int:
        return hash(self.phases.tobytes())

    @cached_property
    def phasors(self) -> np.ndarray:
        return np.exp(1j * self.phases)

    @classmethod
    def random(cls, N: int, rng: np.random.Generator) -> PhaseMask:
        return cls(rng.uniform(0.0, TWO_PI, size=N))


@dataclass(frozen=True, eq=False)
class PukKey:
    """Reflection matrix of a scattering key.

    Rows are indexed by output (target) mode ``s``, columns by input mode ``j``.
    The matrix is copied and frozen on construction.
    """

    rows: np.ndarray
    ell_over_L: float
    seed: int | None = None

    def __post_init__(self):
        rows = np.array(self.rows, dtype=np.complex128, order="C")
        if rows.ndim != 2:
            raise ParameterError(f"key matrix must be 2-D, got shape {rows.shape}")
        if not np.all(np.isfinite(rows)):
            raise ParameterError("key matrix contains non-finite entries")
        if not 0.0 < self.ell_over_L < 1.0:
            raise ParameterError(f"ell_over_L must lie in (0, 1), got {self.ell_over_L}")
        rows.flags.writeable = False
        object.__setattr__(self, "rows", rows)
        object.__setattr__(self, "ell_over_L", float(self.ell_over_L))

    @property
    def n(self) -> int:
        return self.rows.shape[0]

    @property
    def N(self) -> int:
        return self.rows.shape[1]

    def check_mode(self, s: int) -> int:
        if not 0 <= s < self.n:
            raise IndexError(f"mode index {s} outside 0..{self.n - 1}")
        return int(s)

    @cached_property
    def fingerprint(self) -> str:
        """SHA-256 over the shape, ``ell_over_L`` and the little-endian matrix bytes."""
        header = json.dumps({"n": self.n, "N": self.N, "ell_over_L": self.ell_over_L}, sort_keys=True)
        h = hashlib.sha256(header.encode())
        h.update(self.rows.astype("<c16", copy=False).tobytes())
        return h.hexdigest()

    def permute_rows(self, order) -> PukKey:
        return PukKey(self.rows[np.asarray(order)], self.ell_over_L, self.seed)

    def to_dict(self) -> dict:
        flat = self.rows.ravel()
        return {
            "format": KEY_FORMAT,
            "version": KEY_FORMAT_VERSION,
            "n": self.n,
            "N": self.N,
            "ell_over_L": self.ell_over_L,
            "seed": self.seed,
            "data": [[float(z.real), float(z.imag)] for z in flat],
        }

    @classmethod
    def from_dict(cls, d: dict) -> PukKey:
        if d.get("format") != KEY_FORMAT or d.get("version") != KEY_FORMAT_VERSION:
            raise ParameterError(f"unsupported key format {d.get('format')!r} v{d.get('version')!r}")
        data = np.asarray(d["data"], dtype=float)
        n, N = int(d["n"]), int(d["N"])
        if data.shape != (n * N, 2):
            raise ParameterError(f"key data has shape {data.shape}, header says {(n * N, 2)}")
        rows = (data[:, 0] + 1j * data[:, 1]).reshape(n, N)
        return cls(rows, float(d["ell_over_L"]), d.get("seed"))

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict()))

    @classmethod
    def load(cls, path) -> PukKey:
        return cls.from_dict(json.loads(Path(path).read_text()))


def entry_variance(N: int, ell_over_L: float) -> float:
    return (1.0 - ell_over_L) / N


def gen_puk(n: int, N: int, ell_over_L: float, rng: np.random.Generator, seed: int | None = None) -> PukKey:
    """Draw a random key with i.i.d. circular complex Gaussian entries.

    Each real and imaginary part has variance ``(1 - ell_over_L) / (2 N)``.
    ``seed`` is only recorded as metadata; randomness comes from ``rng``.
    """
    if n < 2 or N < 1:
        raise ParameterError(f"need n >= 2 and N >= 1, got n={n}, N={N}")
    if not 0.0 < ell_over_L < 1.0:
        raise ParameterError(f"ell_over_L must lie in (0, 1), got {ell_over_L}")
    scale = math.sqrt(entry_variance(N, ell_over_L) / 2.0)
    re = rng.standard_normal((n, N))
    im = rng.standard_normal((n, N))
    return PukKey((re + 1j * im) * scale, ell_over_L, seed)


def _check_illumination(mu: float, tau: float) -> float:
    if not mu > 0:
        raise ParameterError(f"mean photon number must be positive, got {mu}")
    if not 0 < tau <= 1:
        raise ParameterError(f"transmittance must lie in (0, 1], got {tau}")
    return math.sqrt(mu * tau)


def _check_mask(key: PukKey, mask: PhaseMask) -> None:
    if len(mask) != key.N:
        raise ParameterError(f"mask has {len(mask)} phases but key has N={key.N} input modes")


def mean_field(key: PukKey, mask: PhaseMask, s: int, mu: float, tau: float) -> complex:
    """Mean field amplitude in output mode ``s``."""
    s = key.check_mode(s)
    _check_mask(key, mask)
    amp = _check_illumination(mu, tau) / math.sqrt(key.N)
    return complex(key.rows[s] @ mask.phasors * amp)


def mean_fields(key: PukKey, mask: PhaseMask, mu: float, tau: float) -> np.ndarray:
    """Mean field amplitudes of every output mode, shape ``(n,)``."""
    _check_mask(key, mask)
    amp = _check_illumination(mu, tau) / math.sqrt(key.N)
    return key.rows @ mask.phasors * amp


def mean_quadratures(field: complex) -> QuadPoint:
    """Map ``<b>`` to ``(<X>, <Y>) = sqrt(2) (Re<b>, Im<b>)``."""
    field = complex(field)
    return QuadPoint(math.sqrt(2.0) * field.real, math.sqrt(2.0) * field.imag)


def quadrature_array(fields) -> np.ndarray:
    """Vectorized :func:`mean_quadratures`; returns shape ``(..., 2)``."""
    fields = np.asarray(fields, dtype=complex)
    return math.sqrt(2.0) * np.stack([fields.real, fields.imag], axis=-1)
