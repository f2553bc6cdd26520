"""Smooth periodic functions on [0, L) stored as truncated Fourier series.

Every q-dependent input (curvature, interval length, offset, scale, angle)
goes through these classes so that values and derivatives can be evaluated
at arbitrary points, in particular at staggered midpoints.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, PeriodicityViolation

WRAP_TOL = 1e-8


@dataclass(frozen=True)
class PeriodicProfile:
    """f(q) = mean + sum_k cos_k cos(2 pi k q / L) + sin_k sin(2 pi k q / L)."""

    period: float
    mean: float
    cos: np.ndarray
    sin: np.ndarray

    @classmethod
    def constant(cls, value, period):
        return cls(float(period), float(value), np.zeros(0), np.zeros(0))

    @classmethod
    def fourier(cls, period, mean=0.0, cos=(), sin=()):
        cos = np.asarray(cos, dtype=float)
        sin = np.asarray(sin, dtype=float)
        n = max(cos.size, sin.size)
        c = np.zeros(n)
        s = np.zeros(n)
        c[: cos.size] = cos
        s[: sin.size] = sin
        return cls(float(period), float(mean), c, s)

    @classmethod
    def from_samples(cls, values, period):
        """Trigonometric interpolant of samples at q_j = j L / N, j < N."""
        v = np.asarray(values, dtype=float)
        n = v.size
        if n < 1:
            raise ConfigError("profile needs at least one sample")
        c = np.fft.rfft(v) / n
        kmax = c.size - 1
        cos = 2.0 * c[1:].real
        sin = -2.0 * c[1:].imag
        if n % 2 == 0 and kmax >= 1:
            cos[-1] = c[-1].real
            sin[-1] = 0.0
        return cls(float(period), float(c[0].real), cos, sin)

    @classmethod
    def from_closed_samples(cls, values, period, tol=WRAP_TOL):
        """Samples on [0, L] including the endpoint; the endpoint must repeat q = 0."""
        v = np.asarray(values, dtype=float)
        if v.size < 2:
            raise ConfigError("closed samples need at least two values")
        scale = max(1.0, float(np.max(np.abs(v))))
        if abs(v[-1] - v[0]) > tol * scale:
            raise PeriodicityViolation(
                f"profile wrap-around mismatch {abs(v[-1] - v[0]):.3e} exceeds {tol:g}")
        return cls.from_samples(v[:-1], period)

    @classmethod
    def from_callable(cls, fn, period, n=256):
        q = np.arange(n) * period / n
        return cls.from_samples(np.asarray(fn(q), dtype=float) * np.ones(n), period)

    @classmethod
    def coerce(cls, obj, period, n=256):
        if isinstance(obj, PeriodicProfile):
            if not np.isclose(obj.period, period):
                raise ConfigError("profile period does not match curve length")
            return obj
        if np.isscalar(obj):
            return cls.constant(obj, period)
        if callable(obj):
            return cls.from_callable(obj, period, n)
        return cls.from_closed_samples(obj, period)

    @property
    def nmodes(self):
        return self.cos.size

    def __call__(self, q, deriv=0):
        q = np.asarray(q, dtype=float)
        out = np.full(q.shape, self.mean if deriv == 0 else 0.0)
        if self.nmodes == 0:
            return out
        k = np.arange(1, self.nmodes + 1)
        w = 2.0 * np.pi * k / self.period
        phase = np.multiply.outer(q, w)
        # d^m/dq^m of (a cos + b sin) rotates (a, b) by m quarter turns
        a, b = self.cos * w**deriv, self.sin * w**deriv
        for _ in range(deriv % 4):
            a, b = b, -a
        return out + np.cos(phase) @ a + np.sin(phase) @ b

    def derivative(self, q, order=1):
        return self(q, deriv=order)

    def is_constant(self, tol=0.0):
        return self.nmodes == 0 or (np.all(np.abs(self.cos) <= tol) and np.all(np.abs(self.sin) <= tol))

    def scaled(self, factor):
        return PeriodicProfile(self.period, self.mean * factor, self.cos * factor, self.sin * factor)

    def to_dict(self):
        return {"fourier": {"mean": self.mean, "cos": self.cos.tolist(), "sin": self.sin.tolist()}}


@dataclass(frozen=True)
class AngleProfile:
    """theta(q) = offset + winding * q / L + periodic(q); theta(L) - theta(0) = winding."""

    period: float
    offset: float
    winding: float
    periodic: PeriodicProfile

    @classmethod
    def constant(cls, value, period):
        return cls(float(period), float(value), 0.0, PeriodicProfile.constant(0.0, period))

    @classmethod
    def uniform_twist(cls, rate, period, offset=0.0):
        return cls(float(period), float(offset), float(rate) * period, PeriodicProfile.constant(0.0, period))

    def __call__(self, q, deriv=0):
        q = np.asarray(q, dtype=float)
        if deriv == 0:
            return self.offset + self.winding * q / self.period + self.periodic(q)
        lin = self.winding / self.period if deriv == 1 else 0.0
        return lin + self.periodic(q, deriv=deriv)

    def is_constant_rate(self):
        return self.periodic.is_constant()


def profile_from_spec(spec, period, what="profile"):
    """Parse a JSON profile: number | {"constant"} | {"fourier"} | {"samples"} (closed)."""
    if isinstance(spec, (int, float)) and not isinstance(spec, bool):
        return PeriodicProfile.constant(spec, period)
    if not isinstance(spec, dict) or len(spec) != 1:
        raise ConfigError(f"{what}: expected a number or one of constant/fourier/samples")
    (kind, body), = spec.items()
    if kind == "constant":
        return PeriodicProfile.constant(float(body), period)
    if kind == "fourier":
        if not isinstance(body, dict):
            raise ConfigError(f"{what}.fourier: expected an object")
        return PeriodicProfile.fourier(period, body.get("mean", 0.0), body.get("cos", ()), body.get("sin", ()))
    if kind == "samples":
        return PeriodicProfile.from_closed_samples(body, period)
    raise ConfigError(f"{what}: unknown profile kind {kind!r}")


def angle_from_spec(spec, period, what="angle"):
    if isinstance(spec, (int, float)) and not isinstance(spec, bool):
        return AngleProfile.constant(spec, period)
    if not isinstance(spec, dict):
        raise ConfigError(f"{what}: expected a number or an object")
    periodic = spec.get("periodic", 0.0)
    return AngleProfile(float(period), float(spec.get("offset", 0.0)), float(spec.get("winding", 0.0)),
                        profile_from_spec(periodic, period, what + ".periodic"))
