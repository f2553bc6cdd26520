"""Closed base curves: arclength parametrization, parallel normal frame, curvature.

Curvature components are expressed in a parallel (Bishop) normal frame
e_alpha(q), so that the tube metric in Fermi coordinates is
``(1 - nu . kappa)^2 dq^2 + |d nu|^2`` without a torsion term. For k = 2 the
frame generally fails to close after one loop; the mismatch is the holonomy
angle, with the convention ``e_1(L) = cos(a) e_1(0) + sin(a) e_2(0)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from functools import cached_property

import numpy as np
from scipy.interpolate import make_interp_spline

from .errors import ConfigError, DegenerateCurve, OpenCurve, PeriodicityViolation
from .profiles import WRAP_TOL, PeriodicProfile, profile_from_spec

_GL_X, _GL_W = np.polynomial.legendre.leggauss(10)


def rotation(angle):
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, -s], [s, c]])


def _rotate_rows(vecs, angles):
    """Rotate each 2-vector vecs[j] by angles[j]."""
    c, s = np.cos(angles), np.sin(angles)
    return np.stack([c * vecs[:, 0] - s * vecs[:, 1], s * vecs[:, 0] + c * vecs[:, 1]], axis=1)


@dataclass(frozen=True)
class CurveGeometry:
    """Arclength-sampled closed curve of length L with normal-frame curvature.

    ``kappa`` has shape (N, k) and lives on the grid q_j = j L / N. In
    synthetic mode ``positions``/``tangents``/``frames`` are None.
    ``profiles`` optionally carries exact Fourier data for the unwound
    curvature ``R(holonomy * q / L) kappa(q)``, which is periodic.
    """

    length: float
    kappa: np.ndarray | None
    holonomy: float = 0.0
    positions: np.ndarray | None = None
    tangents: np.ndarray | None = None
    frames: np.ndarray | None = None
    profiles: tuple | None = field(default=None, repr=False)

    def __post_init__(self):
        if not self.length > 0:
            raise ConfigError("curve length must be positive")

    @property
    def n(self):
        if self.kappa is not None:
            return self.kappa.shape[0]
        return self.positions.shape[0]

    @property
    def k(self):
        if self.kappa is not None:
            return self.kappa.shape[1]
        return self.positions.shape[1] - 1

    @property
    def grid(self):
        return np.arange(self.n) * self.length / self.n

    @property
    def spacing(self):
        return self.length / self.n

    @property
    def embedded(self):
        return self.positions is not None

    @cached_property
    def _unwound(self):
        if self.profiles is not None:
            return self.profiles
        if self.kappa is None:
            raise ConfigError("curvature not available; run bishop_frame first")
        q = self.grid
        vals = self.kappa if self.k == 1 else _rotate_rows(self.kappa, self.holonomy * q / self.length)
        return tuple(PeriodicProfile.from_samples(vals[:, a], self.length) for a in range(self.k))

    def kappa_at(self, q, deriv=0):
        """Curvature components (len(q), k) at arbitrary arclength positions."""
        q = np.atleast_1d(np.asarray(q, dtype=float))
        p = np.stack([prof(q) for prof in self._unwound], axis=1)
        if self.k == 1 or self.holonomy == 0.0:
            if deriv:
                return np.stack([prof(q, deriv) for prof in self._unwound], axis=1)
            return p
        if deriv:
            raise NotImplementedError("curvature derivatives with holonomy")
        return _rotate_rows(p, -self.holonomy * q / self.length)

    def kappa_squared(self, q):
        return np.sum(self.kappa_at(q) ** 2, axis=1)

    def closed_points(self):
        if self.positions is None:
            raise ConfigError("synthetic geometry has no embedding")
        return np.vstack([self.positions, self.positions[:1]])

    def max_curvature(self, n=1024):
        q = np.arange(n) * self.length / n
        return float(np.sqrt(self.kappa_squared(q).max()))


def arclength_reparametrize(samples, n_out, close_tol=1e-9):
    """Resample a closed polyline uniformly in arclength.

    ``samples`` must repeat its first point at the end. A periodic quintic
    spline in chord-length parameter refines the polyline; arclength is
    integrated with Gauss-Legendre quadrature per knot interval and inverted
    by Newton iteration.
    """
    pts = np.asarray(samples, dtype=float)
    if pts.ndim != 2 or pts.shape[1] not in (2, 3):
        raise ConfigError("samples must have shape (M, 2) or (M, 3)")
    if pts.shape[0] < 8:
        raise ConfigError("need at least 8 samples to describe a closed curve")
    scale = np.ptp(pts, axis=0).max()
    if np.linalg.norm(pts[-1] - pts[0]) > close_tol * max(scale, 1.0):
        raise OpenCurve(f"endpoints differ by {np.linalg.norm(pts[-1] - pts[0]):.3e}")
    pts = pts.copy()
    pts[-1] = pts[0]
    chords = np.linalg.norm(np.diff(pts, axis=0), axis=1)
    if np.any(chords < 1e-12 * max(scale, 1.0)):
        raise DegenerateCurve("repeated consecutive samples")
    t = np.concatenate([[0.0], np.cumsum(chords)])
    spl = make_interp_spline(t, pts, k=5, bc_type="periodic")
    dspl = spl.derivative()

    speed_knots = np.linalg.norm(dspl(t), axis=1)
    if np.any(speed_knots < 1e-12):
        raise DegenerateCurve("vanishing tangent")

    def arc(a, b):
        mid, half = 0.5 * (a + b), 0.5 * (b - a)
        x = mid[:, None] + half[:, None] * _GL_X[None, :]
        sp = np.linalg.norm(dspl(x.ravel()), axis=1).reshape(x.shape)
        return half * (sp @ _GL_W)

    seg = arc(t[:-1], t[1:])
    cum = np.concatenate([[0.0], np.cumsum(seg)])
    length = cum[-1]

    s_target = np.arange(n_out) * length / n_out
    tt = np.interp(s_target, cum, t)
    for _ in range(20):
        idx = np.clip(np.searchsorted(t, tt, side="right") - 1, 0, t.size - 2)
        resid = cum[idx] + arc(t[idx], tt) - s_target
        sp = np.linalg.norm(dspl(tt), axis=1)
        if np.any(sp < 1e-12):
            raise DegenerateCurve("vanishing tangent")
        step = resid / sp
        tt = tt - step
        if np.max(np.abs(step)) < 1e-15 * length:
            break
    d = dspl(tt)
    tangents = d / np.linalg.norm(d, axis=1)[:, None]
    return CurveGeometry(length=float(length), kappa=None, positions=spl(tt), tangents=tangents)


def _double_reflection(x, t, r0, x_next, t_next):
    v1 = x_next - x
    c1 = v1 @ v1
    r_l = r0 - (2.0 / c1) * (v1 @ r0) * v1
    t_l = t - (2.0 / c1) * (v1 @ t) * v1
    v2 = t_next - t_l
    c2 = v2 @ v2
    if c2 < 1e-300:
        return r_l
    return r_l - (2.0 / c2) * (v2 @ r_l) * v2


def bishop_frame(curve):
    """Fill in the parallel normal frame, curvature components and holonomy."""
    if curve.positions is None:
        raise ConfigError("bishop_frame needs an embedded curve")
    n = curve.positions.shape[0]
    dim = curve.positions.shape[1]
    h = curve.length / n
    s = np.arange(n + 1) * h
    spl = make_interp_spline(s, curve.closed_points(), k=5, bc_type="periodic")
    d1 = spl(s[:-1], 1)
    d2 = spl(s[:-1], 2)
    speed = np.linalg.norm(d1, axis=1)
    if np.any(speed < 1e-12):
        raise DegenerateCurve("vanishing tangent")
    T = d1 / speed[:, None]
    acc = (d2 - np.sum(d2 * T, axis=1)[:, None] * T) / speed[:, None] ** 2

    if dim == 2:
        e = np.stack([-T[:, 1], T[:, 0]], axis=1)
        kappa = np.sum(acc * e, axis=1)[:, None]
        frames = e[:, None, :]
        holonomy = 0.0
    else:
        seed = np.eye(3)[np.argmin(np.abs(T[0]))]
        e1 = seed - (seed @ T[0]) * T[0]
        e1 /= np.linalg.norm(e1)
        E1 = np.empty((n, 3))
        E1[0] = e1
        X = curve.positions
        for j in range(n - 1):
            r = _double_reflection(X[j], T[j], E1[j], X[j + 1], T[j + 1])
            r -= (r @ T[j + 1]) * T[j + 1]
            E1[j + 1] = r / np.linalg.norm(r)
        r_end = _double_reflection(X[-1], T[-1], E1[-1], X[0], T[0])
        E2 = np.cross(T, E1)
        holonomy = float(np.arctan2(r_end @ E2[0], r_end @ E1[0]))
        if holonomy <= -np.pi:
            holonomy += 2 * np.pi
        frames = np.stack([E1, E2], axis=1)
        kappa = np.stack([np.sum(acc * E1, axis=1), np.sum(acc * E2, axis=1)], axis=1)
    return replace(curve, kappa=kappa, holonomy=holonomy, tangents=T, frames=frames, profiles=None)


def transport_residual(curve):
    """Max normal component of the central-difference frame derivative."""
    if curve.frames is None:
        raise ConfigError("no frame to check")
    h = curve.spacing
    E = curve.frames
    T = curve.tangents
    de = (E[2:] - E[:-2]) / (2 * h)
    tan = np.einsum("jad,jd->ja", de, T[1:-1])
    normal = de - tan[..., None] * T[1:-1, None, :]
    return float(np.abs(normal).max())


def synthetic_geometry(length, kappa_profiles, holonomy=0.0, n=256):
    """Curve given only through its normal-frame curvature.

    Each profile is a scalar, a callable, a PeriodicProfile, or closed samples
    on [0, L] (endpoint included). No closure constraint of an embedding is
    imposed; only the frame-holonomy periodicity of the data is checked.
    """
    length = float(length)
    profs = list(kappa_profiles)
    k = len(profs)
    if k not in (1, 2):
        raise ConfigError("need one or two curvature profiles")
    if k == 1:
        if holonomy != 0.0:
            raise ConfigError("holonomy is only defined for k = 2")
        p = PeriodicProfile.coerce(profs[0], length, n)
        q = np.arange(n) * length / n
        return CurveGeometry(length, p(q)[:, None], 0.0, profiles=(p,))

    q_closed = np.arange(n + 1) * length / n
    raw = np.empty((n + 1, 2))
    for a, prof in enumerate(profs):
        if isinstance(prof, PeriodicProfile) or callable(prof):
            raw[:, a] = prof(q_closed)
        elif np.isscalar(prof):
            raw[:, a] = float(prof)
        else:
            vals = np.asarray(prof, dtype=float)
            if vals.size != n + 1:
                raise ConfigError(f"closed curvature samples must have n + 1 = {n + 1} entries")
            raw[:, a] = vals
    mismatch = np.linalg.norm(rotation(holonomy) @ raw[-1] - raw[0])
    if mismatch > WRAP_TOL * max(1.0, np.abs(raw).max()):
        raise PeriodicityViolation(f"curvature wrap-around mismatch {mismatch:.3e} under holonomy {holonomy:g}")
    unwound = _rotate_rows(raw[:-1], holonomy * q_closed[:-1] / length)
    profiles = tuple(PeriodicProfile.from_samples(unwound[:, a], length) for a in range(2))
    return CurveGeometry(length, raw[:-1].copy(), float(holonomy), profiles=profiles)


def circle(radius=1.0, n=256, dim=2):
    """Embedded circle in the (x, y) plane, counter-clockwise."""
    t = np.linspace(0.0, 2 * np.pi, 4 * n + 1)
    pts = radius * np.stack([np.cos(t), np.sin(t)] + ([np.zeros_like(t)] if dim == 3 else []), axis=1)
    return bishop_frame(arclength_reparametrize(pts, n))


def geometry_from_spec(spec):
    """Build a CurveGeometry from the JSON ``geometry`` object."""
    if not isinstance(spec, dict):
        raise ConfigError("geometry: expected an object")
    if "synthetic" in spec:
        body = spec["synthetic"]
        try:
            length = float(body["length"])
            kappa = body["kappa"]
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"geometry.synthetic: {exc}") from None
        n = int(body.get("n", 256))
        hol = float(body.get("holonomy", 0.0))
        if not isinstance(kappa, list) or len(kappa) not in (1, 2):
            raise ConfigError("geometry.synthetic.kappa: expected a list of 1 or 2 profiles")
        if len(kappa) == 1:
            return synthetic_geometry(length, [profile_from_spec(kappa[0], length, "geometry.synthetic.kappa[0]")], hol, n)
        comps = []
        for a, ps in enumerate(kappa):
            if isinstance(ps, dict) and "samples" in ps:
                comps.append(np.asarray(ps["samples"], dtype=float))
            else:
                comps.append(profile_from_spec(ps, length, f"geometry.synthetic.kappa[{a}]"))
        return synthetic_geometry(length, comps, hol, n)
    if "points" in spec:
        n = int(spec.get("n", 256))
        return bishop_frame(arclength_reparametrize(spec["points"], n))
    if "circle" in spec:
        body = spec["circle"]
        return circle(float(body.get("radius", 1.0)), int(body.get("n", 256)), int(body.get("dim", 2)))
    raise ConfigError("geometry: expected one of 'synthetic', 'points', 'circle'")
