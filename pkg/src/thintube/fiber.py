"""Fiber eigenproblems along the curve and the band coefficients they feed.

Two cross-section families are supported. For k = 1 the fiber at q is the
interval [c - l/2, c + l/2] and everything is closed form. For k = 2 the
fiber is r(q) R(theta(q)) Omega_ref; one reference solve plus exact
scaling and rotation laws give every q-dependent quantity.

Notation used below: phi_I are the fiber eigenfunctions, dphi = d/dq phi_J
at fixed normal coordinate, and the two off-band sources are

    u1 = 2 dphi,    u2 = 2 (kappa . n) phi_J,

with T_ab = sum_{I != J, I <= I_max} <u_a|phi_I><phi_I|u_b> / (E_I - E_J).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, GapViolation, GaugeInconsistency, GridMismatch, PeriodicityViolation
from .geometry import rotation
from .profiles import AngleProfile, PeriodicProfile, angle_from_spec, profile_from_spec
from .refdomain import FiberGrid, domain_from_spec, reference_domain_solve

CLOSURE_TOL = 1e-9


def _check_period(profile, length, what):
    if not np.isclose(profile.period, length, rtol=1e-12, atol=0.0):
        raise GridMismatch(f"{what} has period {profile.period}, curve length is {length}")


@dataclass(frozen=True)
class IntervalFamily:
    """Fiber [c(q) - l(q)/2, c(q) + l(q)/2] on the single normal direction."""

    ell: PeriodicProfile
    center: PeriodicProfile

    k = 1

    @classmethod
    def constant(cls, ell, length, center=0.0):
        return cls(PeriodicProfile.constant(ell, length), PeriodicProfile.constant(center, length))

    @property
    def period(self):
        return self.ell.period

    def min_width(self, n=4096):
        q = np.arange(n) * self.period / n
        return float(self.ell(q).min())

    def check(self, geom):
        if geom.k != 1:
            raise ConfigError("interval fibers need a planar curve (k = 1)")
        _check_period(self.ell, geom.length, "ell")
        _check_period(self.center, geom.length, "center")
        if self.min_width() <= 0:
            raise ConfigError("interval length must stay positive")

    def seam_angle(self, geom):
        return 0.0

    def fiber_radius(self, q):
        return np.abs(self.center(q)) + 0.5 * self.ell(q)

    def to_dict(self):
        return {"interval": {"ell": self.ell.to_dict(), "center": self.center.to_dict()}}


@dataclass(frozen=True)
class ScaledRotatedFamily:
    """Fiber r(q) R(theta(q)) Omega_ref in the parallel normal frame."""

    reference: object
    scale: PeriodicProfile
    angle: AngleProfile

    k = 2

    @classmethod
    def rigid(cls, reference, length, scale=1.0, twist=0.0, offset=0.0):
        return cls(reference, PeriodicProfile.constant(scale, length),
                   AngleProfile.uniform_twist(twist, length, offset))

    @property
    def period(self):
        return self.scale.period

    def with_resolution(self, n):
        return ScaledRotatedFamily(self.reference.with_resolution(n), self.scale, self.angle)

    def seam_angle(self, geom):
        """Delta with f(L, s) = f(0, R(Delta) s) on reference coordinates."""
        return self.angle.winding + geom.holonomy

    def check(self, geom):
        if geom.k != 2:
            raise ConfigError("scaled/rotated fibers need a space curve (k = 2)")
        _check_period(self.scale, geom.length, "scale")
        _check_period(self.angle.periodic, geom.length, "angle")
        q = np.arange(4096) * geom.length / 4096
        if self.scale(q).min() <= 0:
            raise ConfigError("fiber scale must stay positive")
        step = 2 * np.pi / self.reference.symmetry_order
        delta = self.seam_angle(geom)
        off = delta - step * np.round(delta / step)
        if abs(off) > CLOSURE_TOL:
            raise PeriodicityViolation(
                f"fiber rotation {delta:.6g} over the loop is not a symmetry of the reference domain")

    def fiber_radius(self, q):
        return self.scale(q) * self.reference.max_radius()

    def to_dict(self):
        return {"scaled_rotated": {"reference": self.reference.to_dict(), "scale": self.scale.to_dict(),
                                   "angle": {"offset": self.angle.offset, "winding": self.angle.winding,
                                             "periodic": self.angle.periodic.to_dict()}}}


def family_from_spec(spec, length):
    if not isinstance(spec, dict) or len(spec) != 1:
        raise ConfigError("family: expected {'interval': ...} or {'scaled_rotated': ...}")
    (kind, body), = spec.items()
    if kind == "interval":
        return IntervalFamily(profile_from_spec(body.get("ell"), length, "family.interval.ell"),
                              profile_from_spec(body.get("center", 0.0), length, "family.interval.center"))
    if kind == "scaled_rotated":
        return ScaledRotatedFamily(domain_from_spec(body.get("reference")),
                                   profile_from_spec(body.get("scale", 1.0), length, "family.scaled_rotated.scale"),
                                   angle_from_spec(body.get("angle", 0.0), length, "family.scaled_rotated.angle"))
    raise ConfigError(f"family: unknown kind {kind!r}")


# -- interval closed forms -------------------------------------------------

def interval_matrices(n_modes):
    """Reference matrices on chi_a = sqrt(2) sin(a pi x), x in [0, 1], a = 1..n_modes.

    X = <chi_a|(x - 1/2) chi_b>, P = <chi_a|chi_b'>, D = <chi_a|(1/2 + (x - 1/2) d/dx) chi_b>.
    """
    a = np.arange(1, n_modes + 1, dtype=float)
    A, B = np.meshgrid(a, a, indexing="ij")
    diff = A**2 - B**2
    odd = (A + B) % 2 == 1
    even = ~odd & (A != B)
    safe = np.where(diff == 0, 1.0, diff)
    X = np.where(odd, -8 * A * B / (np.pi**2 * safe**2), 0.0)
    P = np.where(odd, 4 * A * B / safe, 0.0)
    D = np.where(even, -2 * A * B / safe, 0.0)
    return X, P, D


@dataclass(frozen=True)
class IntervalBand:
    """Analytic band J of an interval family."""

    family: IntervalFamily
    J: int

    @property
    def mode(self):
        return self.J + 1

    def energy(self, q):
        return (np.pi * self.mode / self.family.ell(q)) ** 2

    def phi(self, q, n):
        """phi_J(q, n) for scalar q and normal coordinates n (zero outside the fiber)."""
        ell, c = float(self.family.ell(q)), float(self.family.center(q))
        x = (np.asarray(n, dtype=float) - c) / ell + 0.5
        val = np.sqrt(2.0 / ell) * np.sin(self.mode * np.pi * x)
        return np.where((x >= 0) & (x <= 1), val, 0.0)

    def m1(self, q):
        return self.family.center(q)

    def m2(self, q):
        a = self.mode
        return self.family.center(q) ** 2 + self.family.ell(q) ** 2 * (1 / 12 - 1 / (2 * a**2 * np.pi**2))


def interval_bands(family, j_max):
    return [IntervalBand(family, j) for j in range(j_max + 1)]


# -- band data --------------------------------------------------------------

@dataclass(frozen=True)
class BandData:
    """Sampled coefficients of band J on the grid q_j = j L / n."""

    J: int
    length: float
    q: np.ndarray
    kappa: np.ndarray
    E: np.ndarray
    M1: np.ndarray
    M2: np.ndarray
    A: np.ndarray
    B: np.ndarray
    V_BH: np.ndarray
    T: np.ndarray
    tail: np.ndarray
    gap: float
    i_max: int
    loop_sign: int
    fiber_radius: np.ndarray
    horizontal_norm: np.ndarray
    energies: np.ndarray
    family: object = field(repr=False)
    reference: object = field(default=None, repr=False)
    gauge_sign: int = 1
    seam: object = field(default=None, repr=False)

    @property
    def n(self):
        return self.q.size

    @property
    def k(self):
        return self.kappa.shape[1]

    @property
    def truncation_error(self):
        return float(self.tail.max())

    def overlap_parameter(self):
        """sup_q (fiber radius * |kappa|), the quantity eps must keep below one."""
        return float(np.max(self.fiber_radius * np.linalg.norm(self.kappa, axis=1)))

    def next_band_bottom(self):
        return float(self.energies[:, self.J + 1].min()) if self.energies.shape[1] > self.J + 1 else np.inf

    def phi(self, j, nodes=None):
        """phi_J(q_j, .) on fiber reference nodes.

        For intervals ``nodes`` are reference coordinates s in [-1/2, 1/2]
        and n = c + l s; for 2D families the values live on the reference grid
        and n = r R(theta) s.
        """
        if isinstance(self.family, IntervalFamily):
            if nodes is None:
                raise ConfigError("interval bands need explicit fiber nodes")
            s = np.asarray(nodes, dtype=float).reshape(-1)
            ell = float(self.family.ell(self.q[j]))
            return self.gauge_sign * np.sqrt(2.0 / ell) * np.sin((self.J + 1) * np.pi * (s + 0.5))
        r = float(self.family.scale(self.q[j]))
        return self.reference.vectors[:, self.J] * (self.gauge_sign / r)


def _offband(u1, u2, denom, j):
    mask = np.ones(u1.shape[1], dtype=bool)
    mask[j] = False
    inv = 1.0 / denom[:, mask]
    a, b = u1[:, mask], u2[:, mask]
    T = np.empty((u1.shape[0], 2, 2))
    T[:, 0, 0] = np.sum(a * a * inv, axis=1)
    T[:, 0, 1] = T[:, 1, 0] = np.sum(a * b * inv, axis=1)
    T[:, 1, 1] = np.sum(b * b * inv, axis=1)
    return T, a, b


def _tail(norm1, norm2, cap1, cap2, gap_out):
    t1 = np.maximum(norm1 - cap1, 0.0) / gap_out
    t2 = np.maximum(norm2 - cap2, 0.0) / gap_out
    tail = np.empty((t1.size, 2, 2))
    tail[:, 0, 0], tail[:, 1, 1] = t1, t2
    tail[:, 0, 1] = tail[:, 1, 0] = np.sqrt(t1 * t2)
    return tail


def _interval_band(family, geom, J, i_max, q, gauge_sign):
    nm = i_max + 1
    X, P, D = interval_matrices(nm + 1)
    X, P, D = X[:nm, :nm], P[:nm, :nm], D[:nm, :nm]
    a = J + 1
    ell, dell = family.ell(q), family.ell(q, 1)
    c, dc = family.center(q), family.center(q, 1)
    kap = geom.kappa_at(q)[:, 0]
    modes = np.arange(1, nm + 1)
    energies = (np.pi * modes[None, :] / ell[:, None]) ** 2
    E = energies[:, J]
    lr, cr = dell / ell, dc / ell
    # phi_I for I != J keep their sign; phi_J carries the gauge sign
    sgn = np.where(np.arange(nm) == J, 1.0, float(gauge_sign))
    g = -(lr[:, None] * D[:, J] + cr[:, None] * P[:, J]) * sgn
    u1 = 2.0 * g
    u2 = 2.0 * kap[:, None] * ell[:, None] * X[:, J] * sgn
    M1 = c[:, None]
    M2 = (c**2 + ell**2 * (1 / 12 - 1 / (2 * a**2 * np.pi**2)))[:, None, None]
    V_BH = lr**2 * (0.25 + a**2 * np.pi**2 / 12) + cr**2 * a**2 * np.pi**2
    B = kap * dc
    A = g[:, J].copy()
    denom = energies - E[:, None]
    T, w1, w2 = _offband(u1, u2, denom, J)
    gap_out = (np.pi / ell) ** 2 * ((nm + 1) ** 2 - a**2)
    tail = _tail(4 * V_BH, 4 * kap**2 * (M2[:, 0, 0] - c**2),
                 np.sum(w1**2, axis=1), np.sum(w2**2, axis=1), gap_out)
    return dict(E=E, M1=M1, M2=M2, A=A, B=B, V_BH=V_BH, T=T, tail=tail, energies=energies,
                kappa=kap[:, None], fiber_radius=family.fiber_radius(q),
                horizontal_norm=np.sqrt(V_BH + g[:, J] ** 2), loop_sign=1, reference=None, seam=None)


class ReferenceOperators:
    """Matrix elements on the reference grid needed by the transformation laws."""

    def __init__(self, eig, J):
        grid = eig.grid
        Phi = eig.vectors
        self.values = eig.values
        self.extra = eig.extra
        cell = grid.cell
        S = [grid.nodes[:, a] for a in range(2)]
        C = grid.central
        # skew parts of 1 + s . grad and of the rotation generator
        Dop = sum(0.5 * (C[a].multiply(S[a][:, None]) + C[a].multiply(S[a][None, :])) for a in range(2))
        Lop = C[1].multiply(S[0][:, None]) - C[0].multiply(S[1][:, None])
        Dop, Lop = Dop.tocsr(), Lop.tocsr()
        phi = Phi[:, J]
        dphi, lphi = Dop @ phi, Lop @ phi
        self.S = np.stack([cell * Phi.T @ (S[a] * phi) for a in range(2)], axis=1)
        self.m1 = self.S[J].copy()
        self.m2 = np.array([[cell * np.sum(S[a] * S[b] * phi**2) for b in range(2)] for a in range(2)])
        self.D = cell * Phi.T @ dphi
        self.L = cell * Phi.T @ lphi
        # squared derivatives do not vanish on the wall: pure terms on links
        # (boundary links included), mixed terms at nodes
        pure = []
        for a in range(2):
            d = grid.plus[a] @ phi
            mid = grid.mid[a]
            pure.append(lambda f, d=d, a=a, mid=mid: cell * np.sum(grid.weight[a] * f(mid) * d**2))
        c1, c2 = C[0] @ phi, C[1] @ phi
        cross = lambda g: cell * np.sum(g(grid.nodes) * c1 * c2)
        s11 = lambda m: m[:, 0] ** 2
        s22 = lambda m: m[:, 1] ** 2
        s12 = lambda m: m[:, 0] * m[:, 1]
        self.LL = pure[0](s22) + pure[1](s11) - 2 * cross(s12)
        # <phi|s.grad phi> = -1 for a normalized phi in two dimensions
        self.DD = pure[0](s11) + pure[1](s22) + 2 * cross(s12) - 1.0
        self.DL = -pure[0](s12) + pure[1](s12) + cross(lambda m: m[:, 0] ** 2 - m[:, 1] ** 2)
        self.sD = np.array([cell * np.sum((S[a] - self.m1[a]) * phi * dphi) for a in range(2)])
        self.sL = np.array([cell * np.sum((S[a] - self.m1[a]) * phi * lphi) for a in range(2)])


def _scaled_band(family, geom, J, i_max, q, gauge_sign, gap_tol):
    eig = reference_domain_solve(family.reference, i_max, band=J, gap_tol=gap_tol)
    ops = ReferenceOperators(eig, J)
    nm = i_max + 1
    r, dr = family.scale(q), family.scale(q, 1)
    th, dth = family.angle(q), family.angle(q, 1)
    kap = geom.kappa_at(q)
    # kappa in rotated reference coordinates: R(-theta) kappa
    kh = np.stack([np.cos(th) * kap[:, 0] + np.sin(th) * kap[:, 1],
                   -np.sin(th) * kap[:, 0] + np.cos(th) * kap[:, 1]], axis=1)
    rr = dr / r
    sgn = np.where(np.arange(nm) == J, 1.0, float(gauge_sign))
    g = -(rr[:, None] * ops.D[None, :] + dth[:, None] * ops.L[None, :]) * sgn
    u1 = 2.0 * g
    u2 = 2.0 * r[:, None] * (kh @ ops.S.T) * sgn
    energies = ops.values[None, :] / r[:, None] ** 2
    E = energies[:, J]
    R = np.stack([rotation(t) for t in th])
    M1 = r[:, None] * (R @ ops.m1)
    M2 = r[:, None, None] ** 2 * (R @ ops.m2 @ np.transpose(R, (0, 2, 1)))
    dd = rr**2 * ops.DD + 2 * rr * dth * ops.DL + dth**2 * ops.LL
    V_BH = dd - g[:, J] ** 2
    B = -2.0 * np.einsum("ja,ja->j", kh, rr[:, None] * ops.sD + dth[:, None] * ops.sL)
    A = g[:, J].copy()
    denom = energies - E[:, None]
    T, w1, w2 = _offband(u1, u2, denom, J)
    c2 = ops.m2 - np.outer(ops.m1, ops.m1)
    norm2 = 4 * r**2 * np.einsum("ja,ab,jb->j", kh, c2, kh)
    gap_out = (ops.extra - ops.values[J]) / r**2
    tail = _tail(4 * V_BH, norm2, np.sum(w1**2, axis=1), np.sum(w2**2, axis=1), gap_out)

    delta = family.seam_angle(geom)
    perm = eig.grid.rotation_permutation(delta)
    phi = eig.vectors[:, J]
    loop = eig.grid.cell * float(phi @ phi[perm])
    if abs(abs(loop) - 1.0) > 1e-6:
        raise GaugeInconsistency(f"loop-closure overlap {loop:.8f} is not +-1")
    return dict(E=E, M1=M1, M2=M2, A=A, B=B, V_BH=V_BH, T=T, tail=tail, energies=energies,
                kappa=kap, fiber_radius=family.fiber_radius(q), horizontal_norm=np.sqrt(np.maximum(dd, 0.0)),
                loop_sign=int(np.sign(loop)), reference=eig, seam=perm)


def build_band_data(family, geom, J, i_max=None, n=None, gap_tol=None, gauge_sign=1):
    """Sample every band-J coefficient on q_j = j L / n (n defaults to the geometry grid)."""
    if J < 0:
        raise ConfigError("band index must be non-negative")
    i_max = J + 20 if i_max is None else int(i_max)
    if i_max < J + 3:
        raise ConfigError("i_max must be at least J + 3")
    if gauge_sign not in (1, -1):
        raise ConfigError("gauge_sign must be +1 or -1")
    family.check(geom)
    n = geom.n if n is None else int(n)
    q = np.arange(n) * geom.length / n
    if isinstance(family, IntervalFamily):
        data = _interval_band(family, geom, J, i_max, q, gauge_sign)
    else:
        data = _scaled_band(family, geom, J, i_max, q, gauge_sign, gap_tol)
    en = data["energies"]
    gaps = [en[:, J + 1] - en[:, J]]
    if J > 0:
        gaps.append(en[:, J] - en[:, J - 1])
    gap = float(np.min(gaps))
    tol = gap_tol if gap_tol is not None else 1e-6 * float(en[:, : J + 2].max())
    if gap <= tol:
        raise GapViolation(f"band {J} gap {gap:.3e} is below tolerance {tol:.1e}")
    return BandData(J=J, length=geom.length, q=q, gap=gap, i_max=i_max, family=family,
                    gauge_sign=gauge_sign, **data)


@dataclass(frozen=True)
class GapReport:
    gap: float
    q_at_min: float
    crossings: list
    energies: np.ndarray


def admissibility_check(family, geom, J, j_scan, n=None, tol=None):
    """Distance from E_J(q) to the other scanned bands, minimised over q."""
    if j_scan <= J:
        raise ConfigError("j_scan must exceed J")
    family.check(geom)
    n = geom.n if n is None else int(n)
    q = np.arange(n) * geom.length / n
    if isinstance(family, IntervalFamily):
        modes = np.arange(1, j_scan + 2)
        en = (np.pi * modes[None, :] / family.ell(q)[:, None]) ** 2
    else:
        eig = reference_domain_solve(family.reference, j_scan)
        en = eig.values[None, :] / family.scale(q)[:, None] ** 2
    others = np.delete(en, J, axis=1)
    dist = np.min(np.abs(others - en[:, [J]]), axis=1)
    tol = 1e-6 * float(en.max()) if tol is None else tol
    i = int(np.argmin(dist))
    crossings = [float(x) for x in q[dist <= tol]]
    return GapReport(float(dist[i]), float(q[i]), crossings, en)


def band_energy(family, J, q, deriv=0, e_ref=None):
    """E_J(q) and its first two q-derivatives from the closed-form scaling laws."""
    q = np.asarray(q, dtype=float)
    if isinstance(family, IntervalFamily):
        w, dw, ddw = family.ell(q), family.ell(q, 1), family.ell(q, 2)
        base = (np.pi * (J + 1)) ** 2
    else:
        w, dw, ddw = family.scale(q), family.scale(q, 1), family.scale(q, 2)
        base = e_ref if e_ref is not None else reference_domain_solve(family.reference, J).values[J]
    if deriv == 0:
        return base / w**2
    if deriv == 1:
        return -2 * base * dw / w**3
    if deriv == 2:
        return base * (6 * dw**2 / w**4 - 2 * ddw / w**3)
    raise ConfigError("only derivatives up to order 2")
