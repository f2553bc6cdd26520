"""Reference cross-sections and their Dirichlet finite-difference grids.

The 2D Laplacian uses the symmetric embedded-boundary discretization of
Gibou et al. (2002): a link from an interior node to the boundary at
fraction theta of a grid step gets weight 1/theta, which keeps the matrix
symmetric and the eigenvalues second-order accurate.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as sla
from scipy.optimize import brentq
from scipy.spatial import cKDTree

from .errors import ConfigError, DegeneracyDetected, GridMismatch, ResolutionTooCoarse, SolverFailure
from .profiles import PeriodicProfile

MIN_ACROSS = 16
MIN_CUT = 1e-6


def start_vector(n):
    """Fixed pseudo-random Lanczos start; a constant vector misses symmetric partners."""
    return np.random.default_rng(20240917).standard_normal(n)


@dataclass(frozen=True)
class FiberGrid:
    """Interior nodes of a reference fiber plus its difference operators.

    ``plus[a]`` maps node values to link differences along axis a (links to
    the boundary included, boundary value zero); ``weight[a]`` holds the
    embedded-boundary link weights and ``mid[a]`` the link midpoints.
    ``central[a]`` is the skew central difference with zero outside.
    """

    nodes: np.ndarray
    h: tuple
    plus: tuple
    weight: tuple
    mid: tuple
    central: tuple

    @property
    def k(self):
        return self.nodes.shape[1]

    @property
    def size(self):
        return self.nodes.shape[0]

    @property
    def cell(self):
        return float(np.prod(self.h))

    @cached_property
    def laplacian(self):
        """Discrete -Delta (unit mass); symmetric positive definite."""
        out = sp.csr_matrix((self.size, self.size))
        for D, w in zip(self.plus, self.weight):
            out = out + D.T @ sp.diags(w) @ D
        return out.tocsr()

    def across(self):
        """Interior nodes along the narrowest grid line through the centre."""
        counts = []
        for a in range(self.k):
            others = [b for b in range(self.k) if b != a]
            if not others:
                counts.append(self.size)
                continue
            key = np.round(self.nodes[:, others] / np.array(self.h)[others]).astype(int)
            _, cnt = np.unique(key, axis=0, return_counts=True)
            counts.append(int(cnt.max()))
        return min(counts)

    def rotation_permutation(self, angle, tol=1e-8):
        """Index map p -> node at R(angle) s_p; raises unless the grid is invariant."""
        if self.k == 1:
            if abs(np.cos(angle) - 1) < tol:
                return np.arange(self.size)
            raise GridMismatch("interval fibers admit no rotation")
        c, s = np.cos(angle), np.sin(angle)
        rot = self.nodes @ np.array([[c, s], [-s, c]])
        dist, idx = cKDTree(self.nodes).query(rot)
        if np.any(dist > tol * min(self.h)):
            raise GridMismatch(f"fiber grid is not invariant under rotation by {angle:g}")
        return idx

    @classmethod
    def interval(cls, n_cells):
        """Nodes s_j = -1/2 + j/n, 0 < j < n, on the unit reference interval."""
        h = 1.0 / n_cells
        nodes = (-0.5 + h * np.arange(1, n_cells))[:, None]
        P = n_cells - 1
        rows = np.concatenate([np.arange(n_cells - 1), np.arange(1, n_cells)])
        cols = np.concatenate([np.arange(P), np.arange(P)])
        vals = np.concatenate([np.full(P, 1.0 / h), np.full(P, -1.0 / h)])
        D = sp.csr_matrix((vals, (rows, cols)), shape=(n_cells, P))
        mid = (-0.5 + h * (np.arange(n_cells) + 0.5))[:, None]
        C = sp.diags([np.full(P - 1, 0.5 / h), np.full(P - 1, -0.5 / h)], [1, -1], format="csr")
        return cls(nodes, (h,), (D,), (np.ones(n_cells),), (mid,), (C,))


def _grid_from_mask(x1, x2, inside, cut_fraction):
    """Assemble a 2D FiberGrid on the lattice x1 (x) x2 restricted to ``inside``."""
    h1, h2 = x1[1] - x1[0], x2[1] - x2[0]
    n1, n2 = x1.size, x2.size
    index = -np.ones((n1, n2), dtype=int)
    ii, jj = np.nonzero(inside)
    index[ii, jj] = np.arange(ii.size)
    P = ii.size
    nodes = np.stack([x1[ii], x2[jj]], axis=1)
    plus, weight, mid, central = [], [], [], []
    for axis, hh in ((0, h1), (1, h2)):
        rows, cols, vals, w, m = [], [], [], [], []
        crow, ccol, cval = [], [], []
        link = 0
        step = np.array([1, 0]) if axis == 0 else np.array([0, 1])
        for p in range(P):
            i, j = ii[p], jj[p]
            for sgn in (1, -1):
                a, b = i + sgn * step[0], j + sgn * step[1]
                nb = index[a, b] if 0 <= a < n1 and 0 <= b < n2 else -1
                if nb >= 0:
                    crow.append(p)
                    ccol.append(nb)
                    cval.append(sgn * 0.5 / hh)
                    if sgn == 1:
                        rows += [link, link]
                        cols += [nb, p]
                        vals += [1.0 / hh, -1.0 / hh]
                        w.append(1.0)
                        m.append(nodes[p] + 0.5 * hh * step)
                        link += 1
                else:
                    theta = max(cut_fraction(nodes[p], sgn * hh * step), MIN_CUT)
                    rows.append(link)
                    cols.append(p)
                    vals.append(-sgn / hh)
                    w.append(1.0 / theta)
                    m.append(nodes[p] + 0.5 * theta * sgn * hh * step)
                    link += 1
        plus.append(sp.csr_matrix((vals, (rows, cols)), shape=(link, P)))
        weight.append(np.asarray(w))
        mid.append(np.asarray(m))
        central.append(sp.csr_matrix((cval, (crow, ccol)), shape=(P, P)))
    return FiberGrid(nodes, (h1, h2), tuple(plus), tuple(weight), tuple(mid), tuple(central))


@dataclass(frozen=True)
class Rectangle:
    """Axis-aligned a x b rectangle centred at the origin; ``n`` cells across the short side."""

    a: float
    b: float
    n: int = 24

    kind = "rectangle"

    @property
    def symmetry_order(self):
        return 4 if np.isclose(self.a, self.b) else 2

    def with_resolution(self, n):
        return Rectangle(self.a, self.b, int(n))

    def max_radius(self):
        return 0.5 * float(np.hypot(self.a, self.b))

    @cached_property
    def grid(self):
        h = min(self.a, self.b) / self.n
        n1, n2 = int(round(self.a / h)), int(round(self.b / h))
        if min(n1, n2) - 1 < MIN_ACROSS:
            raise ResolutionTooCoarse(f"rectangle grid has {min(n1, n2) - 1} interior points across; need {MIN_ACROSS}")
        x1 = -0.5 * self.a + np.arange(1, n1) * (self.a / n1)
        x2 = -0.5 * self.b + np.arange(1, n2) * (self.b / n2)
        inside = np.ones((x1.size, x2.size), dtype=bool)
        return _grid_from_mask(x1, x2, inside, lambda node, d: 1.0)

    def to_dict(self):
        return {"rectangle": {"a": self.a, "b": self.b}, "resolution": self.n}


@dataclass(frozen=True)
class StarShaped:
    """Domain {rho(phi) > |s|} for a positive 2 pi-periodic radius function."""

    rho: PeriodicProfile
    n: int = 24
    symmetry: int = 1

    kind = "star"

    @classmethod
    def disk(cls, radius=1.0, n=24):
        return cls(PeriodicProfile.constant(radius, 2 * np.pi), n, 4)

    @property
    def symmetry_order(self):
        return self.symmetry

    def with_resolution(self, n):
        return StarShaped(self.rho, int(n), self.symmetry)

    def _rho_range(self):
        phi = np.linspace(0, 2 * np.pi, 2048, endpoint=False)
        r = self.rho(phi)
        if np.any(r <= 0):
            raise ConfigError("star-shaped radius must be positive")
        return float(r.min()), float(r.max())

    def max_radius(self):
        return self._rho_range()[1]

    def inside(self, pts):
        return np.hypot(pts[..., 0], pts[..., 1]) < self.rho(np.arctan2(pts[..., 1], pts[..., 0])) - 1e-12

    @cached_property
    def grid(self):
        rmin, rmax = self._rho_range()
        h = 2 * rmin / self.n
        m = int(np.ceil(rmax / h)) + 1
        x = h * np.arange(-m, m + 1)
        X1, X2 = np.meshgrid(x, x, indexing="ij")
        inside = self.inside(np.stack([X1, X2], axis=-1))

        def cut(node, d):
            def g(t):
                y = node + t * d
                return self.rho(np.arctan2(y[1], y[0])) - np.hypot(y[0], y[1])
            g1 = g(1.0)
            if g1 >= 0:
                return 1.0
            return brentq(g, 0.0, 1.0, xtol=1e-14)

        grid = _grid_from_mask(x, x, inside, cut)
        if grid.across() < MIN_ACROSS:
            raise ResolutionTooCoarse(f"star-shaped grid has {grid.across()} interior points across; need {MIN_ACROSS}")
        return grid

    def to_dict(self):
        return {"star": {"rho": self.rho.to_dict(), "symmetry": self.symmetry}, "resolution": self.n}


@dataclass(frozen=True)
class ReferenceEigen:
    """Lowest Dirichlet eigenpairs on a reference grid; vectors are cell-orthonormal."""

    values: np.ndarray
    vectors: np.ndarray
    grid: FiberGrid
    extra: float

    def matrix(self, op):
        """Matrix elements <phi_I | op phi_J> in the grid measure."""
        return self.grid.cell * (self.vectors.T @ (op @ self.vectors))


def _fix_signs(vecs):
    for j in range(vecs.shape[1]):
        v = vecs[:, j]
        if j == 0:
            s = np.sign(v.sum())
        else:
            p = int(np.argmax(np.abs(v) * (1 + 1e-9 * np.arange(v.size))))
            s = np.sign(v[p])
        vecs[:, j] = v * (s if s != 0 else 1.0)
    return vecs


def reference_domain_solve(domain, j_max, band=None, gap_tol=None):
    """Lowest ``j_max + 1`` Dirichlet eigenpairs of -Delta on the reference domain.

    One additional eigenvalue is computed to bound truncation tails and to
    test simplicity of the top requested band.
    """
    grid = domain.grid
    A = grid.laplacian
    nev = j_max + 2
    if nev >= grid.size:
        raise ConfigError("too many eigenpairs requested for the fiber grid")
    try:
        vals, vecs = sla.eigsh(A, k=nev, sigma=0.0, which="LM", v0=start_vector(grid.size), tol=1e-13)
    except sla.ArpackError as exc:
        raise SolverFailure(f"reference eigensolve failed: {exc}") from None
    order = np.argsort(vals)
    vals, vecs = vals[order], vecs[:, order]
    resid = np.linalg.norm(A @ vecs - vecs * vals, axis=0) / np.linalg.norm(vecs, axis=0)
    if np.any(resid > 1e-8 * max(1.0, vals.max())):
        raise SolverFailure(f"reference eigensolve residual {resid.max():.2e}")
    vecs = vecs / np.sqrt(grid.cell * np.sum(vecs**2, axis=0))
    vecs = _fix_signs(vecs)
    if band is not None:
        tol = gap_tol if gap_tol is not None else 1e-6 * vals.max()
        gaps = []
        if band > 0:
            gaps.append(vals[band] - vals[band - 1])
        gaps.append(vals[band + 1] - vals[band])
        if min(gaps) <= tol:
            raise DegeneracyDetected(f"band {band} is degenerate on the reference domain (gap {min(gaps):.2e})")
    return ReferenceEigen(vals[:-1], vecs[:, :-1], grid, float(vals[-1]))


def domain_from_spec(spec):
    if not isinstance(spec, dict):
        raise ConfigError("reference: expected an object")
    n = int(spec.get("resolution", 24))
    if "rectangle" in spec:
        r = spec["rectangle"]
        return Rectangle(float(r["a"]), float(r["b"]), n)
    if "disk" in spec:
        return StarShaped.disk(float(spec["disk"].get("radius", 1.0)), n)
    if "star" in spec:
        from .profiles import profile_from_spec
        s = spec["star"]
        return StarShaped(profile_from_spec(s["rho"], 2 * np.pi, "reference.star.rho"), n, int(s.get("symmetry", 1)))
    raise ConfigError("reference: expected rectangle, disk or star")
