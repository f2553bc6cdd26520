"""Dirichlet Laplacian -eps^2 Delta on the full thin tube.

Fermi coordinates (q, n) with metric rho^2 dq^2 + eps^2 |dn|^2,
rho = 1 - eps kappa.n, are pulled back to a fixed reference fiber through
n = c + l s (k = 1) or n = r R(theta) s (k = 2). With r = l resp. r = scale
and u the s-velocity of the fiber map,

    Q[f] = int int eps^2 rho^-1 r^k |(d_q - u.grad_s) f|^2 + rho r^(k-2) |grad_s f|^2  ds dq
    |f|^2 = int int rho r^k |f|^2 ds dq.

Pure second derivatives use compact link stencils, mixed ones central
differences at nodes. Across the seam q = L the fiber grid is permuted by
the rotation R(theta(L) - theta(0) + holonomy).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import ConfigError, CutoffLeak, GridMismatch, ProblemTooLarge, ResolutionTooCoarse, SolverFailure, TubeOverlap
from .fiber import IntervalFamily
from .refdomain import FiberGrid, start_vector

MAX_UNKNOWNS = 500_000
MIN_TRANSVERSE = 12


@dataclass(frozen=True)
class TubeOperator:
    eps: float
    q: np.ndarray
    grid: FiberGrid
    K: sp.csr_matrix = field(repr=False)
    M: sp.csr_matrix = field(repr=False)
    rho: np.ndarray = field(repr=False)
    seam: np.ndarray = field(repr=False)
    family: object = field(repr=False)
    slices: tuple = field(repr=False, default=None)

    @cached_property
    def e_floor(self):
        """Lowest transverse eigenvalue over all fiber slices."""
        return _slice_floor(self.grid, *self.slices)

    @property
    def nq(self):
        return self.q.size

    @property
    def size(self):
        return self.K.shape[0]

    def reshape(self, x):
        return np.asarray(x).reshape(self.nq, self.grid.size, *np.shape(x)[1:])


def _fiber_fields(family, geom, q, pts):
    """r, u (len(q), len(pts), k) and kappa.n on the fiber points for each q."""
    kap = geom.kappa_at(q)
    if isinstance(family, IntervalFamily):
        ell, dell = family.ell(q), family.ell(q, 1)
        c, dc = family.center(q), family.center(q, 1)
        s = pts[:, 0]
        u = ((dc[:, None] + dell[:, None] * s[None, :]) / ell[:, None])[..., None]
        kn = kap[:, 0][:, None] * (c[:, None] + ell[:, None] * s[None, :])
        return ell, u, kn
    r, dr = family.scale(q), family.scale(q, 1)
    th, dth = family.angle(q), family.angle(q, 1)
    s1, s2 = pts[:, 0][None, :], pts[:, 1][None, :]
    u = np.stack([(dr / r)[:, None] * s1 - dth[:, None] * s2,
                  (dr / r)[:, None] * s2 + dth[:, None] * s1], axis=-1)
    kh1 = np.cos(th) * kap[:, 0] + np.sin(th) * kap[:, 1]
    kh2 = -np.sin(th) * kap[:, 0] + np.cos(th) * kap[:, 1]
    kn = r[:, None] * (kh1[:, None] * s1 + kh2[:, None] * s2)
    return r, u, kn


def _shift(nq, perm):
    """Block shift (S f)_j = f_{j+1}; the wrap-around block applies the seam permutation."""
    P = perm.size
    blocks_r = np.arange((nq - 1) * P)
    S_int = sp.csr_matrix((np.ones(blocks_r.size), (blocks_r, blocks_r + P)), shape=(nq * P, nq * P))
    rows = (nq - 1) * P + np.arange(P)
    S_seam = sp.csr_matrix((np.ones(P), (rows, perm)), shape=(nq * P, nq * P))
    return (S_int + S_seam).tocsr()


def assemble_tube(geom, family, eps, nq, nn, force_large=False):
    """Stiffness and mass of -eps^2 Delta on the tube, Dirichlet on its wall.

    ``nn`` is the number of cells on the reference interval (k = 1) or the
    resolution of the reference domain (k = 2).
    """
    eps = float(eps)
    if eps <= 0:
        raise ConfigError("eps must be positive")
    family.check(geom)
    nq, nn = int(nq), int(nn)
    if isinstance(family, IntervalFamily):
        if nn - 1 < MIN_TRANSVERSE:
            raise ResolutionTooCoarse(f"{nn - 1} transverse points; need at least {MIN_TRANSVERSE}")
        grid = FiberGrid.interval(nn)
        fam = family
    else:
        fam = family.with_resolution(nn)
        grid = fam.reference.grid
    P = grid.size
    if nq * P > MAX_UNKNOWNS and not force_large:
        raise ProblemTooLarge(f"{nq} x {P} = {nq * P} unknowns exceeds {MAX_UNKNOWNS}; pass force_large")
    if nq < 8:
        raise ResolutionTooCoarse("need at least 8 longitudinal points")
    k = grid.k
    L = geom.length
    h = L / nq
    q = np.arange(nq) * h
    qm = q + 0.5 * h
    cell = grid.cell

    perm = grid.rotation_permutation(fam.seam_angle(geom))
    Iq = sp.identity(nq, format="csr")

    r, u, kn = _fiber_fields(fam, geom, q, grid.nodes)
    rho = 1.0 - eps * kn
    if np.any(rho <= 0):
        raise TubeOverlap("1 - eps kappa.n vanishes inside the tube")
    rk = r[:, None] ** k

    blocks, slice_coef = [], []
    # transverse links, one family per axis
    for a in range(k):
        rl, ul, knl = _fiber_fields(fam, geom, q, grid.mid[a])
        rhol = 1.0 - eps * knl
        if np.any(rhol <= 0):
            raise TubeOverlap("1 - eps kappa.n vanishes on the tube wall")
        slice_coef.append(rhol * rl[:, None] ** (k - 2) * grid.weight[a][None, :])
        coef = eps**2 / rhol * rl[:, None] ** k * ul[..., a] ** 2 + rhol * rl[:, None] ** (k - 2)
        coef = coef * grid.weight[a][None, :] * cell * h
        D = sp.kron(Iq, grid.plus[a], format="csr")
        blocks.append(D.T @ sp.diags(coef.ravel()) @ D)

    # longitudinal links
    S = _shift(nq, perm)
    Id = sp.identity(nq * P, format="csr")
    Dq = (S - Id) / h
    rm, _, knm = _fiber_fields(fam, geom, qm, grid.nodes)
    rhom = 1.0 - eps * knm
    coef = eps**2 / rhom * rm[:, None] ** k * cell * h
    blocks.append(Dq.T @ sp.diags(coef.ravel()) @ Dq)

    # mixed derivatives at nodes
    dq = (S - S.T) / (2 * h)
    C = [sp.kron(Iq, grid.central[a], format="csr") for a in range(k)]
    base = eps**2 / rho * rk * cell * h
    for a in range(k):
        X = dq.T @ sp.diags((-base * u[..., a]).ravel()) @ C[a]
        blocks.append(X + X.T)
    if k == 2:
        X = C[0].T @ sp.diags((base * u[..., 0] * u[..., 1]).ravel()) @ C[1]
        blocks.append(X + X.T)

    K = blocks[0]
    for b in blocks[1:]:
        K = K + b
    K = K.tocsr()
    K = (0.5 * (K + K.T)).tocsr()
    K.sum_duplicates()
    M = sp.diags((rho * rk * cell * h).ravel(), format="csr")
    return TubeOperator(eps, q, grid, K, M, rho, perm, fam, (slice_coef, rho * rk))


def _slice_floor(grid, coef, mass):
    """min over q of the lowest transverse eigenvalue of each fiber slice.

    Dropping the (non-negative) longitudinal part of the form leaves one
    fiber problem per q, so this estimates the bottom of the tube spectrum
    from below (exactly so in the continuum).
    """
    low = np.inf
    for j in range(mass.shape[0]):
        Kj = sum(grid.plus[a].T @ sp.diags(coef[a][j]) @ grid.plus[a] for a in range(grid.k))
        Mj = sp.diags(mass[j])
        val = spla.eigsh(Kj.tocsc(), k=1, M=Mj.tocsc(), sigma=0.0, which="LM", v0=start_vector(grid.size))[0][0]
        low = min(low, float(val))
    return low


def tube_spectrum(op, count, sigma=None, e_max=None):
    """Lowest eigenpairs of K x = lambda M x by shift-invert Lanczos.

    Returns values, M-orthonormal vectors and the residuals
    ||K x - lambda M x|| / ||x||. ``sigma`` must lie below the wanted part of
    the spectrum. By default it is placed just under the slice floor, with a
    fallback to a far lower shift if that turns out not to be below.
    """
    if sigma is not None:
        return _solve(op, count, sigma, e_max)
    try:
        return _solve(op, count, _default_shift(op), e_max)
    except _ShiftNotBelow:
        return _solve(op, count, _safe_shift(op), e_max)


class _ShiftNotBelow(SolverFailure):
    pass


def _solve(op, count, sigma, e_max):
    n = op.size
    if count >= n - 1:
        raise ConfigError("count too large for the tube grid")
    try:
        vals, vecs = spla.eigsh(op.K, k=count, M=op.M, sigma=sigma, which="LM",
                                v0=start_vector(n), tol=1e-14, ncv=min(n - 1, max(2 * count + 1, count + 20)))
    except (spla.ArpackError, spla.ArpackNoConvergence, RuntimeError) as exc:
        raise SolverFailure(f"tube eigensolve failed: {exc}") from None
    idx = np.argsort(vals)
    vals, vecs = vals[idx], vecs[:, idx]
    resid = np.linalg.norm(op.K @ vecs - (op.M @ vecs) * vals, axis=0) / np.linalg.norm(vecs, axis=0)
    if np.any(resid > 1e-8 * max(1.0, float(np.abs(vals).max()))):
        raise SolverFailure(f"tube eigensolve residual {resid.max():.2e}")
    if vals[0] < sigma:
        raise _ShiftNotBelow("shift is not below the computed spectrum; pass a lower sigma")
    if e_max is not None:
        keep = vals <= e_max
        vals, vecs, resid = vals[keep], vecs[:, keep], resid[keep]
    return vals, vecs, resid


def _default_shift(op):
    floor = op.e_floor
    return min(floor - 0.01 * op.eps**2 * abs(floor), float((op.K.diagonal() / op.M.diagonal()).min()))


def _safe_shift(op):
    """A value well below the lowest tube eigenvalue."""
    diag = op.K.diagonal() / op.M.diagonal()
    # fiber ground energy of the discrete cross-section, scaled per q
    fam = op.family
    if isinstance(fam, IntervalFamily):
        nn = op.grid.size + 1
        e_ref = (2 * nn * np.sin(np.pi / (2 * nn))) ** 2
        r = fam.ell(op.q)
    else:
        e_ref = float(spla.eigsh(op.grid.laplacian, k=1, sigma=0.0, which="LM",
                                 v0=start_vector(op.grid.size))[0][0])
        r = fam.scale(op.q)
    e_min = e_ref / float(np.max(r)) ** 2
    return min(0.8 * e_min, float(diag.min()))


def band_project(op, band, state):
    """psi(q_j) = int phi_J(q_j, n) f(q_j, n) dn on the tube grid."""
    _check_band(op, band)
    f = op.reshape(state)
    phi = _band_on_grid(op, band)
    r = _scale(op)
    w = op.grid.cell * r[:, None] ** op.grid.k
    if f.ndim == 3:
        return np.einsum("jp,jpc->jc", phi * w, f)
    return np.sum(phi * w * f, axis=1)


def lift(op, band, psi):
    """f(q_j, s_p) = psi(q_j) phi_J(q_j, s_p), flattened in tube ordering."""
    _check_band(op, band)
    phi = _band_on_grid(op, band)
    return (np.asarray(psi)[:, None] * phi).ravel()


def _scale(op):
    fam = op.family
    return fam.ell(op.q) if isinstance(fam, IntervalFamily) else fam.scale(op.q)


def _band_on_grid(op, band):
    if isinstance(op.family, IntervalFamily):
        nodes = op.grid.nodes
        return np.stack([band.phi(j, nodes) for j in range(op.nq)])
    return np.stack([band.phi(j) for j in range(op.nq)])


def _check_band(op, band):
    if band.n != op.nq or not np.allclose(band.q, op.q, rtol=0, atol=1e-12 * band.length):
        raise GridMismatch("band data and tube use different longitudinal grids")
    if band.reference is not None and band.reference.grid.size != op.grid.size:
        raise GridMismatch("band data and tube use different fiber grids")


def tube_propagate(op, state, times, eigen, e_max=None, leak_tol=1e-6):
    """exp(-i t H) on the span of the supplied eigenpairs with eigenvalue <= e_max.

    Raises CutoffLeak when more than ``leak_tol`` of the squared norm of
    ``state`` lies outside that span. Returns the states (rows follow
    ``times``) and the leaked squared-norm fraction.
    """
    vals, vecs = eigen
    if e_max is not None:
        keep = vals <= e_max
        vals, vecs = vals[keep], vecs[:, keep]
    state = np.asarray(state, dtype=complex)
    coef = vecs.T @ (op.M @ state)
    total = float(np.real(np.vdot(state, op.M @ state)))
    leak = max(0.0, 1.0 - float(np.sum(np.abs(coef) ** 2)) / total)
    if leak > leak_tol:
        raise CutoffLeak(f"{leak:.2e} of the norm lies above the cutoff subspace")
    t = np.atleast_1d(np.asarray(times, dtype=float))
    return (np.exp(-1j * np.outer(t, vals)) * coef) @ vecs.T, leak


def dump_coo(op, prefix):
    """Write K and M as little-endian (int64 row, int64 col, float64 value) records.

    Produces ``<prefix>_K.coo`` and ``<prefix>_M.coo``; returns both paths.
    """
    dtype = np.dtype([("row", "<i8"), ("col", "<i8"), ("val", "<f8")])
    paths = []
    for name, mat in (("K", op.K), ("M", op.M)):
        coo = mat.tocoo()
        rec = np.empty(coo.nnz, dtype=dtype)
        rec["row"], rec["col"], rec["val"] = coo.row, coo.col, coo.data
        path = Path(f"{prefix}_{name}.coo")
        path.parent.mkdir(parents=True, exist_ok=True)
        rec.tofile(path)
        paths.append(path)
    return paths


def read_coo(path, shape=None):
    """Inverse of dump_coo for one matrix."""
    dtype = np.dtype([("row", "<i8"), ("col", "<i8"), ("val", "<f8")])
    rec = np.fromfile(path, dtype=dtype)
    n = int(max(rec["row"].max(), rec["col"].max())) + 1 if shape is None else shape[0]
    return sp.csr_matrix((rec["val"], (rec["row"], rec["col"])), shape=shape or (n, n))
