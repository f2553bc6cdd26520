"""The effective one-dimensional operator of a tube band.

The quadratic form

    int a |D psi|^2 w dq + int W |psi|^2 w dq - eps^2 sum_ab int T_ab conj(D_a psi) D_b psi w dq

is discretized on the periodic grid q_j = j L / N. First derivatives live on
the staggered links, coefficients there are neighbour averages, and the
measure weight w enters both stiffness and mass, so K x = lambda M x is an
exactly symmetric generalized eigenproblem.

    a = 1 + 2 eps kappa.M1 + 3 eps^2 kappa kappa : M2,   w = a^(-1/2)
    D = eps d/dq - i eps A - eps^2 B
    W = E_J + eps^2 (V_geom + V_BH + V_amb)
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import ConfigError, GridMismatch, MetricDegenerate, SolverFailure, TubeOverlap
from .refdomain import start_vector

DENSE_LIMIT = 1024


@dataclass(frozen=True)
class EffectivePotentials:
    V_geom: np.ndarray
    V_BH: np.ndarray
    V_amb: np.ndarray


def effective_potentials(geom, band):
    if not np.isclose(geom.length, band.length, rtol=1e-12, atol=0.0) or geom.k != band.k:
        raise GridMismatch("band data was built for a different curve")
    kap = geom.kappa_at(band.q)
    return EffectivePotentials(-0.25 * np.sum(kap**2, axis=1), band.V_BH.copy(), np.zeros(band.n))


def periodic_shift(n, sign=1):
    """(S psi)_j = psi_{j+1}, with psi_n = sign * psi_0."""
    S = sp.diags([np.ones(n - 1)], [1], shape=(n, n), format="lil")
    S[n - 1, 0] = sign
    return S.tocsr()


def _mid(x):
    """Link averages (x_j + x_{j+1}) / 2 of a periodic coefficient."""
    return 0.5 * (x + np.roll(x, -1, axis=0))


@dataclass(frozen=True)
class EffectiveOperator:
    eps: float
    order: int
    q: np.ndarray
    a: np.ndarray
    w: np.ndarray
    A: np.ndarray
    B: np.ndarray
    W: np.ndarray
    T: np.ndarray
    K: sp.csr_matrix = field(repr=False)
    M: sp.csr_matrix = field(repr=False)
    loop_sign: int = 1

    @property
    def n(self):
        return self.q.size

    def coefficients(self):
        """Assembled coefficient profiles, for reports."""
        return {"q": self.q, "a": self.a, "w": self.w, "A": self.A, "B": self.B, "W": self.W,
                "T11": self.T[:, 0, 0], "T12": self.T[:, 0, 1], "T22": self.T[:, 1, 1]}


def assemble_effective(geom, band, pots, eps, n=None, order=2):
    """Stiffness and mass matrices of the band-J effective operator.

    ``order`` truncates the corrections: 0 keeps -eps^2 d^2/dq^2 + E_J,
    1 adds the first-order metric and connection terms, 2 keeps everything.
    """
    eps = float(eps)
    if eps <= 0:
        raise ConfigError("eps must be positive")
    if order not in (0, 1, 2):
        raise ConfigError("order must be 0, 1 or 2")
    n = band.n if n is None else int(n)
    if n != band.n or pots.V_BH.size != n:
        raise GridMismatch(f"band sampled on {band.n} points, operator requested on {n}")
    if eps * band.overlap_parameter() >= 1.0:
        raise TubeOverlap(f"eps * sup |n||kappa| = {eps * band.overlap_parameter():.3f} >= 1")
    h = band.length / n
    kap = band.kappa
    zero = np.zeros(n)
    e1 = eps if order >= 1 else 0.0
    e2 = eps**2 if order >= 2 else 0.0
    a = 1.0 + 2 * e1 * np.einsum("ja,ja->j", kap, band.M1) + 3 * e2 * np.einsum("ja,jab,jb->j", kap, band.M2, kap)
    if np.any(a <= 0):
        raise MetricDegenerate(f"effective metric coefficient reaches {a.min():.3g}")
    w = a ** -0.5
    A = band.A if order >= 1 else zero
    B = band.B if order >= 2 else zero
    W = band.E + e2 * (pots.V_geom + pots.V_BH + pots.V_amb)
    T = band.T if order >= 2 else np.zeros((n, 2, 2))

    sgn = band.loop_sign
    S = periodic_shift(n, sgn)
    I = sp.identity(n, format="csr")
    Dp = (S - I) / h
    Av = 0.5 * (S + I)
    Dc = (S - S.T) / (2 * h)
    D2 = (S - 2 * I + S.T) / h**2
    complex_gauge = bool(np.any(A != 0))
    G = eps * Dp - eps**2 * sp.diags(_mid(B)) @ Av
    if complex_gauge:
        G = G - 1j * eps * sp.diags(_mid(A)) @ Av
    wm = _mid(w)
    K = G.conj().T @ sp.diags(_mid(a) * wm * h) @ G + sp.diags(W * w * h)
    if order >= 2 and np.any(T != 0):
        d1, d2, dc = eps * Dp, eps**2 * D2, eps * Dc
        off = d1.T @ sp.diags(_mid(T[:, 0, 0]) * wm * h) @ d1 + d2.T @ sp.diags(T[:, 1, 1] * w * h) @ d2
        cross = dc.T @ sp.diags(T[:, 0, 1] * w * h) @ d2
        K = K - eps**2 * (off + cross + cross.T)
    K = K.tocsr()
    K = (0.5 * (K + K.conj().T)).tocsr()
    M = sp.diags(w * h, format="csr")
    return EffectiveOperator(eps, order, band.q, a, w, A, B, W, T, K, M, sgn)


def effective_spectrum(op, count, dense=None):
    """Lowest ``count`` eigenpairs of K x = lambda M x, M-orthonormal."""
    if count >= op.n:
        raise ConfigError("count must be smaller than the grid size")
    dense = op.n <= DENSE_LIMIT if dense is None else dense
    if dense:
        try:
            vals, vecs = sla.eigh(op.K.toarray(), op.M.toarray(), subset_by_index=[0, count - 1])
        except (np.linalg.LinAlgError, ValueError) as exc:
            raise SolverFailure(str(exc)) from None
        return vals, vecs
    sigma = float(op.W.min()) - 0.05 * (abs(float(op.W.min())) + 1.0)
    try:
        vals, vecs = spla.eigsh(op.K, k=count, M=op.M, sigma=sigma, which="LM",
                                v0=start_vector(op.n), tol=1e-14)
    except spla.ArpackError as exc:
        raise SolverFailure(f"effective eigensolve failed: {exc}") from None
    idx = np.argsort(vals)
    vals, vecs = vals[idx], vecs[:, idx]
    resid = np.linalg.norm(op.K @ vecs - (op.M @ vecs) * vals, axis=0)
    if np.any(resid > 1e-8 * max(1.0, np.abs(vals).max())):
        raise SolverFailure(f"effective eigensolve residual {resid.max():.2e}")
    return vals, vecs


def effective_eigenvalues(op, e_max):
    """All eigenvalues not above ``e_max`` (no vectors; dense reduction)."""
    M = op.M.diagonal()
    scale = 1.0 / np.sqrt(M)
    H = op.K.toarray() * scale[:, None] * scale[None, :]
    return sla.eigh(H, eigvals_only=True, subset_by_value=(-np.inf, float(e_max)), driver="evr")


def effective_propagate(op, psi0, times):
    """psi(t) = exp(-i t H) psi0 via the full eigenbasis; rows follow ``times``."""
    vals, vecs = sla.eigh(op.K.toarray(), op.M.toarray())
    psi0 = np.asarray(psi0, dtype=complex)
    coef = vecs.conj().T @ (op.M @ psi0)
    t = np.atleast_1d(np.asarray(times, dtype=float))
    return (np.exp(-1j * np.outer(t, vals)) * coef) @ vecs.T
