"""Sparse symmetric linear algebra: scaling, SPD solves, deflated eigenpairs, condition numbers.

Direct factorizations use MKL PARDISO through ``pypardiso`` when it can be
loaded and SuperLU otherwise.  Every sparse path has a dense counterpart
used below ``DENSE_LIMIT`` unknowns.
"""
from __future__ import annotations

import glob
import logging
import os
import sys
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

log = logging.getLogger(__name__)

DENSE_LIMIT = 2000
KAPPA_SENTINEL = float("inf")


class SolverError(RuntimeError):
    def __init__(self, msg, residual=None):
        super().__init__(msg if residual is None else f"{msg} (relative residual {residual:.3e})")
        self.residual = residual


class DegenerateSystemError(ValueError):
    pass


# ---------------------------------------------------------------- factorization backends

_PARDISO = None


def _load_pardiso():
    global _PARDISO
    if _PARDISO is not None:
        return _PARDISO or None
    if os.environ.get("CUTFEM_NO_PARDISO"):
        _PARDISO = False
        return None
    if "PYPARDISO_MKL_RT" not in os.environ:
        cands = []
        for base in (sys.prefix, "/usr/local", "/usr", os.path.expanduser("~/.local")):
            cands += sorted(glob.glob(os.path.join(base, "lib", "libmkl_rt.so*")))
        if cands:
            os.environ["PYPARDISO_MKL_RT"] = cands[0]
    try:
        import pypardiso  # noqa: F401
        from pypardiso import PyPardisoSolver

        _PARDISO = PyPardisoSolver
    except Exception:  # library missing or MKL not found
        _PARDISO = False
    return _PARDISO or None


def backend_name() -> str:
    return "pardiso" if _load_pardiso() else "superlu"


class Factorization:
    """Reusable direct factorization of a square sparse matrix.

    ``spd=True`` selects a Cholesky factorization where available, which
    avoids the pivot perturbation of the general LU path.
    """

    def __init__(self, B, spd: bool = False):
        B = sp.csr_matrix(B, dtype=float)
        B.sum_duplicates()
        B.sort_indices()
        self.B = B
        self.n = B.shape[0]
        cls = _load_pardiso() if self.n > 200 else None
        self._pardiso = None
        if cls is not None:
            s = cls(mtype=2 if spd else 11)
            self._P = sp.triu(B, format="csr") if spd else B
            self._P.sort_indices()
            try:
                s.factorize(self._P)
            except Exception as exc:
                raise SolverError(f"factorization failed: {exc}") from exc
            self._pardiso = s
        else:
            with warnings.catch_warnings():
                warnings.simplefilter("error", sp.linalg.MatrixRankWarning)
                try:
                    if spd:
                        # no pivoting: the pivots are those of LDLᵀ and must all be positive
                        self._lu = spla.splu(B.tocsc(), permc_spec="MMD_AT_PLUS_A", diag_pivot_thresh=0.0,
                                             options={"SymmetricMode": True})
                    else:
                        self._lu = spla.splu(B.tocsc(), permc_spec="MMD_AT_PLUS_A")
                except (RuntimeError, sp.linalg.MatrixRankWarning) as exc:
                    raise SolverError(f"factorization failed: {exc}") from exc
                if spd and not np.all(self._lu.U.diagonal() > 0):
                    raise SolverError("matrix is not positive definite")

    def _solve(self, b):
        if self._pardiso is not None:
            return self._pardiso.solve(self._P, np.ascontiguousarray(b))
        return self._lu.solve(b)

    def solve(self, b, refine: int = 3, tol: float = 1e-14):
        b = np.asarray(b, dtype=float)
        x = self._solve(b)
        nb = np.linalg.norm(b)
        if nb == 0:
            return np.zeros_like(b)
        for _ in range(refine):
            r = b - self.B @ x
            if np.linalg.norm(r) <= tol * nb:
                break
            x = x + self._solve(r)
        return x

    def residual(self, x, b) -> float:
        nb = np.linalg.norm(b)
        return float(np.linalg.norm(b - self.B @ x) / (nb if nb > 0 else 1.0))


# ---------------------------------------------------------------- basic operations


def diag_scale(B):
    """Return (d, DBD) with D = diag(d), d_i = B_ii^{-1/2}."""
    dense = not sp.issparse(B)
    diag = np.diag(B) if dense else B.diagonal()
    if np.any(~(diag > 0)):
        raise DegenerateSystemError("nonpositive diagonal entry; stabilization missing or empty support")
    d = 1.0 / np.sqrt(diag)
    if dense:
        S = d[:, None] * B * d[None, :]
        np.fill_diagonal(S, 1.0)
        return d, S
    D = sp.diags(d)
    S = (D @ B @ D).tocsr()
    S.setdiag(1.0)
    return d, S


def solve_spd(B, rhs, tol: float = 1e-10, factor: Factorization | None = None, scaled: bool = True):
    """Solve B x = rhs for symmetric positive definite B; raises SolverError above tol.

    With ``scaled`` the system D B D y = D rhs, x = D y (D the inverse square
    root of the diagonal) is factored and the residual is measured as
    ‖D(rhs − B x)‖ / ‖D rhs‖, which stays meaningful when stiff embedded
    members make the unscaled residual dominated by rounding.  When even the
    scaled system is so ill-conditioned that ``tol`` lies below the rounding
    floor ε‖|S||y|‖/‖D rhs‖ of any double-precision vector, a residual within
    a small multiple of that floor is accepted (backward-stable solution).
    """
    rhs = np.asarray(rhs, dtype=float)
    if not sp.issparse(B):
        x = sla.solve(B, rhs, assume_a="pos")
        res = np.linalg.norm(B @ x - rhs) / max(np.linalg.norm(rhs), 1e-300)
    elif scaled:
        d, S = diag_scale(sp.csr_matrix(B))
        factor = factor or Factorization(S, spd=True)
        y = factor.solve(d * rhs)
        x = d * y
        res = factor.residual(y, d * rhs)
        nb = np.linalg.norm(d * rhs)
        if res > tol and nb > 0:
            floor = np.finfo(float).eps * np.linalg.norm(abs(factor.B) @ np.abs(y)) / nb
            tol = max(tol, 64.0 * floor)
    else:
        factor = factor or Factorization(B, spd=True)
        x = factor.solve(rhs)
        res = factor.residual(x, rhs)
    if not np.all(np.isfinite(x)) or res > tol:
        raise SolverError("SPD solve did not reach tolerance", residual=res)
    return x


class SPDSolver:
    """Scaled Cholesky solver reused for several right-hand sides."""

    def __init__(self, B):
        self.B = sp.csr_matrix(B)
        self.d, S = diag_scale(self.B)
        self.factor = Factorization(S, spd=True)

    def __call__(self, rhs, tol: float = 1e-10):
        return solve_spd(self.B, rhs, tol, factor=self.factor)


def solve_spd_extended(B, rhs, steps: int = 4, tol: float = 1e-10):
    """SPD solve followed by iterative refinement with residuals in extended precision.

    The factorization stays in double precision; residuals rhs − Bx are
    accumulated in ``np.longdouble``.  This recovers double-precision forward
    accuracy for systems whose plain residual stalls at ε‖B‖‖x‖, e.g. bulk
    matrices carrying very stiff embedded beams.
    """
    B = sp.csr_matrix(B)
    solver = SPDSolver(B)
    x = solver(rhs, tol=np.inf).astype(np.longdouble)
    Bl = B.astype(np.longdouble)
    bl = np.asarray(rhs, dtype=np.longdouble)
    for _ in range(steps):
        r = np.asarray(bl - Bl @ x, dtype=float)
        x = x + solver.factor.solve(solver.d * r, refine=0).astype(np.longdouble) * solver.d
    r = np.asarray(bl - Bl @ x, dtype=float)
    d = solver.d
    res = np.linalg.norm(d * r) / max(np.linalg.norm(d * np.asarray(rhs, dtype=float)), 1e-300)
    if not np.all(np.isfinite(np.asarray(x, dtype=float))) or res > tol:
        raise SolverError("extended-precision refinement did not reach tolerance", residual=res)
    return np.asarray(x, dtype=float)


def quadratic_form(B, u, v=None) -> float:
    """uᵀ B v accumulated in extended precision."""
    Bl = sp.csr_matrix(B).astype(np.longdouble)
    ul = np.asarray(u, dtype=np.longdouble)
    vl = ul if v is None else np.asarray(v, dtype=np.longdouble)
    return float(ul @ (Bl @ vl))


def rigid_body_basis(space, M=None):
    """Three M-orthonormal interpolants of (1,0), (0,1), (−y, x) (rotation about the node centroid)."""
    X = space.node_coords
    c = X.mean(axis=0)
    R = np.zeros((space.n_dofs, 3))
    R[0::2, 0] = 1.0
    R[1::2, 1] = 1.0
    R[0::2, 2] = -(X[:, 1] - c[1])
    R[1::2, 2] = X[:, 0] - c[0]
    return m_orthonormalize(R, M)


def m_orthonormalize(V, M=None):
    V = np.asarray(V, dtype=float)
    for _ in range(2):
        G = V.T @ (V if M is None else M @ V)
        L = np.linalg.cholesky(0.5 * (G + G.T))
        V = sla.solve_triangular(L, V.T, lower=True).T
    return V


def complement_basis(R, M=None):
    """Orthonormal basis of {x : Rᵀ M x = 0} (dense)."""
    C = R if M is None else M @ R
    Q, _ = np.linalg.qr(C, mode="complete")
    return Q[:, C.shape[1]:]


# ---------------------------------------------------------------- eigenvalues


@dataclass
class EigenResult:
    values: np.ndarray
    vectors: np.ndarray
    residuals: np.ndarray
    shift: float = 0.0


def _norm1(B):
    return float(abs(B).sum(axis=0).max()) if sp.issparse(B) else float(np.abs(B).sum(axis=0).max())


def _residuals(A, M, lam, V):
    """Normwise backward errors ‖Au − λMu‖ / ((‖A‖₁ + |λ|‖M‖₁)‖u‖)."""
    na, nm = _norm1(A), _norm1(M)
    out = np.empty(len(lam))
    for i, l in enumerate(lam):
        v = V[:, i]
        r = A @ v - l * (M @ v)
        out[i] = np.linalg.norm(r) / max((na + abs(l) * nm) * np.linalg.norm(v), 1e-300)
    return out


def _normalize(M, V):
    s = np.sqrt(np.einsum("ij,ij->j", V, M @ V))
    return V / s


def bordered_operator(A, M, sigma, R):
    """Solver for [[A − σM, c·MR], [c·(MR)ᵀ, 0]] returning the first block of the solution.

    The border is scaled by c so that its entries match the magnitude of A,
    which keeps pivoting well behaved.  The first block x satisfies Rᵀ M x = 0.
    """
    n = A.shape[0]
    K = (A - sigma * M).tocsr() if sigma else sp.csr_matrix(A)
    if R is None or R.shape[1] == 0:
        fac = Factorization(K)
        return fac, (lambda b: fac.solve(b))
    MR = M @ R
    m = R.shape[1]
    c = abs(K.diagonal()).max() / max(np.abs(MR).max(), 1e-300)
    big = sp.bmat([[K, sp.csr_matrix(c * MR)], [sp.csr_matrix(c * MR.T), None]], format="csr")
    fac = Factorization(big)

    def apply(b):
        rhs = np.concatenate([b, np.zeros(m)])
        return fac.solve(rhs, refine=6)[:n]

    return fac, apply


def solve_free(A, M, R, rhs, tol: float = 1e-10):
    """Solve A x = P rhs on the M-orthogonal complement of the rigid modes R.

    The load is first projected, rhs ← rhs − M R (Rᵀ rhs), so the singular
    system is consistent; the bordered solve then fixes the rigid component.
    """
    b = rhs - M @ (R @ (R.T @ rhs))
    _, apply = bordered_operator(sp.csr_matrix(A), sp.csr_matrix(M), 0.0, R)
    x = apply(b)
    x = x - R @ (R.T @ (M @ x))
    nb = np.linalg.norm(b)
    res = np.linalg.norm(A @ x - b) / (nb if nb > 0 else 1.0)
    if res > tol:
        floor = np.finfo(float).eps * np.linalg.norm(abs(A) @ np.abs(x)) / (nb if nb > 0 else 1.0)
        if res > max(tol, 64 * floor):
            raise SolverError("free solve did not reach tolerance", residual=res)
    return x


def _pencil_scale(A, M):
    return float(abs(A.diagonal()).max() / max(abs(M.diagonal()).max(), 1e-300))


def generalized_eigs(A, M, k: int = 6, sigma: float = 0.0, deflation=None, tol: float = 1e-8,
                     dense: bool | None = None, max_retries: int = 3) -> EigenResult:
    """k eigenpairs of A u = λ M u nearest the shift among vectors M-orthogonal to ``deflation``.

    Below DENSE_LIMIT the problem is solved densely on the deflated
    complement.  Otherwise shift-invert Lanczos is used: for shifts at or
    below the spectrum the shifted matrix A − σ'M (σ' = σ − δ with a small
    δ > 0) is SPD and factored by Cholesky, and the deflation space, an exact
    invariant subspace, is projected out of every iterate.  Residuals are
    normwise backward errors and must lie below ``tol``.
    """
    n = A.shape[0]
    if k < 1:
        raise ValueError("k must be at least 1")
    R = None
    if deflation is not None:
        R = m_orthonormalize(np.asarray(deflation, dtype=float), M)
    if dense is None:
        dense = n < DENSE_LIMIT
    if dense:
        Ad = A.toarray() if sp.issparse(A) else np.asarray(A, dtype=float)
        Md = M.toarray() if sp.issparse(M) else np.asarray(M, dtype=float)
        if R is not None:
            Q = complement_basis(R, Md)
            lam, W = sla.eigh(Q.T @ Ad @ Q, Q.T @ Md @ Q)
            V = Q @ W
        else:
            lam, V = sla.eigh(Ad, Md)
        idx = np.sort(np.argsort(np.abs(lam - sigma), kind="stable")[:k])
        lam, V = lam[idx], _normalize(Md, V[:, idx])
        return EigenResult(lam, V, _residuals(Ad, Md, lam, V), sigma)
    A = sp.csr_matrix(A)
    M = sp.csr_matrix(M)
    scale = _pencil_scale(A, M)
    below = sigma <= 0
    shift = sigma - 1e-6 * scale if below else sigma
    last = None

    def project(v):
        return v if R is None else v - R @ (R.T @ (M @ v))

    for attempt in range(max_retries + 1):
        try:
            fac = Factorization(A - shift * M, spd=below)
            op = spla.LinearOperator((n, n), matvec=lambda b: project(fac.solve(b)), dtype=float)
            v0 = project(np.random.default_rng(1234).standard_normal(n))
            lam, V = spla.eigsh(A, k=k, M=M, sigma=shift, which="LM", OPinv=op, v0=v0, tol=1e-13,
                                ncv=max(2 * k + 1, 24))
            V = _normalize(M, project(V))
            lam = np.einsum("ij,ij->j", V, A @ V)
            o = np.argsort(lam)
            lam, V = lam[o], V[:, o]
            res = _residuals(A, M, lam, V)
            if np.all(res <= tol):
                return EigenResult(lam, V, res, shift)
            last = SolverError("eigen residual above tolerance", residual=float(res.max()))
        except (SolverError, spla.ArpackError, RuntimeError) as exc:
            last = exc
        shift = shift - (attempt + 1) * 1e-5 * scale if below else shift * (1 + (-1) ** attempt * 1e-6 * (attempt + 1))
        log.info("retrying eigen solve with perturbed shift %g", shift)
    raise SolverError(f"eigen solve failed: {last}")


# ---------------------------------------------------------------- condition numbers


def _extreme_sparse(B):
    lmax = spla.eigsh(B, k=1, which="LA", return_eigenvectors=False, tol=1e-6, ncv=30)[0]
    try:
        fac = Factorization(B)
    except SolverError:
        return lmax, 0.0
    op = spla.LinearOperator(B.shape, matvec=fac.solve, dtype=float)
    try:
        mu = spla.eigsh(op, k=1, which="LM", return_eigenvectors=False, tol=1e-6, ncv=30)[0]
    except spla.ArpackNoConvergence:
        return lmax, 0.0
    lmin = 1.0 / mu if mu != 0 else 0.0
    return lmax, lmin


def condition_estimate(B, dense: bool | None = None) -> float:
    """κ₂(B) = max|λ| / min|λ| of a symmetric matrix; inf for numerically singular B."""
    n = B.shape[0]
    if dense is None:
        dense = n <= DENSE_LIMIT
    if dense:
        Bd = B.toarray() if sp.issparse(B) else np.asarray(B, dtype=float)
        ev = np.abs(sla.eigvalsh(0.5 * (Bd + Bd.T)))
        lmax, lmin = ev.max(), ev.min()
    else:
        lmax, lmin = _extreme_sparse(sp.csr_matrix(B))
        lmax, lmin = abs(lmax), abs(lmin)
    if lmin == 0 or not np.isfinite(lmin) or lmax / lmin > 1e300:
        return KAPPA_SENTINEL
    return float(lmax / lmin)
