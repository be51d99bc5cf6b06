"""Solver-agnostic conic problem representation and a Clarabel backend.

A :class:`ConicProblem` is a linear objective over a real decision vector
``x`` together with a list of cone blocks, each of the form

    b - A x  in  K

with ``K`` one of the zero cone (equalities), the nonnegative orthant
(inequalities ``A x <= b``), a second-order cone ``{(t, v): ||v|| <= t}`` or
the cone of positive semidefinite matrices, stored as the scaled upper
triangle (column-major, off-diagonals times sqrt(2)).

Complex model variables are stored as interleaved (real, imaginary) pairs.
Complex Hermitian PSD constraints are handled through the real symmetric
embedding ``[[Re Z, -Im Z], [Im Z, Re Z]]``.

Dual sign convention (artifact-wide): the Lagrangian is

    L(x, z) = c^T x + sum_blocks z_b^T (A_b x - b_b),   z_b in K_b^*

so an inequality written as ``expr <= 0`` carries a nonnegative multiplier
and a PSD constraint ``S(x) >= 0`` enters as ``-<Xi, S(x)>`` with ``Xi >= 0``.
"""

from __future__ import annotations

import dataclasses
import enum
import io
import logging
from typing import Sequence

import numpy as np
import scipy.sparse as sp

__all__ = [
    "Affine",
    "ConeKind",
    "ConeBlock",
    "ConicProblem",
    "ConicSolution",
    "ConicSolverError",
    "ProblemBuilder",
    "SolveStatus",
    "Tolerances",
    "embed_hermitian",
    "unembed_hermitian",
    "svec",
    "smat",
    "solve",
    "certify",
    "pack_hermitian_dual",
    "project_soc",
]


log = logging.getLogger(__name__)


class ConicSolverError(RuntimeError):
    """Raised when the backend breaks down numerically."""


class ConeKind(str, enum.Enum):
    ZERO = "zero"
    NONNEG = "nonneg"
    SOC = "soc"
    PSD = "psd"


class SolveStatus(str, enum.Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    NUMERICAL_FAILURE = "numerical-failure"


# ---------------------------------------------------------------------------
# Hermitian embedding helpers
# ---------------------------------------------------------------------------

def embed_hermitian(block: np.ndarray, tol: float = 1e-10) -> np.ndarray:
    """Real symmetric embedding of a complex Hermitian matrix.

    Parameters
    ----------
    block : (q, q) complex array
        Must be Hermitian up to ``tol`` on the skew part.

    Returns
    -------
    (2q, 2q) real array ``[[Re, -Im], [Im, Re]]``.
    """
    z = np.atleast_2d(np.asarray(block, dtype=complex))
    if z.shape[0] != z.shape[1]:
        raise ValueError(f"block must be square, got {z.shape}")
    skew = z - z.conj().T
    if np.max(np.abs(skew), initial=0.0) > tol:
        raise ValueError("block is not Hermitian")
    re, im = z.real, z.imag
    return np.block([[re, -im], [im, re]])


def unembed_hermitian(real_block: np.ndarray) -> np.ndarray:
    """Inverse of :func:`embed_hermitian` for exact embeddings."""
    e = np.asarray(real_block, dtype=float)
    q = e.shape[0] // 2
    return e[:q, :q] + 1j * e[q:, :q]


def adjoint_embed(real_block: np.ndarray) -> np.ndarray:
    """Adjoint of the embedding under the real Frobenius inner product.

    For a symmetric ``Z = [[P, Q^T], [Q, R]]`` returns the Hermitian ``Xi``
    with ``Re<Xi, H> = <Z, embed(H)>`` for every Hermitian ``H``, namely
    ``Xi = (P + R) + j (Q - Q^T)``. Maps PSD matrices to PSD matrices, and
    a dual matrix of the form ``embed(Xi) / 2`` back to ``Xi``.
    """
    e = np.asarray(real_block, dtype=float)
    q = e.shape[0] // 2
    p, r, qq = e[:q, :q], e[q:, q:], e[q:, :q]
    return (p + r) + 1j * (qq - qq.T)


def _triu_index(dim: int) -> tuple[np.ndarray, np.ndarray]:
    # column-major upper triangle: (0,0), (0,1), (1,1), (0,2), ...
    rows, cols = [], []
    for j in range(dim):
        rows.extend(range(j + 1))
        cols.extend([j] * (j + 1))
    return np.asarray(rows), np.asarray(cols)


def svec(mat: np.ndarray) -> np.ndarray:
    """Scaled upper-triangle vectorization used by the PSD cone."""
    mat = np.asarray(mat, dtype=float)
    r, c = _triu_index(mat.shape[0])
    scale = np.where(r == c, 1.0, np.sqrt(2.0))
    return mat[r, c] * scale


def smat(vec: np.ndarray) -> np.ndarray:
    """Inverse of :func:`svec`."""
    vec = np.asarray(vec, dtype=float)
    dim = int(round((np.sqrt(8 * vec.size + 1) - 1) / 2))
    r, c = _triu_index(dim)
    scale = np.where(r == c, 1.0, 1.0 / np.sqrt(2.0))
    out = np.zeros((dim, dim))
    out[r, c] = vec * scale
    out[c, r] = vec * scale
    return out


# ---------------------------------------------------------------------------
# Affine expressions
# ---------------------------------------------------------------------------

@dataclasses.dataclass
class Affine:
    """A vector of complex affine functions of the real decision vector.

    Entry ``i`` equals ``(re[i] @ x + re0[i]) + j (im[i] @ x + im0[i])``.
    Matrix-shaped expressions are kept flattened in row-major order.
    """

    re: sp.csr_matrix
    im: sp.csr_matrix
    re0: np.ndarray
    im0: np.ndarray

    @property
    def size(self) -> int:
        return self.re.shape[0]

    @property
    def nvar(self) -> int:
        return self.re.shape[1]

    @classmethod
    def constant(cls, values, nvar: int) -> "Affine":
        v = np.asarray(values, dtype=complex).ravel()
        zero = sp.csr_matrix((v.size, nvar))
        return cls(zero, zero.copy(), v.real.copy(), v.imag.copy())

    def _grow(self, nvar: int) -> "Affine":
        if nvar == self.nvar:
            return self
        pad = sp.csr_matrix((self.size, nvar - self.nvar))
        return Affine(
            sp.hstack([self.re, pad], format="csr"),
            sp.hstack([self.im, pad], format="csr"),
            self.re0,
            self.im0,
        )

    def __add__(self, other: "Affine") -> "Affine":
        n = max(self.nvar, other.nvar)
        a, b = self._grow(n), other._grow(n)
        return Affine(a.re + b.re, a.im + b.im, a.re0 + b.re0, a.im0 + b.im0)

    def __neg__(self) -> "Affine":
        return Affine(-self.re, -self.im, -self.re0, -self.im0)

    def __sub__(self, other: "Affine") -> "Affine":
        return self + (-other)

    def scale(self, factor: float) -> "Affine":
        return Affine(self.re * factor, self.im * factor,
                      self.re0 * factor, self.im0 * factor)

    def conj(self) -> "Affine":
        return Affine(self.re, -self.im, self.re0, -self.im0)

    def real(self) -> "Affine":
        zero = sp.csr_matrix(self.re.shape)
        return Affine(self.re, zero, self.re0, np.zeros(self.size))

    def imag(self) -> "Affine":
        zero = sp.csr_matrix(self.re.shape)
        return Affine(self.im, zero, self.im0, np.zeros(self.size))

    def rows(self, index) -> "Affine":
        idx = np.asarray(index).ravel()
        return Affine(self.re[idx], self.im[idx], self.re0[idx], self.im0[idx])

    def lmul(self, coef) -> "Affine":
        """Left-multiply by a constant complex matrix: ``coef @ self``."""
        c = sp.csr_matrix(np.atleast_2d(np.asarray(coef, dtype=complex)))
        cr, ci = sp.csr_matrix(c.real), sp.csr_matrix(c.imag)
        re = cr @ self.re - ci @ self.im
        im = cr @ self.im + ci @ self.re
        ec = np.asarray(coef, dtype=complex)
        ec = np.atleast_2d(ec)
        re0 = ec.real @ self.re0 - ec.imag @ self.im0
        im0 = ec.real @ self.im0 + ec.imag @ self.re0
        return Affine(sp.csr_matrix(re), sp.csr_matrix(im), re0, im0)

    def value(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x)[: self.nvar]
        return (self.re @ x + self.re0) + 1j * (self.im @ x + self.im0)

    @staticmethod
    def stack(items: Sequence["Affine"]) -> "Affine":
        n = max(a.nvar for a in items)
        items = [a._grow(n) for a in items]
        return Affine(
            sp.vstack([a.re for a in items], format="csr"),
            sp.vstack([a.im for a in items], format="csr"),
            np.concatenate([a.re0 for a in items]),
            np.concatenate([a.im0 for a in items]),
        )


# ---------------------------------------------------------------------------
# Problem data
# ---------------------------------------------------------------------------

@dataclasses.dataclass(frozen=True)
class ConeBlock:
    """One constraint block ``b - A x in K``."""

    kind: ConeKind
    label: str
    A: sp.csr_matrix
    b: np.ndarray
    dim: int  # cone dimension; matrix side for PSD blocks

    @property
    def rows(self) -> int:
        return self.A.shape[0]


@dataclasses.dataclass(frozen=True)
class VarInfo:
    name: str
    kind: str  # "real" | "complex" | "hermitian"
    shape: tuple[int, ...]
    index: np.ndarray  # real indices; complex -> (..., 2) pairs


@dataclasses.dataclass(frozen=True)
class ConicProblem:
    """Immutable conic program ``min c^T x + c0 s.t. b_i - A_i x in K_i``."""

    c: np.ndarray
    blocks: tuple[ConeBlock, ...]
    variables: dict
    c0: float = 0.0
    meta: dict = dataclasses.field(default_factory=dict, compare=False)

    @property
    def nvar(self) -> int:
        return self.c.size

    def block(self, label: str) -> ConeBlock:
        for blk in self.blocks:
            if blk.label == label:
                return blk
        raise KeyError(label)

    def labels(self) -> list[str]:
        return [blk.label for blk in self.blocks]

    def count(self, kind: ConeKind) -> int:
        return sum(1 for blk in self.blocks if blk.kind == kind)

    def unpack(self, x: np.ndarray) -> dict[str, np.ndarray]:
        """Map a raw solution vector back to named model variables."""
        out = {}
        for name, info in self.variables.items():
            if info.kind == "real":
                out[name] = x[info.index]
            elif info.kind == "complex":
                out[name] = x[info.index[..., 0]] + 1j * x[info.index[..., 1]]
            else:
                out[name] = _hermitian_value(info.index, x)
        return out

    def pack(self, values: dict) -> np.ndarray:
        """Inverse of :meth:`unpack`; variables missing from ``values`` are zero."""
        x = np.zeros(self.nvar)
        for name, info in self.variables.items():
            if name not in values:
                continue
            v = np.asarray(values[name])
            if info.kind == "real":
                x[info.index] = np.real(v)
            elif info.kind == "complex":
                x[info.index[..., 0]] = v.real
                x[info.index[..., 1]] = v.imag
            else:
                iu = np.triu_indices(info.shape[0])
                x[info.index[..., 0][iu]] = v.real[iu]
                off = np.triu_indices(info.shape[0], 1)
                x[info.index[..., 1][off]] = v.imag[off]
        return x

    def dump(self) -> str:
        """Self-describing text dump: dimensions, cone list, sparse triplets."""
        buf = io.StringIO()
        buf.write("CONIC 1\n")
        buf.write(f"NVAR {self.nvar}\n")
        buf.write(f"OBJCONST {self.c0!r}\n")
        buf.write("OBJ\n")
        for j in np.flatnonzero(self.c):
            buf.write(f"{j} {self.c[j]!r}\n")
        for blk in self.blocks:
            A = blk.A.tocoo()
            buf.write(f"BLOCK {blk.kind.value} {blk.label} rows={blk.rows} "
                      f"dim={blk.dim} nnz={A.nnz}\n")
            for i, j, v in zip(A.row, A.col, A.data):
                buf.write(f"A {i} {j} {v!r}\n")
            for i in np.flatnonzero(blk.b):
                buf.write(f"b {i} {blk.b[i]!r}\n")
        buf.write("END\n")
        return buf.getvalue()


def _hermitian_value(index: np.ndarray, x: np.ndarray) -> np.ndarray:
    # index[i, j] = (re_idx, im_idx); diagonal has im_idx = -1
    re = x[index[..., 0]]
    im = np.where(index[..., 1] >= 0, x[np.maximum(index[..., 1], 0)], 0.0)
    q = index.shape[0]
    sign = np.ones((q, q))
    sign[np.tril_indices(q, -1)] = -1.0
    return re + 1j * im * sign


class ProblemBuilder:
    """Incremental construction of a :class:`ConicProblem`.

    Variables are declared first; constraint expressions are
    :class:`Affine` objects over the variables declared so far.
    """

    def __init__(self):
        self._n = 0
        self._vars: dict[str, VarInfo] = {}
        self._blocks: list[tuple] = []
        self._obj: Affine | None = None

    def _alloc(self, count: int) -> np.ndarray:
        idx = np.arange(self._n, self._n + count)
        self._n += count
        return idx

    def _selector(self, idx: np.ndarray, signs=None) -> sp.csr_matrix:
        idx = np.asarray(idx).ravel()
        data = np.ones(idx.size) if signs is None else np.asarray(signs, float).ravel()
        keep = idx >= 0
        rows = np.arange(idx.size)[keep]
        return sp.csr_matrix((data[keep], (rows, idx[keep])), shape=(idx.size, self._n))

    def real(self, name: str, shape=()) -> Affine:
        shape = tuple(np.atleast_1d(shape)) if shape != () else ()
        count = int(np.prod(shape)) if shape else 1
        idx = self._alloc(count)
        self._vars[name] = VarInfo(name, "real", shape, idx.reshape(shape))
        sel = self._selector(idx)
        return Affine(sel, sp.csr_matrix(sel.shape), np.zeros(count), np.zeros(count))

    def complex(self, name: str, shape) -> Affine:
        shape = tuple(np.atleast_1d(shape))
        count = int(np.prod(shape))
        idx = self._alloc(2 * count).reshape(count, 2)  # interleaved re/im
        self._vars[name] = VarInfo(name, "complex", shape, idx.reshape(shape + (2,)))
        return Affine(self._selector(idx[:, 0]), self._selector(idx[:, 1]),
                      np.zeros(count), np.zeros(count))

    def hermitian(self, name: str, q: int) -> Affine:
        """Hermitian ``q x q`` matrix variable (q^2 real parameters)."""
        index = np.full((q, q, 2), -1, dtype=int)
        for i in range(q):
            for j in range(i, q):
                if i == j:
                    index[i, i, 0] = self._alloc(1)[0]
                else:
                    re, im = self._alloc(2)
                    index[i, j] = (re, im)
                    index[j, i] = (re, im)
        self._vars[name] = VarInfo(name, "hermitian", (q, q), index)
        sign = np.ones((q, q))
        sign[np.tril_indices(q, -1)] = -1.0
        return Affine(self._selector(index[..., 0]),
                      self._selector(index[..., 1], sign),
                      np.zeros(q * q), np.zeros(q * q))

    @property
    def nvar(self) -> int:
        return self._n

    def minimize(self, expr: Affine) -> None:
        if expr.size != 1:
            raise ValueError("objective must be scalar")
        self._obj = expr.real()

    def equal(self, expr: Affine, label: str) -> None:
        """Real equality ``Re(expr) == 0`` (pass ``.imag()`` for the other part)."""
        e = expr.real()
        self._blocks.append((ConeKind.ZERO, label, e, e.size))

    def less(self, expr: Affine, label: str) -> None:
        """Real inequality ``Re(expr) <= 0``."""
        e = expr.real()
        self._blocks.append((ConeKind.NONNEG, label, -e, e.size))

    def soc(self, head: Affine, tail: Affine, label: str) -> None:
        """``||tail||_2 <= head`` with ``tail`` complex (split to real pairs)."""
        parts = [head.real()]
        if tail.size:
            real_tail = Affine.stack([tail.real(), tail.imag()])
            parts.append(real_tail)
        e = Affine.stack(parts)
        self._blocks.append((ConeKind.SOC, label, e, e.size))

    def psd(self, mat: Affine, q: int, label: str) -> None:
        """Complex Hermitian ``q x q`` matrix expression ``mat >= 0``.

        ``mat`` is row-major flattened and must be Hermitian by
        construction; the real embedding of size ``2q`` is constrained.
        """
        if mat.size != q * q:
            raise ValueError("matrix expression has the wrong size")
        grid = np.arange(q * q).reshape(q, q)
        re = mat.real()
        im = mat.imag()
        # embedded entry (r, c) of [[Re, -Im], [Im, Re]] in svec order
        rows, cols = _triu_index(2 * q)
        pieces = []
        for r, c in zip(rows, cols):
            rb, rr = divmod(r, q)
            cb, cc = divmod(c, q)
            k = grid[rr, cc]
            # upper triangle only: diagonal blocks hold Re, the
            # upper-right block holds -Im
            if rb == cb:
                pieces.append((re, k, 1.0))
            else:
                pieces.append((im, k, -1.0))
        scale = np.where(rows == cols, 1.0, np.sqrt(2.0))
        # gather rows in bulk per source (re or im)
        src_re = np.array([p[0] is re for p in pieces])
        keys = np.array([p[1] for p in pieces])
        signs = np.array([p[2] for p in pieces]) * scale
        n = max(re.nvar, self._n)
        re_g, im_g = re._grow(n), im._grow(n)
        sel_re = sp.diags(np.where(src_re, signs, 0.0)) @ re_g.re[keys]
        sel_im = sp.diags(np.where(~src_re, signs, 0.0)) @ im_g.re[keys]
        coef = sp.csr_matrix(sel_re + sel_im)
        const = np.where(src_re, re_g.re0[keys], im_g.re0[keys]) * signs
        e = Affine(coef, sp.csr_matrix(coef.shape), const, np.zeros(const.size))
        self._blocks.append((ConeKind.PSD, label, e, 2 * q))

    def build(self) -> ConicProblem:
        n = self._n
        if self._obj is None:
            raise ValueError("no objective set")
        obj = self._obj._grow(n)
        c = np.asarray(obj.re.toarray()).ravel()
        blocks = []
        for kind, label, e, dim in self._blocks:
            e = e._grow(n)
            # cone member s = expr = (coef x + const) = b - A x
            blocks.append(ConeBlock(kind, label, sp.csr_matrix(-e.re), e.re0.copy(), dim))
        return ConicProblem(c, tuple(blocks), dict(self._vars), float(obj.re0[0]))


# ---------------------------------------------------------------------------
# Solving
# ---------------------------------------------------------------------------

@dataclasses.dataclass(frozen=True)
class Tolerances:
    requested: float = 1e-9
    accepted: float = 1e-7
    max_iter: int = 200


@dataclasses.dataclass
class ConicSolution:
    status: SolveStatus
    x: np.ndarray
    objective: float
    dual_objective: float
    duals: dict[str, np.ndarray]  # raw cone duals per block label
    slacks: dict[str, np.ndarray]
    iterations: int
    primal_residual: float
    gap: float
    raw_status: str
    values: dict[str, np.ndarray] = dataclasses.field(default_factory=dict)
    dual_residual: float = np.nan
    attempts: tuple = ()  # backend statuses of every attempt, in order

    @property
    def optimal(self) -> bool:
        return self.status is SolveStatus.OPTIMAL

    def psd_dual(self, label: str) -> np.ndarray:
        """Real symmetric dual matrix of a PSD block."""
        return smat(self.duals[label])

    def hermitian_dual(self, label: str) -> np.ndarray:
        """Complex Hermitian dual of an embedded Hermitian PSD block."""
        return adjoint_embed(self.psd_dual(label))


def pack_hermitian_dual(Xi: np.ndarray) -> np.ndarray:
    """Raw PSD-block dual whose :meth:`ConicSolution.hermitian_dual` is ``Xi``."""
    return svec(embed_hermitian(Xi, tol=1e-8 * (1.0 + np.abs(Xi).max())) / 2.0)


def project_soc(v: np.ndarray) -> np.ndarray:
    """Euclidean projection onto ``{(t, u): ||u|| <= t}``."""
    v = np.asarray(v, dtype=float)
    t, u = v[0], v[1:]
    nu = np.linalg.norm(u)
    if nu <= t:
        return v.copy()
    if nu <= -t:
        return np.zeros_like(v)
    a = (t + nu) / 2.0
    return np.concatenate([[a], u * (a / nu)])


def _clarabel_cone(blk: ConeBlock):
    import clarabel

    if blk.kind is ConeKind.ZERO:
        return clarabel.ZeroConeT(blk.rows)
    if blk.kind is ConeKind.NONNEG:
        return clarabel.NonnegativeConeT(blk.rows)
    if blk.kind is ConeKind.SOC:
        return clarabel.SecondOrderConeT(blk.rows)
    return clarabel.PSDTriangleConeT(blk.dim)


def _cone_distance(blk: ConeBlock, v: np.ndarray) -> float:
    if blk.kind is ConeKind.ZERO:
        return float(np.max(np.abs(v), initial=0.0))
    if blk.kind is ConeKind.NONNEG:
        return float(max(0.0, -np.min(v, initial=0.0)))
    if blk.kind is ConeKind.SOC:
        return float(max(0.0, np.linalg.norm(v[1:]) - v[0]))
    return float(max(0.0, -np.linalg.eigvalsh(smat(v))[0]))


# Setting overrides tried in turn when a solve ends without a certified
# answer; interior-point stalls are usually cured by one of them.
_RETRIES = (
    {},
    {"max_step_fraction": 0.9},
    {"equilibrate_enable": False},
    {"static_regularization_constant": 1e-7, "iterative_refinement_reltol": 1e-14},
)


def solve(problem: ConicProblem, tolerances: Tolerances | None = None,
          check=None) -> ConicSolution:
    """Solve ``problem`` with Clarabel and return primal/dual data.

    Infeasibility is reported through ``status``; a numerical breakdown is
    reported as ``NUMERICAL_FAILURE`` (callers decide whether to raise).
    When an attempt ends without a certified answer, the solve is repeated
    with each entry of ``_RETRIES``; every retry is logged at info level
    and all backend statuses are kept in ``ConicSolution.attempts``.

    ``check``, if given, maps each certified optimal attempt to the
    solution actually returned; an attempt whose mapped solution is a
    numerical failure counts as failed and the ladder continues.
    """
    import clarabel

    tol = tolerances or Tolerances()
    n = problem.nvar
    A = sp.vstack([blk.A for blk in problem.blocks], format="csc")
    b = np.concatenate([blk.b for blk in problem.blocks])
    cones = [_clarabel_cone(blk) for blk in problem.blocks]

    P = sp.csc_matrix((n, n))
    sol = None
    attempts = []
    for extra in _RETRIES:
        if attempts:
            log.info("retrying conic solve (%d rows) with %s after %s",
                     A.shape[0], extra, attempts[-1])
        settings = clarabel.DefaultSettings()
        settings.verbose = False
        settings.tol_gap_abs = tol.requested
        settings.tol_gap_rel = tol.requested
        settings.tol_feas = tol.requested
        settings.tol_ktratio = 1e-7
        settings.max_iter = tol.max_iter
        settings.chordal_decomposition_enable = False
        settings.presolve_enable = False
        for key, value in extra.items():
            setattr(settings, key, value)
        result = clarabel.DefaultSolver(P, problem.c, A, b, cones, settings).solve()
        raw = str(result.status)
        sol = certify(problem, np.asarray(result.x, dtype=float),
                      np.asarray(result.z, dtype=float), tol, raw, result.iterations)
        if check is not None and sol.status is SolveStatus.OPTIMAL:
            sol = check(sol)
        attempts.append(raw if sol.status is not SolveStatus.NUMERICAL_FAILURE
                        else f"{raw} (uncertified)")
        if sol.status is not SolveStatus.NUMERICAL_FAILURE:
            break
    sol.attempts = tuple(attempts)
    return sol


def certify(problem: ConicProblem, x: np.ndarray, z: np.ndarray,
            tolerances: Tolerances | None = None, raw_status: str = "Solved",
            iterations: int = 0) -> ConicSolution:
    """Check a primal-dual pair against ``problem`` and package it.

    The pair is declared optimal when the backend status allows it and the
    relative primal residual, dual residual (stationarity plus dual cone
    membership) and duality gap are all within ``tolerances.accepted``.
    """
    tol = tolerances or Tolerances()
    x = np.asarray(x, dtype=float)
    z = np.asarray(z, dtype=float)
    duals, slacks = {}, {}
    offset = 0
    resid = dresid = 0.0
    grad = problem.c.copy()
    for blk in problem.blocks:
        zb = z[offset:offset + blk.rows]
        v = blk.b - blk.A @ x
        duals[blk.label] = zb
        slacks[blk.label] = v
        offset += blk.rows
        grad += blk.A.T @ zb
        if blk.kind is not ConeKind.ZERO:
            dresid = max(dresid, _cone_distance(blk, zb) / (1.0 + np.max(np.abs(zb), initial=0.0)))

    if raw_status in ("PrimalInfeasible", "AlmostPrimalInfeasible"):
        return ConicSolution(SolveStatus.INFEASIBLE, x, np.inf, np.inf, duals, slacks,
                             iterations, np.nan, np.nan, raw_status)

    for blk in problem.blocks:
        v = slacks[blk.label]
        resid = max(resid, _cone_distance(blk, v) / (1.0 + np.max(np.abs(blk.b), initial=0.0)))
    dresid = max(dresid, float(np.max(np.abs(grad), initial=0.0))
                 / (1.0 + float(np.max(np.abs(problem.c), initial=0.0))))
    pobj = float(problem.c @ x) + problem.c0
    b = np.concatenate([blk.b for blk in problem.blocks])
    dobj = float(-b @ z) + problem.c0
    gap = abs(pobj - dobj) / (1.0 + abs(pobj))

    status = SolveStatus.NUMERICAL_FAILURE
    if (raw_status in ("Solved", "AlmostSolved") and resid <= tol.accepted
            and dresid <= tol.accepted and gap <= tol.accepted):
        status = SolveStatus.OPTIMAL
    sol = ConicSolution(status, x, pobj, dobj, duals, slacks, iterations,
                        resid, gap, raw_status, dual_residual=dresid)
    if status is SolveStatus.OPTIMAL:
        sol.values = problem.unpack(x)
    return sol
