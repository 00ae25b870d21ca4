"""Small dense conic programs over Hermitian PSD blocks.

Programs are assembled with a light expression layer (affine scalars and
affine real-symmetric matrices over a flat real variable vector) and then
compiled for cvxopt's cone LP solver, a primal-dual interior-point method
with Nesterov-Todd scaling that detects infeasibility through a
self-dual embedding.  Hermitian blocks are parametrized by orthonormal real
coordinates and enter cone constraints through the real embedding
[[Re X, -Im X], [Im X, Re X]].
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
import cvxopt
from cvxopt import solvers

SQRT2 = np.sqrt(2.0)


class Status(str, Enum):
    OPTIMAL = "Optimal"
    INFEASIBLE = "Infeasible"
    MAX_ITER = "MaxIter"
    NUMERICAL_FAILURE = "NumericalFailure"


class SolverError(RuntimeError):
    def __init__(self, status, message=""):
        super().__init__(f"{status.value}: {message}" if message else status.value)
        self.status = status


# ---------------------------------------------------------------- coordinates

def _triu_pairs(d):
    return [(m, n) for m in range(d) for n in range(m + 1, d)]


def herm_basis(d: int, real: bool = False) -> np.ndarray:
    """Orthonormal basis (under Re tr(XY)) of d x d Hermitian (or real symmetric) matrices."""
    mats = []
    for n in range(d):
        E = np.zeros((d, d), dtype=complex)
        E[n, n] = 1
        mats.append(E)
    for m, n in _triu_pairs(d):
        E = np.zeros((d, d), dtype=complex)
        E[m, n] = E[n, m] = 1 / SQRT2
        mats.append(E)
        if not real:
            E = np.zeros((d, d), dtype=complex)
            E[m, n], E[n, m] = 1j / SQRT2, -1j / SQRT2
            mats.append(E)
    return np.array(mats)


def herm_to_coords(X, real=False) -> np.ndarray:
    X = np.asarray(X)
    d = X.shape[0]
    out = [np.real(np.diag(X))]
    if d > 1:
        iu = np.triu_indices(d, 1)
        off = X[iu]
        if real:
            out.append(SQRT2 * np.real(off))
        else:
            out.append(np.column_stack([SQRT2 * off.real, SQRT2 * off.imag]).ravel())
    return np.concatenate(out)


def coords_to_herm(x, d, real=False) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    X = np.zeros((d, d), dtype=float if real else complex)
    X[np.diag_indices(d)] = x[:d]
    if d > 1:
        iu = np.triu_indices(d, 1)
        if real:
            off = x[d:] / SQRT2
        else:
            pairs = x[d:].reshape(-1, 2)
            off = (pairs[:, 0] + 1j * pairs[:, 1]) / SQRT2
        X[iu] = off
        X[(iu[1], iu[0])] = np.conj(off)
    return X


def herm_embed(X) -> np.ndarray:
    X = np.asarray(X)
    return np.block([[X.real, -X.imag], [X.imag, X.real]])


def herm_extract(S) -> np.ndarray:
    d = S.shape[0] // 2
    re = (S[:d, :d] + S[d:, d:]) / 2
    im = (S[d:, :d] - S[:d, d:]) / 2
    X = re + 1j * im
    return (X + X.conj().T) / 2


# ---------------------------------------------------------------- expressions

@dataclass
class LinExpr:
    """Affine real scalar: const + coef . x[idx]."""

    idx: np.ndarray
    coef: np.ndarray
    const: float = 0.0

    @staticmethod
    def constant(c):
        return LinExpr(np.zeros(0, dtype=int), np.zeros(0), float(c))

    def __add__(self, other):
        if not isinstance(other, LinExpr):
            return LinExpr(self.idx, self.coef, self.const + float(other))
        return LinExpr(np.concatenate([self.idx, other.idx]),
                       np.concatenate([self.coef, other.coef]), self.const + other.const)

    __radd__ = __add__

    def __neg__(self):
        return LinExpr(self.idx, -self.coef, -self.const)

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, s):
        s = float(s)
        return LinExpr(self.idx, s * self.coef, s * self.const)

    __rmul__ = __mul__

    def dense(self, n):
        a = np.zeros(n)
        np.add.at(a, self.idx, self.coef)
        return a

    def value(self, x):
        return float(self.const + self.coef @ np.asarray(x)[self.idx])


def lin_sum(exprs):
    out = LinExpr.constant(0.0)
    for e in exprs:
        out = out + e
    return out


@dataclass
class MatExpr:
    """Affine real symmetric matrix: const + sum_i x[idx_i] * mats_i."""

    const: np.ndarray
    idx: np.ndarray
    mats: np.ndarray

    @property
    def dim(self):
        return self.const.shape[0]

    @staticmethod
    def constant(C):
        C = np.asarray(C, dtype=float)
        return MatExpr(C, np.zeros(0, dtype=int), np.zeros((0,) + C.shape))

    def __add__(self, other):
        if not isinstance(other, MatExpr):
            return MatExpr(self.const + other, self.idx, self.mats)
        return MatExpr(self.const + other.const, np.concatenate([self.idx, other.idx]),
                       np.concatenate([self.mats, other.mats]))

    def __neg__(self):
        return MatExpr(-self.const, self.idx, -self.mats)

    def __sub__(self, other):
        return self + (-other)

    def __mul__(self, s):
        return MatExpr(s * self.const, self.idx, s * self.mats)

    __rmul__ = __mul__

    def value(self, x):
        x = np.asarray(x)
        return self.const + np.tensordot(x[self.idx], self.mats, axes=1)

    @staticmethod
    def from_entries(entries):
        """Symmetric matrix expression from an upper-triangular grid of LinExpr/floats."""
        d = len(entries)
        const = np.zeros((d, d))
        idx, mats = [], []
        for i in range(d):
            for j in range(i, d):
                e = entries[i][j]
                if not isinstance(e, LinExpr):
                    e = LinExpr.constant(e)
                const[i, j] = const[j, i] = e.const
                if e.idx.size:
                    M = np.zeros((e.idx.size, d, d))
                    M[:, i, j] = e.coef
                    M[:, j, i] = e.coef
                    idx.append(e.idx)
                    mats.append(M)
        if idx:
            return MatExpr(const, np.concatenate(idx), np.concatenate(mats))
        return MatExpr.constant(const)


@dataclass
class Var:
    """Block of real variables: free vector, Hermitian or real symmetric matrix."""

    name: str
    kind: str  # "free", "herm", "sym"
    dim: int
    offset: int
    size: int

    @property
    def indices(self):
        return np.arange(self.offset, self.offset + self.size)

    def __getitem__(self, i):
        if self.kind != "free":
            raise TypeError("index only free variables")
        return LinExpr(np.array([self.offset + i]), np.array([1.0]))

    def inner(self, C) -> LinExpr:
        """Re tr(C X) for a matrix block X (C is symmetrized)."""
        C = np.asarray(C)
        C = (C + C.conj().T) / 2
        return LinExpr(self.indices, herm_to_coords(C, real=self.kind == "sym"))

    def trace(self) -> LinExpr:
        return self.inner(np.eye(self.dim))

    def entry_diag(self, n) -> LinExpr:
        return LinExpr(np.array([self.offset + n]), np.array([1.0]))

    def embed(self) -> MatExpr:
        """Real symmetric embedding of the block as an affine matrix."""
        real = self.kind == "sym"
        basis = herm_basis(self.dim, real=real)
        mats = basis.real if real else np.array([herm_embed(E) for E in basis])
        d = mats.shape[1]
        return MatExpr(np.zeros((d, d)), self.indices, mats)

    def linmap(self, A: np.ndarray, b: np.ndarray | None = None) -> "VecExpr":
        """Affine vector A @ coords + b."""
        return VecExpr(self.indices, np.asarray(A, dtype=float),
                       np.zeros(A.shape[0]) if b is None else np.asarray(b, dtype=float))


@dataclass
class VecExpr:
    """Affine real vector: A @ x[idx] + b."""

    idx: np.ndarray
    A: np.ndarray
    b: np.ndarray

    def __add__(self, other):
        if not isinstance(other, VecExpr):
            return VecExpr(self.idx, self.A, self.b + other)
        return VecExpr(np.concatenate([self.idx, other.idx]),
                       np.hstack([self.A, other.A]), self.b + other.b)

    def value(self, x):
        return self.A @ np.asarray(x)[self.idx] + self.b


# ---------------------------------------------------------------- program

@dataclass
class ConicProgram:
    """min objective  s.t.  eqs == 0, ineqs <= 0, lmis >= 0 (PSD), arrows."""

    n: int = 0
    variables: dict = field(default_factory=dict)
    objective: LinExpr = field(default_factory=lambda: LinExpr.constant(0.0))
    eqs: list = field(default_factory=list)
    ineqs: list = field(default_factory=list)
    lmis: list = field(default_factory=list)
    arrows: list = field(default_factory=list)

    def _add(self, name, kind, dim, size):
        if name in self.variables:
            raise ValueError(f"duplicate variable {name!r}")
        v = Var(name, kind, dim, self.n, size)
        self.variables[name] = v
        self.n += size
        return v

    def add_free(self, name, count=1) -> Var:
        return self._add(name, "free", count, count)

    def add_hermitian(self, name, dim, psd=True) -> Var:
        v = self._add(name, "herm", dim, dim * dim)
        if psd:
            self.add_lmi(v.embed(), name=f"{name}>=0")
        return v

    def add_symmetric(self, name, dim, psd=True) -> Var:
        v = self._add(name, "sym", dim, dim * (dim + 1) // 2)
        if psd:
            self.add_lmi(v.embed(), name=f"{name}>=0")
        return v

    @property
    def psd_blocks(self):
        return [(v.name, v.dim) for v in self.variables.values() if v.kind != "free"]

    def minimize(self, expr: LinExpr):
        self.objective = self.objective + expr

    def add_eq(self, expr: LinExpr, rhs=0.0):
        self.eqs.append(expr - rhs)

    def add_ineq(self, expr: LinExpr, sense: str, rhs=0.0):
        if sense == "<=":
            self.ineqs.append(expr - rhs)
        elif sense == ">=":
            self.ineqs.append(rhs - expr)
        else:
            raise ValueError(f"unknown sense {sense!r}")

    def add_lmi(self, expr: MatExpr, name="lmi"):
        self.lmis.append((name, expr))

    def add_arrow(self, t: LinExpr, e: VecExpr, name="arrow"):
        """[[t, e^T], [e, I]] >= 0, i.e. t >= ||e||^2."""
        self.arrows.append((name, t, e))


def epigraph_trace_inverse(prog: ConicProgram, U: Var, name="V") -> Var:
    """Add V with [[V, I], [I, U]] >= 0 and objective tr(V); tr V = tr U^-1 at optimum."""
    d = U.dim
    V = prog.add_symmetric(name, d, psd=False) if U.kind == "sym" else prog.add_hermitian(name, d, psd=False)
    ve, ue = V.embed(), U.embed()
    m = ve.dim
    pad = lambda E, top: MatExpr(np.zeros((2 * m, 2 * m)), E.idx,
                                 np.array([np.block([[M, np.zeros((m, m))], [np.zeros((m, m)), np.zeros((m, m))]])
                                           if top else
                                           np.block([[np.zeros((m, m)), np.zeros((m, m))], [np.zeros((m, m)), M]])
                                           for M in E.mats]))
    eye = np.zeros((2 * m, 2 * m))
    eye[:m, m:] = eye[m:, :m] = np.eye(m)
    prog.add_lmi(pad(ve, True) + pad(ue, False) + eye, name=f"{name}-epigraph")
    prog.minimize(V.trace())
    return V


def epigraph_frobenius(prog: ConicProgram, E: VecExpr, weight=1.0, name="t") -> Var:
    """Add t >= ||E||^2 through [[t, E^T], [E, I]] >= 0; objective weight * t.

    E holds the real coordinates of the residual, so ||E||_2 equals the
    Frobenius norm of the Hermitian (or real) residual matrix.
    """
    t = prog.add_free(name)
    prog.add_arrow(t[0], E, name=f"{name}-epigraph")
    prog.minimize(weight * t[0])
    return t


# ---------------------------------------------------------------- solve

@dataclass
class ConicSolution:
    x: np.ndarray
    block_values: dict
    linear_values: dict
    objective_value: float
    dual_objective: float
    duality_gap: float
    status: Status
    iterations: int
    duals: dict = field(default_factory=dict)

    def value(self, v: Var | LinExpr):
        if isinstance(v, LinExpr):
            return v.value(self.x)
        if v.kind == "free":
            return self.linear_values[v.name]
        return self.block_values[v.name]


def _vec(M):
    return M.reshape(-1, order="F")


def _compile(prog, lower_arrows):
    n = prog.n
    c = prog.objective.dense(n)
    rows_l, h_l, scale_l = [], [], []
    for e in prog.ineqs:
        a = e.dense(n)
        s = max(np.linalg.norm(a), 1e-300)
        rows_l.append(a / s)
        h_l.append(-e.const / s)
        scale_l.append(s)
    q_dims, G_q, h_q = [], [], []
    s_dims, G_s, h_s, scale_s = [], [], [], []

    def lmi_rows(expr):
        d = expr.dim
        Gb = np.zeros((d * d, n))
        np.add.at(Gb.T, expr.idx, -np.array([_vec(M) for M in expr.mats]).reshape(len(expr.idx), d * d))
        hb = _vec(expr.const).copy()
        s = max(np.max(np.abs(Gb)), 1e-300)
        return Gb / s, hb / s, s, d

    for _, expr in prog.lmis:
        Gb, hb, s, d = lmi_rows(expr)
        G_s.append(Gb); h_s.append(hb); scale_s.append(s); s_dims.append(d)
    arrow_kinds = []
    for _, t, e in prog.arrows:
        m = e.A.shape[0]
        tvec = t.dense(n)
        Ae = np.zeros((m, n))
        np.add.at(Ae.T, e.idx, e.A.T)
        if lower_arrows:
            # t >= ||e||^2  <=>  ||(2e, t-1)|| <= t+1
            Gq = np.vstack([-tvec, -2 * Ae, -tvec])
            hq = np.concatenate([[1 + t.const], 2 * e.b, [t.const - 1]])
            G_q.append(Gq); h_q.append(hq); q_dims.append(m + 2)
            arrow_kinds.append("soc")
        else:
            d = m + 1
            mats = np.zeros((n, d, d))
            mats[:, 0, 0] = tvec
            mats[:, 0, 1:] = Ae.T
            mats[:, 1:, 0] = Ae.T
            const = np.eye(d)
            const[0, 0] = t.const
            const[0, 1:] = const[1:, 0] = e.b
            Gb = -mats.transpose(0, 2, 1).reshape(n, d * d).T
            G_s.append(Gb); h_s.append(_vec(const)); scale_s.append(1.0); s_dims.append(d)
            arrow_kinds.append("psd")
    A_rows, b_rows, scale_eq = [], [], []
    for e in prog.eqs:
        a = e.dense(n)
        s = max(np.linalg.norm(a), 1e-300)
        A_rows.append(a / s)
        b_rows.append(-e.const / s)
        scale_eq.append(s)
    G = np.vstack([np.array(rows_l).reshape(-1, n)] + G_q + G_s)
    h = np.concatenate([np.array(h_l)] + h_q + h_s) if (h_l or h_q or h_s) else np.zeros(0)
    A = np.array(A_rows).reshape(-1, n)
    b = np.array(b_rows)
    dims = {"l": len(rows_l), "q": q_dims, "s": s_dims}
    meta = {"scale_l": np.array(scale_l), "scale_s": scale_s, "scale_eq": np.array(scale_eq),
            "arrow_kinds": arrow_kinds, "n_lmi": len(prog.lmis)}
    return c, G, h, A, b, dims, meta


def _sym_from_lower(v, d):
    M = v.reshape(d, d, order="F")
    L = np.tril(M)
    return L + np.tril(L, -1).T


def solve(prog: ConicProgram, tol: float = 1e-7, max_iter: int = 200,
          lower_arrows: bool = True) -> ConicSolution:
    """Solve with a primal-dual interior-point method.

    Frobenius epigraph arrows [[t, e^T], [e, I]] are passed to the solver
    as the equivalent rotated second-order cone unless lower_arrows is
    False (same feasible set; the cone form is much cheaper per iteration).
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    c, G, h, A, b, dims, meta = _compile(prog, lower_arrows)
    args = dict(c=cvxopt.matrix(c), G=cvxopt.matrix(G), h=cvxopt.matrix(h), dims=dims)
    if A.shape[0]:
        args.update(A=cvxopt.matrix(A), b=cvxopt.matrix(b))
    sol = None
    # stop criteria a decade tighter than tol first; the iteration can break down
    # numerically that close to the boundary, so fall back to tol itself
    for stop in (tol / 10, tol):
        opts = {"show_progress": False, "maxiters": max_iter, "abstol": stop, "reltol": stop,
                "feastol": stop, "refinement": 2}
        for kkt in ("chol", "qr", "ldl"):
            try:
                res = solvers.conelp(options=opts, kktsolver=kkt, **args)
            except (ArithmeticError, ValueError):
                continue
            sol = _accept(prog, res, A, dims, meta, tol, max_iter)
            if sol.status in (Status.OPTIMAL, Status.INFEASIBLE):
                return sol
    return sol if sol is not None else _failed(prog)


def _accept(prog, res, A, dims, meta, tol, max_iter):
    if res["status"] == "primal infeasible":
        return _failed(prog, Status.INFEASIBLE, iterations=res.get("iterations", 0))
    if res["x"] is None:
        return _failed(prog, iterations=res.get("iterations", 0))
    x = np.array(res["x"]).ravel()
    z = np.array(res["z"]).ravel()
    y = np.array(res["y"]).ravel() if A.shape[0] else np.zeros(0)
    duals = _unpack_duals(z, y, dims, meta)
    sol = _make_solution(prog, x, duals, Status.OPTIMAL, res.get("iterations", 0))
    if res["status"] != "optimal":
        rep = check_kkt(prog, sol)
        scale = 1 + abs(sol.objective_value)
        ok = (rep.primal_residual < tol * scale and rep.dual_residual < tol * scale * 10
              and abs(rep.gap) < tol * scale * 10)
        if not ok:
            sol.status = Status.MAX_ITER if res.get("iterations", 0) >= max_iter else Status.NUMERICAL_FAILURE
            if res["status"] == "dual infeasible":
                sol.status = Status.NUMERICAL_FAILURE
    return sol


def _failed(prog, status=Status.NUMERICAL_FAILURE, iterations=0):
    return ConicSolution(np.full(prog.n, np.nan), {}, {}, np.nan, np.nan, np.nan, status, iterations)


def _unpack_duals(z, y, dims, meta):
    pos = 0
    lam = z[pos:pos + dims["l"]] / meta["scale_l"] if dims["l"] else np.zeros(0)
    pos += dims["l"]
    socs = []
    for m in dims["q"]:
        socs.append(z[pos:pos + m])
        pos += m
    mats = []
    for d, s in zip(dims["s"], meta["scale_s"]):
        mats.append(_sym_from_lower(z[pos:pos + d * d], d) / s)
        pos += d * d
    lmi_Z = mats[:meta["n_lmi"]]
    arrow_psd = iter(mats[meta["n_lmi"]:])
    soc_iter = iter(socs)
    arrows = [("soc", next(soc_iter)) if k == "soc" else ("psd", next(arrow_psd))
              for k in meta["arrow_kinds"]]
    return {"eq": y / meta["scale_eq"] if y.size else y, "ineq": lam, "lmi": lmi_Z, "arrow": arrows}


def _make_solution(prog, x, duals, status, iterations):
    blocks, linear = {}, {}
    for v in prog.variables.values():
        xv = x[v.offset:v.offset + v.size]
        if v.kind == "free":
            linear[v.name] = xv.copy()
        else:
            blocks[v.name] = coords_to_herm(xv, v.dim, real=v.kind == "sym")
    obj = prog.objective.value(x)
    sol = ConicSolution(x, blocks, linear, obj, np.nan, np.nan, status, iterations, duals)
    dual_obj = _dual_objective(prog, duals)
    sol.dual_objective = dual_obj
    sol.duality_gap = obj - dual_obj
    return sol


def _arrow_matrix(t, e, x):
    ev = e.value(x)
    d = ev.size + 1
    M = np.eye(d)
    M[0, 0] = t.value(x)
    M[0, 1:] = M[1:, 0] = ev
    return M


def _dual_objective(prog, duals):
    g = prog.objective.const
    g += sum(yi * e.const for yi, e in zip(duals["eq"], prog.eqs))
    g += sum(li * e.const for li, e in zip(duals["ineq"], prog.ineqs))
    for Z, (_, expr) in zip(duals["lmi"], prog.lmis):
        g -= np.sum(Z * expr.const)
    for (kind, d), (_, t, e) in zip(duals["arrow"], prog.arrows):
        if kind == "psd":
            M0 = np.eye(e.b.size + 1)
            M0[0, 0] = t.const
            M0[0, 1:] = M0[1:, 0] = e.b
            g -= np.sum(d * M0)
        else:
            h = np.concatenate([[1 + t.const], 2 * e.b, [t.const - 1]])
            g -= h @ d
    return float(g)


@dataclass
class KktReport:
    primal_residual: float
    dual_residual: float
    gap: float
    min_eig: float
    dual_min_eig: float
    gap_defined: bool


def check_kkt(prog: ConicProgram, sol: ConicSolution) -> KktReport:
    """Recompute feasibility, stationarity and gap from the program data."""
    if sol.status == Status.INFEASIBLE or not np.all(np.isfinite(sol.x)):
        return KktReport(np.nan, np.nan, np.nan, np.nan, np.nan, False)
    x, n = sol.x, prog.n
    pres = [abs(e.value(x)) for e in prog.eqs]
    pres += [max(e.value(x), 0.0) for e in prog.ineqs]
    eigs = [np.linalg.eigvalsh(expr.value(x))[0] for _, expr in prog.lmis]
    eigs += [np.linalg.eigvalsh(_arrow_matrix(t, e, x))[0] for _, t, e in prog.arrows]
    min_eig = min(eigs) if eigs else np.inf
    pres.append(max(-min_eig, 0.0))

    grad = prog.objective.dense(n)
    for yi, e in zip(sol.duals["eq"], prog.eqs):
        grad += yi * e.dense(n)
    for li, e in zip(sol.duals["ineq"], prog.ineqs):
        grad += li * e.dense(n)
    dual_eigs = [np.min(sol.duals["ineq"], initial=np.inf)]
    for Z, (_, expr) in zip(sol.duals["lmi"], prog.lmis):
        np.add.at(grad, expr.idx, -np.einsum("kij,ij->k", expr.mats, Z))
        dual_eigs.append(np.linalg.eigvalsh(Z)[0])
    for (kind, d), (_, t, e) in zip(sol.duals["arrow"], prog.arrows):
        if kind == "psd":
            # <Z, M(x)> with M linear in t (corner) and e (border)
            np.add.at(grad, t.idx, -t.coef * d[0, 0])
            np.add.at(grad, e.idx, -2 * e.A.T @ d[1:, 0])
            dual_eigs.append(np.linalg.eigvalsh(d)[0])
        else:
            # Lowered form: G^T z with G = [-t; -2A; -t]
            np.add.at(grad, t.idx, -t.coef * (d[0] + d[-1]))
            np.add.at(grad, e.idx, -2 * e.A.T @ d[1:-1])
            dual_eigs.append(d[0] - np.linalg.norm(d[1:]))
    dual_min = min(dual_eigs)
    gap = sol.objective_value - _dual_objective(prog, sol.duals)
    return KktReport(float(max(pres)), float(np.max(np.abs(grad), initial=0.0)), float(gap),
                     float(min_eig), float(dual_min), True)


def dump_problem(prog: ConicProgram, path=None) -> str:
    """Self-describing JSON of the program for cross-checking with other solvers."""
    n = prog.n

    def lin(e):
        return {"coef": e.dense(n).tolist(), "const": e.const}

    doc = {
        "format": "conic-program-v1",
        "convention": "minimize objective; eq == 0; ineq <= 0; lmi PSD; arrow: t >= ||A x + b||^2",
        "n": n,
        "variables": [{"name": v.name, "kind": v.kind, "dim": v.dim, "offset": v.offset,
                       "size": v.size} for v in prog.variables.values()],
        "objective": lin(prog.objective),
        "eq": [lin(e) for e in prog.eqs],
        "ineq": [lin(e) for e in prog.ineqs],
        "lmi": [{"name": name, "const": expr.const.tolist(),
                 "terms": [{"var": int(i), "matrix": M.tolist()} for i, M in zip(expr.idx, expr.mats)]}
                for name, expr in prog.lmis],
        "arrow": [{"name": name, "t": lin(t), "idx": e.idx.tolist(), "A": e.A.tolist(), "b": e.b.tolist()}
                  for name, t, e in prog.arrows],
    }
    text = json.dumps(doc)
    if path is not None:
        with open(path, "w") as fh:
            fh.write(text)
    return text
