"""Small dense semidefinite programs.

Problems are stated over complex Hermitian (or real symmetric) PSD blocks
and nonnegative vectors, always in *maximize* form::

    maximize    sum_b Re tr(C_b X_b)
    subject to  sum_b Re tr(A_ib X_b) = b_i,   X_b >= 0.

A complex block ``X`` is handed to the interior point core as the real
symmetric matrix ``[[Re X, -Im X], [Im X, Re X]]``, which is PSD exactly
when ``X`` is.  The core is an infeasible-start primal-dual path-following
method (HKM search direction, Mehrotra predictor-corrector) that forms and
factors the Schur complement densely.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
import scipy.linalg as sla

log = logging.getLogger(__name__)

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
NUMERICAL_FAILURE = "numerical-failure"

_RAY_THRESHOLD = 1e6


@dataclass(frozen=True)
class Block:
    size: int
    kind: str = "psd"  # "psd" or "nonneg"
    complex: bool = True

    def __post_init__(self):
        if self.size < 1:
            raise ValueError("block size must be positive")
        if self.kind not in ("psd", "nonneg"):
            raise ValueError(f"unknown block kind {self.kind!r}")

    @property
    def real_size(self) -> int:
        if self.kind == "psd" and self.complex:
            return 2 * self.size
        return self.size


@dataclass(frozen=True)
class SDProblem:
    """An immutable maximization problem over PSD and nonnegative blocks.

    ``objective`` and each constraint's functional map a block index to its
    coefficient: a square matrix ``C`` for PSD blocks (the term is
    ``Re tr(C X)``) or a vector ``c`` for nonnegative blocks (``c . x``).
    """

    blocks: tuple[Block, ...]
    objective: Mapping[int, np.ndarray]
    constraints: tuple[tuple[Mapping[int, np.ndarray], float], ...] = ()

    def __post_init__(self):
        if not self.blocks:
            raise ValueError("a problem needs at least one variable block")
        for terms in [self.objective] + [c for c, _ in self.constraints]:
            for b, coef in terms.items():
                if not 0 <= b < len(self.blocks):
                    raise ValueError(f"functional references undeclared block {b}")
                blk = self.blocks[b]
                shape = np.shape(coef)
                want = (blk.size, blk.size) if blk.kind == "psd" else (blk.size,)
                if shape != want:
                    raise ValueError(f"coefficient for block {b} has shape {shape}, expected {want}")

    def evaluate(self, terms: Mapping[int, np.ndarray], xs: Sequence[np.ndarray]) -> float:
        total = 0.0
        for b, coef in terms.items():
            if self.blocks[b].kind == "psd":
                total += float(np.real(np.sum(np.asarray(coef).T * xs[b])))
            else:
                total += float(np.dot(np.real(coef), xs[b]))
        return total


class ProblemBuilder:
    """Incrementally assemble an :class:`SDProblem`."""

    def __init__(self):
        self._blocks: list[Block] = []
        self._objective: dict[int, np.ndarray] = {}
        self._constraints: list[tuple[dict[int, np.ndarray], float]] = []

    def psd(self, n: int, complex: bool = True) -> int:
        self._blocks.append(Block(n, "psd", complex))
        return len(self._blocks) - 1

    def nonneg(self, n: int) -> int:
        self._blocks.append(Block(n, "nonneg", False))
        return len(self._blocks) - 1

    def maximize(self, terms: Mapping[int, np.ndarray]) -> None:
        self._objective = dict(terms)

    def constrain(self, terms: Mapping[int, np.ndarray], rhs: float) -> None:
        self._constraints.append((dict(terms), float(rhs)))

    def build(self) -> SDProblem:
        return SDProblem(tuple(self._blocks), dict(self._objective), tuple(self._constraints))


def entry_functional(n: int, row: int, col: int, imag: bool = False) -> np.ndarray:
    """Coefficient ``A`` with ``Re tr(A X)`` equal to Re (or Im) of ``X[row, col]``."""
    a = np.zeros((n, n), dtype=np.complex128)
    a[col, row] = -1j if imag else 1.0
    return a


@dataclass(frozen=True)
class SolverOptions:
    gap_tol: float = 1e-8
    feas_tol: float = 1e-8
    max_iters: int = 200
    step: float = 0.98


@dataclass
class SDPSolution:
    status: str
    value: float
    dual_value: float
    gap: float
    blocks: list[np.ndarray]
    y: np.ndarray
    iterations: int
    primal_residual: float
    dual_residual: float
    message: str = ""
    dual_slacks: list[np.ndarray] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.status == OPTIMAL


class SolverError(RuntimeError):
    """A solve ended without an optimal certificate."""

    def __init__(self, solution: SDPSolution):
        super().__init__(f"SDP solve ended with status {solution.status}: {solution.message}")
        self.solution = solution


# ---------------------------------------------------------------------------
# real embedding


def embed(h: np.ndarray) -> np.ndarray:
    """Real symmetric image of a Hermitian matrix."""
    re, im = h.real, h.imag
    return np.block([[re, -im], [im, re]])


def unembed(y: np.ndarray) -> np.ndarray:
    n = y.shape[0] // 2
    re = (y[:n, :n] + y[n:, n:]) / 2
    im = (y[n:, :n] - y[:n, n:]) / 2
    out = re + 1j * im
    return (out + out.conj().T) / 2


def _real_coefficient(blk: Block, coef) -> np.ndarray:
    """Map a user coefficient to the real-core coefficient of the same functional."""
    if blk.kind == "nonneg":
        return np.real(np.asarray(coef, dtype=np.complex128)).astype(float)
    a = np.asarray(coef, dtype=np.complex128)
    # Re tr(A X) = tr(H X) for Hermitian X, with H = (A + A^dagger) / 2
    h = (a + a.conj().T) / 2
    if blk.complex:
        # tr(H X) = tr(embed(H) embed(X)) / 2
        return embed(h) / 2
    return np.real(h)


@dataclass
class _CoreBlock:
    kind: str
    n: int
    c: np.ndarray
    rows: np.ndarray  # constraint indices touching this block
    a: np.ndarray  # (len(rows), n, n) or (len(rows), n)


def _compile(p: SDProblem):
    m = len(p.constraints)
    b = np.array([rhs for _, rhs in p.constraints], dtype=float)
    blocks = []
    for bi, blk in enumerate(p.blocks):
        n = blk.real_size
        shape = (n, n) if blk.kind == "psd" else (n,)
        c = np.zeros(shape)
        if bi in p.objective:
            # core minimizes, so the objective is negated here
            c = -_real_coefficient(blk, p.objective[bi])
        rows = [i for i, (terms, _) in enumerate(p.constraints) if bi in terms]
        a = np.zeros((len(rows),) + shape)
        for r, i in enumerate(rows):
            a[r] = _real_coefficient(blk, p.constraints[i][0][bi])
        blocks.append(_CoreBlock(blk.kind, n, c, np.array(rows, dtype=int), a))
    return blocks, b, m


def _row_matrix(blocks, m) -> np.ndarray:
    """Dense matrix whose rows are the (scaled) constraint functionals."""
    cols = []
    for blk in blocks:
        part = np.zeros((m, int(np.prod(blk.c.shape))))
        if len(blk.rows):
            part[blk.rows] = blk.a.reshape(len(blk.rows), -1)
        cols.append(part)
    return np.hstack(cols)


def _independent_rows(blocks, m, rtol: float = 1e-10) -> np.ndarray:
    if m == 0:
        return np.arange(0)
    a = _row_matrix(blocks, m)
    _, r, piv = sla.qr(a.T, mode="economic", pivoting=True)
    diag = np.abs(np.diag(r))
    rank = int(np.sum(diag > rtol * max(diag[0], 1e-300)))
    return np.sort(piv[:rank])


def _consistent(blocks, m, keep, dropped, bs, tol) -> bool:
    a = _row_matrix(blocks, m)
    coef, *_ = np.linalg.lstsq(a[keep].T, a[dropped].T, rcond=None)
    return bool(np.max(np.abs(coef.T @ bs[keep] - bs[dropped])) <= max(tol, 1e-9))


def _restrict_rows(blocks, keep, m):
    pos = -np.ones(m, dtype=int)
    pos[keep] = np.arange(len(keep))
    out = []
    for blk in blocks:
        sel = [r for r, i in enumerate(blk.rows) if pos[i] >= 0]
        out.append(_CoreBlock(blk.kind, blk.n, blk.c, pos[blk.rows[sel]], blk.a[sel]))
    return out


def _apply_a(blocks, xs, m) -> np.ndarray:
    out = np.zeros(m)
    for blk, x in zip(blocks, xs):
        if len(blk.rows):
            if blk.kind == "psd":
                out[blk.rows] += np.tensordot(blk.a, x, axes=([1, 2], [0, 1]))
            else:
                out[blk.rows] += blk.a @ x
    return out


def _apply_at(blocks, y) -> list[np.ndarray]:
    out = []
    for blk in blocks:
        if len(blk.rows):
            out.append(np.tensordot(y[blk.rows], blk.a, axes=(0, 0)))
        else:
            out.append(np.zeros_like(blk.c))
    return out


def _inner(blocks, xs, zs) -> float:
    return float(sum(np.sum(x * z) for x, z in zip(xs, zs)))


def _max_step(blk_kind: str, x: np.ndarray, dx: np.ndarray) -> float:
    """Largest alpha with x + alpha dx still in the cone (inf if unbounded)."""
    if blk_kind == "nonneg":
        neg = dx < 0
        if not np.any(neg):
            return np.inf
        return float(np.min(-x[neg] / dx[neg]))
    try:
        lchol = np.linalg.cholesky(x)
    except np.linalg.LinAlgError:
        return 0.0
    t = sla.solve_triangular(lchol, dx, lower=True)
    t = sla.solve_triangular(lchol, t.T, lower=True)
    lam = np.linalg.eigvalsh((t + t.T) / 2)[0]
    return np.inf if lam >= 0 else float(-1.0 / lam)


def _sym(a: np.ndarray) -> np.ndarray:
    return (a + a.T) / 2


def _solve_schur(mat: np.ndarray, rhs: np.ndarray, factor):
    if factor is None:
        try:
            factor = ("chol", sla.cho_factor(mat, lower=True, check_finite=False))
        except (np.linalg.LinAlgError, ValueError):
            w, v = np.linalg.eigh(mat)
            cut = max(w[-1], 1.0) * 1e-14
            winv = np.where(w > cut, 1.0 / np.where(w > cut, w, 1.0), 0.0)
            factor = ("eig", (w, v, winv))
    kind, data = factor
    if kind == "chol":
        return sla.cho_solve(data, rhs, check_finite=False), factor
    w, v, winv = data
    return v @ (winv * (v.T @ rhs)), factor


def solve(p: SDProblem, opts: SolverOptions | None = None) -> SDPSolution:
    """Solve ``p``; never returns a non-optimal answer labelled optimal."""
    opts = opts or SolverOptions()
    blocks, b, m = _compile(p)

    # row scaling for conditioning; residuals are always judged unscaled
    norms = np.zeros(m)
    for blk in blocks:
        if len(blk.rows):
            norms[blk.rows] += np.sum(blk.a.reshape(len(blk.rows), -1) ** 2, axis=1)
    norms = np.sqrt(norms)
    empty = norms <= 1e-12 * max(np.max(norms, initial=0.0), 1.0)
    if np.any(empty):
        if np.any(np.abs(b[empty]) > opts.feas_tol):
            return _failed(p, INFEASIBLE, "constraint with empty functional and nonzero right-hand side", m)
        for blk in blocks:
            if len(blk.rows):
                blk.a[empty[blk.rows]] = 0.0
        norms[empty] = 1.0
    for blk in blocks:
        if len(blk.rows):
            blk.a = blk.a / norms[blk.rows].reshape((-1,) + (1,) * (blk.a.ndim - 1))
    bs = b / norms

    keep = _independent_rows(blocks, m)
    if len(keep) < m:
        dropped = np.setdiff1d(np.arange(m), keep)
        if not _consistent(blocks, m, keep, dropped, bs, opts.feas_tol):
            return _failed(p, INFEASIBLE, "linearly dependent constraints are inconsistent", m)
        log.debug("dropping %d dependent constraints", len(dropped))
        blocks, full_m, full_b = _restrict_rows(blocks, keep, m), m, b
        m, norms, bs, b = len(keep), norms[keep], bs[keep], b[keep]
    else:
        full_m = None

    # normalize the objective so that positive rescalings of it produce the same iterates
    cscale = max((float(np.max(np.abs(blk.c), initial=0.0)) for blk in blocks), default=0.0) or 1.0
    for blk in blocks:
        blk.c = blk.c / cscale

    ntot = sum(blk.n for blk in blocks)
    bnorm = np.max(np.abs(bs)) if m else 0.0

    # SDPT3-style starting point
    xs, zs = [], []
    for blk in blocks:
        anorm = max((np.linalg.norm(blk.a[r]) for r in range(len(blk.rows))), default=1.0)
        xi = max(10.0, np.sqrt(blk.n), np.sqrt(blk.n) * max(
            [(1 + abs(bs[i])) / (1 + np.linalg.norm(blk.a[r])) for r, i in enumerate(blk.rows)], default=1.0))
        eta = max(10.0, np.sqrt(blk.n), anorm, np.linalg.norm(blk.c))
        if blk.kind == "psd":
            xs.append(xi * np.eye(blk.n))
            zs.append(eta * np.eye(blk.n))
        else:
            xs.append(xi * np.ones(blk.n))
            zs.append(eta * np.ones(blk.n))
    y = np.zeros(m)

    status, message = NUMERICAL_FAILURE, "iteration limit reached"
    it = 0
    best = None
    for it in range(1, opts.max_iters + 1):
        ax = _apply_a(blocks, xs, m)
        aty = _apply_at(blocks, y)
        rp = bs - ax
        rd = [blk.c - at - z for blk, at, z in zip(blocks, aty, zs)]
        pobj = _inner(blocks, [blk.c for blk in blocks], xs)
        dobj = float(bs @ y)
        mu = _inner(blocks, xs, zs) / ntot

        pres = float(np.max(np.abs(rp * norms))) if m else 0.0
        dres = cscale * max((float(np.max(np.abs(r))) for r in rd), default=0.0)
        gap = cscale * abs(pobj - dobj)
        value = -cscale * pobj
        # the fallback iterate, should we fail to converge, is the one closest to the stopping test
        merit = max(pres / opts.feas_tol, dres / opts.feas_tol, gap / (opts.gap_tol * max(1.0, abs(value))))
        if best is None or merit <= best[1]:
            best = ([x.copy() for x in xs], merit, y.copy(), [z.copy() for z in zs])
        log.debug("it %3d pobj % .10e dobj % .10e pres %.1e dres %.1e mu %.1e",
                  it, value, -cscale * dobj, pres, dres, mu)
        # the test must hold both as stated and for the normalized objective; the
        # second makes termination independent of how the objective is scaled
        scaled_ok = dres <= opts.feas_tol * min(1.0, cscale) and \
            gap <= opts.gap_tol * max(min(1.0, cscale), abs(value))
        if pres <= opts.feas_tol and scaled_ok and gap <= opts.gap_tol * max(1.0, abs(value)):
            status, message = OPTIMAL, "converged"
            break

        # improving-ray checks
        ynorm = max(np.max(np.abs(y), initial=0.0), max(np.max(np.abs(z)) for z in zs))
        if ynorm > _RAY_THRESHOLD and dobj > 0:
            ray_res = max(float(np.max(np.abs(at + z))) for at, z in zip(aty, zs)) / dobj
            if ray_res < 1e-6:
                status, message = INFEASIBLE, "primal infeasible (dual improving ray)"
                break
        xnorm = max(np.max(np.abs(x)) for x in xs)
        if xnorm > _RAY_THRESHOLD * max(1.0, bnorm) and pobj < 0:
            ray_res = float(np.max(np.abs(ax), initial=0.0)) / -pobj
            if ray_res < 1e-6:
                status, message = INFEASIBLE, "dual infeasible (primal improving ray)"
                break

        # Schur complement M_ij = <A_i, X A_j Z^-1>
        mat = np.zeros((m, m))
        zinvs = []
        for blk, x, z in zip(blocks, xs, zs):
            if blk.kind == "psd":
                try:
                    zc = sla.cho_factor(z, lower=True, check_finite=False)
                except np.linalg.LinAlgError:
                    message = "dual slack lost definiteness"
                    zinvs = None
                    break
                zinv = sla.cho_solve(zc, np.eye(blk.n), check_finite=False)
                zinv = _sym(zinv)
                zinvs.append(zinv)
                if len(blk.rows):
                    g = np.matmul(np.matmul(x, blk.a), zinv)
                    k = len(blk.rows)
                    sub = blk.a.reshape(k, -1) @ g.reshape(k, -1).T
                    mat[np.ix_(blk.rows, blk.rows)] += _sym(sub)
            else:
                zinv = 1.0 / z
                zinvs.append(zinv)
                if len(blk.rows):
                    mat[np.ix_(blk.rows, blk.rows)] += (blk.a * (x * zinv)) @ blk.a.T
        if zinvs is None:
            break

        def direction(rc_zinv, factor):
            # rc_zinv: R_c Z^-1 per block, where X dZ + dX Z = R_c
            rhs = rp.copy()
            tmp = []
            for blk, x, zinv, r_d, rcz in zip(blocks, xs, zinvs, rd, rc_zinv):
                if blk.kind == "psd":
                    t = rcz - x @ r_d @ zinv
                else:
                    t = rcz - x * r_d * zinv
                tmp.append(t)
            rhs -= _apply_a(blocks, tmp, m)
            dy, factor = _solve_schur(mat, rhs, factor)
            atdy = _apply_at(blocks, dy)
            dzs, dxs = [], []
            for blk, x, zinv, r_d, rcz, at in zip(blocks, xs, zinvs, rd, rc_zinv, atdy):
                dz = r_d - at
                if blk.kind == "psd":
                    dx = _sym(rcz - x @ dz @ zinv)
                else:
                    dx = rcz - x * dz * zinv
                dzs.append(dz)
                dxs.append(dx)
            return dxs, dy, dzs, factor

        # predictor
        rcz = [-x for x in xs]
        dxa, dya, dza, factor = direction(rcz, None)
        ap = min(1.0, min(_max_step(blk.kind, x, dx) for blk, x, dx in zip(blocks, xs, dxa)))
        ad = min(1.0, min(_max_step(blk.kind, z, dz) for blk, z, dz in zip(blocks, zs, dza)))
        mu_aff = _inner(blocks, [x + ap * dx for x, dx in zip(xs, dxa)],
                        [z + ad * dz for z, dz in zip(zs, dza)]) / ntot
        sigma = min(1.0, max(0.0, (mu_aff / mu) ** 3)) if mu > 0 else 0.0

        # corrector
        rcz = []
        for blk, x, zinv, dx, dz in zip(blocks, xs, zinvs, dxa, dza):
            if blk.kind == "psd":
                rcz.append(sigma * mu * zinv - x - dx @ dz @ zinv)
            else:
                rcz.append(sigma * mu * zinv - x - dx * dz * zinv)
        dxs, dy, dzs, factor = direction(rcz, factor)
        ap = min(1.0, opts.step * min(_max_step(blk.kind, x, dx) for blk, x, dx in zip(blocks, xs, dxs)))
        ad = min(1.0, opts.step * min(_max_step(blk.kind, z, dz) for blk, z, dz in zip(blocks, zs, dzs)))
        log.debug("      sigma %.2e step p %.3e d %.3e", sigma, ap, ad)
        if ap < 1e-12 and ad < 1e-12:
            message = "step length collapsed"
            break
        xs = [x + ap * dx for x, dx in zip(xs, dxs)]
        y = y + ad * dy
        zs = [z + ad * dz for z, dz in zip(zs, dzs)]
        xs = [_sym(x) if x.ndim == 2 else x for x in xs]
        zs = [_sym(z) if z.ndim == 2 else z for z in zs]

    if status != OPTIMAL and best is not None and status != INFEASIBLE:
        xs, _, y, zs = best

    ax = _apply_a(blocks, xs, m)
    pres = float(np.max(np.abs((bs - ax) * norms))) if m else 0.0
    aty = _apply_at(blocks, y)
    dres = cscale * max(float(np.max(np.abs(blk.c - at - z))) for blk, at, z in zip(blocks, aty, zs))
    pobj = cscale * _inner(blocks, [blk.c for blk in blocks], xs)
    dobj = cscale * float(bs @ y)
    y_user = cscale * y / norms
    zs = [cscale * z for z in zs]
    if full_m is not None:
        y_full = np.zeros(full_m)
        y_full[keep] = y_user
        y_user = y_full
        # judge the primal residual on every original row
        blocks_all, _, _ = _compile(p)
        pres = float(np.max(np.abs(full_b - _apply_a(blocks_all, xs, full_m))))
    out_blocks, out_slacks = [], []
    for bspec, x, z in zip(p.blocks, xs, zs):
        if bspec.kind == "psd" and bspec.complex:
            out_blocks.append(unembed(x))
            out_slacks.append(unembed(z))
        else:
            out_blocks.append(x.copy())
            out_slacks.append(z.copy())
    sol = SDPSolution(
        status=status, value=-pobj, dual_value=-dobj, gap=abs(pobj - dobj), blocks=out_blocks,
        y=y_user, iterations=it, primal_residual=pres, dual_residual=dres, message=message,
        dual_slacks=out_slacks,
    )
    log.debug("sdp %s after %d iterations: value %.10g gap %.2e", status, it, sol.value, sol.gap)
    return sol


def _failed(p: SDProblem, status: str, message: str, m: int) -> SDPSolution:
    nan = float("nan")
    return SDPSolution(status, nan, nan, nan, [np.zeros((blk.size, blk.size)) if blk.kind == "psd"
                                              else np.zeros(blk.size) for blk in p.blocks],
                       np.zeros(m), 0, nan, nan, message)


def solve_or_raise(p: SDProblem, opts: SolverOptions | None = None) -> SDPSolution:
    sol = solve(p, opts)
    if not sol.ok:
        raise SolverError(sol)
    return sol
