"""Post-discrimination coherence and the coherence/distinguishability bound.

The optimization over discrimination channels N: A -> B A' is bilinear in
(channel, robustness witnesses), so it is attacked by alternating two SDPs.
Without loss of generality the channel is taken block diagonal in the label
register, ``N(X) = sum_b |b><b| (x) N_b(X)``: composing any feasible channel
with dephasing of B keeps it MIO and leaves every ``N(rho_j)`` unchanged.
The channel SDP therefore works on k Choi blocks of size d^2 x d^2.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.linalg as sla

from . import conic, linalg as la
from .conic import ProblemBuilder, SolverOptions
from .discrimination import channel_success
from .measures import c_max, robustness, robustness_dual
from .quantum import (
    DensityMatrix, QuantumChannel, StateEnsemble, average_state, channel_action, entropy_min,
    entropy_vn, is_mio, mcs_states,
)

log = logging.getLogger(__name__)

NOT_TIGHT_NOTE = "bound is not tight for non-uniform ensembles"
# log2 of an objective equal to 1 up to roundoff is reported as exactly 0
LOG_SNAP = 1e-12


@dataclass(frozen=True)
class SeeSawOptions:
    max_rounds: int = 30
    stall_tol: float = 1e-7
    restarts: int = 3
    seed: Optional[int] = 0
    solver: SolverOptions = field(default_factory=lambda: SolverOptions(gap_tol=1e-9, feas_tol=1e-9))

    def __post_init__(self):
        if self.max_rounds < 1:
            raise ValueError("max_rounds must be at least 1")
        if self.restarts < 0:
            raise ValueError("restarts must be nonnegative")


@dataclass(eq=False)
class DualityReport:
    d: int
    k: int
    s_vn: float
    s_min: float
    c_lower: float
    bound: float
    gap: float
    channel: QuantumChannel
    sigmas: list[DensityMatrix]
    probs: np.ndarray
    pmax_bound: float
    uniform: bool
    rounds: int
    runs: int
    history: list[float]
    channel_history: list[float]
    status: str = "ok"
    note: str = ""
    seconds: float = 0.0


def _require_orthogonal_pure(e: StateEnsemble) -> list[np.ndarray]:
    if not e.is_orthogonal_pure():
        raise ValueError("ensemble must consist of mutually orthogonal pure states")
    if e.k > e.dim:
        raise ValueError("more orthogonal states than the dimension allows")
    return e.pure_vectors()


def duality_bound(e: StateEnsemble) -> float:
    """log2(1 + p_max (d - k)); equals log2 d - S(ensemble) for uniform priors."""
    _require_orthogonal_pure(e)
    return float(np.log2(1 + np.max(e.probs) * (e.dim - e.k)))


# ---------------------------------------------------------------------------
# a channel that meets the bound


def saturating_states(d: int, k: int) -> tuple[np.ndarray, np.ndarray]:
    """The two output states used on and off the ensemble."""
    if d < 2 or not 1 <= k <= d:
        raise ValueError(f"need d >= 2 and 1 <= k <= d, got d={d}, k={k}")
    off = 1 - np.eye(d)
    sigma = np.eye(d) / d + off * (d - k) / (k * (d - 1) * d)
    sigma_p = np.eye(d) / d - off / ((d - 1) * d)
    return sigma.astype(np.complex128), sigma_p.astype(np.complex128)


def saturating_channel(d: int, k: int) -> tuple[QuantumChannel, DensityMatrix, DensityMatrix]:
    """MIO channel sending the first k maximally coherent basis states to |i><i| (x) sigma.

    The remaining d - k basis states go to Pi (x) sigma', with Pi the
    maximally mixed label state.
    """
    sigma, sigma_p = saturating_states(d, k)
    vecs = mcs_states(d)
    pi = np.zeros((k, k), dtype=np.complex128)
    pi[np.arange(k), np.arange(k)] = 1 / k
    choi = np.zeros((d * k * d, d * k * d), dtype=np.complex128)
    for j in range(d):
        f_t = la.projector(vecs[:, j]).T
        if j < k:
            out = np.kron(la.basis_projector(j, k), sigma)
        else:
            out = np.kron(pi, sigma_p)
        choi += np.kron(f_t, out)
    return QuantumChannel(d, (k, d), choi), DensityMatrix(sigma), DensityMatrix(sigma_p)


# ---------------------------------------------------------------------------
# see-saw


def _supports(vecs: list[np.ndarray], d: int) -> list[np.ndarray]:
    """Isometries V_b = Q_b (x) I onto the only support J_b may have.

    N_b(rho_j) = 0 for j != b with J_b >= 0 forces J_b to vanish on
    conj(psi_j) (x) C^d, so J_b lives on the complement of those vectors.
    Working on that face keeps the channel SDP strictly feasible.
    """
    out = []
    for b in range(len(vecs)):
        others = [vecs[j] for j in range(len(vecs)) if j != b]
        q = sla.null_space(np.array(others)) if others else np.eye(d, dtype=np.complex128)
        out.append(np.kron(q, np.eye(d)))
    return out


def _channel_problem(vecs: list[np.ndarray], probs: np.ndarray, d: int, witnesses: list[np.ndarray]):
    k = len(vecs)
    rhos_t = [np.conj(la.projector(v)) for v in vecs]  # rho^T
    supports = _supports(vecs, d)
    pb = ProblemBuilder()
    blocks = [pb.psd(v.shape[1]) for v in supports]

    def reduce(b, f):
        return supports[b].conj().T @ f @ supports[b]

    pb.maximize({blocks[j]: reduce(j, probs[j] * np.kron(rhos_t[j], witnesses[j])) for j in range(k)})
    n = d * d

    def unit(r, c, imag=False):
        return conic.entry_functional(n, r, c, imag)

    # trace preservation: sum_b tr_A' J_b = I
    for i in range(d):
        for ip in range(i, d):
            for imag in ((False,) if i == ip else (False, True)):
                f = sum(unit(i * d + a, ip * d + a, imag) for a in range(d))
                pb.constrain({blk: reduce(b, f) for b, blk in enumerate(blocks)}, 1.0 if i == ip else 0.0)
    # MIO: every N_b(|m><m|) is diagonal
    for b, blk in enumerate(blocks):
        for m in range(d):
            for a in range(d):
                for ap in range(a + 1, d):
                    pb.constrain({blk: reduce(b, unit(m * d + a, m * d + ap))}, 0.0)
                    pb.constrain({blk: reduce(b, unit(m * d + a, m * d + ap, True))}, 0.0)
    return pb.build(), blocks, supports


def _assemble_channel(blocks: list[np.ndarray], d: int) -> QuantumChannel:
    k = len(blocks)
    t = np.zeros((d, k, d, d, k, d), dtype=np.complex128)
    for b, jb in enumerate(blocks):
        t[:, b, :, :, b, :] = jb.reshape(d, d, d, d)
    return QuantumChannel(d, (k, d), t.reshape(d * k * d, d * k * d))


def _sigmas(blocks: list[np.ndarray], vecs: list[np.ndarray], d: int) -> list[np.ndarray]:
    out = []
    for j, v in enumerate(vecs):
        t = blocks[j].reshape(d, d, d, d)
        out.append(np.einsum("i,iajb,j->ab", v, t, v.conj()))
    return out


def _random_witness(d: int, rng: np.random.Generator) -> np.ndarray:
    v = np.exp(2j * np.pi * rng.random(d))
    return np.outer(v, v.conj())


@dataclass
class _Run:
    value: float
    blocks: list[np.ndarray]
    sigmas: list[DensityMatrix]
    history: list[float]
    rounds: int
    degraded: bool
    channel_history: list[float] = field(default_factory=list)


def _see_saw_run(vecs, probs, d, witnesses, opts: SeeSawOptions) -> _Run:
    best: Optional[_Run] = None
    history: list[float] = []
    channel_history: list[float] = []
    degraded = False
    current = -np.inf
    rounds = 0
    for rounds in range(1, opts.max_rounds + 1):
        prob, idx, supports = _channel_problem(vecs, probs, d, witnesses)
        sol = conic.solve(prob, opts.solver)
        if not sol.ok:
            log.warning("channel SDP failed in round %d: %s", rounds, sol.message)
            degraded = True
            break
        blocks = [v @ sol.blocks[b] @ v.conj().T for b, v in zip(idx, supports)]
        try:
            sigmas = [DensityMatrix.sanitized(s, tol=1e-6) for s in _sigmas(blocks, vecs, d)]
            refreshed = [robustness_dual(s, opts.solver) for s in sigmas]
        except (ValueError, conic.SolverError) as exc:
            log.warning("witness refresh failed in round %d: %s", rounds, exc)
            degraded = True
            break
        channel_history.append(float(sum(
            p * np.real(np.trace(w @ s.matrix)) for p, w, s in zip(probs, witnesses, sigmas))))
        # certified: each refreshed witness is exactly feasible for its dual program
        value = float(sum(p * np.real(np.trace(w @ s.matrix)) for p, (_, w), s in zip(probs, refreshed, sigmas)))
        # accept a round only if it improves the certified objective
        if value <= current:
            history.append(current)
            break
        history.append(value)
        improvement = value - current
        current = value
        best = _Run(value, blocks, sigmas, list(history), rounds, degraded)
        witnesses = [s for _, s in refreshed]
        if improvement < opts.stall_tol:
            break
    if best is None:
        raise conic.SolverError(conic.SDPSolution(conic.NUMERICAL_FAILURE, np.nan, np.nan, np.nan, [],
                                                  np.zeros(0), 0, np.nan, np.nan, "no feasible round"))
    best.history = history
    best.channel_history = channel_history
    best.rounds = rounds
    best.degraded = degraded
    return best


def post_discrimination_coherence(e: StateEnsemble, opts: SeeSawOptions | None = None) -> DualityReport:
    """See-saw lower bound on the post-discrimination coherence of ``e``."""
    opts = opts or SeeSawOptions()
    start = time.perf_counter()
    vecs = _require_orthogonal_pure(e)
    d, k = e.dim, e.k
    probs = e.probs
    pmax_bound = duality_bound(e)
    target = 2.0 ** pmax_bound
    rng = np.random.default_rng(opts.seed)

    best: Optional[_Run] = None
    runs = 0
    for attempt in range(opts.restarts + 1):
        if attempt == 0:
            witnesses = [np.ones((d, d), dtype=np.complex128) for _ in range(k)]
        else:
            witnesses = [_random_witness(d, rng) for _ in range(k)]
        try:
            run = _see_saw_run(vecs, probs, d, witnesses, opts)
        except conic.SolverError as exc:
            log.warning("see-saw run %d failed: %s", attempt, exc)
            continue
        runs += 1
        if best is None or run.value > best.value:
            best = run
        # nothing left to gain once the analytic upper bound is met
        if best.value >= target * (1 - 1e-8):
            break
    if best is None:
        raise RuntimeError("every see-saw run failed")

    rho_avg = average_state(e)
    s_vn, s_min = entropy_vn(rho_avg), entropy_min(rho_avg)
    uniform = e.is_uniform()
    bound = max(0.0, float(np.log2(d) - (s_vn if uniform else s_min)))
    c_lower = float(np.log2(best.value))
    if c_lower < LOG_SNAP:
        c_lower = 0.0
    return DualityReport(
        d=d, k=k, s_vn=s_vn, s_min=s_min, c_lower=c_lower, bound=bound, gap=bound - c_lower,
        channel=_assemble_channel(best.blocks, d), sigmas=best.sigmas, probs=probs,
        pmax_bound=pmax_bound, uniform=uniform, rounds=best.rounds, runs=runs, history=best.history,
        channel_history=best.channel_history,
        status="degraded" if best.degraded else "ok", note="" if uniform else NOT_TIGHT_NOTE,
        seconds=time.perf_counter() - start,
    )


# ---------------------------------------------------------------------------
# consistency checks


def necessary_condition(e: StateEnsemble, tol: float = 1e-4) -> tuple[bool, float]:
    """C_max(avg) + S(avg) == log2 d, required for a uniform ensemble to saturate the bound."""
    _require_orthogonal_pure(e)
    if not e.is_uniform():
        raise ValueError("the saturation condition is stated for uniform ensembles")
    if e.k >= e.dim:
        raise ValueError("the saturation condition is stated for k < d")
    avg = average_state(e)
    lhs = c_max(avg) + entropy_vn(avg)
    return abs(lhs - np.log2(e.dim)) <= tol, float(lhs)


def sigma_states(e: StateEnsemble, n: QuantumChannel) -> list[DensityMatrix]:
    """Reference-system states tr_B N(rho_j)."""
    out = []
    for r in e.states:
        w = channel_action(n, r.matrix)
        out.append(DensityMatrix.sanitized(la.partial_trace(w, list(n.dims_out), keep=[1]), tol=1e-6))
    return out


def robustness_average_check(e: StateEnsemble, n: QuantumChannel, tol: float = 1e-7) -> tuple[float, float]:
    """Compare log2(1 + sum_j p_j C_R(sigma_j)) with C_max(N(average state))."""
    if len(n.dims_out) != 2 or n.dims_out[0] != e.k or n.dim_in != e.dim:
        raise ValueError("channel must map the ensemble space to a k-label register and a reference copy")
    if not is_mio(n, tol):
        raise ValueError("channel is not maximally incoherent")
    if channel_success(n, e) < 1 - tol:
        raise ValueError("channel does not perfectly discriminate the ensemble")
    eta = sum(p * robustness(s) for p, s in zip(e.probs, sigma_states(e, n)))
    lhs = float(np.log2(1 + eta))
    out = DensityMatrix.sanitized(channel_action(n, average_state(e).matrix), tol=1e-6)
    return lhs, c_max(out)
