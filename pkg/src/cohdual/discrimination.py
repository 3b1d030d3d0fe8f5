"""Minimum-error discrimination, with and without the incoherence restriction."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

import numpy as np

from . import conic, linalg as la
from .conic import ProblemBuilder, SolverOptions, entry_functional
from .quantum import (
    POVM, KrausSet, QuantumChannel, StateEnsemble, as_density, channel_action, choi_from_kraus,
    io_kraus_from_povm,
)

UNRESTRICTED = "unrestricted"
INCOHERENT = "incoherent"
INCOHERENT_ANCILLA = "incoherent+ancilla"


@dataclass(frozen=True, eq=False)
class DiscriminationResult:
    value: float
    povm: POVM
    kind: str
    channel: Optional[QuantumChannel] = None
    exact: Optional[Fraction] = None


def success_probability(e: StateEnsemble, povm: POVM) -> float:
    return float(sum(p * np.real(np.trace(E @ r.matrix)) for (p, r), E in zip(e.items, povm.effects)))


def _polish_povm(effects: list[np.ndarray]) -> POVM:
    """Project effects onto the PSD cone and renormalize their sum to I."""
    clipped = [la.psd_sqrt(e) @ la.psd_sqrt(e) for e in effects]
    total = sum(clipped)
    w, v = np.linalg.eigh(la.hermitian_part(total))
    t = (v / np.sqrt(w)) @ v.conj().T
    return POVM(tuple(la.hermitian_part(t @ e @ t) for e in clipped))


def p_suc_optimal(e: StateEnsemble, opts: SolverOptions | None = None) -> DiscriminationResult:
    """Optimal success probability over all POVMs (SDP)."""
    d, k = e.dim, e.k
    if k == 1:
        povm = POVM((np.eye(d, dtype=np.complex128),))
        return DiscriminationResult(1.0, povm, UNRESTRICTED)
    pb = ProblemBuilder()
    blocks = [pb.psd(d) for _ in range(k)]
    pb.maximize({b: p * r.matrix for b, (p, r) in zip(blocks, e.items)})
    for r in range(d):
        for c in range(r, d):
            for imag in ((False,) if r == c else (False, True)):
                f = entry_functional(d, r, c, imag)
                pb.constrain({b: f for b in blocks}, 1.0 if r == c else 0.0)
    sol = conic.solve_or_raise(pb.build(), opts)
    povm = _polish_povm([sol.blocks[b] for b in blocks])
    return DiscriminationResult(success_probability(e, povm), povm, UNRESTRICTED)


def helstrom(p0: float, rho0, p1: float, rho1) -> float:
    """Closed-form optimum for two states: (1 + ||p0 rho0 - p1 rho1||_1) / 2."""
    if abs(p0 + p1 - 1) > 1e-10:
        raise ValueError("priors must sum to 1")
    r0, r1 = as_density(rho0).matrix, as_density(rho1).matrix
    return 0.5 * (1 + la.trace_norm(p0 * r0 - p1 * r1))


def _exact_diagonal(rho) -> list[Fraction]:
    """Diagonal of a state as exact rationals, renormalized to sum exactly to 1."""
    dg = [Fraction(float(x)) for x in np.clip(np.real(np.diag(as_density(rho).matrix)), 0.0, None)]
    total = sum(dg)
    return [x / total for x in dg]


def _argmax_assignment(weighted: list[list[Fraction]]) -> tuple[Fraction, list[int]]:
    """weighted[j][i] = p_j <i|rho_j|i>; ties go to the smallest j."""
    value = Fraction(0)
    choice = []
    for i in range(len(weighted[0])):
        best_j = 0
        for j in range(1, len(weighted)):
            if weighted[j][i] > weighted[best_j][i]:
                best_j = j
        choice.append(best_j)
        value += weighted[best_j][i]
    return value, choice


def _diagonal_povm(choice: list[int], k: int) -> POVM:
    n = len(choice)
    effects = [np.zeros((n, n), dtype=np.complex128) for _ in range(k)]
    for i, j in enumerate(choice):
        effects[j][i, i] = 1.0
    return POVM(tuple(effects))


def p_suc_incoherent(e: StateEnsemble) -> DiscriminationResult:
    """Exact optimum over incoherent (diagonal) POVMs.

    Each basis index is assigned to the outcome with the largest weighted
    population, computed in rational arithmetic.
    """
    probs = [Fraction(float(p)) for p in e.probs]
    weighted = [[p * x for x in _exact_diagonal(r)] for p, r in zip(probs, e.states)]
    value, choice = _argmax_assignment(weighted)
    return DiscriminationResult(float(value), _diagonal_povm(choice, e.k), INCOHERENT, exact=value)


def p_suc_incoherent_with_ancilla(e: StateEnsemble, tau) -> DiscriminationResult:
    """Incoherent discrimination of {(p_j, rho_j (x) tau)}.

    The populations of a product state are products of populations, so the
    joint diagonal is formed exactly instead of through a float Kronecker
    product.
    """
    t = _exact_diagonal(tau)
    probs = [Fraction(float(p)) for p in e.probs]
    weighted = [[p * x * y for x in _exact_diagonal(r) for y in t] for p, r in zip(probs, e.states)]
    value, choice = _argmax_assignment(weighted)
    return DiscriminationResult(float(value), _diagonal_povm(choice, e.k), INCOHERENT_ANCILLA, exact=value)


def label_register_marginals(n: QuantumChannel, rho: np.ndarray) -> np.ndarray:
    """Diagonal of the label register B (first output system) of N(rho)."""
    out = channel_action(n, rho)
    kb = n.dims_out[0]
    rest = n.dim_out // kb
    t = out.reshape(kb, rest, kb, rest)
    return np.real(np.einsum("bibi->b", t))


def channel_success(n: QuantumChannel, e: StateEnsemble) -> float:
    """sum_j p_j tr[N(rho_j)(|j><j| (x) I)], tracing out any reference output."""
    if n.dim_in != e.dim:
        raise la.DimensionError(f"channel input {n.dim_in} does not match ensemble dimension {e.dim}")
    if n.dims_out[0] != e.k:
        raise la.DimensionError(f"label register has dimension {n.dims_out[0]}, ensemble has {e.k} states")
    return float(sum(p * label_register_marginals(n, r.matrix)[j] for j, (p, r) in enumerate(e.items)))


def optimal_io_discrimination_channel(e: StateEnsemble, opts: SolverOptions | None = None
                                      ) -> tuple[KrausSet, QuantumChannel, float]:
    """An incoherent-Kraus channel attaining the unrestricted optimum."""
    res = p_suc_optimal(e, opts)
    kraus = io_kraus_from_povm(res.povm)
    channel = choi_from_kraus(kraus)
    return kraus, channel, channel_success(channel, e)
