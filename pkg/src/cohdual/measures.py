"""Robustness of coherence and the max-relative-entropy of coherence."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import conic
from .conic import ProblemBuilder, SolverOptions, entry_functional
from .quantum import as_density

ZERO_THRESHOLD = 1e-7


@dataclass(frozen=True, eq=False)
class CoherenceReport:
    c_r: float
    c_max: float
    witness: np.ndarray
    dual_s: np.ndarray
    gap: float
    primal: float
    dual: float


def robustness_primal(rho, opts: SolverOptions | None = None) -> tuple[float, np.ndarray]:
    """Witness program: max tr(W rho) s.t. diag(W) <= 0 and W >= -I.

    Solved with the shift P = W + I, so P >= 0 and P_ii <= 1.
    Returns the optimal value and the witness ``W``.
    """
    rho = as_density(rho).matrix
    d = rho.shape[0]
    pb = ProblemBuilder()
    p = pb.psd(d)
    s = pb.nonneg(d)
    pb.maximize({p: rho})
    for i in range(d):
        slack = np.zeros(d)
        slack[i] = 1.0
        pb.constrain({p: entry_functional(d, i, i), s: slack}, 1.0)
    sol = conic.solve_or_raise(pb.build(), opts)
    w = sol.blocks[p] - np.eye(d)
    return sol.value - 1.0, w


def robustness_dual(rho, opts: SolverOptions | None = None) -> tuple[float, np.ndarray]:
    """max tr(rho S) s.t. S >= 0 and S_ii = 1; the optimum is 1 + C_R(rho).

    The returned ``S`` is rescaled to an exactly unit diagonal, so
    ``tr(rho S)`` is a certified lower bound on 1 + C_R.
    """
    rho = as_density(rho).matrix
    d = rho.shape[0]
    pb = ProblemBuilder()
    s = pb.psd(d)
    pb.maximize({s: rho})
    for i in range(d):
        pb.constrain({s: entry_functional(d, i, i)}, 1.0)
    sol = conic.solve_or_raise(pb.build(), opts)
    return sol.value, unit_diagonal(sol.blocks[s])


def unit_diagonal(s: np.ndarray) -> np.ndarray:
    """Congruence D^-1/2 S D^-1/2 with D = diag(S); keeps S PSD."""
    dg = np.sqrt(np.clip(np.real(np.diag(s)), 1e-300, None))
    out = s / np.outer(dg, dg)
    return (out + out.conj().T) / 2


def coherence_report(rho, opts: SolverOptions | None = None) -> CoherenceReport:
    primal, w = robustness_primal(rho, opts)
    dual, s = robustness_dual(rho, opts)
    c_r = (primal + dual - 1.0) / 2
    if c_r < ZERO_THRESHOLD:
        c_r = 0.0
    return CoherenceReport(
        c_r=c_r, c_max=float(np.log2(1.0 + c_r)), witness=w, dual_s=s,
        gap=abs(primal - (dual - 1.0)), primal=primal, dual=dual,
    )


def robustness(rho, opts: SolverOptions | None = None) -> float:
    return coherence_report(rho, opts).c_r


def c_max(rho, opts: SolverOptions | None = None) -> float:
    return coherence_report(rho, opts).c_max
