import itertools

import cvxpy as cp
import numpy as np
import pytest
from scipy.optimize import linprog

from cohdual import conic
from cohdual.conic import ProblemBuilder, SolverOptions, entry_functional
from cohdual.measures import robustness_dual

from helpers import psi, random_density


def _bounded_trace_problem(n: int, complex_: bool = True):
    """maximize tr X subject to X + Y = I with X, Y >= 0."""
    pb = ProblemBuilder()
    x, y = pb.psd(n, complex_), pb.psd(n, complex_)
    pb.maximize({x: np.eye(n)})
    for r in range(n):
        for c in range(r, n):
            for imag in ((False,) if r == c or not complex_ else (False, True)):
                f = entry_functional(n, r, c, imag)
                pb.constrain({x: f, y: f}, 1.0 if r == c else 0.0)
    return pb.build(), x


def _check_feasible(p: conic.SDProblem, sol: conic.SDPSolution, tol: float):
    for terms, rhs in p.constraints:
        assert abs(p.evaluate(terms, sol.blocks) - rhs) <= tol
    for blk, x in zip(p.blocks, sol.blocks):
        if blk.kind == "psd":
            assert np.linalg.eigvalsh((x + x.conj().T) / 2)[0] >= -tol
        else:
            assert np.min(x) >= -tol


def test_bounded_trace_example():
    p, x = _bounded_trace_problem(2)
    sol = conic.solve(p)
    assert sol.status == conic.OPTIMAL
    assert sol.value == pytest.approx(2, abs=1e-7)
    assert np.allclose(sol.blocks[x], np.eye(2), atol=1e-6)
    assert abs(sol.value - sol.dual_value) <= 1e-8 * max(1, abs(sol.value))
    _check_feasible(p, sol, 1e-8)


def test_real_block_bounded_trace():
    p, _ = _bounded_trace_problem(3, complex_=False)
    assert conic.solve(p).value == pytest.approx(3, abs=1e-7)


def test_robustness_dual_on_maximally_coherent_qubit():
    value, s = robustness_dual(psi(2))
    assert value == pytest.approx(2, abs=1e-7)
    assert np.allclose(s, np.ones((2, 2)), atol=1e-4)


def _diagonal_discrimination_lp(probs, rhos):
    """Diagonal POVM program written with nonnegative blocks only."""
    d = rhos[0].shape[0]
    pb = ProblemBuilder()
    blocks = [pb.nonneg(d) for _ in rhos]
    pb.maximize({b: p * np.real(np.diag(r)) for b, p, r in zip(blocks, probs, rhos)})
    for i in range(d):
        unit = np.zeros(d)
        unit[i] = 1.0
        pb.constrain({b: unit for b in blocks}, 1.0)
    return pb.build()


def test_diagonal_lp_matches_vertex_enumeration(rng):
    for _ in range(10):
        probs = rng.dirichlet(np.ones(3))
        rhos = [random_density(2, rng) for _ in range(3)]
        sol = conic.solve(_diagonal_discrimination_lp(probs, rhos))
        best = max(sum(probs[j] * rhos[j][i, i].real for i, j in enumerate(choice))
                   for choice in itertools.product(range(3), repeat=2))
        assert sol.value == pytest.approx(best, abs=1e-7)


def test_random_lps_against_highs(rng):
    for _ in range(10):
        n, m = 6, 3
        a = rng.normal(size=(m, n))
        x0 = rng.random(n) + 0.1
        b = a @ x0
        c = rng.normal(size=n)
        # box each variable so the LP stays bounded
        pb = ProblemBuilder()
        x, s = pb.nonneg(n), pb.nonneg(n)
        pb.maximize({x: c})
        for i in range(m):
            pb.constrain({x: a[i]}, b[i])
        for j in range(n):
            unit = np.zeros(n)
            unit[j] = 1.0
            pb.constrain({x: unit, s: unit}, 2.0)
        sol = conic.solve(pb.build())
        ref = linprog(-c, A_eq=a, b_eq=b, bounds=[(0, 2)] * n, method="highs")
        assert ref.status == 0
        assert sol.value == pytest.approx(-ref.fun, abs=1e-6)


def _random_sdp(rng, n: int, m: int):
    """maximize Re tr(C X) s.t. Re tr(A_i X) = Re tr(A_i X0), tr X = 1, X >= 0."""
    x0 = random_density(n, rng)
    mats = []
    for _ in range(m):
        g = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
        mats.append((g + g.conj().T) / 2)
    g = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    c = (g + g.conj().T) / 2
    return x0, mats, c


def test_random_complex_sdps_against_cvxpy(rng):
    for _ in range(5):
        n = 3
        x0, mats, c = _random_sdp(rng, n, 2)
        pb = ProblemBuilder()
        x = pb.psd(n)
        pb.maximize({x: c})
        pb.constrain({x: np.eye(n)}, 1.0)
        for a in mats:
            pb.constrain({x: a}, float(np.real(np.trace(a @ x0))))
        ours = conic.solve(pb.build())
        assert ours.status == conic.OPTIMAL

        xv = cp.Variable((n, n), hermitian=True)
        cons = [xv >> 0, cp.real(cp.trace(xv)) == 1]
        cons += [cp.real(cp.trace(a @ xv)) == float(np.real(np.trace(a @ x0))) for a in mats]
        ref = cp.Problem(cp.Maximize(cp.real(cp.trace(c @ xv))), cons)
        ref.solve(solver=cp.CLARABEL)
        assert ours.value == pytest.approx(ref.value, abs=1e-6)


def test_objective_scaling(rng):
    x0, mats, c = _random_sdp(rng, 3, 2)

    def build(scale):
        pb = ProblemBuilder()
        x = pb.psd(3)
        pb.maximize({x: scale * c})
        pb.constrain({x: np.eye(3)}, 1.0)
        for a in mats:
            pb.constrain({x: a}, float(np.real(np.trace(a @ x0))))
        return pb.build(), x

    p1, x = build(1.0)
    s1 = conic.solve(p1)
    for scale in (0.1, 3.0):
        sc = conic.solve(build(scale)[0])
        assert sc.value == pytest.approx(scale * s1.value, abs=1e-7)
        assert np.max(np.abs(sc.blocks[x] - s1.blocks[x])) <= SolverOptions().feas_tol


def test_solutions_are_feasible(rng):
    for _ in range(5):
        rho = random_density(4, rng)
        pb = ProblemBuilder()
        s = pb.psd(4)
        pb.maximize({s: rho})
        for i in range(4):
            pb.constrain({s: entry_functional(4, i, i)}, 1.0)
        p = pb.build()
        sol = conic.solve(p)
        assert sol.ok
        _check_feasible(p, sol, 1e-8)


def test_deterministic():
    p, _ = _bounded_trace_problem(3)
    a, b = conic.solve(p), conic.solve(p)
    assert a.value == b.value and a.iterations == b.iterations
    assert np.array_equal(a.blocks[0], b.blocks[0])


def test_infeasible_problem_is_reported():
    pb = ProblemBuilder()
    x = pb.psd(2)
    pb.maximize({x: np.eye(2)})
    pb.constrain({x: np.eye(2)}, -1.0)  # tr X = -1 with X >= 0
    sol = conic.solve(pb.build())
    assert sol.status == conic.INFEASIBLE
    with pytest.raises(conic.SolverError):
        conic.solve_or_raise(pb.build())


def test_unbounded_problem_is_reported():
    pb = ProblemBuilder()
    x = pb.nonneg(2)
    pb.maximize({x: np.array([1.0, 0.0])})
    pb.constrain({x: np.array([1.0, -1.0])}, 0.0)
    sol = conic.solve(pb.build())
    assert sol.status == conic.INFEASIBLE
    assert not sol.ok


def test_iteration_limit_is_a_numerical_failure():
    p, _ = _bounded_trace_problem(3)
    sol = conic.solve(p, SolverOptions(max_iters=2))
    assert sol.status == conic.NUMERICAL_FAILURE


def test_inconsistent_dependent_rows_are_infeasible():
    pb = ProblemBuilder()
    x = pb.psd(2)
    pb.maximize({x: np.eye(2)})
    pb.constrain({x: np.eye(2)}, 1.0)
    pb.constrain({x: 2 * np.eye(2)}, 3.0)
    assert conic.solve(pb.build()).status == conic.INFEASIBLE


def test_consistent_dependent_rows_are_dropped():
    pb = ProblemBuilder()
    x = pb.psd(2)
    pb.maximize({x: np.diag([1.0, 0.0])})
    pb.constrain({x: np.eye(2)}, 1.0)
    pb.constrain({x: 2 * np.eye(2)}, 2.0)
    sol = conic.solve(pb.build())
    assert sol.ok
    assert sol.value == pytest.approx(1, abs=1e-7)
    assert sol.primal_residual <= 1e-8


def test_problem_validation():
    with pytest.raises(ValueError):
        conic.SDProblem((), {})
    with pytest.raises(ValueError):
        conic.SDProblem((conic.Block(2),), {1: np.eye(2)})
    with pytest.raises(ValueError):
        conic.SDProblem((conic.Block(2),), {0: np.eye(3)})
    with pytest.raises(ValueError):
        conic.Block(2, kind="soc")


def test_embedding_round_trip(rng):
    h = random_density(3, rng) - random_density(3, rng)
    e = conic.embed(h)
    assert np.allclose(e, e.T)
    assert np.allclose(conic.unembed(e), h)
    assert np.allclose(np.sort(np.linalg.eigvalsh(e)), np.sort(np.repeat(np.linalg.eigvalsh(h), 2)))
