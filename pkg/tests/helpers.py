"""Random instances shared by the test modules."""

import numpy as np

from cohdual import linalg as la
from cohdual.quantum import StateEnsemble


def random_pure(d: int, rng: np.random.Generator) -> np.ndarray:
    v = rng.normal(size=d) + 1j * rng.normal(size=d)
    return v / np.linalg.norm(v)


def random_density(d: int, rng: np.random.Generator, rank: int | None = None) -> np.ndarray:
    g = rng.normal(size=(d, rank or d)) + 1j * rng.normal(size=(d, rank or d))
    m = g @ g.conj().T
    return m / np.trace(m).real


def random_povm(d: int, k: int, rng: np.random.Generator) -> list[np.ndarray]:
    parts = [random_density(d, rng) for _ in range(k)]
    total = sum(parts)
    w, v = np.linalg.eigh(total)
    t = (v / np.sqrt(w)) @ v.conj().T
    return [la.hermitian_part(t @ p @ t) for p in parts]


def psi(d: int) -> np.ndarray:
    return np.full((d, d), 1.0 / d, dtype=np.complex128)


def random_orthogonal_ensemble(d: int, k: int, rng: np.random.Generator, uniform: bool = False):
    u = la.random_unitary(d, rng)
    probs = None if uniform else rng.dirichlet(np.ones(k))
    return StateEnsemble.from_states([la.projector(u[:, j]) for j in range(k)], probs)
