"""Shared fixtures and helpers for the test suite."""

from __future__ import annotations

import numpy as np

from gchmetric.gaussian import (
    embed_symplectic,
    squeeze_symplectic,
    unitary_to_passive,
)


def random_unitary(n: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-distributed n-by-n unitary (QR with phase correction)."""
    z = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    q, r = np.linalg.qr(z)
    return q * (np.diagonal(r) / np.abs(np.diagonal(r)))


def random_symplectic(n: int, rng: np.random.Generator, max_squeeze: float = 0.8) -> np.ndarray:
    """Random symplectic built from alternating passives and squeezers."""
    s = np.eye(2 * n)
    for _ in range(3):
        s = unitary_to_passive(random_unitary(n, rng)) @ s
        for k in range(n):
            block = squeeze_symplectic(
                rng.uniform(-max_squeeze, max_squeeze), rng.uniform(0.0, np.pi)
            )
            s = embed_symplectic(block, [k], n) @ s
    return s


def random_covariance(
    n: int, rng: np.random.Generator, nu_max: float = 3.0, max_squeeze: float = 0.8
) -> np.ndarray:
    """Random physical covariance matrix with thermal parameters in [1, nu_max]."""
    nu = rng.uniform(1.0, nu_max, size=n)
    s = random_symplectic(n, rng, max_squeeze)
    return s @ (0.5 * np.diag(np.repeat(nu, 2))) @ s.T
