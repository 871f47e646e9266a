import numpy as np
import pytest


def crandn(rng, *shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)


def rel_err(a, b):
    a, b = np.asarray(a), np.asarray(b)
    return np.linalg.norm(a - b) / max(np.linalg.norm(b), 1e-300)


def random_unitary(rng, n):
    q, r = np.linalg.qr(crandn(rng, n, n))
    return q * (np.diag(r) / np.abs(np.diag(r)))


@pytest.fixture
def rng():
    return np.random.default_rng(20240613)


def grid_argmax_phase(r, h_minus, lam, points=100_000):
    """Brute-force maximizer of log det(I + lam H(phi) H(phi)^H) over a uniform phase grid."""
    phis = 2 * np.pi * np.arange(points) / points
    a0 = h_minus.conj().T @ h_minus + r.conj().T @ r
    b = h_minus.conj().T @ r
    e = np.exp(1j * phis)[:, None, None]
    gram = a0[None] + e * b[None] + np.conj(e) * b.conj().T[None]
    m = r.shape[1]
    _, logdet = np.linalg.slogdet(np.eye(m)[None] + lam * gram)
    k = int(np.argmax(logdet))
    return phis[k], 2 * np.pi / points


def circular_gap(a, b):
    d = np.abs(np.mod(a - b, 2 * np.pi))
    return min(d, 2 * np.pi - d)


def random_design_instance(rng, max_n=8, max_m=4, max_l=16):
    n = int(rng.integers(1, max_n + 1))
    m = int(rng.integers(1, max_m + 1))
    l = int(rng.integers(1, max_l + 1))
    h_ub = crandn(rng, n, m)
    rank_ones = np.einsum("li,lj->lij", crandn(rng, l, n), crandn(rng, l, m))
    lam = float(10 ** rng.uniform(-1, 2))
    return h_ub, rank_ones, lam
