"""Reproducible randomness: counter-based streams and random quantum objects.

Every random draw in the package goes through :func:`stream`, which maps a
master seed plus an integer key path to an independent Philox generator.
Because the key path names the consumer (codebook entry, trial index, ...),
results do not depend on iteration order.
"""

from __future__ import annotations

import hashlib
from typing import Iterable

import numpy as np


def stream(seed: int, *key: int) -> np.random.Generator:
    """Independent generator for ``(seed, *key)``.

    >>> a = stream(7, 1, 2).integers(0, 100, 3)
    >>> b = stream(7, 1, 2).integers(0, 100, 3)
    >>> bool((a == b).all())
    True
    """
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(ss))


def hashed_seed(*parts: object) -> int:
    """Stable 63-bit seed derived from an arbitrary tuple of printable parts."""
    text = "\x1f".join(repr(p) for p in parts).encode()
    return int.from_bytes(hashlib.sha256(text).digest()[:8], "big") >> 1


def random_unitary(d: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-random unitary via QR of a complex Ginibre matrix."""
    z = (rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    ph = np.diag(r) / np.abs(np.diag(r))
    return q * ph


def random_hermitian(d: int, rng: np.random.Generator) -> np.ndarray:
    z = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    return 0.5 * (z + z.conj().T)


def random_density(d: int, rng: np.random.Generator, rank: int | None = None) -> np.ndarray:
    """Random density matrix of the given rank (full rank by default)."""
    rank = d if rank is None else rank
    g = rng.standard_normal((d, rank)) + 1j * rng.standard_normal((d, rank))
    rho = g @ g.conj().T
    rho = 0.5 * (rho + rho.conj().T)
    return rho / np.trace(rho).real


def random_pure(d: int, rng: np.random.Generator) -> np.ndarray:
    return random_density(d, rng, rank=1)


def random_povm(d: int, outcomes: int, rng: np.random.Generator) -> list[np.ndarray]:
    """Random full-rank POVM with ``outcomes`` elements.

    Draws positive ``G_y`` and normalizes them as ``T^{-1/2} G_y T^{-1/2}``
    with ``T = sum_y G_y``.
    """
    gs = []
    for _ in range(outcomes):
        g = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
        gs.append(g @ g.conj().T)
    total = sum(gs)
    vals, vecs = np.linalg.eigh(total)
    t = (vecs / np.sqrt(vals)) @ vecs.conj().T
    out = []
    for g in gs:
        e = t @ g @ t
        out.append(0.5 * (e + e.conj().T))
    return out


def random_stochastic(rows: int, cols: int, rng: np.random.Generator) -> np.ndarray:
    """Random row-stochastic matrix (Dirichlet(1) rows)."""
    return rng.dirichlet(np.ones(cols), size=rows)


def random_pmf(size: int, rng: np.random.Generator) -> np.ndarray:
    return rng.dirichlet(np.ones(size))


def seeds_for(seed: int, count: int, *key: int) -> Iterable[int]:
    """Deterministic child seeds, one per index."""
    for i in range(count):
        yield int(stream(seed, *key, i).integers(0, 2**63 - 1))
