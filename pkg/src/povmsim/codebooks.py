"""Classical codebooks: i.i.d. tables and coset codes over prime fields.

Codewords are stored as integer letter indices.  A 2-D book is an array of
shape ``(K, M, n)``; a 3-D book has shape ``(K, M, B, n)``.

Message indices map to field row vectors by base-q digits, most significant
digit first, with the k-digits leading, then m, then b.  Thus with
``exps = (lc, lr, lb)`` the message ``(k, m, b)`` is the row vector
``digits(k, lc) | digits(m, lr) | digits(b, lb)``.
"""

from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import linalg as la
from .errors import FieldDivisionByZero
from .sampling import stream
from .typicality import Pmf, is_typical_indices


def is_prime(q: int) -> bool:
    if q < 2:
        return False
    return all(q % f for f in range(2, math.isqrt(q) + 1))


@dataclass(frozen=True)
class PrimeField:
    q: int

    def __post_init__(self):
        if not isinstance(self.q, (int, np.integer)) or not is_prime(int(self.q)):
            raise ValueError(f"{self.q!r} is not a prime")

    def add(self, a: int, b: int) -> int:
        return (a + b) % self.q

    def mul(self, a: int, b: int) -> int:
        return (a * b) % self.q

    def neg(self, a: int) -> int:
        return (-a) % self.q

    def sub(self, a: int, b: int) -> int:
        return (a - b) % self.q

    def inv(self, a: int) -> int:
        if a % self.q == 0:
            raise FieldDivisionByZero(f"0 has no inverse in F_{self.q}")
        return pow(int(a), self.q - 2, self.q)

    @property
    def log_size(self) -> float:
        return math.log2(self.q)

    def elements(self) -> range:
        return range(self.q)


def digits(index: int, length: int, q: int) -> np.ndarray:
    """Base-q digits of ``index``, most significant first."""
    if index < 0 or index >= q**length:
        raise ValueError(f"index {index} does not fit in {length} base-{q} digits")
    out = np.zeros(length, dtype=np.int64)
    for pos in range(length - 1, -1, -1):
        index, out[pos] = divmod(index, q)
    return out


def all_digit_rows(length: int, q: int) -> np.ndarray:
    """Every base-q row of the given length, in increasing index order."""
    if length == 0:
        return np.zeros((1, 0), dtype=np.int64)
    return np.array(list(itertools.product(range(q), repeat=length)), dtype=np.int64)


def message_vector(k: int, m: int, b: int, exps: Sequence[int], q: int) -> np.ndarray:
    lc, lr, lb = exps
    return np.concatenate([digits(k, lc, q), digits(m, lr, q), digits(b, lb, q)])


@dataclass(frozen=True)
class Codebook2D:
    entries: np.ndarray  # (K, M, n) letter indices
    alphabet_size: int

    @property
    def K(self) -> int:
        return self.entries.shape[0]

    @property
    def M(self) -> int:
        return self.entries.shape[1]

    @property
    def n(self) -> int:
        return self.entries.shape[2]

    def __getitem__(self, km) -> np.ndarray:
        return self.entries[km]

    def codewords(self) -> np.ndarray:
        return self.entries.reshape(-1, self.n)


@dataclass(frozen=True)
class Codebook3D:
    entries: np.ndarray  # (K, M, B, n)
    alphabet_size: int

    @property
    def K(self) -> int:
        return self.entries.shape[0]

    @property
    def M(self) -> int:
        return self.entries.shape[1]

    @property
    def B(self) -> int:
        return self.entries.shape[2]

    @property
    def n(self) -> int:
        return self.entries.shape[3]

    def __getitem__(self, kmb) -> np.ndarray:
        return self.entries[kmb]

    def as_2d(self) -> Codebook2D:
        if self.B != 1:
            raise ValueError("only a book with B = 1 collapses to two dimensions")
        return Codebook2D(self.entries[:, :, 0, :], self.alphabet_size)

    def flatten_mb(self) -> Codebook2D:
        """Merge (m, b) into one index, m-major, for covering-style averages."""
        K, M, B, n = self.entries.shape
        return Codebook2D(self.entries.reshape(K, M * B, n), self.alphabet_size)


def sample_iid_codebook(p: Pmf, n: int, K: int, M: int, seed: int) -> Codebook2D:
    """Each entry (k, m) is drawn i.i.d. from p^n on its own stream (seed, k, m)."""
    if min(n, K, M) < 1:
        raise ValueError("n, K and M must be positive")
    entries = np.empty((K, M, n), dtype=np.int64)
    size = len(p)
    for k in range(K):
        for m in range(M):
            entries[k, m] = stream(seed, k, m).choice(size, size=n, p=p.probabilities)
    return Codebook2D(entries, size)


@dataclass(frozen=True)
class CosetCode:
    field: PrimeField
    generator: np.ndarray  # (l, n)
    shift: np.ndarray  # (n,)
    exps: tuple = (0, 0, 0)

    @property
    def n(self) -> int:
        return self.shift.size

    @property
    def rows(self) -> int:
        return self.generator.shape[0]

    def codeword(self, u) -> np.ndarray:
        u = np.asarray(u, dtype=np.int64)
        return (u @ self.generator + self.shift) % self.field.q

    def codebook(self) -> Codebook3D:
        q = self.field.q
        lc, lr, lb = self.exps
        msgs = all_digit_rows(lc + lr + lb, q)
        words = (msgs @ self.generator + self.shift) % q
        return Codebook3D(words.reshape(q**lc, q**lr, q**lb, self.n), q)

    def to_json(self) -> dict:
        return {
            "q": int(self.field.q),
            "n": int(self.n),
            "exps": [int(e) for e in self.exps],
            "G": self.generator.tolist(),
            "shift": self.shift.tolist(),
        }

    @classmethod
    def from_json(cls, obj) -> "CosetCode":
        field = PrimeField(int(obj["q"]))
        n = int(obj["n"])
        exps = tuple(int(e) for e in obj["exps"])
        if len(exps) != 3 or min(exps) < 0:
            raise ValueError("'exps' must be three nonnegative integers")
        g = np.asarray(obj["G"], dtype=np.int64).reshape(sum(exps), n)
        shift = np.asarray(obj["shift"], dtype=np.int64)
        if shift.shape != (n,):
            raise ValueError(f"'shift' must have length {n}")
        if np.any(g < 0) or np.any(g >= field.q) or np.any(shift < 0) or np.any(shift >= field.q):
            raise ValueError("entries must lie in 0..q-1")
        return cls(field, g, shift, exps)


def sample_coset_codebook(field: PrimeField, n: int, exps: Sequence[int], seed: int) -> tuple[CosetCode, Codebook3D]:
    """Uniform generator matrix and shift over F_q; K = q^lc, M = q^lr, B = q^lb."""
    exps = tuple(int(e) for e in exps)
    if len(exps) != 3 or min(exps) < 0:
        raise ValueError("exps must be three nonnegative integers")
    ell = sum(exps)
    if ell > n:
        warnings.warn(f"{ell} message digits exceed block length {n}; codewords will repeat", stacklevel=2)
    q = field.q
    g = np.empty((ell, n), dtype=np.int64)
    for i in range(ell):
        g[i] = stream(seed, 1, i).integers(0, q, size=n)
    shift = stream(seed, 2).integers(0, q, size=n).astype(np.int64)
    code = CosetCode(field, g, shift, exps)
    return code, code.codebook()


def exponent_for_rate(rate: float, n: int, q: int) -> int:
    """Smallest l with q^l >= 2^{nR}."""
    if rate <= 0:
        return 0
    return int(math.ceil(n * rate / math.log2(q) - 1e-12))


def size_for_rate(rate: float, n: int) -> int:
    """ceil(2^{nR}), guarding against round-off at exact powers of two."""
    return max(1, int(math.ceil(2.0 ** (n * rate) * (1 - 1e-12))))


@dataclass(frozen=True)
class PairwiseReport:
    joint: np.ndarray  # (q^n, q^n) probabilities
    draws: int
    distinct: bool
    passed: bool
    max_deviation: float


def pairwise_independence_check(field: PrimeField, n: int, ell: int, messages) -> PairwiseReport:
    """Exact joint law of two codewords over all (G, shift), by enumeration."""
    q = field.q
    u1, u2 = (np.asarray(u, dtype=np.int64) if not np.isscalar(u) else digits(int(u), ell, q) for u in messages)
    if u1.shape != (ell,) or u2.shape != (ell,):
        raise ValueError(f"messages must have {ell} digits")
    draws = q ** ((ell + 1) * n)
    la.check_budget(draws, 1, "coset enumeration")
    counts = np.zeros((q**n, q**n), dtype=np.int64)
    weights = q ** np.arange(n - 1, -1, -1)
    gens = all_digit_rows(ell * n, q).reshape(-1, ell, n)
    shifts = all_digit_rows(n, q)
    c1 = np.einsum("l,glj->gj", u1, gens)
    c2 = np.einsum("l,glj->gj", u2, gens)
    for s in shifts:
        a = ((c1 + s) % q) @ weights
        b = ((c2 + s) % q) @ weights
        np.add.at(counts, (a, b), 1)
    joint = counts / draws
    target = 1.0 / q ** (2 * n)
    dev = float(np.max(np.abs(joint - target)))
    distinct = not np.array_equal(u1 % q, u2 % q)
    return PairwiseReport(joint, draws, distinct, bool(np.all(counts * q ** (2 * n) == draws)), dev)


def marginal_uniformity(field: PrimeField, n: int, ell: int, message) -> bool:
    """Every codeword value is equally likely over all (G, shift)."""
    rep = pairwise_independence_check(field, n, ell, (message, message))
    marg = rep.joint.sum(axis=1)
    counts = marg * rep.draws
    return bool(np.all(counts * field.q**n == rep.draws))


@dataclass(frozen=True)
class DecodeResult:
    status: str  # "unique", "none" or "ambiguous"
    b: int | None
    matches: int

    @property
    def ok(self) -> bool:
        return self.status == "unique"


def typical_index_decode(cb: Codebook3D, k: int, m: int, p: Pmf, delta: float) -> DecodeResult:
    hits = [b for b in range(cb.B) if is_typical_indices(cb.entries[k, m, b], p, delta)]
    if len(hits) == 1:
        return DecodeResult("unique", hits[0], 1)
    if not hits:
        return DecodeResult("none", None, 0)
    return DecodeResult("ambiguous", None, len(hits))


def decode_table(cb: Codebook3D, p: Pmf, delta: float) -> list[list[DecodeResult]]:
    return [[typical_index_decode(cb, k, m, p, delta) for m in range(cb.M)] for k in range(cb.K)]


def unique_decode_rate(cb: Codebook3D, p: Pmf, delta: float) -> float:
    table = decode_table(cb, p, delta)
    flat = [r.ok for row in table for r in row]
    return float(np.mean(flat))


def iid_to_json(cb: Codebook2D) -> dict:
    return {"n": cb.n, "K": cb.K, "M": cb.M, "entries": cb.entries.tolist()}


def iid_from_json(obj, alphabet_size: int) -> Codebook2D:
    entries = np.asarray(obj["entries"], dtype=np.int64)
    if entries.ndim != 3 or entries.shape != (obj["K"], obj["M"], obj["n"]):
        raise ValueError("'entries' must have shape K x M x n")
    return Codebook2D(entries, alphabet_size)
