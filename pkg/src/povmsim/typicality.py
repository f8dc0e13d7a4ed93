"""Typical sets and typical projectors.

Classical sequences use strong (frequency) typicality::

    |N(a|x^n)/n - p(a)| <= delta * p(a)   and   N(a|x^n) = 0 if p(a) = 0.

Quantum projectors use entropy (weak) typicality of eigen-index sequences in a
product eigenbasis: ``y^n`` is kept when ``|-(1/n) log2 P(y^n) - H| <= delta``.
With this window each kept direction has probability in
``[2^{-n(H+delta)}, 2^{-n(H-delta)}]``, so the slack constant in the standard
operator inequalities is exactly one.

Projectors are stored as a boolean mask over ``d^n`` product eigenvectors
together with the single-letter eigenbases; the dense matrix is only formed on
request.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Hashable, Mapping, Sequence

import numpy as np

from . import linalg as la
from .errors import DimensionMismatch
from .qstates import check_density, shannon_entropy

DEFAULT_DELTA = 0.2
PMF_TOL = 1e-12


@dataclass(frozen=True)
class Pmf:
    """Probability vector on an ordered finite alphabet."""

    probabilities: np.ndarray
    alphabet: tuple = ()

    def __post_init__(self):
        p = np.asarray(self.probabilities, dtype=float).ravel()
        if p.size == 0 or np.any(p < 0) or abs(p.sum() - 1.0) > PMF_TOL:
            raise ValueError(f"not a probability vector: {p!r}")
        alphabet = tuple(self.alphabet) or tuple(range(p.size))
        if len(alphabet) != p.size or len(set(alphabet)) != p.size:
            raise ValueError("alphabet must list each letter once, one per probability")
        object.__setattr__(self, "probabilities", p)
        object.__setattr__(self, "alphabet", alphabet)

    @classmethod
    def uniform(cls, size: int) -> "Pmf":
        return cls(np.full(size, 1.0 / size))

    def __len__(self) -> int:
        return self.probabilities.size

    def index(self, letter: Hashable) -> int:
        return self.alphabet.index(letter)

    def entropy(self) -> float:
        return shannon_entropy(self.probabilities)

    def sequence_prob(self, x_idx) -> float:
        return float(np.prod(self.probabilities[np.asarray(x_idx, dtype=int)]))


def letter_counts(x_idx, size: int) -> np.ndarray:
    return np.bincount(np.asarray(x_idx, dtype=int), minlength=size)


def is_typical_indices(x_idx, p: Pmf, delta: float) -> bool:
    """Strong typicality for a sequence of alphabet *indices*."""
    if delta <= 0:
        raise ValueError("delta must be positive")
    x_idx = np.asarray(x_idx, dtype=int)
    n = x_idx.size
    if n == 0:
        return True
    if np.any(x_idx < 0) or np.any(x_idx >= len(p)):
        return False
    freq = letter_counts(x_idx, len(p)) / n
    probs = p.probabilities
    if np.any((probs == 0) & (freq > 0)):
        return False
    return bool(np.all(np.abs(freq - probs) <= delta * probs + 1e-12))


def is_typical(x_n: Sequence, p: Pmf, delta: float) -> bool:
    """Strong typicality of a sequence of alphabet letters.

    Letters outside the alphabet make the sequence atypical.

    >>> is_typical([0, 1, 0, 1], Pmf([0.5, 0.5]), 0.1)
    True
    """
    lookup = {a: i for i, a in enumerate(p.alphabet)}
    idx = []
    for a in x_n:
        if a not in lookup:
            return False
        idx.append(lookup[a])
    return is_typical_indices(idx, p, delta)


def typical_fraction(p: Pmf, n: int, delta: float) -> float:
    """Probability mass p^n(T_delta), by enumeration of types."""
    total = 0.0
    for seq in itertools.product(range(len(p)), repeat=n):
        if is_typical_indices(seq, p, delta):
            total += p.sequence_prob(seq)
    return total


def _sequence_logprob(single_probs: Sequence[np.ndarray]) -> np.ndarray:
    """-log2 of product probabilities for every index sequence, row-major.

    Zero probabilities give ``inf``.
    """
    out = np.zeros(1)
    with np.errstate(divide="ignore"):
        for p in single_probs:
            lp = np.where(p > 0, -np.log2(np.where(p > 0, p, 1.0)), np.inf)
            out = (out[:, None] + lp[None, :]).ravel()
    return out


def _entropy_window(single_probs: Sequence[np.ndarray], centre: float, delta: float) -> np.ndarray:
    n = len(single_probs)
    rate = _sequence_logprob(single_probs) / n
    return np.isfinite(rate) & (np.abs(rate - centre) <= delta + 1e-12)


def _letter_spectrum(s) -> la.SpectralDecomposition:
    dec = la.spectral_decompose(check_density(s))
    return la.SpectralDecomposition(np.clip(dec.eigenvalues, 0.0, None), dec.eigenvectors)


@dataclass(frozen=True)
class ProductProjector:
    """Diagonal 0/1 projector in a product basis ``U_1 (x) ... (x) U_n``."""

    n: int
    delta: float
    mask: np.ndarray
    bases: tuple

    @property
    def dim(self) -> int:
        return self.mask.size

    def rank(self) -> int:
        return int(np.count_nonzero(self.mask))

    def basis(self) -> np.ndarray:
        d = self.dim
        la.check_budget(d, d, "product eigenbasis")
        return la.kron_all(list(self.bases))

    def matrix(self) -> np.ndarray:
        d = self.dim
        if not self.mask.any():
            return np.zeros((d, d), dtype=complex)
        b = self.basis()[:, self.mask]
        return b @ b.conj().T


@dataclass(frozen=True)
class TypicalProjector(ProductProjector):
    entropy: float = 0.0
    spectrum: np.ndarray | None = None


@dataclass(frozen=True)
class ConditionalTypicalProjector(ProductProjector):
    sequence: tuple = ()
    centre: float = 0.0
    classical_typical: bool = True


def typical_projector(s, n: int, delta: float = DEFAULT_DELTA) -> TypicalProjector:
    """Entropy-typical projector of ``s^{(x) n}`` in its eigenbasis."""
    if n < 1:
        raise ValueError("n must be positive")
    if delta <= 0:
        raise ValueError("delta must be positive")
    dec = _letter_spectrum(s)
    d = dec.eigenvalues.size
    la.check_budget(d**n, d**n, "typical projector")
    probs = dec.eigenvalues
    h = shannon_entropy(probs)
    mask = _entropy_window([probs] * n, h, delta)
    return TypicalProjector(n, float(delta), mask, (dec.eigenvectors,) * n, entropy=h, spectrum=probs)


def conditional_typical_projector(
    states: Mapping[Hashable, np.ndarray],
    x_n: Sequence,
    delta: float = DEFAULT_DELTA,
    pmf: Pmf | None = None,
    classical_delta: float | None = None,
) -> ConditionalTypicalProjector:
    """Conditional typical projector of ``s_{x^n} = (x)_i s_{x_i}``.

    The entropy window is centred at ``sum_a p(a) S(s_a)`` when ``pmf`` is
    given and at the empirical ``(1/n) sum_i S(s_{x_i})`` otherwise.  When
    ``classical_delta`` is given (requires ``pmf``) the projector is multiplied
    by the indicator that ``x^n`` is strongly typical for ``pmf``.
    """
    if delta <= 0:
        raise ValueError("delta must be positive")
    x_n = tuple(x_n)
    n = len(x_n)
    if n == 0:
        raise ValueError("empty conditioning sequence")
    specs = {x: _letter_spectrum(s) for x, s in states.items()}
    dims = {v.eigenvalues.size for v in specs.values()}
    if len(dims) != 1:
        raise DimensionMismatch("conditional states must share a dimension")
    d = dims.pop()
    la.check_budget(d**n, d**n, "conditional typical projector")
    ent = {x: shannon_entropy(v.eigenvalues) for x, v in specs.items()}
    if pmf is not None:
        centre = float(sum(p * ent[a] for a, p in zip(pmf.alphabet, pmf.probabilities)))
    else:
        centre = float(np.mean([ent[x] for x in x_n]))
    typical = True
    if classical_delta is not None:
        if pmf is None:
            raise ValueError("classical_delta needs a pmf")
        typical = is_typical(x_n, pmf, classical_delta)
    if typical:
        mask = _entropy_window([specs[x].eigenvalues for x in x_n], centre, delta)
    else:
        mask = np.zeros(d**n, dtype=bool)
    bases = tuple(specs[x].eigenvectors for x in x_n)
    return ConditionalTypicalProjector(
        n, float(delta), mask, bases, sequence=x_n, centre=centre, classical_typical=typical
    )


def conditional_bound(cp: ConditionalTypicalProjector) -> float:
    """Eigenvalue ceiling 2^{-n(H - delta)} for pi_x s_x pi_x."""
    return 2.0 ** (-cp.n * (cp.centre - cp.delta))


@dataclass(frozen=True)
class ProjectorBounds:
    trace: float
    trace_bound: float
    max_eigenvalue: float
    eigenvalue_bound: float
    captured_mass: float

    @property
    def holds(self) -> bool:
        return self.trace <= self.trace_bound * (1 + 1e-9) and self.max_eigenvalue <= self.eigenvalue_bound * (1 + 1e-9)


def projector_bounds(tp: TypicalProjector, s=None) -> ProjectorBounds:
    """Check tr(pi) <= 2^{n(S+delta)} and pi s^n pi <= 2^{-n(S-delta)} pi.

    Both are evaluated exactly in the product eigenbasis, where ``pi`` and
    ``s^{(x)n}`` are simultaneously diagonal.
    """
    if s is None:
        probs = tp.spectrum
    else:
        probs = _letter_spectrum(s).eigenvalues
    diag = np.exp2(-_sequence_logprob([probs] * tp.n))
    kept = diag[tp.mask]
    h = shannon_entropy(probs)
    return ProjectorBounds(
        trace=float(tp.rank()),
        trace_bound=2.0 ** (tp.n * (h + tp.delta)),
        max_eigenvalue=float(kept.max()) if kept.size else 0.0,
        eigenvalue_bound=2.0 ** (-tp.n * (h - tp.delta)),
        captured_mass=float(kept.sum()),
    )
