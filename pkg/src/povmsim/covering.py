"""Monte Carlo engine for the quantum covering lemma.

For an ensemble ``{p(x), s_x}`` with average ``s`` and a random codebook
``A = (x^n(1), ..., x^n(M))`` we measure ``||s^{(x)n} - s(A)||_1`` where

* iid mode: ``s(A) = (1/M) sum_m s_{x^n(m)}`` with codewords drawn from p^n;
* coset mode: ``s(A) = (1/M) sum_m q^n p^n(x^n(m)) s_{x^n(m)}`` with codewords
  from a uniformly random coset code (pairwise independent, uniform).

The weighted mixture is deliberately left unnormalized.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import linalg as la
from .errors import DimensionMismatch
from .codebooks import (
    PrimeField,
    all_digit_rows,
    exponent_for_rate,
    sample_coset_codebook,
    sample_iid_codebook,
    size_for_rate,
)
from .qstates import Ensemble, check_density, holevo_information
from .sampling import stream
from .typicality import DEFAULT_DELTA, Pmf, conditional_typical_projector, typical_projector

T2_SLACK_CONSTANT = 4


@dataclass(frozen=True)
class CoveringInstance:
    pmf: Pmf
    states: tuple
    n: int
    rate: float
    mode: str = "iid"
    delta: float = DEFAULT_DELTA

    def __post_init__(self):
        states = tuple(check_density(s, f"s_{i}") for i, s in enumerate(self.states))
        if len(states) != len(self.pmf):
            raise ValueError("one state per letter is required")
        if len({s.shape for s in states}) != 1:
            raise DimensionMismatch("all letter states must share a dimension")
        if self.mode not in ("iid", "coset"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.mode == "coset":
            PrimeField(len(self.pmf))
        if self.n < 1 or self.rate < 0:
            raise ValueError("need n >= 1 and R >= 0")
        object.__setattr__(self, "states", states)

    @property
    def dim(self) -> int:
        return self.states[0].shape[0]

    @property
    def q(self) -> int:
        return len(self.pmf)

    def states_dict(self) -> dict:
        return dict(enumerate(self.states))

    def average(self) -> np.ndarray:
        return sum(p * s for p, s in zip(self.pmf.probabilities, self.states))

    def chi(self) -> float:
        return holevo_information(Ensemble(tuple(range(self.q)), self.states, self.pmf.probabilities))

    def codebook_size(self) -> int:
        if self.mode == "iid":
            return size_for_rate(self.rate, self.n)
        return self.q ** exponent_for_rate(self.rate, self.n, self.q)

    def bound(self, delta: float = 0.0) -> float:
        """2^{-(n/2)(R - chi - c delta)}; coset mode adds log q - H(p) to chi."""
        gap = self.rate - self.chi() - T2_SLACK_CONSTANT * delta
        if self.mode == "coset":
            gap -= math.log2(self.q) - self.pmf.entropy()
        return 2.0 ** (-self.n * gap / 2.0)

    def with_n(self, n: int) -> "CoveringInstance":
        return CoveringInstance(self.pmf, self.states, n, self.rate, self.mode, self.delta)


@dataclass
class CoveringResult:
    distances: np.ndarray
    chi: float
    bound: float
    n: int
    rate: float
    seed: int
    mode: str
    trace_drift: np.ndarray = field(default_factory=lambda: np.zeros(0))

    @property
    def trials(self) -> int:
        return self.distances.size

    @property
    def mean(self) -> float:
        return float(np.mean(self.distances))

    @property
    def std(self) -> float:
        return float(np.std(self.distances, ddof=1)) if self.trials > 1 else 0.0

    @property
    def stderr(self) -> float:
        return self.std / math.sqrt(self.trials)

    def quantile(self, level: float) -> float:
        return float(np.quantile(self.distances, level))


def _product_mixture(states: Sequence[np.ndarray], words: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """sum_j weights[j] (x)_i states[words[j, i]], grouped by trailing letter.

    Products are folded left to right like ``tensor_power`` so that a book of
    one repeated word reproduces the target bit for bit.
    """
    n = words.shape[1]
    if n == 0:
        return np.array([[weights.sum()]], dtype=complex)
    d = states[0].shape[0]
    la.check_budget(d**n, d**n, "codebook mixture")
    out = None
    for a in np.unique(words[:, -1]):
        sel = words[:, -1] == a
        head = _product_mixture(states, words[sel, :-1], weights[sel])
        term = np.kron(head, states[a])
        out = term if out is None else out + term
    return out


def product_state(states: Sequence[np.ndarray], word) -> np.ndarray:
    """s_{x^n} = (x)_i s_{x_i}."""
    return la.kron_all([states[a] for a in word])


def mixture_iid(states: Sequence[np.ndarray], codewords) -> np.ndarray:
    """Uniform average of product states over the codewords."""
    words = np.atleast_2d(np.asarray(codewords, dtype=np.int64))
    if words.shape[0] == 0:
        raise ValueError("need at least one codeword")
    words, counts = np.unique(words, axis=0, return_counts=True)
    return _product_mixture(states, words, counts / counts.sum())


def mixture_weighted(field: PrimeField, pmf: Pmf, states: Sequence[np.ndarray], codewords) -> np.ndarray:
    """(1/M) sum_m q^n p^n(x^n(m)) s_{x^n(m)}, not renormalized."""
    words = np.atleast_2d(np.asarray(codewords, dtype=np.int64))
    if words.shape[0] == 0:
        raise ValueError("need at least one codeword")
    if len(pmf) != field.q:
        raise ValueError("pmf alphabet must be the field")
    total = words.shape[0]
    words, counts = np.unique(words, axis=0, return_counts=True)
    n = words.shape[1]
    probs = np.prod(pmf.probabilities[words], axis=1)
    weights = counts * (float(field.q) ** n) * probs / total
    return _product_mixture(states, words, weights)


def sample_codewords(inst: CoveringInstance, seed: int) -> np.ndarray:
    """One random codebook for the instance, as an (M, n) array."""
    if inst.mode == "iid":
        cb = sample_iid_codebook(inst.pmf, inst.n, 1, inst.codebook_size(), seed)
        return cb.entries[0]
    field_ = PrimeField(inst.q)
    ell = exponent_for_rate(inst.rate, inst.n, inst.q)
    _, cb = sample_coset_codebook(field_, inst.n, (0, ell, 0), seed)
    return cb.entries[0, :, 0, :]


def codebook_mixture(inst: CoveringInstance, words: np.ndarray) -> np.ndarray:
    if inst.mode == "iid":
        return mixture_iid(inst.states, words)
    return mixture_weighted(PrimeField(inst.q), inst.pmf, inst.states, words)


def covering_trial(inst: CoveringInstance, seed: int, target: np.ndarray | None = None) -> float:
    """||s^{(x)n} - s(A)||_1 for one random codebook."""
    if target is None:
        target = la.tensor_power(inst.average(), inst.n)
    mix = codebook_mixture(inst, sample_codewords(inst, seed))
    return la.trace_norm(target - mix)


def trial_seed(seed: int, trial: int) -> int:
    return int(stream(seed, trial).integers(0, 2**63 - 1))


def covering_experiment(inst: CoveringInstance, trials: int, seed: int, bound_delta: float = 0.0,
                        seeds: Sequence[int] | None = None) -> CoveringResult:
    """Independent trials; trial t uses ``seeds[t]`` or a seed derived from (seed, t)."""
    if trials < 1:
        raise ValueError("trials must be at least 1")
    if seeds is None:
        seeds = [trial_seed(seed, t) for t in range(trials)]
    elif len(seeds) != trials:
        raise ValueError("need one seed per trial")
    target = la.tensor_power(inst.average(), inst.n)
    dists = np.empty(trials)
    drift = np.empty(trials)
    for t in range(trials):
        mix = codebook_mixture(inst, sample_codewords(inst, seeds[t]))
        dists[t] = la.trace_norm(target - mix)
        drift[t] = float(np.trace(mix).real) - 1.0
    return CoveringResult(dists, inst.chi(), inst.bound(bound_delta), inst.n, inst.rate, seed, inst.mode, drift)


def covering_row(instance_id: str, res: CoveringResult) -> dict:
    return {
        "instance_id": instance_id,
        "mode": res.mode,
        "n": res.n,
        "R": res.rate,
        "chi": res.chi,
        "trials": res.trials,
        "mean_dist": res.mean,
        "std_dist": res.std,
        "bound": res.bound,
        "seed": res.seed,
    }


COVERING_COLUMNS = ("instance_id", "mode", "n", "R", "chi", "trials", "mean_dist", "std_dist", "bound", "seed")


# --------------------------------------------------------------------------
# T1 / T2 / T3


@dataclass(frozen=True)
class T123:
    t1: float
    t2: float
    t3: float
    distance: float
    t2_bound: float

    @property
    def total(self) -> float:
        return self.t1 + self.t2 + self.t3

    @property
    def holds(self) -> bool:
        return self.distance <= self.total + 1e-9


def _letter_classes(states: Sequence[np.ndarray]) -> np.ndarray:
    """Map each letter to the first letter with a bitwise-identical state."""
    rep = np.arange(len(states))
    for i in range(len(states)):
        for j in range(i):
            if rep[j] == j and np.array_equal(states[i], states[j]):
                rep[i] = j
                break
    return rep


class _Sandwich:
    """Cache of pi pi_x s_x pi_x pi keyed by the class sequence."""

    def __init__(self, inst: CoveringInstance, delta: float, classical_delta: float | None):
        self.inst = inst
        self.delta = delta
        self.classical_delta = classical_delta
        self.pi = typical_projector(inst.average(), inst.n, delta).matrix()
        if classical_delta is None:
            self.rep = _letter_classes(inst.states)
        else:
            self.rep = np.arange(inst.q)
        self.cache: dict = {}

    def key(self, word) -> tuple:
        return tuple(int(self.rep[a]) for a in word)

    def __call__(self, key: tuple) -> np.ndarray:
        if key not in self.cache:
            inst = self.inst
            cp = conditional_typical_projector(
                inst.states_dict(), key, self.delta, pmf=inst.pmf, classical_delta=self.classical_delta
            )
            px = cp.matrix()
            sx = product_state(inst.states, key)
            inner = px @ sx @ px
            self.cache[key] = self.pi @ inner @ self.pi
        return self.cache[key]

    def class_pmf(self) -> dict:
        probs: dict = {}
        for a, p in enumerate(self.inst.pmf.probabilities):
            r = int(self.rep[a])
            probs[r] = probs.get(r, 0.0) + float(p)
        total = sum(probs.values())
        return {r: p / total for r, p in probs.items()}


def _weighted_sum(terms: dict, fn, d: int) -> np.ndarray:
    out = np.zeros((d, d), dtype=complex)
    for key, w in terms.items():
        if w != 0.0:
            out = out + w * fn(key)
    return out


def expected_w(sand: _Sandwich) -> np.ndarray:
    """w = sum_{x^n} p^n(x^n) pi pi_x s_x pi_x pi, exhaustively over class sequences."""
    inst = sand.inst
    cp = sand.class_pmf()
    labels = sorted(cp)
    la.check_budget(len(labels) ** inst.n, 1, "exhaustive sequence sum")
    terms = {}
    for combo in np.ndindex(*([len(labels)] * inst.n)):
        key = tuple(labels[i] for i in combo)
        w = 1.0
        for a in key:
            w *= cp[a]
        terms[key] = w
    return _weighted_sum(terms, sand, inst.dim**inst.n)


def codebook_w(sand: _Sandwich, words: np.ndarray) -> np.ndarray:
    """w(A) = (1/M) sum_m pi pi_x s_x pi_x pi."""
    counts: dict = {}
    for word in np.atleast_2d(words):
        k = sand.key(word)
        counts[k] = counts.get(k, 0) + 1
    total = words.shape[0]
    return _weighted_sum({k: c / total for k, c in counts.items()}, sand, sand.inst.dim**sand.inst.n)


def t123_decomposition(
    inst: CoveringInstance,
    codewords,
    delta: float | None = None,
    classical_delta: float | None = None,
    cache: _Sandwich | None = None,
    w: np.ndarray | None = None,
) -> T123:
    """T1 = ||s(A) - w(A)||, T2 = ||w(A) - w||, T3 = ||w - s^n|| for one codebook.

    ``classical_delta=None`` keeps every x^n (no strong-typicality screening of
    the conditioning sequence); pass a value to apply the indicator.
    """
    delta = inst.delta if delta is None else delta
    words = np.atleast_2d(np.asarray(codewords, dtype=np.int64))
    sand = cache if cache is not None else _Sandwich(inst, delta, classical_delta)
    if w is None:
        w = expected_w(sand)
    wa = codebook_w(sand, words)
    sa = mixture_iid(inst.states, words)
    target = la.tensor_power(inst.average(), inst.n)
    t1 = la.trace_norm(sa - wa)
    t2 = la.trace_norm(wa - w)
    t3 = la.trace_norm(w - target)
    dist = la.trace_norm(sa - target)
    gap = inst.rate - inst.chi() - T2_SLACK_CONSTANT * delta
    return T123(t1, t2, t3, dist, 2.0 ** (-inst.n * gap / 2.0))


def t123_experiment(inst: CoveringInstance, trials: int, seed: int, delta: float | None = None,
                    classical_delta: float | None = None, seeds: Sequence[int] | None = None) -> list[T123]:
    delta = inst.delta if delta is None else delta
    if seeds is None:
        seeds = [trial_seed(seed, t) for t in range(trials)]
    sand = _Sandwich(inst, delta, classical_delta)
    w = expected_w(sand)
    out = []
    for t in range(trials):
        words = sample_codewords(inst, seeds[t])
        out.append(t123_decomposition(inst, words, delta, classical_delta, cache=sand, w=w))
    return out


# --------------------------------------------------------------------------
# root-variance step


@dataclass(frozen=True)
class RootVariance:
    mean_trace_norm: float
    root_of_mean_square: float

    @property
    def holds(self) -> bool:
        return self.mean_trace_norm <= self.root_of_mean_square + 1e-9


def root_variance_check(samples: Sequence[tuple[float, np.ndarray]]) -> RootVariance:
    """Compare E[tr sqrt(v^dagger v)] with tr sqrt(E[v^dagger v]) for a finite law."""
    probs = np.array([p for p, _ in samples], dtype=float)
    if np.any(probs < 0) or abs(probs.sum() - 1.0) > 1e-9:
        raise ValueError("sample probabilities must form a distribution")
    lhs = 0.0
    second = None
    for p, v in samples:
        vv = v.conj().T @ v
        lhs += p * float(np.sum(np.sqrt(np.clip(la.eigvalsh(vv), 0.0, None))))
        second = p * vv if second is None else second + p * vv
    rhs = float(np.sum(np.sqrt(np.clip(la.eigvalsh(second), 0.0, None))))
    return RootVariance(lhs, rhs)


def coset_w_law(inst: CoveringInstance, ell: int, delta: float | None = None) -> list[tuple[float, np.ndarray]]:
    """Exact law of v(A) = w(A) - E w(A) over every coset code with ``ell`` rows.

    Each (generator, shift) pair is equally likely; the codebook is the full
    coset of ``q^ell`` words.  The expectation is taken over the same
    enumeration, so no sampling is involved.
    """
    delta = inst.delta if delta is None else delta
    q = inst.q
    PrimeField(q)
    n = inst.n
    la.check_budget(q ** ((ell + 1) * n), 1, "coset enumeration")
    sand = _Sandwich(inst, delta, None)
    msgs = all_digit_rows(ell, q)
    ws = []
    for gflat in all_digit_rows(ell * n, q):
        g = gflat.reshape(ell, n)
        for shift in all_digit_rows(n, q):
            words = (msgs @ g + shift) % q
            ws.append(codebook_w(sand, words))
    p = 1.0 / len(ws)
    mean = sum(ws) * p
    return [(p, wa - mean) for wa in ws]
