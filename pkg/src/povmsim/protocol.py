"""End-to-end measurement compression with likelihood POVMs.

Given a state ``rho``, a target POVM ``lam`` and a compatible triple
``(W, mu, p_{Y|W})`` (meaning ``lam_y = sum_w p(y|w) mu_w`` on the support of
``rho``), the sender holds common randomness ``k`` and measures

    theta_{k,m} = S_k^{-1/2} sqrt(w) mu_{k,m} sqrt(w) S_k^{-1/2} / tr(w mu_{k,m}),
    S_k = sum_m sqrt(w) mu_{k,m} sqrt(w) / tr(w mu_{k,m}),

with ``w = rho^{(x)n}`` and ``mu_{k,m}`` the product POVM element of codeword
``c(k, m)``.  The completion ``theta_{k,0} = I - sum_m theta_{k,m}`` catches the
rest.  The receiver pushes ``c(k, m)`` through ``p^n_{Y|W}``.

Output states are :class:`~povmsim.qstates.CqState` objects whose labels are
tuples ``y^n`` and whose blocks live on the reference system.  Blocks obtained
from the purification are complex conjugated (the reference carries the
conjugate basis); the covering-style terms use unconjugated blocks, which have
the same trace norms.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import linalg as la
from .codebooks import (
    Codebook2D,
    Codebook3D,
    PrimeField,
    decode_table,
    sample_coset_codebook,
    sample_iid_codebook,
    size_for_rate,
)
from .errors import DimensionMismatch, IncompatibleTriple, LabelMismatch
from .qstates import (
    ClassicalChannel,
    CqState,
    Ensemble,
    Povm,
    canonical_purification,
    check_density,
    cq_tensor_power,
    holevo_information,
    measure_system,
    reference_measurement_state,
)
from .typicality import DEFAULT_DELTA, Pmf

COMPAT_TOL = 1e-8
DEGENERATE_TRACE = 1e-14


# --------------------------------------------------------------------------
# triples


@dataclass(frozen=True)
class CompatibleTriple:
    """``mu`` over W together with a classical channel W -> Y."""

    mu: Povm
    channel: ClassicalChannel

    def __post_init__(self):
        if tuple(self.mu.labels) != tuple(self.channel.input_labels):
            raise LabelMismatch("mu labels must equal the channel input labels, in order")

    @classmethod
    def trivial(cls, lam: Povm) -> "CompatibleTriple":
        """mu = lam with the identity channel."""
        return cls(lam, ClassicalChannel.identity(lam.labels))

    @property
    def w_labels(self) -> tuple:
        return self.mu.labels

    @property
    def y_labels(self) -> tuple:
        return self.channel.output_labels


@dataclass(frozen=True)
class CompatibilityReport:
    max_deviation: float
    per_label: dict
    passed: bool


def check_compatibility(rho, lam: Povm, triple: CompatibleTriple, tol: float = COMPAT_TOL) -> CompatibilityReport:
    """Compare sqrt(rho) lam_y sqrt(rho) with sum_w p(y|w) sqrt(rho) mu_w sqrt(rho) for each y."""
    rho = check_density(rho)
    if lam.dim != rho.shape[0] or triple.mu.dim != rho.shape[0]:
        raise DimensionMismatch("state and POVMs have different dimensions")
    if set(lam.labels) != set(triple.y_labels):
        return CompatibilityReport(math.inf, {}, False)
    r = la.op_sqrt(rho)
    sandwiched = [r @ m @ r for m in triple.mu.elements]
    per = {}
    for j, y in enumerate(triple.y_labels):
        mixed = sum(triple.channel.probabilities[i, j] * s for i, s in enumerate(sandwiched))
        per[y] = float(np.max(np.abs(r @ lam[y] @ r - mixed)))
    worst = max(per.values())
    return CompatibilityReport(worst, per, worst <= tol)


@dataclass(frozen=True)
class DerivedTriple:
    """p_W, beta_w and gamma_w for a triple on a given state.

    Labels with ``p_W(w) = 0`` are listed in ``dropped`` and have no beta/gamma.
    Codebooks index letters by position in ``triple.w_labels``.
    """

    triple: CompatibleTriple
    rho: np.ndarray
    p_w: Pmf
    beta: dict
    gamma: dict
    dropped: tuple

    @property
    def retained(self) -> tuple:
        return tuple(i for i in range(len(self.p_w)) if i not in self.dropped)


def derive_beta_gamma(rho, triple: CompatibleTriple) -> DerivedTriple:
    """beta_w = sqrt(rho) mu_w sqrt(rho) / p_W(w); gamma_w = sum_y p(y|w) beta_w (x) |y><y|."""
    rho = check_density(rho)
    r = la.op_sqrt(rho)
    probs = np.array([float(np.trace(rho @ m).real) for m in triple.mu.elements])
    probs = np.clip(probs, 0.0, None)
    dropped = tuple(i for i, p in enumerate(probs) if p < DEGENERATE_TRACE)
    probs[list(dropped)] = 0.0
    probs = probs / probs.sum()
    beta, gamma = {}, {}
    for i, m in enumerate(triple.mu.elements):
        if i in dropped:
            continue
        b = r @ m @ r / probs[i]
        beta[i] = 0.5 * (b + b.conj().T)
        row = triple.channel.probabilities[i]
        gamma[i] = CqState({y: row[j] * beta[i] for j, y in enumerate(triple.y_labels)})
    return DerivedTriple(triple, rho, Pmf(probs), beta, gamma, dropped)


def rates(derived: DerivedTriple) -> tuple[float, float]:
    """(chi of beta_w, chi of gamma_w) under p_W, in bits."""
    keep = derived.retained
    pw = derived.p_w.probabilities[list(keep)]
    chi_b = holevo_information(Ensemble(keep, tuple(derived.beta[i] for i in keep), pw))
    chi_g = holevo_information(Ensemble(keep, tuple(derived.gamma[i] for i in keep), pw))
    return chi_b, chi_g


def structured_thresholds(derived: DerivedTriple, q: int) -> tuple[float, float]:
    """Rate thresholds chi + log q - H(p_W) for the coset construction."""
    chi_b, chi_g = rates(derived)
    extra = math.log2(q) - derived.p_w.entropy()
    return chi_b + extra, chi_g + extra


# --------------------------------------------------------------------------
# likelihood POVM


@dataclass
class LikelihoodPovm:
    """theta[k, 0] is the completion; theta[k, j] for j >= 1 belongs to words[k, j-1]."""

    n: int
    words: np.ndarray  # (K, J, n) letter indices; J = M, or M*B when structured
    S: np.ndarray  # (K, D, D)
    theta: np.ndarray  # (K, J+1, D, D)
    skipped: list = field(default_factory=list)
    B: int = 1

    @property
    def K(self) -> int:
        return self.words.shape[0]

    @property
    def J(self) -> int:
        return self.words.shape[1]

    @property
    def M(self) -> int:
        return self.J // self.B

    @property
    def dim(self) -> int:
        return self.S.shape[1]

    def povm(self, k: int) -> Povm:
        return Povm(tuple(range(self.J + 1)), tuple(self.theta[k]))

    def completeness_error(self) -> float:
        eye = np.eye(self.dim)
        return float(max(np.max(np.abs(self.theta[k].sum(axis=0) - eye)) for k in range(self.K)))

    def min_eigenvalue(self) -> float:
        return float(min(la.min_eigenvalue(t) for t in self.theta.reshape(-1, self.dim, self.dim)))

    def nullity_error(self) -> float:
        """max_k of max-entry |sqrt(theta_k0) S_k sqrt(theta_k0)|."""
        worst = 0.0
        for k in range(self.K):
            r = la.op_sqrt(self.theta[k, 0])
            worst = max(worst, float(np.max(np.abs(r @ self.S[k] @ r))))
        return worst


def _codeword_operator(mu: Povm, word) -> np.ndarray:
    return la.kron_all([mu.elements[a] for a in word])


def _herm(a: np.ndarray) -> np.ndarray:
    return 0.5 * (a + a.conj().T)


def _likelihood_core(rho, mu: Povm, words: np.ndarray, n: int) -> LikelihoodPovm:
    K, J, _ = words.shape
    omega = la.tensor_power(rho, n)
    sq = la.op_sqrt(omega)
    D = omega.shape[0]
    la.check_budget(K * (J + 1) * D, D, "likelihood POVM")
    cache: dict = {}
    S = np.zeros((K, D, D), dtype=complex)
    theta = np.zeros((K, J + 1, D, D), dtype=complex)
    skipped = []
    eye = np.eye(D, dtype=complex)
    for k in range(K):
        parts = []
        s_k = np.zeros((D, D), dtype=complex)
        for j in range(J):
            key = tuple(int(a) for a in words[k, j])
            if key not in cache:
                mu_c = _codeword_operator(mu, key)
                tr = float(np.trace(omega @ mu_c).real)
                cache[key] = None if tr < DEGENERATE_TRACE else _herm(sq @ mu_c @ sq / tr)
            a = cache[key]
            parts.append(a)
            if a is None:
                skipped.append((k, j))
            else:
                s_k = s_k + a
        g = la.gen_inv_sqrt(s_k)
        for j, a in enumerate(parts):
            if a is not None:
                theta[k, j + 1] = _herm(g @ a @ g)
        # g resolves weak eigendirections of S_k only to ~eps/lambda, so sum_j
        # theta_kj overshoots its support projector (eigenvalues 1 + 1e-8 when
        # S_k is badly conditioned).  Its own spectrum clusters at 0 and 1, so a
        # second normalization is well conditioned; in exact arithmetic it is
        # the identity map.
        h = la.gen_inv_sqrt(theta[k, 1:].sum(axis=0), cutoff=0.5)
        for j, a in enumerate(parts):
            if a is not None:
                theta[k, j + 1] = _herm(h @ theta[k, j + 1] @ h)
        theta[k, 0] = eye - theta[k, 1:].sum(axis=0)
        S[k] = s_k
    return LikelihoodPovm(n, words.copy(), S, theta, skipped)


def build_likelihood_povm(rho, triple: CompatibleTriple, codebook: Codebook2D, n: int | None = None) -> LikelihoodPovm:
    rho = check_density(rho)
    n = codebook.n if n is None else n
    if n != codebook.n:
        raise DimensionMismatch("codebook block length differs from n")
    return _likelihood_core(rho, triple.mu, codebook.entries, n)


def build_structured_povm(rho, triple: CompatibleTriple, codebook: Codebook3D, n: int | None = None) -> LikelihoodPovm:
    """Likelihood POVM over (m, b) pairs, m-major, normalized by the joint S_k."""
    rho = check_density(rho)
    PrimeField(len(triple.w_labels))
    n = codebook.n if n is None else n
    if n != codebook.n:
        raise DimensionMismatch("codebook block length differs from n")
    flat = codebook.flatten_mb()
    lik = _likelihood_core(rho, triple.mu, flat.entries, n)
    lik.B = codebook.B
    return lik


# --------------------------------------------------------------------------
# decoder


@dataclass(frozen=True)
class DecoderPovm:
    """Stochastic map from outcomes (k, j) to y^n.

    ``words[k, j]`` is the codeword the receiver feeds to the channel for
    outcome j (j = 0 is the completion outcome).
    """

    channel: ClassicalChannel
    words: np.ndarray  # (K, J+1, n)

    @property
    def n(self) -> int:
        return self.words.shape[2]

    def y_labels(self) -> list[tuple]:
        return list(itertools.product(self.channel.output_labels, repeat=self.n))

    def row(self, k: int, j: int) -> np.ndarray:
        return self.channel.sequence_row(self.words[k, j])

    def rows(self) -> np.ndarray:
        K, J1, _ = self.words.shape
        return np.array([[self.row(k, j) for j in range(J1)] for k in range(K)])


def build_decoder(triple: CompatibleTriple, codebook: Codebook2D) -> DecoderPovm:
    """Outcome (k, m) decodes to c(k, m); the completion outcome uses c(k, first m)."""
    e = codebook.entries
    words = np.concatenate([e[:, :1, :], e], axis=1)
    return DecoderPovm(triple.channel, words)


def build_structured_decoder(triple: CompatibleTriple, codebook: Codebook3D, p_w: Pmf,
                             delta: float = DEFAULT_DELTA) -> tuple[DecoderPovm, float]:
    """Receiver sees (k, m), recovers b by typical-index decoding.

    Failed decodes (no or several typical b) fall back to b = first index.
    Returns the decoder and the fraction of (k, m) pairs that failed.
    """
    table = decode_table(codebook, p_w, delta)
    K, M, B, n = codebook.entries.shape
    chosen = np.empty((K, M, n), dtype=np.int64)
    fails = 0
    for k in range(K):
        for m in range(M):
            res = table[k][m]
            fails += not res.ok
            chosen[k, m] = codebook.entries[k, m, res.b if res.ok else 0]
    per_outcome = np.repeat(chosen, B, axis=1)  # outcome index m*B + b
    words = np.concatenate([per_outcome[:, :1, :], per_outcome], axis=1)
    return DecoderPovm(triple.channel, words), fails / (K * M)


# --------------------------------------------------------------------------
# output states


def _y_sequences(labels: Sequence, n: int) -> list[tuple]:
    return list(itertools.product(tuple(labels), repeat=n))


def alpha_o(rho, lam: Povm, n: int) -> CqState:
    """Blocks conj(sqrt(w) lam_{y^n} sqrt(w)) for w = rho^{(x)n}."""
    omega = la.tensor_power(check_density(rho), n)
    return reference_measurement_state(omega, lam.tensor_power(n))


def alpha_direct(rho, triple: CompatibleTriple, codebook: Codebook2D, n: int | None = None) -> CqState:
    """(1/KM) sum_{k,m} sum_{y^n} p^n(y^n|c(k,m)) conj(sqrt(w) mu_{k,m} sqrt(w)) / tr(w mu_{k,m})."""
    rho = check_density(rho)
    n = codebook.n if n is None else n
    omega = la.tensor_power(rho, n)
    sq = la.op_sqrt(omega)
    D = omega.shape[0]
    ys = _y_sequences(triple.y_labels, n)
    blocks = {y: np.zeros((D, D), dtype=complex) for y in ys}
    K, M = codebook.K, codebook.M
    for k in range(K):
        for m in range(M):
            word = codebook.entries[k, m]
            mu_c = _codeword_operator(triple.mu, word)
            tr = float(np.trace(omega @ mu_c).real)
            if tr < DEGENERATE_TRACE:
                continue
            b = la.basis_conjugate(sq @ mu_c @ sq) / (tr * K * M)
            weights = triple.channel.sequence_row(word)
            for idx in np.flatnonzero(weights):
                blocks[ys[idx]] = blocks[ys[idx]] + weights[idx] * b
    return CqState(blocks)


def _input_state(rho, lik: LikelihoodPovm, source: str) -> list[np.ndarray]:
    if source == "rho":
        omega = la.tensor_power(rho, lik.n)
        return [omega] * lik.K
    if source == "sigma":
        if lik.skipped:
            raise ValueError("the auxiliary state is not normalized when codewords were skipped")
        return [lik.S[k] / lik.J for k in range(lik.K)]
    raise ValueError("source must be 'rho' or 'sigma'")


def alpha_via_channels(rho, lik: LikelihoodPovm, dec: DecoderPovm, source: str = "rho") -> CqState:
    """Push the canonical purification of a state on A^n K through theta, Delta and tr_K.

    ``source="rho"`` uses ``rho_K = (1/K) sum_k rho^{(x)n} (x) |k><k|`` and yields
    the simulated output; ``source="sigma"`` uses the auxiliary state
    ``(1/K) sum_k (S_k/M) (x) |k><k|`` and reproduces :func:`alpha_direct`.
    Everything is materialized densely, so keep dimensions small.
    """
    rho = check_density(rho)
    K, J1, D = lik.K, lik.J + 1, lik.dim
    la.check_budget(D * K, D * K, "purified register")
    parts = _input_state(rho, lik, source)
    tau = np.zeros((D * K, D * K), dtype=complex)
    for k, part in enumerate(parts):
        e = np.zeros((K, K))
        e[k, k] = 1.0
        tau = tau + np.kron(part, e) / K
    ps = canonical_purification(tau)
    labels, elems = [], []
    for k in range(K):
        e = np.zeros((K, K))
        e[k, k] = 1.0
        for j in range(J1):
            labels.append((k, j))
            elems.append(np.kron(lik.theta[k, j], e))
    measured = measure_system(ps, Povm(tuple(labels), tuple(elems)))
    ys = dec.y_labels()
    acc = {y: np.zeros((D * K, D * K), dtype=complex) for y in ys}
    for (k, j), block in measured.blocks.items():
        weights = dec.row(k, j)
        for idx in np.flatnonzero(weights):
            acc[ys[idx]] = acc[ys[idx]] + weights[idx] * block
    return CqState({y: la.partial_trace(b, [D, K], [0]) for y, b in acc.items()})


def effective_povm(lik: LikelihoodPovm, dec: DecoderPovm) -> dict:
    """y^n -> (1/K) sum_{k,j} Delta_{y^n|k,j} theta_{k,j}."""
    ys = dec.y_labels()
    D = lik.dim
    out = {y: np.zeros((D, D), dtype=complex) for y in ys}
    for k in range(lik.K):
        for j in range(lik.J + 1):
            weights = dec.row(k, j)
            for idx in np.flatnonzero(weights):
                out[ys[idx]] = out[ys[idx]] + (weights[idx] / lik.K) * lik.theta[k, j]
    return out


def alpha_s(rho, lik: LikelihoodPovm, dec: DecoderPovm) -> CqState:
    """Closed form conj(sqrt(w) E_{y^n} sqrt(w)) with E the effective POVM."""
    omega = la.tensor_power(check_density(rho), lik.n)
    sq = la.op_sqrt(omega)
    return CqState({y: la.basis_conjugate(sq @ e @ sq) for y, e in effective_povm(lik, dec).items()})


def sigma_ank(rho, lik: LikelihoodPovm) -> tuple[CqState, float]:
    """sigma = (1/K) sum_k T_k (x) |k><k| with T_k = S_k / M, and ||sigma - rho_K||_1."""
    omega = la.tensor_power(check_density(rho), lik.n)
    blocks = {}
    dist = 0.0
    for k in range(lik.K):
        t = lik.S[k] / lik.J
        blocks[k] = t / lik.K
        dist += la.trace_norm(t - omega) / lik.K
    return CqState(blocks), dist


def purification_gap(rho, lik: LikelihoodPovm) -> float:
    """Exact distance between canonical purifications of sigma_{A^nK} and rho_K."""
    omega = la.tensor_power(check_density(rho), lik.n)
    r = la.op_sqrt(omega)
    ov = sum(float(np.trace(la.op_sqrt(lik.S[k] / lik.J) @ r).real) for k in range(lik.K)) / lik.K
    return 2.0 * math.sqrt(max(0.0, 1.0 - ov * ov))


# --------------------------------------------------------------------------
# covering-style terms


def _beta_product(derived: DerivedTriple, word) -> np.ndarray:
    return la.kron_all([derived.beta[int(a)] for a in word])


def gamma_power(derived: DerivedTriple, n: int) -> CqState:
    """gamma^{(x)n} with gamma = sum_w p_W(w) gamma_w."""
    pw = derived.p_w.probabilities
    keep = derived.retained
    gamma = CqState.mixture([derived.gamma[i] for i in keep], [pw[i] for i in keep])
    return cq_tensor_power(gamma, n)


def gamma_mixture(derived: DerivedTriple, words: np.ndarray, weights: np.ndarray | None = None) -> CqState:
    """sum_j weights[j] gamma_{words[j]} (uniform weights by default)."""
    words = np.atleast_2d(np.asarray(words, dtype=np.int64))
    total = words.shape[0]
    if weights is None:
        weights = np.full(total, 1.0 / total)
    n = words.shape[1]
    ch = derived.triple.channel
    ys = _y_sequences(ch.output_labels, n)
    D = derived.rho.shape[0] ** n
    blocks = {y: np.zeros((D, D), dtype=complex) for y in ys}
    merged: dict = {}
    for word, w in zip(words, weights):
        key = tuple(int(a) for a in word)
        merged[key] = merged.get(key, 0.0) + float(w)
    for key, w in merged.items():
        if w == 0.0 or any(a in derived.dropped for a in key):
            continue
        b = _beta_product(derived, key)
        row = ch.sequence_row(key)
        for idx in np.flatnonzero(row):
            blocks[ys[idx]] = blocks[ys[idx]] + (w * row[idx]) * b
    return CqState(blocks)


def beta_mixture(derived: DerivedTriple, words: np.ndarray, weights: np.ndarray | None = None) -> np.ndarray:
    words = np.atleast_2d(np.asarray(words, dtype=np.int64))
    total = words.shape[0]
    if weights is None:
        weights = np.full(total, 1.0 / total)
    D = derived.rho.shape[0] ** words.shape[1]
    out = np.zeros((D, D), dtype=complex)
    for word, w in zip(words, weights):
        if w != 0.0 and not any(int(a) in derived.dropped for a in word):
            out = out + w * _beta_product(derived, word)
    return out


def _coset_weights(derived: DerivedTriple, words: np.ndarray) -> np.ndarray:
    q = len(derived.p_w)
    n = words.shape[1]
    probs = np.prod(derived.p_w.probabilities[words], axis=1)
    return (float(q) ** n) * probs / words.shape[0]


# --------------------------------------------------------------------------
# end-to-end


@dataclass
class SimulationReport:
    n: int
    K: int
    M: int
    C: float
    R: float
    chi_beta: float
    chi_gamma: float
    term1: float
    term2_raw: float
    seed: int
    decode_failure_rate: float = 0.0
    exact_distance: float = math.nan
    purification_distance: float = math.nan
    povm_error: float = math.nan
    nullity: float = math.nan
    B: int = 1

    @property
    def term2(self) -> float:
        return 4.0 * self.term2_raw**0.25

    @property
    def total(self) -> float:
        return self.term1 + self.term2

    def row(self, instance_id: str) -> dict:
        return {
            "instance_id": instance_id,
            "n": self.n,
            "K": self.K,
            "M": self.M,
            "C": self.C,
            "R": self.R,
            "chi_beta": self.chi_beta,
            "chi_gamma": self.chi_gamma,
            "term1": self.term1,
            "term2_raw": self.term2_raw,
            "term2": self.term2,
            "total": self.total,
            "decode_failure_rate": self.decode_failure_rate,
            "seed": self.seed,
        }


SIMULATE_COLUMNS = (
    "instance_id", "n", "K", "M", "C", "R", "chi_beta", "chi_gamma",
    "term1", "term2_raw", "term2", "total", "decode_failure_rate", "seed",
)


def _require_compatible(rho, lam: Povm, triple: CompatibleTriple) -> None:
    rep = check_compatibility(rho, lam, triple)
    if not rep.passed:
        raise IncompatibleTriple(f"triple does not reproduce the POVM (max deviation {rep.max_deviation:.3e})")


def simulate_end_to_end(
    rho,
    lam: Povm,
    triple: CompatibleTriple,
    n: int,
    seed: int,
    K: int | None = None,
    M: int | None = None,
    C: float | None = None,
    R: float | None = None,
    exact: bool = True,
) -> SimulationReport:
    """Sample an i.i.d. codebook, build the protocol and evaluate both error terms.

    Sizes come either from ``K``/``M`` directly or from rates via
    ``K = ceil(2^{nC})`` and ``M = ceil(2^{nR})``.
    """
    rho = check_density(rho)
    _require_compatible(rho, lam, triple)
    if K is None:
        K = size_for_rate(C if C is not None else 0.0, n)
    if M is None:
        M = size_for_rate(R if R is not None else 0.0, n)
    C = math.log2(K) / n if C is None else C
    R = math.log2(M) / n if R is None else R
    derived = derive_beta_gamma(rho, triple)
    chi_b, chi_g = rates(derived)
    cb = sample_iid_codebook(derived.p_w, n, K, M, seed)
    term1 = gamma_power(derived, n).distance(gamma_mixture(derived, cb.codewords()))
    lik = build_likelihood_povm(rho, triple, cb, n)
    _, term2_raw = sigma_ank(rho, lik)
    rep = SimulationReport(n, K, M, float(C), float(R), chi_b, chi_g, term1, term2_raw, seed)
    rep.povm_error = lik.completeness_error()
    rep.nullity = lik.nullity_error()
    rep.purification_distance = purification_gap(rho, lik)
    if exact:
        dec = build_decoder(triple, cb)
        rep.exact_distance = alpha_o(rho, lam, n).distance(alpha_s(rho, lik, dec))
    return rep


def structured_simulate(
    rho,
    lam: Povm,
    triple: CompatibleTriple,
    n: int,
    exps: Sequence[int],
    seed: int,
    delta: float = DEFAULT_DELTA,
    exact: bool = True,
) -> SimulationReport:
    """Coset-code variant: only m is communicated, b is recovered by typicality.

    The covering terms use the uniform-codeword weighting q^n p_W^n(w^n):
    term1 over the whole (k, m, b) table and term2 per k over (m, b).
    """
    rho = check_density(rho)
    _require_compatible(rho, lam, triple)
    q = len(triple.w_labels)
    field_ = PrimeField(q)
    derived = derive_beta_gamma(rho, triple)
    chi_b, chi_g = rates(derived)
    _, cb = sample_coset_codebook(field_, n, exps, seed)
    K, M, B = cb.K, cb.M, cb.B
    table = cb.entries.reshape(-1, n)
    term1 = gamma_power(derived, n).distance(gamma_mixture(derived, table, _coset_weights(derived, table)))
    omega = la.tensor_power(rho, n)
    term2_raw = 0.0
    for k in range(K):
        words = cb.entries[k].reshape(-1, n)
        term2_raw += la.trace_norm(omega - beta_mixture(derived, words, _coset_weights(derived, words))) / K
    lc, lr, _ = exps
    dec, fail = build_structured_decoder(triple, cb, derived.p_w, delta)
    rep = SimulationReport(n, K, M, lc * math.log2(q) / n, lr * math.log2(q) / n, chi_b, chi_g,
                           term1, term2_raw, seed, decode_failure_rate=fail, B=B)
    lik = build_structured_povm(rho, triple, cb, n)
    rep.povm_error = lik.completeness_error()
    rep.nullity = lik.nullity_error()
    if exact:
        rep.exact_distance = alpha_o(rho, lam, n).distance(alpha_s(rho, lik, dec))
    return rep
