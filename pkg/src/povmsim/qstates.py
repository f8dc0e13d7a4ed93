"""Quantum-state layer.

Density operators are plain square ``ndarray`` objects validated on demand.
The richer objects (POVMs, ensembles, purifications, classical-quantum
states, classical channels) are small frozen dataclasses.

Conventions
-----------
* A purification lives on ``reference (x) system``; its amplitudes are stored
  as a ``dim_ref x dim_sys`` matrix ``M`` so that ``|phi> = sum M[a, b] |a>|b>``.
* Blocks of a classical-quantum state produced by measuring the system half of
  a purification are complex conjugated, matching the basis-conjugation that
  appears on the reference side.
* Entropies are in bits.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Hashable, Iterable, Mapping, Sequence

import numpy as np

from . import linalg as la
from .errors import (
    AverageMismatch,
    DimensionMismatch,
    LabelMismatch,
    NotADensityOperator,
    NotIsometry,
)

TRACE_TOL = 1e-9
POVM_SUM_TOL = 1e-8
PMF_TOL = 1e-12
ENTROPY_ZERO = 1e-14


# --------------------------------------------------------------------------
# density operators


def check_density(rho, name: str = "state") -> np.ndarray:
    """Return ``rho`` as a Hermitian matrix, raising if it is not a state."""
    m = la.as_hermitian(rho)
    tr = float(np.trace(m).real)
    if abs(tr - 1.0) > TRACE_TOL:
        raise NotADensityOperator(f"{name} has trace {tr!r}, expected 1 within {TRACE_TOL:.0e}")
    low = la.min_eigenvalue(m)
    if low < -la.TOL_PSD:
        raise NotADensityOperator(f"{name} has eigenvalue {low:.3e} below -{la.TOL_PSD:.0e}")
    return m


def is_density(rho) -> bool:
    try:
        check_density(rho)
    except (NotADensityOperator, ValueError):
        return False
    return True


# --------------------------------------------------------------------------
# POVMs


@dataclass(frozen=True)
class Povm:
    """Finite labeled family of positive operators.

    Completeness is *not* enforced at construction; use :func:`validate_povm`.
    """

    labels: tuple
    elements: tuple

    def __post_init__(self):
        labels = tuple(self.labels)
        elems = tuple(la.as_matrix(e) for e in self.elements)
        if len(labels) != len(elems):
            raise DimensionMismatch("labels and elements differ in length")
        if len(set(labels)) != len(labels):
            raise LabelMismatch("duplicate POVM labels")
        if not elems:
            raise DimensionMismatch("a POVM needs at least one element")
        d = elems[0].shape
        for e in elems:
            if e.shape != d or e.shape[0] != e.shape[1]:
                raise DimensionMismatch("POVM elements must be square and of equal size")
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "elements", elems)

    @classmethod
    def from_mapping(cls, mapping: Mapping[Hashable, np.ndarray]) -> "Povm":
        return cls(tuple(mapping), tuple(mapping.values()))

    @classmethod
    def computational(cls, d: int) -> "Povm":
        elems = []
        for i in range(d):
            e = np.zeros((d, d), dtype=complex)
            e[i, i] = 1.0
            elems.append(e)
        return cls(tuple(range(d)), tuple(elems))

    @property
    def dim(self) -> int:
        return self.elements[0].shape[0]

    def __len__(self) -> int:
        return len(self.labels)

    def __getitem__(self, label) -> np.ndarray:
        return self.elements[self.labels.index(label)]

    def items(self):
        return zip(self.labels, self.elements)

    def total(self) -> np.ndarray:
        return np.sum(self.elements, axis=0)

    def tensor_power(self, n: int) -> "Povm":
        """n-fold product POVM, labels are tuples of single-letter labels."""
        d = self.dim
        la.check_budget(d**n, d**n, "product POVM element")
        labels = []
        elems = []
        for combo in itertools.product(range(len(self)), repeat=n):
            labels.append(tuple(self.labels[i] for i in combo))
            elems.append(la.kron_all([self.elements[i] for i in combo]))
        return Povm(tuple(labels), tuple(elems))


@dataclass(frozen=True)
class PovmReport:
    min_eigenvalue: float
    completeness_error: float
    passed: bool

    def __str__(self) -> str:
        status = "pass" if self.passed else "fail"
        return f"{status}: min eigenvalue {self.min_eigenvalue:.3e}, max |sum - I| {self.completeness_error:.3e}"


def validate_povm(p: Povm, sum_tol: float = POVM_SUM_TOL, psd_tol: float = la.TOL_PSD) -> PovmReport:
    if all(la.is_hermitian(e) for e in p.elements):
        low = min(la.min_eigenvalue(e) for e in p.elements)
    else:
        low = -math.inf  # a non-Hermitian element is not positive in any sense
    dev = float(np.max(np.abs(p.total() - np.eye(p.dim))))
    ok = bool(low >= -psd_tol and dev <= sum_tol)
    return PovmReport(float(low), dev, ok)


# --------------------------------------------------------------------------
# ensembles and channels


@dataclass(frozen=True)
class Ensemble:
    """States (matrices or :class:`CqState`) with a probability vector."""

    labels: tuple
    states: tuple
    pmf: np.ndarray

    def __post_init__(self):
        labels = tuple(self.labels)
        pmf = np.asarray(self.pmf, dtype=float)
        if len(labels) != len(self.states) or pmf.shape != (len(labels),):
            raise DimensionMismatch("labels, states and pmf must have equal length")
        if np.any(pmf < 0) or abs(pmf.sum() - 1.0) > PMF_TOL:
            raise ValueError(f"pmf must be nonnegative and sum to 1, got sum {pmf.sum()!r}")
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "states", tuple(self.states))
        object.__setattr__(self, "pmf", pmf)

    def average(self):
        if isinstance(self.states[0], CqState):
            return CqState.mixture(self.states, self.pmf)
        return sum(p * np.asarray(s, dtype=complex) for p, s in zip(self.pmf, self.states))


@dataclass(frozen=True)
class ClassicalChannel:
    """Row-stochastic matrix ``probabilities[w, y] = p(y|w)``."""

    input_labels: tuple
    output_labels: tuple
    probabilities: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.probabilities, dtype=float)
        ins, outs = tuple(self.input_labels), tuple(self.output_labels)
        if p.shape != (len(ins), len(outs)):
            raise DimensionMismatch(f"channel matrix shape {p.shape} does not match labels")
        if np.any(p < 0) or np.max(np.abs(p.sum(axis=1) - 1.0)) > PMF_TOL:
            raise ValueError("channel rows must be probability vectors")
        object.__setattr__(self, "input_labels", ins)
        object.__setattr__(self, "output_labels", outs)
        object.__setattr__(self, "probabilities", p)

    @classmethod
    def identity(cls, labels: Sequence) -> "ClassicalChannel":
        labels = tuple(labels)
        return cls(labels, labels, np.eye(len(labels)))

    def row(self, w) -> np.ndarray:
        return self.probabilities[self.input_labels.index(w)]

    def sequence_prob(self, w_idx: Sequence[int], y_idx: Sequence[int]) -> float:
        """p^n(y^n|w^n) for index sequences."""
        return float(np.prod(self.probabilities[np.asarray(w_idx), np.asarray(y_idx)]))

    def sequence_row(self, w_idx: Sequence[int]) -> np.ndarray:
        """Vector over all y^n (row-major) of p^n(y^n|w^n)."""
        out = np.ones(1)
        for w in w_idx:
            out = np.kron(out, self.probabilities[w])
        return out


# --------------------------------------------------------------------------
# classical-quantum states


@dataclass(frozen=True)
class CqState:
    """Block-diagonal operator ``sum_y block_y (x) |y><y|`` stored by label."""

    blocks: Mapping

    def __post_init__(self):
        blocks = {k: la.as_matrix(v) for k, v in dict(self.blocks).items()}
        if not blocks:
            raise DimensionMismatch("a CqState needs at least one block")
        shape = next(iter(blocks.values())).shape
        for v in blocks.values():
            if v.shape != shape or shape[0] != shape[1]:
                raise DimensionMismatch("CqState blocks must be square and of equal size")
        object.__setattr__(self, "blocks", blocks)

    @property
    def labels(self) -> tuple:
        return tuple(self.blocks)

    @property
    def dim(self) -> int:
        return next(iter(self.blocks.values())).shape[0]

    def trace(self) -> float:
        return float(sum(np.trace(b).real for b in self.blocks.values()))

    def assemble(self) -> np.ndarray:
        return la.block_diag(list(self.blocks.values()))

    def conjugate(self) -> "CqState":
        return CqState({k: la.basis_conjugate(v) for k, v in self.blocks.items()})

    def distance(self, other: "CqState") -> float:
        """Trace distance ``||self - other||_1`` via blocks; missing labels are zero."""
        if self.dim != other.dim:
            raise DimensionMismatch("CqStates have different block sizes")
        total = 0.0
        for k in dict.fromkeys(self.labels + other.labels):
            a = self.blocks.get(k)
            b = other.blocks.get(k)
            if a is None:
                total += la.trace_norm(b)
            elif b is None:
                total += la.trace_norm(a)
            else:
                total += la.trace_norm(a - b)
        return total

    def kron(self, other: "CqState") -> "CqState":
        """Tensor product with label concatenation (labels become tuples)."""
        out = {}
        for ka, a in self.blocks.items():
            for kb, b in other.blocks.items():
                out[_as_tuple(ka) + _as_tuple(kb)] = la.kron(a, b)
        return CqState(out)

    def scaled(self, c: float) -> "CqState":
        return CqState({k: c * v for k, v in self.blocks.items()})

    @staticmethod
    def mixture(states: Sequence["CqState"], weights: Sequence[float]) -> "CqState":
        out: dict = {}
        for s, w in zip(states, weights):
            for k, v in s.blocks.items():
                out[k] = out.get(k, 0) + w * v
        return CqState(out)

    def block_eigenvalues(self) -> np.ndarray:
        return np.concatenate([la.eigvalsh(b) for b in self.blocks.values()])


def _as_tuple(label) -> tuple:
    return label if isinstance(label, tuple) else (label,)


def cq_tensor_power(cq: CqState, n: int) -> CqState:
    out = CqState({_as_tuple(k): v for k, v in cq.blocks.items()})
    for _ in range(n - 1):
        out = out.kron(cq)
    return out


# --------------------------------------------------------------------------
# purifications


@dataclass(frozen=True)
class PurifiedState:
    """Pure state on reference (x) system, amplitudes as a ``dim_ref x dim_sys`` matrix."""

    amplitudes: np.ndarray

    def __post_init__(self):
        m = la.as_matrix(self.amplitudes)
        norm = float(np.linalg.norm(m))
        if abs(norm - 1.0) > 1e-10:
            raise ValueError(f"purification has norm {norm!r}")
        object.__setattr__(self, "amplitudes", m)

    @property
    def dim_ref(self) -> int:
        return self.amplitudes.shape[0]

    @property
    def dim_sys(self) -> int:
        return self.amplitudes.shape[1]

    def vector(self) -> np.ndarray:
        return self.amplitudes.reshape(-1)

    def density(self) -> np.ndarray:
        v = self.vector()
        la.check_budget(v.size, v.size, "purification density")
        return np.outer(v, v.conj())

    def system_marginal(self) -> np.ndarray:
        m = self.amplitudes
        return m.T @ m.conj()

    def reference_marginal(self) -> np.ndarray:
        m = self.amplitudes
        return m @ m.conj().T

    def overlap(self, other: "PurifiedState") -> complex:
        return complex(np.vdot(self.vector(), other.vector()))


def canonical_purification(s, method: str = "lapack") -> PurifiedState:
    """``sum_i sqrt(g_i) |conj(u_i)> (x) |u_i>`` from the spectral decomposition of ``s``."""
    s = check_density(s)
    dec = la.spectral_decompose(s, method)
    g = np.sqrt(np.clip(dec.eigenvalues, 0.0, None))
    u = dec.eigenvectors
    amps = (u.conj() * g) @ u.T
    return PurifiedState(amps)


def apply_reference_isometry(ps: PurifiedState, v) -> PurifiedState:
    v = la.as_matrix(v)
    if v.shape[1] != ps.dim_ref:
        raise DimensionMismatch(f"isometry input dim {v.shape[1]} != reference dim {ps.dim_ref}")
    if not la.is_isometry(v):
        raise NotIsometry("V^dagger V differs from the identity by more than 1e-10")
    return PurifiedState(v @ ps.amplitudes)


def measure_system(ps: PurifiedState, povm: Povm) -> CqState:
    """(id_ref (x) E^povm) applied to ``|psi><psi|``; block y is ``M povm_y^T M^dagger``."""
    if povm.dim != ps.dim_sys:
        raise DimensionMismatch("POVM acts on a space of the wrong size")
    m = ps.amplitudes
    return CqState({y: m @ e.T @ m.conj().T for y, e in povm.items()})


def measured_purification_distance(ps: PurifiedState, lam: Povm, theta: Povm) -> float:
    if lam.labels != theta.labels:
        raise LabelMismatch("POVMs have different label sets")
    return measure_system(ps, lam).distance(measure_system(ps, theta))


# --------------------------------------------------------------------------
# measurement channels


def measurement_channel(p: Povm, s) -> CqState:
    """Outcome distribution as a CqState with 1x1 blocks."""
    s = la.as_matrix(s)
    if s.shape[0] != p.dim:
        raise DimensionMismatch(f"state dim {s.shape[0]} != POVM dim {p.dim}")
    return CqState({y: np.array([[np.trace(s @ e).real]]) for y, e in p.items()})


def outcome_probabilities(p: Povm, s) -> np.ndarray:
    return np.array([b[0, 0].real for b in measurement_channel(p, s).blocks.values()])


def reference_measurement_state(s, p: Povm) -> CqState:
    """Blocks ``conj(sqrt(s) lam_y sqrt(s))``."""
    s = check_density(s)
    if s.shape[0] != p.dim:
        raise DimensionMismatch(f"state dim {s.shape[0]} != POVM dim {p.dim}")
    r = la.op_sqrt(s)
    return CqState({y: la.basis_conjugate(r @ e @ r) for y, e in p.items()})


def classical_postprocess(cq: CqState, ch: ClassicalChannel) -> CqState:
    if set(cq.labels) != set(ch.input_labels):
        raise LabelMismatch(f"CqState labels {cq.labels} != channel inputs {ch.input_labels}")
    out = {}
    for j, y in enumerate(ch.output_labels):
        acc = None
        for i, w in enumerate(ch.input_labels):
            pw = ch.probabilities[i, j]
            if pw == 0.0:
                continue
            term = pw * cq.blocks[w]
            acc = term if acc is None else acc + term
        if acc is not None:
            out[y] = acc
    return CqState(out)


# --------------------------------------------------------------------------
# entropies


def shannon_entropy(p) -> float:
    p = np.asarray(p, dtype=float).ravel()
    p = p[p > ENTROPY_ZERO]
    return float(-np.sum(p * np.log2(p)))


def von_neumann_entropy(x) -> float:
    """Entropy in bits of a matrix or of an assembled :class:`CqState`."""
    if isinstance(x, CqState):
        vals = x.block_eigenvalues()
    else:
        vals = la.eigvalsh(x)
    return shannon_entropy(vals)


def binary_entropy(p: float) -> float:
    return shannon_entropy([p, 1.0 - p])


def holevo_information(e: Ensemble) -> float:
    """chi = S(average) - sum_w p(w) S(state_w), in bits."""
    avg = e.average()
    inner = sum(p * von_neumann_entropy(s) for p, s in zip(e.pmf, e.states) if p > 0)
    return von_neumann_entropy(avg) - inner


# --------------------------------------------------------------------------
# distances


def purification_distance(s, r) -> tuple[float, float]:
    """(exact, bound) for canonical purifications of ``s`` and ``r``.

    ``exact = 2 sqrt(1 - |<phi_s|phi_r>|^2)``, ``bound = 2 sqrt(2) ||s - r||_1^(1/4)``.
    """
    a = canonical_purification(s)
    b = canonical_purification(r)
    ov = abs(a.overlap(b))
    exact = 2.0 * math.sqrt(max(0.0, 1.0 - ov * ov))
    bound = 2.0 * math.sqrt(2.0) * la.trace_norm(la.as_matrix(s) - la.as_matrix(r)) ** 0.25
    return exact, bound


def fidelity_overlap(s, r) -> float:
    """tr(sqrt(s) sqrt(r)), the purification overlap computed without purifying."""
    return float(np.trace(la.op_sqrt(s) @ la.op_sqrt(r)).real)


def ensemble_simulation_distance(rho, lam: Povm, theta: Povm, e: Ensemble, tol: float = 1e-8) -> float:
    """sum_k sum_y |p(k) tr(lam_y s_k) - p(k) tr(theta_y s_k)|."""
    rho = la.as_matrix(rho)
    avg = e.average()
    dev = float(np.max(np.abs(avg - rho)))
    if dev > tol:
        raise AverageMismatch(f"ensemble average deviates from rho by {dev:.3e}")
    total = 0.0
    for pk, sk in zip(e.pmf, e.states):
        diff = outcome_probabilities(lam, sk) - outcome_probabilities(theta, sk)
        total += float(pk * np.sum(np.abs(diff)))
    return total


def sandwiched_distance(rho, lam: Povm, theta: Povm) -> float:
    """sum_y ||sqrt(rho) lam_y sqrt(rho) - sqrt(rho) theta_y sqrt(rho)||_1."""
    r = la.op_sqrt(rho)
    return float(sum(la.trace_norm(r @ (a - b) @ r) for a, b in zip(lam.elements, theta.elements)))


# --------------------------------------------------------------------------
# JSON exchange


def povm_to_json(p: Povm) -> dict:
    return {"labels": list(p.labels), "elements": [la.matrix_to_json(e) for e in p.elements]}


def povm_from_json(obj) -> Povm:
    labels = obj["labels"]
    elems = [la.matrix_from_json(e) for e in obj["elements"]]
    return Povm(tuple(_freeze(l) for l in labels), tuple(elems))


def ensemble_to_json(e: Ensemble) -> dict:
    return {
        "labels": list(e.labels),
        "pmf": [float(x) for x in e.pmf],
        "states": [la.matrix_to_json(s) for s in e.states],
    }


def ensemble_from_json(obj) -> Ensemble:
    states = [la.matrix_from_json(s) for s in obj["states"]]
    return Ensemble(tuple(_freeze(l) for l in obj["labels"]), tuple(states), np.asarray(obj["pmf"], dtype=float))


def _freeze(label):
    return tuple(_freeze(x) for x in label) if isinstance(label, list) else label


def labels_product(labels: Iterable, n: int) -> list[tuple]:
    return list(itertools.product(tuple(labels), repeat=n))
