"""Dense complex matrix kernel.

Spectral decompositions, operator functions, trace norms, tensor products,
partial traces and complex conjugation in the computational basis.  Matrices
are plain ``numpy.ndarray`` objects; every function is pure.

Two eigensolvers are available.  ``method="lapack"`` (the default) calls the
Hermitian LAPACK driver through numpy; ``method="jacobi"`` runs a cyclic
complex Jacobi iteration written here, which is slow but dependency free and
serves as an independent cross-check.
"""

from __future__ import annotations

import math
from contextlib import contextmanager
from contextvars import ContextVar
from typing import Iterator, Mapping, NamedTuple, Sequence

import numpy as np

from .errors import (
    BudgetExceeded,
    ConvergenceFailure,
    DimensionMismatch,
    NotHermitian,
    NotPositive,
)

TOL_HERM = 1e-10
TOL_PSD = 1e-9
TIE_TOL = 1e-12
PHASE_TOL = 1e-10
JACOBI_TOL = 1e-12
JACOBI_MAX_SWEEPS = 100
INV_SQRT_RELATIVE_CUTOFF = 1e-10

DEFAULT_BUDGET_ENTRIES = 2**26

_budget: ContextVar[int] = ContextVar("povmsim_budget_entries", default=DEFAULT_BUDGET_ENTRIES)


def budget_entries() -> int:
    """Current cap on the number of complex entries of any dense matrix."""
    return _budget.get()


@contextmanager
def memory_budget(entries: int) -> Iterator[int]:
    """Temporarily change the dense-matrix entry cap (context-local)."""
    if entries < 1:
        raise ValueError("budget must be a positive number of entries")
    token = _budget.set(int(entries))
    try:
        yield int(entries)
    finally:
        _budget.reset(token)


def check_budget(rows: int, cols: int | None = None, what: str = "matrix") -> None:
    cols = rows if cols is None else cols
    size = int(rows) * int(cols)
    cap = budget_entries()
    if size > cap:
        raise BudgetExceeded(f"{what} of shape {rows}x{cols} needs {size} entries; budget is {cap}")


class SpectralDecomposition(NamedTuple):
    """Eigenvalues (descending) and orthonormal eigenvectors (columns)."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def reconstruct(self) -> np.ndarray:
        v = self.eigenvectors
        return (v * self.eigenvalues) @ v.conj().T


def as_matrix(a) -> np.ndarray:
    m = np.asarray(a, dtype=complex)
    if m.ndim != 2:
        raise DimensionMismatch(f"expected a 2-D matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValueError("matrix has non-finite entries")
    return m


def _square(a) -> np.ndarray:
    m = as_matrix(a)
    if m.shape[0] != m.shape[1]:
        raise DimensionMismatch(f"expected a square matrix, got shape {m.shape}")
    return m


def hermiticity_error(a) -> float:
    m = _square(a)
    return float(np.max(np.abs(m - m.conj().T), initial=0.0))


def is_hermitian(a, tol: float = TOL_HERM) -> bool:
    return hermiticity_error(a) <= tol


def as_hermitian(a, tol: float = TOL_HERM) -> np.ndarray:
    """Validate Hermiticity within ``tol`` and return the symmetrized matrix."""
    m = _square(a)
    err = hermiticity_error(m)
    if err > tol:
        raise NotHermitian(f"matrix deviates from its adjoint by {err:.3e} > {tol:.0e}")
    return 0.5 * (m + m.conj().T)


def kron(a, b) -> np.ndarray:
    a = as_matrix(a)
    b = as_matrix(b)
    check_budget(a.shape[0] * b.shape[0], a.shape[1] * b.shape[1], "Kronecker product")
    return np.kron(a, b)


def kron_all(factors: Sequence[np.ndarray]) -> np.ndarray:
    """Kronecker product of a non-empty sequence, left to right."""
    if len(factors) == 0:
        raise ValueError("need at least one factor")
    out = as_matrix(factors[0])
    for f in factors[1:]:
        out = kron(out, f)
    return out


def tensor_power(a, n: int) -> np.ndarray:
    a = _square(a)
    if n < 1:
        raise ValueError("tensor power needs n >= 1")
    d = a.shape[0]
    check_budget(d**n, d**n, f"{n}-fold tensor power")
    out = a
    for _ in range(n - 1):
        out = np.kron(out, a)
    return out


def _normalize_phases(vecs: np.ndarray) -> np.ndarray:
    """Rotate each column so its first non-negligible entry is real positive."""
    out = vecs.copy()
    for j in range(out.shape[1]):
        col = out[:, j]
        idx = np.flatnonzero(np.abs(col) > PHASE_TOL)
        if idx.size:
            x = col[idx[0]]
            out[:, j] = col * (abs(x) / x)
    return out


def _canonical_order(vals: np.ndarray, vecs: np.ndarray) -> SpectralDecomposition:
    vecs = _normalize_phases(vecs)
    order = np.argsort(-vals, kind="stable")
    vals = vals[order]
    vecs = vecs[:, order]
    d = vals.size
    i = 0
    while i < d:
        j = i + 1
        while j < d and vals[j - 1] - vals[j] < TIE_TOL:
            j += 1
        if j - i > 1:
            def key(c):
                col = vecs[:, c]
                return tuple(np.round(np.column_stack([col.real, col.imag]).ravel(), 12))

            block = sorted(range(i, j), key=key)
            vecs[:, i:j] = vecs[:, block]
        i = j
    return SpectralDecomposition(vals, vecs)


def jacobi_eigh(h, tol: float = JACOBI_TOL, max_sweeps: int = JACOBI_MAX_SWEEPS):
    """Cyclic Jacobi eigensolver for a complex Hermitian matrix.

    Each (p, q) rotation first removes the phase of the off-diagonal entry and
    then applies the real symmetric Jacobi rotation.  Iterates until the
    off-diagonal Frobenius norm drops below ``tol * max(1, ||h||_F)``.

    Returns unsorted ``(eigenvalues, eigenvectors)``.
    """
    a = np.array(h, dtype=complex)
    d = a.shape[0]
    v = np.eye(d, dtype=complex)
    target = tol * max(1.0, float(np.linalg.norm(a)))
    for _ in range(max_sweeps + 1):
        # summed directly: subtracting the diagonal from the full norm cancels
        # catastrophically once the off-diagonal part is near sqrt(eps)
        off = float(np.linalg.norm(a[~np.eye(d, dtype=bool)]))
        if off < target:
            return np.real(np.diag(a)).copy(), v
        for p in range(d - 1):
            for q in range(p + 1, d):
                apq = a[p, q]
                mag = abs(apq)
                if mag < 1e-300:
                    continue
                phase = apq / mag
                theta = (a[q, q].real - a[p, p].real) / (2.0 * mag)
                if theta == 0.0:
                    t = 1.0
                else:
                    t = math.copysign(1.0, theta) / (abs(theta) + math.hypot(1.0, theta))
                c = 1.0 / math.hypot(1.0, t)
                s = t * c
                g = np.array([[c, s], [-s / phase, c / phase]], dtype=complex)
                idx = [p, q]
                a[:, idx] = a[:, idx] @ g
                a[idx, :] = g.conj().T @ a[idx, :]
                a[p, q] = a[q, p] = 0.0
                a[p, p] = a[p, p].real
                a[q, q] = a[q, q].real
                v[:, idx] = v[:, idx] @ g
    raise ConvergenceFailure(f"Jacobi did not converge within {max_sweeps} sweeps (off-diagonal {off:.3e})")


def spectral_decompose(h, method: str = "lapack") -> SpectralDecomposition:
    """Eigendecomposition of a Hermitian matrix, eigenvalues descending.

    Ties (gap below 1e-12) are ordered lexicographically by the phase-normalized
    eigenvector entries so that the output is deterministic.
    """
    m = as_hermitian(h)
    if method == "lapack":
        try:
            vals, vecs = np.linalg.eigh(m)
        except np.linalg.LinAlgError as exc:
            raise ConvergenceFailure(str(exc)) from exc
    elif method == "jacobi":
        vals, vecs = jacobi_eigh(m)
    else:
        raise ValueError(f"unknown eigensolver {method!r}")
    return _canonical_order(np.asarray(vals, dtype=float), np.asarray(vecs, dtype=complex))


def eigvalsh(h, method: str = "lapack") -> np.ndarray:
    """Eigenvalues of a Hermitian matrix in descending order."""
    m = as_hermitian(h)
    if method == "jacobi":
        return np.sort(jacobi_eigh(m)[0])[::-1]
    try:
        return np.linalg.eigvalsh(m)[::-1]
    except np.linalg.LinAlgError as exc:
        raise ConvergenceFailure(str(exc)) from exc


def _psd_decomposition(p, method: str) -> SpectralDecomposition:
    dec = spectral_decompose(p, method)
    lowest = dec.eigenvalues[-1] if dec.eigenvalues.size else 0.0
    if lowest < -TOL_PSD:
        raise NotPositive(f"eigenvalue {lowest:.3e} below -{TOL_PSD:.0e}")
    return SpectralDecomposition(np.clip(dec.eigenvalues, 0.0, None), dec.eigenvectors)


def op_function(h, f, method: str = "lapack") -> np.ndarray:
    """Apply a real scalar function to a Hermitian matrix via its spectrum."""
    dec = spectral_decompose(h, method)
    return SpectralDecomposition(f(dec.eigenvalues), dec.eigenvectors).reconstruct()


def op_sqrt(p, method: str = "lapack") -> np.ndarray:
    """PSD square root; eigenvalues in (-1e-9, 0) are clamped to zero."""
    dec = _psd_decomposition(p, method)
    return SpectralDecomposition(np.sqrt(dec.eigenvalues), dec.eigenvectors).reconstruct()


def gen_inv_sqrt(p, cutoff: float | None = None, method: str = "lapack") -> np.ndarray:
    """Generalized inverse square root, zero on the (numerical) null space.

    Eigenvalues at or below ``cutoff`` map to 0.  The default cutoff is
    1e-10 times the largest eigenvalue.
    """
    dec = _psd_decomposition(p, method)
    vals = dec.eigenvalues
    if cutoff is None:
        cutoff = INV_SQRT_RELATIVE_CUTOFF * (vals[0] if vals.size else 0.0)
    keep = vals > cutoff
    inv = np.zeros_like(vals)
    inv[keep] = 1.0 / np.sqrt(vals[keep])
    return SpectralDecomposition(inv, dec.eigenvectors).reconstruct()


def support_projector(p, cutoff: float | None = None, method: str = "lapack") -> np.ndarray:
    dec = _psd_decomposition(p, method)
    vals = dec.eigenvalues
    if cutoff is None:
        cutoff = INV_SQRT_RELATIVE_CUTOFF * (vals[0] if vals.size else 0.0)
    return SpectralDecomposition((vals > cutoff).astype(float), dec.eigenvectors).reconstruct()


def min_eigenvalue(h) -> float:
    vals = eigvalsh(h)
    return float(vals[-1]) if vals.size else 0.0


def trace_norm(a, method: str = "lapack") -> float:
    """Schatten-1 norm: sum of |eigenvalues| for Hermitian input, else of singular values."""
    m = _square(a)
    if is_hermitian(m):
        return float(np.sum(np.abs(eigvalsh(m, method))))
    try:
        return float(np.sum(np.linalg.svd(m, compute_uv=False)))
    except np.linalg.LinAlgError as exc:
        raise ConvergenceFailure(str(exc)) from exc


def block_trace_norm(blocks: Mapping[object, np.ndarray], method: str = "lapack") -> float:
    """Trace norm of a block-diagonal operator given as label -> block."""
    return float(sum(trace_norm(b, method) for b in blocks.values()))


def block_diag(blocks: Sequence[np.ndarray]) -> np.ndarray:
    mats = [as_matrix(b) for b in blocks]
    rows = sum(m.shape[0] for m in mats)
    cols = sum(m.shape[1] for m in mats)
    check_budget(rows, cols, "block-diagonal assembly")
    out = np.zeros((rows, cols), dtype=complex)
    r = c = 0
    for m in mats:
        out[r : r + m.shape[0], c : c + m.shape[1]] = m
        r += m.shape[0]
        c += m.shape[1]
    return out


def partial_trace(a, dims: Sequence[int], keep) -> np.ndarray:
    """Trace out every subsystem whose index is not in ``keep``.

    Kept subsystems stay in ascending index order.
    """
    m = _square(a)
    dims = [int(x) for x in dims]
    if any(x < 1 for x in dims) or math.prod(dims) != m.shape[0]:
        raise DimensionMismatch(f"subsystem dims {dims} do not multiply to {m.shape[0]}")
    n = len(dims)
    keep = sorted(set(int(k) for k in keep))
    if any(k < 0 or k >= n for k in keep):
        raise DimensionMismatch(f"keep indices {keep} out of range for {n} subsystems")
    letters = "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ"
    if 2 * n > len(letters):
        raise DimensionMismatch("too many subsystems")
    row = list(letters[:n])
    col = list(letters[n : 2 * n])
    for i in range(n):
        if i not in keep:
            col[i] = row[i]
    out_sub = "".join(row[i] for i in keep) + "".join(col[i] for i in keep)
    t = np.einsum("".join(row) + "".join(col) + "->" + out_sub, m.reshape(dims + dims))
    dk = math.prod(dims[i] for i in keep) if keep else 1
    return t.reshape(dk, dk)


def basis_conjugate(a) -> np.ndarray:
    """Entrywise complex conjugate in the computational basis (A* = A^t for Hermitian A)."""
    return np.conj(as_matrix(a))


def is_isometry(v, tol: float = 1e-10) -> bool:
    v = as_matrix(v)
    if v.shape[0] < v.shape[1]:
        return False
    return float(np.max(np.abs(v.conj().T @ v - np.eye(v.shape[1])))) <= tol


def matrix_to_json(a) -> dict:
    m = _square(a)
    return {"dim": m.shape[0], "re": m.real.tolist(), "im": m.imag.tolist()}


def matrix_from_json(obj) -> np.ndarray:
    """Parse ``{"dim": d, "re": [[...]], "im": [[...]]}``; ``im`` may be omitted."""
    if not isinstance(obj, Mapping):
        raise ValueError("matrix must be an object with 'dim', 're' and 'im'")
    if "dim" not in obj or "re" not in obj:
        raise ValueError("matrix object needs 'dim' and 're'")
    d = obj["dim"]
    if not isinstance(d, int) or isinstance(d, bool) or d < 1:
        raise ValueError("'dim' must be a positive integer")
    re = np.asarray(obj["re"], dtype=float)
    im = np.asarray(obj.get("im", np.zeros((d, d))), dtype=float)
    if re.shape != (d, d) or im.shape != (d, d):
        raise ValueError(f"'re'/'im' must both be {d}x{d}")
    m = re + 1j * im
    if not np.all(np.isfinite(m)):
        raise ValueError("matrix has non-finite entries")
    return m
