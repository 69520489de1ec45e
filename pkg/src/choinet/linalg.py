"""Dense complex linear algebra on tensor-product spaces.

Conventions used across the package:

- Operators are square complex numpy arrays.
- A composite space is described by an ordered dimension list ``dims``;
  factor 0 is the leftmost tensor slot and composite indices are
  row-major, i.e. ``i = i0 * d1 + i1`` for two factors.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np


class NotPSDError(ValueError):
    """Raised when a matrix required to be positive semidefinite is not."""


@dataclass
class Tolerances:
    """Global numeric tolerances, overridable via :data:`tolerances`.

    herm : max entry of ``|m - m^dag|`` accepted as Hermitian
    psd  : eigenvalue slack accepted as positive semidefinite
    feas : residual at which a cone-feasibility point counts as feasible
    wit  : certification margin for witness values
    """

    herm: float = 1e-9
    psd: float = 1e-8
    feas: float = 1e-7
    wit: float = 1e-9

    def set_all(self, value: float) -> None:
        self.herm = self.psd = self.feas = self.wit = float(value)


tolerances = Tolerances()


def as_complex(m) -> np.ndarray:
    """Coerce to a square complex128 array with finite entries."""
    a = np.asarray(m, dtype=np.complex128)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix contains non-finite entries")
    return a


def check_dims(m: np.ndarray, dims: Sequence[int]) -> tuple[int, ...]:
    """Validate that ``dims`` factorizes the dimension of ``m``."""
    dims = tuple(int(d) for d in dims)
    if any(d < 1 for d in dims):
        raise ValueError(f"dimensions must be positive, got {dims}")
    if int(np.prod(dims)) != m.shape[0]:
        raise ValueError(
            f"dimension list {dims} (product {int(np.prod(dims))}) does not "
            f"match matrix dimension {m.shape[0]}"
        )
    return dims


def dagger(m: np.ndarray) -> np.ndarray:
    return m.conj().T


def herm_deviation(m: np.ndarray) -> float:
    """Max entry of ``|m - m^dag|``."""
    return float(np.max(np.abs(m - m.conj().T))) if m.size else 0.0


def is_hermitian(m: np.ndarray, tol: float | None = None) -> bool:
    tol = tolerances.herm if tol is None else tol
    return herm_deviation(m) <= tol


def require_hermitian(m: np.ndarray, tol: float | None = None, what: str = "matrix") -> np.ndarray:
    tol = tolerances.herm if tol is None else tol
    dev = herm_deviation(m)
    if dev > tol:
        raise ValueError(f"{what} is not Hermitian: max |m - m^dag| = {dev:.3e} > {tol:.1e}")
    return m


def kron(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Kronecker product, factor 0 leftmost."""
    return np.kron(a, b)


def kron_all(mats: Iterable[np.ndarray]) -> np.ndarray:
    out = None
    for m in mats:
        out = m if out is None else np.kron(out, m)
    if out is None:
        raise ValueError("kron_all needs at least one factor")
    return out


def partial_trace(m: np.ndarray, dims: Sequence[int], keep: Iterable[int]) -> np.ndarray:
    """Trace out all tensor factors not listed in ``keep``.

    Parameters
    ----------
    m : square matrix on the composite space described by ``dims``
    dims : ordered local dimensions, factor 0 leftmost
    keep : indices of the factors to retain (their relative order is kept)

    Returns
    -------
    The reduced matrix on the kept factors.  The full trace is preserved.
    """
    m = as_complex(m)
    dims = check_dims(m, dims)
    keep_set = set(int(k) for k in keep)
    if not keep_set:
        raise ValueError("keep must be a nonempty set of factor indices")
    if not keep_set.issubset(range(len(dims))):
        raise ValueError(f"keep {sorted(keep_set)} out of range for {len(dims)} factors")
    traced = [i for i in range(len(dims)) if i not in keep_set]
    tensor = m.reshape(dims + dims)
    cur_dims = list(dims)
    for factor in sorted(traced, reverse=True):
        n = len(cur_dims)
        tensor = np.trace(tensor, axis1=factor, axis2=factor + n)
        del cur_dims[factor]
    d_out = int(np.prod(cur_dims))
    return tensor.reshape(d_out, d_out)


def trace_all(m: np.ndarray, dims: Sequence[int]) -> np.ndarray:
    """Partial trace over every factor; returns a 1x1 matrix ``[[tr(m)]]``."""
    m = as_complex(m)
    check_dims(m, dims)
    return np.array([[np.trace(m)]], dtype=np.complex128)


def partial_transpose(m: np.ndarray, dims: Sequence[int], on: Iterable[int]) -> np.ndarray:
    """Transpose the factors listed in ``on``; involutive and trace-preserving."""
    m = as_complex(m)
    dims = check_dims(m, dims)
    on_set = set(int(k) for k in on)
    if not on_set.issubset(range(len(dims))):
        raise ValueError(f"transpose targets {sorted(on_set)} out of range for {len(dims)} factors")
    n = len(dims)
    axes = list(range(2 * n))
    for f in on_set:
        axes[f], axes[f + n] = axes[f + n], axes[f]
    return m.reshape(dims + dims).transpose(axes).reshape(m.shape)


def eig_hermitian(m: np.ndarray, tol_herm: float | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Eigendecomposition of a Hermitian matrix, eigenvalues sorted descending.

    Returns ``(w, v)`` with ``m = v @ diag(w) @ v^dag`` and ``v`` unitary;
    ``v[:, k]`` is the eigenvector for ``w[k]``.
    """
    m = as_complex(m)
    require_hermitian(m, tol_herm)
    w, v = np.linalg.eigh(m)
    return w[::-1].astype(float), v[:, ::-1]


def eigvals_hermitian(m: np.ndarray, tol_herm: float | None = None) -> np.ndarray:
    """Eigenvalues only, sorted descending."""
    m = as_complex(m)
    require_hermitian(m, tol_herm)
    return np.linalg.eigvalsh(m)[::-1].astype(float)


def min_eig(m: np.ndarray) -> float:
    """Smallest eigenvalue of the Hermitian part of ``m`` (no Hermiticity check)."""
    h = (m + m.conj().T) / 2
    return float(np.linalg.eigvalsh(h)[0])


def is_psd(m: np.ndarray, tol: float | None = None) -> bool:
    """True iff the min eigenvalue is >= -tol; requires Hermitian input."""
    tol = tolerances.psd if tol is None else tol
    m = as_complex(m)
    require_hermitian(m)
    return float(np.linalg.eigvalsh(m)[0]) >= -tol


def psd_part(m: np.ndarray) -> np.ndarray:
    """Projection of a Hermitian matrix onto the PSD cone (Frobenius-nearest)."""
    w, v = np.linalg.eigh((m + m.conj().T) / 2)
    w = np.maximum(w, 0.0)
    return (v * w) @ v.conj().T


def mat_sqrt(m: np.ndarray, tol_psd: float | None = None) -> np.ndarray:
    """Hermitian square root of a PSD matrix."""
    tol_psd = tolerances.psd if tol_psd is None else tol_psd
    w, v = eig_hermitian(m)
    if w[-1] < -tol_psd:
        raise NotPSDError(f"matrix is not PSD: min eigenvalue {w[-1]:.3e}")
    w = np.maximum(w, 0.0)
    return (v * np.sqrt(w)) @ v.conj().T


def mat_inv_sqrt(m: np.ndarray, tol_psd: float | None = None) -> np.ndarray:
    """Pseudo-inverse square root on the support of a PSD matrix.

    Eigenvalues at or below ``tol_psd`` are treated as exact zeros, so
    ``mat_inv_sqrt(m) @ m @ mat_inv_sqrt(m)`` is the support projector.
    """
    tol_psd = tolerances.psd if tol_psd is None else tol_psd
    w, v = eig_hermitian(m)
    if w[-1] < -tol_psd:
        raise NotPSDError(f"matrix is not PSD: min eigenvalue {w[-1]:.3e}")
    inv = np.where(w > tol_psd, 1.0 / np.sqrt(np.maximum(w, tol_psd)), 0.0)
    return (v * inv) @ v.conj().T


def embed_matrix(m: np.ndarray, dims: Sequence[int], new_dims: Sequence[int]) -> np.ndarray:
    """Zero-pad each tensor factor of ``m`` into the first levels of a larger factor.

    This is the explicit embedding step used when an effect on a small space
    must act on a block with larger declared dimensions; no silent padding
    happens anywhere else.
    """
    m = as_complex(m)
    dims = check_dims(m, dims)
    new_dims = tuple(int(d) for d in new_dims)
    if len(new_dims) != len(dims):
        raise ValueError(f"factor count mismatch: {len(dims)} vs {len(new_dims)}")
    if any(nd < d for d, nd in zip(dims, new_dims)):
        raise ValueError(f"new dims {new_dims} must dominate old dims {dims}")
    tensor = m.reshape(dims + dims)
    out = np.zeros(new_dims + new_dims, dtype=np.complex128)
    sl = tuple(slice(0, d) for d in dims) * 2
    out[sl] = tensor
    d_out = int(np.prod(new_dims))
    return out.reshape(d_out, d_out)


def frobenius(a: np.ndarray, b: np.ndarray | None = None) -> float:
    """Frobenius norm of ``a`` or of the difference ``a - b``."""
    return float(np.linalg.norm(a if b is None else a - b))
