"""Dense complex linear algebra for operators on C2 x CN.

Everything here is specialized to 2N x 2N Hermitian operators stored in the
ordered product basis with flat index ``i*N + k`` (``i`` the qubit index,
``k`` the second-factor index).  Ranks and kernels are numerical: singular
values below a relative cutoff count as zero, and that single cutoff drives
all downstream branching.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

__all__ = [
    "ToleranceConfig",
    "DensityState",
    "RankInfo",
    "as_complex_matrix",
    "hermitize",
    "partial_transpose_matrix",
    "partial_transpose",
    "partial_trace_second",
    "partial_expectation",
    "numerical_rank_kernel",
    "pseudoinverse",
    "psd_difference_check",
    "operator_norm",
]


@dataclass(frozen=True)
class ToleranceConfig:
    """Numerical cutoffs shared by the whole analysis pipeline.

    rank_rel_tol
        Singular values below ``rank_rel_tol * sigma_max`` are treated as
        zero.  All rank decisions use this one value.
    psd_tol
        Relative eigenvalue floor: X is accepted as PSD when
        ``lambda_min(X) >= -psd_tol * ||X||``.
    root_residual_tol
        Back-substitution residual bound for polynomial roots.
    cert_recon_tol
        Relative reconstruction bound for separability certificates.
    """

    rank_rel_tol: float = 1e-9
    psd_tol: float = 1e-9
    root_residual_tol: float = 1e-8
    cert_recon_tol: float = 1e-8

    def __post_init__(self):
        for name in ("rank_rel_tol", "psd_tol", "root_residual_tol", "cert_recon_tol"):
            value = getattr(self, name)
            if not (np.isfinite(value) and value > 0):
                raise ValueError(f"{name} must be finite and > 0, got {value!r}")
        if self.rank_rel_tol >= 1:
            raise ValueError("rank_rel_tol must be < 1")

    def replace(self, **overrides) -> "ToleranceConfig":
        data = {
            "rank_rel_tol": self.rank_rel_tol,
            "psd_tol": self.psd_tol,
            "root_residual_tol": self.root_residual_tol,
            "cert_recon_tol": self.cert_recon_tol,
        }
        data.update(overrides)
        return ToleranceConfig(**data)

    def as_dict(self) -> dict:
        return {
            "rank_rel_tol": self.rank_rel_tol,
            "psd_tol": self.psd_tol,
            "root_residual_tol": self.root_residual_tol,
            "cert_recon_tol": self.cert_recon_tol,
        }


def as_complex_matrix(a, name: str = "matrix") -> np.ndarray:
    """Validate and convert to a finite 2-D complex array."""
    m = np.asarray(a, dtype=complex)
    if m.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {m.shape}")
    if not np.all(np.isfinite(m.real)) or not np.all(np.isfinite(m.imag)):
        raise ValueError(f"{name} contains non-finite entries")
    return m


def hermitize(m: np.ndarray) -> np.ndarray:
    """Hermitian part (M + M^dag) / 2."""
    return (m + m.conj().T) / 2


def operator_norm(m) -> float:
    """Largest singular value."""
    m = as_complex_matrix(m)
    if m.size == 0:
        return 0.0
    return float(np.linalg.norm(m, 2))


def partial_transpose_matrix(m: np.ndarray, n: int) -> np.ndarray:
    """Transpose the first (qubit) factor: swap the two off-diagonal N x N blocks."""
    if m.shape != (2 * n, 2 * n):
        raise ValueError(f"expected shape {(2 * n, 2 * n)}, got {m.shape}")
    out = m.copy()
    out[:n, n:] = m[n:, :n]
    out[n:, :n] = m[:n, n:]
    return out


def partial_trace_second(m: np.ndarray, n: int) -> np.ndarray:
    """Trace out the qubit, leaving an N x N operator on the second factor."""
    return m[:n, :n] + m[n:, n:]


def partial_expectation(m: np.ndarray, n: int, e_left: np.ndarray, e_right: np.ndarray) -> np.ndarray:
    """N x N block <e_left| M |e_right>, contracting only the qubit factor."""
    el = np.conj(np.asarray(e_left, dtype=complex))
    er = np.asarray(e_right, dtype=complex)
    out = np.zeros((n, n), dtype=complex)
    for a in range(2):
        for b in range(2):
            out += el[a] * er[b] * m[a * n:(a + 1) * n, b * n:(b + 1) * n]
    return out


class RankInfo(NamedTuple):
    rank: int
    kernel_basis: np.ndarray  # columns, orthonormal
    range_basis: np.ndarray   # columns, orthonormal


def numerical_rank_kernel(m, tol: ToleranceConfig | None = None) -> RankInfo:
    """Rank, kernel and range of a matrix from its SVD.

    The rank counts singular values above ``rank_rel_tol * sigma_max``; the
    kernel basis spans the complementary right-singular space and the range
    basis the corresponding left-singular space.  Both are orthonormal and
    ``rank + kernel columns == cols`` always holds.
    """
    tol = tol or ToleranceConfig()
    m = as_complex_matrix(m)
    u, s, vh = np.linalg.svd(m)
    if s.size == 0 or s[0] <= 0.0:
        rank = 0
    else:
        rank = int(np.count_nonzero(s > tol.rank_rel_tol * s[0]))
    kernel = vh[rank:].conj().T
    range_ = u[:, :rank]
    return RankInfo(rank, kernel, range_)


def pseudoinverse(m, tol: ToleranceConfig | None = None) -> np.ndarray:
    """Spectral pseudoinverse of a Hermitian matrix.

    Eigenvalues below the rank cutoff are dropped, not inverted, so the
    product ``M @ pinv(M)`` is the orthogonal projector onto the range of M.
    """
    tol = tol or ToleranceConfig()
    m = as_complex_matrix(m)
    scale = operator_norm(m)
    if operator_norm(m - m.conj().T) > max(tol.psd_tol * scale, 1e3 * np.finfo(float).eps * scale):
        raise ValueError("pseudoinverse requires a Hermitian matrix")
    w, v = np.linalg.eigh(hermitize(m))
    if scale <= 0.0:
        return np.zeros_like(m)
    keep = np.abs(w) > tol.rank_rel_tol * np.max(np.abs(w))
    winv = np.zeros_like(w)
    winv[keep] = 1.0 / w[keep]
    return (v * winv) @ v.conj().T


def _psd_sqrt(m: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh(hermitize(m))
    w = np.where(w > 0, w, 0.0)
    return (v * np.sqrt(w)) @ v.conj().T


def _psd_inv_sqrt(m: np.ndarray, tol: ToleranceConfig) -> np.ndarray:
    w, v = np.linalg.eigh(hermitize(m))
    wmax = float(np.max(np.abs(w))) if w.size else 0.0
    if wmax <= 0.0:
        return np.zeros_like(m)
    keep = w > tol.rank_rel_tol * wmax
    winv = np.zeros_like(w)
    winv[keep] = 1.0 / np.sqrt(w[keep])
    return (v * winv) @ v.conj().T


def _require_psd(m: np.ndarray, tol: ToleranceConfig, name: str) -> None:
    w = np.linalg.eigvalsh(hermitize(m))
    scale = float(np.max(np.abs(w))) if w.size else 0.0
    if w.size and w[0] < -tol.psd_tol * max(scale, 1.0e-300):
        raise ValueError(f"{name} is not positive semidefinite (min eigenvalue {w[0]:.3e})")


def psd_difference_check(x, y, tol: ToleranceConfig | None = None) -> bool:
    """Decide X - Y >= 0 for PSD X, Y without forming the difference spectrum.

    Equivalent to the two conditions: the kernel of X is annihilated by Y,
    and ``||Y^{1/2} X^{-1/2}||^2 <= 1`` with the pseudoinverse square root.
    """
    tol = tol or ToleranceConfig()
    x = as_complex_matrix(x, "X")
    y = as_complex_matrix(y, "Y")
    _require_psd(x, tol, "X")
    _require_psd(y, tol, "Y")
    ny = operator_norm(y)
    if ny == 0.0:
        return True
    kernel = numerical_rank_kernel(x, tol).kernel_basis
    if kernel.shape[1]:
        # quadratic forms <k|Y|k> catch any kernel leakage
        quad = np.real(np.einsum("ij,ik,kj->j", kernel.conj(), hermitize(y), kernel))
        if np.any(quad > tol.psd_tol * ny):
            return False
    contraction = _psd_sqrt(y) @ _psd_inv_sqrt(x, tol)
    return operator_norm(contraction) ** 2 <= 1.0 + tol.psd_tol


def partial_transpose(state: "DensityState") -> "DensityState":
    """Partial transpose of a state; the result may fail the PSD invariant."""
    return DensityState(state.pt_matrix, n=state.n, tol=state.tol, require_psd=False)


class DensityState:
    """Hermitian PSD operator on C2 x CN with cached rank/kernel data.

    The matrix is symmetrized at construction and all spectral data for the
    state and its partial transpose are computed once; instances are treated
    as immutable afterwards.  Trace does not have to be 1, only positive.
    """

    def __init__(self, matrix, n: int | None = None, tol: ToleranceConfig | None = None,
                 require_psd: bool = True):
        tol = tol or ToleranceConfig()
        m = as_complex_matrix(matrix, "density matrix")
        dim = m.shape[0]
        if m.shape[1] != dim or dim % 2 != 0 or dim == 0:
            raise ValueError(f"density matrix must be 2N x 2N, got shape {m.shape}")
        if n is None:
            n = dim // 2
        elif 2 * n != dim:
            raise ValueError(f"matrix shape {m.shape} inconsistent with N={n}")

        scale = operator_norm(m)
        herm_err = operator_norm(m - m.conj().T)
        if scale > 0 and herm_err > max(tol.psd_tol * scale, 1e3 * np.finfo(float).eps * scale):
            raise ValueError(f"matrix is not Hermitian (relative deviation {herm_err / scale:.3e})")

        self.n = int(n)
        self.dim = dim
        self.tol = tol
        self.matrix = hermitize(m)
        self.pt_matrix = partial_transpose_matrix(self.matrix, self.n)

        self._eigvals, self._eigvecs = np.linalg.eigh(self.matrix)
        self._pt_eigvals, self._pt_eigvecs = np.linalg.eigh(self.pt_matrix)

        self.trace = float(np.real(np.trace(self.matrix)))
        self.norm = float(np.max(np.abs(self._eigvals))) if dim else 0.0
        self.min_eigenvalue = float(self._eigvals[0])
        self.pt_min_eigenvalue = float(self._pt_eigvals[0])

        if require_psd:
            if self.min_eigenvalue < -tol.psd_tol * max(self.norm, 1e-300):
                raise ValueError(
                    f"matrix is not PSD (min eigenvalue {self.min_eigenvalue:.3e}, "
                    f"norm {self.norm:.3e})")
            if self.trace <= 0:
                raise ValueError(f"trace must be positive, got {self.trace:.3e}")

        self.warnings: list[str] = []
        self.rank, self.kernel_basis, self.range_basis = self._split(
            self._eigvals, self._eigvecs, "rho")
        self.pt_rank, self.pt_kernel_basis, self.pt_range_basis = self._split(
            self._pt_eigvals, self._pt_eigvecs, "rho_pt")
        self._pinv = None
        self._pt_pinv = None

    def _split(self, w, v, label):
        mags = np.abs(w)
        wmax = float(np.max(mags)) if mags.size else 0.0
        cutoff = self.tol.rank_rel_tol * wmax
        keep = mags > cutoff
        # both sides of the cutoff are suspect: kept values barely above it
        # and dropped values barely below it make the integer rank fragile
        borderline = np.count_nonzero((mags > cutoff / 10) & (mags < 10 * cutoff))
        if borderline:
            self.warnings.append(
                f"{label}: {borderline} eigenvalue(s) within 10x of the rank cutoff")
        order = np.argsort(-mags)
        kept = [i for i in order if keep[i]]
        dropped = [i for i in order if not keep[i]]
        return len(kept), v[:, dropped], v[:, kept]

    @property
    def is_ppt(self) -> bool:
        return self.pt_min_eigenvalue >= -self.tol.psd_tol * max(self.norm, 1e-300)

    def pseudoinverse(self) -> np.ndarray:
        if self._pinv is None:
            self._pinv = pseudoinverse(self.matrix, self.tol)
        return self._pinv

    def pt_pseudoinverse(self) -> np.ndarray:
        if self._pt_pinv is None:
            self._pt_pinv = pseudoinverse(self.pt_matrix, self.tol)
        return self._pt_pinv

    def __repr__(self):
        return (f"DensityState(n={self.n}, rank={self.rank}, pt_rank={self.pt_rank}, "
                f"trace={self.trace:.6g})")
