"""Dense complex-matrix kernels shared by the SINR and selection layers.

Matrices are numpy arrays with complex128 entries.  Every function here is
pure: inputs are validated, never mutated, and results are returned as new
arrays.  Quantities that feed rate computations use log base 2 throughout.
"""
from __future__ import annotations

import numpy as np

# Relative tolerance for treating a matrix as Hermitian.  Asymmetry below the
# tolerance is repaired by averaging with the conjugate transpose; anything
# larger is a contract violation by the caller.
HERMITIAN_TOL = 1e-8

# Relative eigenvalue cutoff below which a channel Gram matrix is declared
# rank deficient (no zero-forcing inverse exists).
DEFAULT_RANK_TOL = 1e-12

# Magnitude floor for determinant denominators.
DET_FLOOR = 1e-14

_LN2 = float(np.log(2.0))


class SingularChannelError(ValueError):
    """Channel Gram matrix is numerically rank deficient."""


class DegenerateDenominatorError(ValueError):
    """Determinant ratio requested against a vanishing denominator."""


class HermitianViolationError(ValueError):
    """Input that must be Hermitian is asymmetric beyond tolerance."""


def as_cmatrix(a, rows: int | None = None, cols: int | None = None) -> np.ndarray:
    """Coerce ``a`` to a finite 2-D complex128 array, checking shape if given."""
    m = np.asarray(a, dtype=np.complex128)
    if m.ndim != 2:
        raise ValueError(f"expected a 2-D matrix, got ndim={m.ndim}")
    if not np.isfinite(m).all():
        raise ValueError("matrix contains non-finite entries")
    if rows is not None and m.shape[0] != rows:
        raise ValueError(f"expected {rows} rows, got {m.shape[0]}")
    if cols is not None and m.shape[1] != cols:
        raise ValueError(f"expected {cols} columns, got {m.shape[1]}")
    return m


def hermitian_part(a: np.ndarray, tol: float = HERMITIAN_TOL) -> np.ndarray:
    """Return (A + A^H)/2 after checking A is Hermitian within ``tol``.

    The tolerance is relative to the largest entry magnitude so that scaling
    a matrix does not change whether it passes.
    """
    a = as_cmatrix(a)
    if a.shape[0] != a.shape[1]:
        raise ValueError(f"square matrix required, got {a.shape}")
    scale = max(1.0, float(np.abs(a).max(initial=0.0)))
    asym = float(np.abs(a - a.conj().T).max(initial=0.0))
    if asym > tol * scale:
        raise HermitianViolationError(
            f"asymmetry {asym:.3e} exceeds {tol:.1e} * scale {scale:.3e}"
        )
    return (a + a.conj().T) / 2.0


def zf_precoder(h: np.ndarray, rank_tol: float = DEFAULT_RANK_TOL) -> np.ndarray:
    """Zero-forcing precoder for a fat channel matrix.

    For H with at least as many columns as rows and full row rank, returns
    U = H^H (H H^H)^{-1}, the right inverse satisfying H @ U == I.

    Args:
        h: channel matrix, shape (r, c) with r <= c.
        rank_tol: relative eigenvalue cutoff on H H^H below which the channel
            is treated as singular.

    Raises:
        SingularChannelError: H H^H has an eigenvalue below rank_tol times
            its largest (no stable inverse).
        ValueError: more rows than columns.
    """
    h = as_cmatrix(h)
    r, c = h.shape
    if r > c:
        raise ValueError(f"need rows <= cols for a right inverse, got {h.shape}")
    gram = h @ h.conj().T
    evals = np.linalg.eigvalsh((gram + gram.conj().T) / 2.0)
    top = float(evals[-1])
    if top <= 0.0 or float(evals[0]) < rank_tol * top:
        raise SingularChannelError(
            f"channel Gram eigenvalues span [{evals[0]:.3e}, {top:.3e}]"
        )
    # Solve gram @ X = h, then U = X^H; avoids forming an explicit inverse.
    return np.linalg.solve(gram, h).conj().T


def herm_quad(h: np.ndarray, r: np.ndarray) -> np.ndarray:
    """Hermitian quadratic form H R H^H with explicit symmetrization.

    Args:
        h: outer factor, shape (m, n).
        r: Hermitian PSD core, shape (n, n); asymmetry beyond tolerance is
            rejected rather than silently absorbed.

    Returns:
        The (m, m) Hermitian product.
    """
    h = as_cmatrix(h)
    r = hermitian_part(r)
    if h.shape[1] != r.shape[0]:
        raise ValueError(f"inner dimensions differ: {h.shape} vs {r.shape}")
    out = h @ r @ h.conj().T
    return (out + out.conj().T) / 2.0


def log_det_i_plus(a: np.ndarray) -> float:
    """log2 det(I + A) for Hermitian PSD A, clamped at zero.

    Uses a pivoted LU factorization (via slogdet) to accumulate log
    magnitudes without overflow; falls back to a clipped eigenvalue sum if
    the factorization loses positivity to rounding.
    """
    a = hermitian_part(a)
    n = a.shape[0]
    sign, logdet = np.linalg.slogdet(np.eye(n) + a)
    if not np.isfinite(logdet) or np.real(sign) <= 0.0:
        lam = np.clip(np.linalg.eigvalsh(a), 0.0, None)
        logdet = float(np.log1p(lam).sum())
    return max(0.0, float(np.real(logdet)) / _LN2)


def det_ratio(a: np.ndarray, b: np.ndarray) -> float:
    """|det A| / |det B| computed in the log domain.

    Raises:
        DegenerateDenominatorError: |det B| is at or below the floor.
        ValueError: shapes differ or matrices are not square.
    """
    a = as_cmatrix(a)
    b = as_cmatrix(b)
    if a.shape[0] != a.shape[1] or a.shape != b.shape:
        raise ValueError(f"need equal square shapes, got {a.shape} and {b.shape}")
    _, log_b = np.linalg.slogdet(b)
    if not np.isfinite(log_b) or log_b <= np.log(DET_FLOOR):
        raise DegenerateDenominatorError("denominator determinant magnitude below floor")
    _, log_a = np.linalg.slogdet(a)
    if not np.isfinite(log_a):
        return 0.0
    return float(np.exp(log_a - log_b))


def sqrt_psd(a: np.ndarray) -> np.ndarray:
    """Hermitian square root of a PSD matrix (eigenvalues clipped at zero)."""
    a = hermitian_part(a)
    lam, vec = np.linalg.eigh(a)
    lam = np.clip(lam, 0.0, None)
    out = (vec * np.sqrt(lam)) @ vec.conj().T
    return (out + out.conj().T) / 2.0


def inv_sqrt_pd(a: np.ndarray, floor: float = 1e-300) -> np.ndarray:
    """Inverse Hermitian square root of a positive definite matrix."""
    a = hermitian_part(a)
    lam, vec = np.linalg.eigh(a)
    if float(lam[0]) <= floor:
        raise SingularChannelError(f"matrix not positive definite (min eig {lam[0]:.3e})")
    out = (vec / np.sqrt(lam)) @ vec.conj().T
    return (out + out.conj().T) / 2.0


def whitened(x: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Hermitian realization of W^{-1} X: returns W^{-1/2} X W^{-1/2}.

    W must be Hermitian positive definite and X Hermitian.  The result is
    similar to W^{-1} X, so eigenvalues and determinants of I + (.) agree
    with the unsymmetrized product while staying Hermitian PSD.
    """
    s = inv_sqrt_pd(w)
    return herm_quad(s, hermitian_part(x))


def congruence(x: np.ndarray, s: np.ndarray) -> np.ndarray:
    """Hermitian realization of X S: returns S^{1/2} X S^{1/2} for PSD S."""
    root = sqrt_psd(s)
    return herm_quad(root, hermitian_part(x))
