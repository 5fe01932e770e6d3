"""Quaternary-phase precoder containers and complex pseudoinverse routines.

Analog precoders carry entries from the 2-bit alphabet {1, -1, i, -i},
stored as uint8 codes 0..3. The pseudoinverse exists in two forms: the
direct complex Gram-based one, and a real-decomposed variant that uses
only real matrix inverses and products (also serving as a cross-check).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

#: code -> complex entry; index 0..3 maps to 1, -1, i, -i
QUATERNARY_ALPHABET = np.array([1.0, -1.0, 1.0j, -1.0j], dtype=np.complex128)

#: reciprocal condition number below which a matrix counts as singular
RCOND_FLOOR = 1e-12

MAX_CODEBOOK_SIZE = 1000


class SingularMatrixError(np.linalg.LinAlgError):
    """Matrix is (numerically) rank deficient for the requested operation."""


class DegenerateBeamError(ValueError):
    """A user's effective beam has zero power and cannot be normalized."""


def codes_to_matrix(codes: np.ndarray) -> np.ndarray:
    """Map an array of 2-bit codes to the complex alphabet {1,-1,i,-i}."""
    codes = np.asarray(codes)
    if codes.size and (codes.min() < 0 or codes.max() > 3):
        raise ValueError("quaternary codes must lie in 0..3")
    return QUATERNARY_ALPHABET[codes]


def matrix_to_codes(m: np.ndarray) -> np.ndarray:
    """Inverse of codes_to_matrix; entries must be exactly alphabet members."""
    m = np.asarray(m, dtype=np.complex128)
    codes = np.full(m.shape, -1, dtype=np.int64)
    for code, value in enumerate(QUATERNARY_ALPHABET):
        codes[m == value] = code
    if (codes < 0).any():
        raise ValueError("matrix contains entries outside {1,-1,i,-i}")
    return codes.astype(np.uint8)


def quantize_phases(m: np.ndarray) -> np.ndarray:
    """Round each complex entry to the nearest alphabet phase (2-bit codes)."""
    m = np.asarray(m, dtype=np.complex128)
    # distance on the unit circle == max real part of m * conj(alphabet)
    scores = np.real(m[..., None] * QUATERNARY_ALPHABET.conj())
    return np.argmax(scores, axis=-1).astype(np.uint8)


@dataclass(frozen=True)
class AnalogPrecoder:
    """N_T x N_RF matrix of 2-bit phases, stored as codes."""

    codes: np.ndarray

    def __post_init__(self):
        codes = np.ascontiguousarray(np.asarray(self.codes, dtype=np.uint8))
        if codes.ndim != 2:
            raise ValueError("analog precoder codes must be a 2-D array")
        if codes.size and codes.max() > 3:
            raise ValueError("quaternary codes must lie in 0..3")
        object.__setattr__(self, "codes", codes)

    @property
    def n_t(self) -> int:
        return self.codes.shape[0]

    @property
    def n_rf(self) -> int:
        return self.codes.shape[1]

    @property
    def matrix(self) -> np.ndarray:
        return QUATERNARY_ALPHABET[self.codes]

    def key(self) -> bytes:
        """Exact identity on the finite alphabet (duplicate detection)."""
        return self.codes.tobytes()

    def __eq__(self, other):
        return isinstance(other, AnalogPrecoder) and self.codes.shape == other.codes.shape \
            and self.key() == other.key()

    def __hash__(self):
        return hash((self.codes.shape, self.key()))


@dataclass(frozen=True)
class Codebook:
    """Ordered, duplicate-free list of analog precoder codewords."""

    codewords: tuple[AnalogPrecoder, ...]

    def __post_init__(self):
        codewords = tuple(self.codewords)
        if not 1 <= len(codewords) <= MAX_CODEBOOK_SIZE:
            raise ValueError(f"codebook size must lie in 1..{MAX_CODEBOOK_SIZE}")
        seen = set()
        for i, cw in enumerate(codewords):
            if cw.key() in seen:
                raise ValueError(f"duplicate codeword at index {i}")
            seen.add(cw.key())
        shapes = {cw.codes.shape for cw in codewords}
        if len(shapes) != 1:
            raise ValueError("codewords must share one shape")
        object.__setattr__(self, "codewords", codewords)

    def __len__(self) -> int:
        return len(self.codewords)

    def __getitem__(self, i: int) -> AnalogPrecoder:
        return self.codewords[i]

    @property
    def matrices(self) -> np.ndarray:
        """Stacked (L, N_T, N_RF) complex codeword matrices."""
        return np.stack([cw.matrix for cw in self.codewords])

    def pinvs(self) -> np.ndarray:
        """Stacked (L, N_RF, N_T) pseudoinverses via the real-decomposed path."""
        out = np.empty((len(self), self[0].n_rf, self[0].n_t), dtype=np.complex128)
        for i, cw in enumerate(self.codewords):
            try:
                out[i] = complex_pinv_real_decomposed(cw.matrix)
            except SingularMatrixError as exc:
                raise SingularMatrixError(f"codeword {i}: {exc}") from exc
        return out


def reciprocal_condition(m: np.ndarray) -> float:
    s = np.linalg.svd(np.asarray(m), compute_uv=False)
    if s.size == 0 or s[0] == 0.0:
        return 0.0
    return float(s[-1] / s[0])


def complex_pinv(m: np.ndarray) -> np.ndarray:
    """Moore-Penrose pseudoinverse of a full-column-rank complex matrix.

    Computed as (m^H m)^-1 m^H on the Gram matrix. Raises
    SingularMatrixError when the reciprocal condition number of ``m``
    falls below RCOND_FLOOR.
    """
    m = np.asarray(m, dtype=np.complex128)
    if m.ndim != 2 or m.shape[1] > m.shape[0]:
        raise ValueError("expected a tall matrix (rows >= cols)")
    if reciprocal_condition(m) < RCOND_FLOOR:
        raise SingularMatrixError("matrix is rank deficient (rcond below 1e-12)")
    gram = m.conj().T @ m
    return np.linalg.solve(gram, m.conj().T)


def complex_pinv_real_decomposed(m: np.ndarray) -> np.ndarray:
    """Pseudoinverse via the real decomposition of (m^H m)^-1 = C + iD.

    With Phi = m^H m, R = Re(Phi), S = Im(Phi):

        C = (R + S R^-1 S)^-1
        D = -R^-1 S C

    and the final product (C + iD) m^H is expanded into purely real
    products. Valid when R is non-singular; otherwise raises with a hint
    to fall back to :func:`complex_pinv`.
    """
    m = np.asarray(m, dtype=np.complex128)
    if m.ndim != 2 or m.shape[1] > m.shape[0]:
        raise ValueError("expected a tall matrix (rows >= cols)")
    phi = m.conj().T @ m
    r_part = np.ascontiguousarray(phi.real)
    s_part = np.ascontiguousarray(phi.imag)
    if reciprocal_condition(r_part) < RCOND_FLOOR:
        raise SingularMatrixError(
            "Re(m^H m) is singular; use complex_pinv for this matrix")
    r_inv = np.linalg.inv(r_part)
    c_part = np.linalg.inv(r_part + s_part @ r_inv @ s_part)
    d_part = -r_inv @ s_part @ c_part
    mh_re = m.T.real.copy()
    mh_im = -m.T.imag  # Re/Im of m^H
    out_re = c_part @ mh_re - d_part @ mh_im
    out_im = c_part @ mh_im + d_part @ mh_re
    return out_re + 1j * out_im


def unit_columns(m: np.ndarray, skip_zero: bool = False) -> np.ndarray:
    """Scale every column of ``m`` to unit l2 norm."""
    m = np.asarray(m, dtype=np.complex128)
    norms = np.linalg.norm(m, axis=0)
    if skip_zero:
        safe = np.where(norms > 0.0, norms, 1.0)
        return m / safe
    if np.any(norms == 0.0):
        raise DegenerateBeamError("zero column cannot be normalized")
    return m / norms


def normalize_hybrid(a, w: np.ndarray, skip_zero: bool = False) -> np.ndarray:
    """Rescale digital-precoder columns so every effective beam A w_u is unit norm.

    ``a`` may be an AnalogPrecoder or a plain complex matrix. With
    ``skip_zero`` exactly-zero columns (unserved users) pass through.
    """
    a_mat = a.matrix if isinstance(a, AnalogPrecoder) else np.asarray(a, dtype=np.complex128)
    w = np.asarray(w, dtype=np.complex128)
    norms = np.linalg.norm(a_mat @ w, axis=0)
    if skip_zero:
        zero_cols = np.linalg.norm(w, axis=0) == 0.0
        if np.any(~zero_cols & (norms == 0.0)):
            raise DegenerateBeamError("effective beam has zero power for a served user")
        safe = np.where(norms > 0.0, norms, 1.0)
        return w / safe
    if np.any(norms == 0.0):
        raise DegenerateBeamError("effective beam has zero power")
    return w / norms
