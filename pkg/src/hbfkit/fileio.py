"""On-disk formats: complex matrices, SS-burst files, codebook files, hashes.

Complex matrices are stored little-endian as interleaved re/im float64
behind a 16-byte header (8-byte magic, uint32 rows, uint32 cols).
"""

from __future__ import annotations

import hashlib
import json
import struct
from pathlib import Path

import numpy as np

from .linalg import AnalogPrecoder, Codebook

MATRIX_MAGIC = b"HBFCMX01"
CODEBOOK_MAGIC = b"HBFAPCB1"
_HEADER = struct.Struct("<8sII")


class IntegrityError(RuntimeError):
    """Stored artifact does not match its recorded hash or magic."""


def write_matrix(path, m: np.ndarray) -> None:
    m = np.ascontiguousarray(np.asarray(m, dtype=np.complex128))
    if m.ndim != 2:
        raise ValueError("matrix files store 2-D arrays")
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MATRIX_MAGIC, m.shape[0], m.shape[1]))
        fh.write(m.astype("<c16").tobytes())


def read_matrix(path) -> np.ndarray:
    with open(path, "rb") as fh:
        header = fh.read(_HEADER.size)
        if len(header) != _HEADER.size:
            raise IntegrityError(f"{path}: truncated header")
        magic, rows, cols = _HEADER.unpack(header)
        if magic != MATRIX_MAGIC:
            raise IntegrityError(f"{path}: bad magic {magic!r}")
        payload = fh.read()
    data = np.frombuffer(payload[: len(payload) - len(payload) % 16], dtype="<c16")
    if data.size != rows * cols:
        raise IntegrityError(f"{path}: expected {rows * cols} entries, got {data.size}")
    return data.reshape(rows, cols).astype(np.complex128)


def sha256_bytes(payload: bytes) -> str:
    return hashlib.sha256(payload).hexdigest()


def sha256_file(path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def write_burst_csv(path, burst, calibration_hash: str = "") -> None:
    """SS-burst file: one header line (K, N_T, beta, calibration hash), then
    K rows of N_T 2-bit codes."""
    beta = "" if burst.beta is None else repr(float(burst.beta))
    lines = [f"# k={burst.codes.shape[0]} n_t={burst.codes.shape[1]} "
             f"beta={beta} calibration={calibration_hash}"]
    for row in burst.codes:
        lines.append(",".join(str(int(c)) for c in row))
    Path(path).write_text("\n".join(lines) + "\n")


def read_burst_csv(path):
    from .ss import SsBurst

    lines = Path(path).read_text().strip().splitlines()
    if not lines or not lines[0].startswith("#"):
        raise IntegrityError(f"{path}: missing burst header line")
    fields = dict(part.split("=", 1) for part in lines[0][1:].split() if "=" in part)
    beta = float(fields["beta"]) if fields.get("beta") else None
    codes = np.array([[int(c) for c in line.split(",")] for line in lines[1:]],
                     dtype=np.uint8)
    if codes.shape != (int(fields["k"]), int(fields["n_t"])):
        raise IntegrityError(f"{path}: code block does not match header dimensions")
    return SsBurst(codes=codes, beta=beta), fields.get("calibration", "")


def _pack_codes(codes: np.ndarray) -> bytes:
    """Pack 2-bit codes four per byte, little-end-first within each byte."""
    flat = codes.reshape(-1).astype(np.uint8)
    pad = (-len(flat)) % 4
    if pad:
        flat = np.concatenate([flat, np.zeros(pad, dtype=np.uint8)])
    quads = flat.reshape(-1, 4)
    packed = quads[:, 0] | (quads[:, 1] << 2) | (quads[:, 2] << 4) | (quads[:, 3] << 6)
    return packed.astype(np.uint8).tobytes()


def _unpack_codes(blob: bytes, n: int) -> np.ndarray:
    packed = np.frombuffer(blob, dtype=np.uint8)
    quads = np.stack([(packed >> s) & 0x3 for s in (0, 2, 4, 6)], axis=1)
    return quads.reshape(-1)[:n].astype(np.uint8)


def write_codebook(path, cb: Codebook, build_params=None, core_hash: str = "") -> None:
    """Binary codebook: magic + JSON header block + packed 2-bit code blocks."""
    n_t, n_rf = cb[0].codes.shape
    header = {
        "l": len(cb), "n_t": n_t, "n_rf": n_rf, "core_hash": core_hash,
        "build_params": None if build_params is None else {
            "xi": build_params.xi, "cap": build_params.cap,
            "retention": build_params.retention,
        },
    }
    header_bytes = json.dumps(header, sort_keys=True).encode()
    with open(path, "wb") as fh:
        fh.write(CODEBOOK_MAGIC)
        fh.write(struct.pack("<I", len(header_bytes)))
        fh.write(header_bytes)
        for cw in cb.codewords:
            fh.write(_pack_codes(cw.codes))


def read_codebook(path) -> tuple[Codebook, dict]:
    with open(path, "rb") as fh:
        magic = fh.read(len(CODEBOOK_MAGIC))
        if magic != CODEBOOK_MAGIC:
            raise IntegrityError(f"{path}: bad magic {magic!r}")
        (header_len,) = struct.unpack("<I", fh.read(4))
        header = json.loads(fh.read(header_len).decode())
        n_t, n_rf = header["n_t"], header["n_rf"]
        block = -(-n_t * n_rf // 4)
        codewords = []
        for _ in range(header["l"]):
            blob = fh.read(block)
            if len(blob) != block:
                raise IntegrityError(f"{path}: truncated codeword block")
            codes = _unpack_codes(blob, n_t * n_rf).reshape(n_t, n_rf)
            codewords.append(AnalogPrecoder(codes))
    return Codebook(tuple(codewords)), header


def codebook_to_csv(path, cb: Codebook) -> None:
    """Human-readable export: codeword index, antenna row, comma-joined codes."""
    lines = ["codeword,row,codes"]
    for l, cw in enumerate(cb.codewords):
        for r, row in enumerate(cw.codes):
            lines.append(f"{l},{r}," + " ".join(str(int(c)) for c in row))
    Path(path).write_text("\n".join(lines) + "\n")
