"""Binary model files.

Both formats are a magic string followed by little-endian int64 header
fields and little-endian float64 payload arrays, in this order:

``GPDISTIL1`` (inference bundle)
    int64: d, m, b, family (0=rbf, 1=ard), n_lengthscales
    f64:   lengthscales, noise_variance, feature_means (d), feature_sds (d),
           target_mean, target_sd, U (m*d), K_UU (m*m), alpha_tilde (m), V (m*m)

``GPEXACT1`` (teacher)
    int64: n, d, family, n_lengthscales
    f64:   lengthscales, noise_variance, feature_means (d), feature_sds (d),
           target_mean, target_sd, X (n*d), y (n), chol (n*n, lower), lml

Matrices are row-major. The training weights ``W`` are not part of the
bundle, so its size depends on ``m`` and ``d`` only.
"""

from __future__ import annotations

import os
import struct

import numpy as np

from .errors import ContractError
from .exact import Dataset, ExactGPModel
from .inference import DistilledModel
from .kernels import Family, KernelSpec, cho_solve
from .spatial import InducingSet

DISTILLED_MAGIC = b"GPDISTIL1"
EXACT_MAGIC = b"GPEXACT1"

_FAMILY_CODE = {Family.RBF: 0, Family.ARD: 1}
_CODE_FAMILY = {v: k for k, v in _FAMILY_CODE.items()}


class FormatError(ContractError):
    """Raised for unreadable or corrupt model files."""


class _Reader:
    def __init__(self, buf: bytes, magic: bytes):
        if not buf.startswith(magic):
            raise FormatError(f"bad magic header, expected {magic.decode()}")
        self.buf = buf
        self.pos = len(magic)

    def ints(self, k: int) -> tuple[int, ...]:
        end = self.pos + 8 * k
        if end > len(self.buf):
            raise FormatError("file is truncated")
        out = struct.unpack_from(f"<{k}q", self.buf, self.pos)
        self.pos = end
        return out

    def floats(self, k: int, shape=None) -> np.ndarray:
        if k < 0:
            raise FormatError("negative array size in header")
        end = self.pos + 8 * k
        if end > len(self.buf):
            raise FormatError("file is truncated")
        arr = np.frombuffer(self.buf, dtype="<f8", count=k, offset=self.pos).astype(float)
        self.pos = end
        return arr.reshape(shape) if shape is not None else arr

    def done(self):
        if self.pos != len(self.buf):
            raise FormatError(f"{len(self.buf) - self.pos} trailing bytes")


def _f64(*arrays) -> bytes:
    return b"".join(np.ascontiguousarray(a, dtype="<f8").tobytes() for a in arrays)


def _spec_from(reader: _Reader, family: int, n_ls: int) -> KernelSpec:
    if family not in _CODE_FAMILY:
        raise FormatError(f"unknown kernel family code {family}")
    ls = reader.floats(n_ls)
    noise = reader.floats(1)[0]
    try:
        return KernelSpec(_CODE_FAMILY[family], tuple(ls), noise)
    except ContractError as exc:
        raise FormatError(f"invalid kernel in file: {exc}") from exc


def distilled_to_bytes(model: DistilledModel) -> bytes:
    spec = model.spec
    head = struct.pack("<5q", model.d, model.m, model.b, _FAMILY_CODE[spec.family], len(spec.lengthscales))
    body = _f64(
        spec.lengthscales,
        [spec.noise_variance],
        model.feature_means,
        model.feature_sds,
        [model.target_mean, model.target_sd],
        model.U.points,
        model.K_UU,
        model.alpha_tilde,
        model.V,
    )
    return DISTILLED_MAGIC + head + body


def distilled_from_bytes(buf: bytes) -> DistilledModel:
    r = _Reader(buf, DISTILLED_MAGIC)
    d, m, b, family, n_ls = r.ints(5)
    if d < 1 or m < 1 or b < 1 or n_ls < 1:
        raise FormatError(f"invalid header d={d} m={m} b={b} n_lengthscales={n_ls}")
    spec = _spec_from(r, family, n_ls)
    fm, fs = r.floats(d), r.floats(d)
    tm, ts = r.floats(2)
    U = r.floats(m * d, (m, d))
    K_UU = r.floats(m * m, (m, m))
    alpha = r.floats(m)
    V = r.floats(m * m, (m, m))
    r.done()
    return DistilledModel(InducingSet(U), spec, K_UU, alpha, V, int(b), fm, fs, float(tm), float(ts))


def exact_to_bytes(model: ExactGPModel) -> bytes:
    data, spec = model.data, model.spec
    head = struct.pack("<4q", data.n, data.d, _FAMILY_CODE[spec.family], len(spec.lengthscales))
    body = _f64(
        spec.lengthscales,
        [spec.noise_variance],
        data.feature_means,
        data.feature_sds,
        [data.target_mean, data.target_sd],
        data.X,
        data.y,
        model.chol,
        [model.lml],
    )
    return EXACT_MAGIC + head + body


def exact_from_bytes(buf: bytes) -> ExactGPModel:
    r = _Reader(buf, EXACT_MAGIC)
    n, d, family, n_ls = r.ints(4)
    if n < 1 or d < 1 or n_ls < 1:
        raise FormatError(f"invalid header n={n} d={d} n_lengthscales={n_ls}")
    spec = _spec_from(r, family, n_ls)
    fm, fs = r.floats(d), r.floats(d)
    tm, ts = r.floats(2)
    X = r.floats(n * d, (n, d))
    y = r.floats(n)
    L = r.floats(n * n, (n, n))
    (lml,) = r.floats(1)
    r.done()
    data = Dataset(X, y, fm, fs, float(tm), float(ts))
    return ExactGPModel(data, spec, L, cho_solve(L, data.y), float(lml), [])


def save_model(model, path) -> int:
    """Write a teacher or distilled model; returns the number of bytes written."""
    if isinstance(model, DistilledModel):
        buf = distilled_to_bytes(model)
    elif isinstance(model, ExactGPModel):
        buf = exact_to_bytes(model)
    else:
        raise ContractError(f"cannot serialize {type(model).__name__}")
    with open(path, "wb") as fh:
        fh.write(buf)
    return len(buf)


def load_model(path):
    """Read either format, dispatching on the magic header."""
    if not os.path.exists(path):
        raise ContractError(f"model file not found: {path}")
    with open(path, "rb") as fh:
        buf = fh.read()
    return model_from_bytes(buf)


def model_from_bytes(buf: bytes):
    if buf.startswith(DISTILLED_MAGIC):
        return distilled_from_bytes(buf)
    if buf.startswith(EXACT_MAGIC):
        return exact_from_bytes(buf)
    raise FormatError("not a GPDISTIL1 or GPEXACT1 file")


def bundle_size(model: DistilledModel) -> int:
    return len(distilled_to_bytes(model))

