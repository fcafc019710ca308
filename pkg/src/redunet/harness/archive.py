"""Binary model archives.

Layout, all little-endian:

    magic "REDUNET1" | u32 version | u32 kind | u32 k | u32 L
    u32 trace_rows | u32 ndim | ndim x u32 dims
    f64 eps, eta, lam | k x f64 gamma | f64 alpha | k x f64 alpha_class
    trace_rows x 3 f64 trace
    L layer payloads    (f64 reals; complex as interleaved real, imag)
    u32 CRC32 over everything between the magic and this field

Layer payloads: the vector kind stores E (n*n) then the k class operators
(k*n*n); the spectral kinds store Ebar (F*C*C complex) then Cbar
(k*F*C*C complex) with F the full frequency count. The per-layer scalars
(alpha, gamma, step size) are constant across a construction, so they are
stored once in the header.
"""

import struct
import zlib

import numpy as np

from ..errors import BadMagic, ChecksumFailure, VersionMismatch
from ..spectral1d import Shift1DReduNet
from ..spectral2d import Translation2DReduNet
from ..vector import LayerParams, VectorReduNet
from .. import _freq

MAGIC = b"REDUNET1"
VERSION = 1
KIND_VECTOR, KIND_SHIFT1D, KIND_TRANSLATION2D = 0, 1, 2


def _u32(value) -> bytes:
    return struct.pack("<I", int(value))


def _f64(*values) -> bytes:
    return struct.pack("<" + "d" * len(values), *(float(v) for v in values))


def _real_bytes(arr) -> bytes:
    return np.ascontiguousarray(arr, dtype="<f8").tobytes()


def _complex_bytes(arr) -> bytes:
    return np.ascontiguousarray(arr, dtype="<c16").tobytes()


def _shared_layer_scalars(layers):
    """Alpha / alpha_class are per-layer fields but constant per model."""
    first = layers[0]
    for layer in layers[1:]:
        same = (layer.alpha == first.alpha
                and np.array_equal(layer.alpha_class, first.alpha_class)
                and np.array_equal(layer.gamma, first.gamma)
                and layer.eta == first.eta and layer.lam == first.lam)
        if not same:
            raise ValueError("layers disagree on shared scalars; cannot archive")
    return float(first.alpha), np.asarray(first.alpha_class, dtype=np.float64)


def save_model(model, path) -> str:
    """Serialize a constructed network; returns the path written."""
    if isinstance(model, VectorReduNet):
        kind, dims = KIND_VECTOR, (model.n,)
    elif isinstance(model, Shift1DReduNet):
        kind, dims = KIND_SHIFT1D, (model.C, model.T)
    elif isinstance(model, Translation2DReduNet):
        kind, dims = KIND_TRANSLATION2D, (model.C, model.H, model.W)
    else:
        raise TypeError(f"cannot archive a {type(model).__name__}")

    k = model.k
    trace = np.asarray(model.trace, dtype=np.float64)
    if trace.ndim != 2 or trace.shape[1] != 3:
        raise ValueError("model trace must be (rows, 3)")
    if model.layers:
        alpha, alpha_class = _shared_layer_scalars(model.layers)
    else:
        alpha, alpha_class = 0.0, np.zeros(k)

    parts = [
        _u32(VERSION), _u32(kind), _u32(k), _u32(len(model.layers)),
        _u32(trace.shape[0]), _u32(len(dims)),
    ]
    parts.extend(_u32(d) for d in dims)
    parts.append(_f64(model.eps, model.eta, model.lam))
    parts.append(_real_bytes(model.gamma))
    parts.append(_f64(alpha))
    parts.append(_real_bytes(alpha_class))
    parts.append(_real_bytes(trace))
    for layer in model.layers:
        if kind == KIND_VECTOR:
            parts.append(_real_bytes(layer.E))
            parts.append(_real_bytes(layer.C))
        else:
            parts.append(_complex_bytes(layer.Ebar))
            parts.append(_complex_bytes(layer.Cbar))
    body = b"".join(parts)
    blob = MAGIC + body + _u32(zlib.crc32(body))
    with open(path, "wb") as fh:
        fh.write(blob)
    return str(path)


class _Cursor:
    """Sequential reader raising ChecksumFailure on overruns."""

    def __init__(self, buf, start, end):
        self.buf, self.off, self.end = buf, start, end

    def _take(self, nbytes):
        if self.off + nbytes > self.end:
            raise ChecksumFailure("declared shapes exceed the payload size")
        view = self.buf[self.off:self.off + nbytes]
        self.off += nbytes
        return view

    def u32(self) -> int:
        return struct.unpack("<I", self._take(4))[0]

    def f64(self, count=1):
        out = np.frombuffer(self._take(8 * count), dtype="<f8").astype(np.float64)
        return float(out[0]) if count == 1 else out

    def reals(self, shape) -> np.ndarray:
        n = int(np.prod(shape, dtype=np.int64))
        out = np.frombuffer(self._take(8 * n), dtype="<f8")
        return out.astype(np.float64).reshape(shape)

    def complexes(self, shape) -> np.ndarray:
        n = int(np.prod(shape, dtype=np.int64))
        out = np.frombuffer(self._take(16 * n), dtype="<c16")
        return out.astype(np.complex128).reshape(shape)


def load_model(path):
    """Read an archive back into the matching model type.

    Rejects wrong magic, unknown versions, and any payload whose trailing
    CRC32 does not match (which covers truncation and corruption).
    """
    with open(path, "rb") as fh:
        buf = fh.read()
    if len(buf) < len(MAGIC):
        raise ChecksumFailure(f"{path}: shorter than the archive magic")
    if buf[:len(MAGIC)] != MAGIC:
        raise BadMagic(f"{path}: not a model archive")
    if len(buf) < len(MAGIC) + 8:
        raise ChecksumFailure(f"{path}: truncated archive")
    version = struct.unpack_from("<I", buf, len(MAGIC))[0]
    if version != VERSION:
        raise VersionMismatch(f"{path}: archive version {version}, expected {VERSION}")
    stored = struct.unpack_from("<I", buf, len(buf) - 4)[0]
    actual = zlib.crc32(buf[len(MAGIC):-4])
    if stored != actual:
        raise ChecksumFailure(f"{path}: CRC32 {actual:#010x} != stored {stored:#010x}")

    cur = _Cursor(buf, len(MAGIC) + 4, len(buf) - 4)
    kind = cur.u32()
    k = cur.u32()
    depth = cur.u32()
    trace_rows = cur.u32()
    ndim = cur.u32()
    dims = tuple(cur.u32() for _ in range(ndim))
    eps, eta, lam = (cur.f64() for _ in range(3))
    gamma = cur.reals((k,))
    alpha = cur.f64()
    alpha_class = cur.reals((k,))
    trace = cur.reals((trace_rows, 3))

    expected_ndim = {KIND_VECTOR: 1, KIND_SHIFT1D: 2, KIND_TRANSLATION2D: 3}.get(kind)
    if expected_ndim is None:
        raise ChecksumFailure(f"{path}: unknown model kind {kind}")
    if ndim != expected_ndim:
        raise ChecksumFailure(f"{path}: kind {kind} expects {expected_ndim} dims, got {ndim}")

    layers = []
    if kind == KIND_VECTOR:
        n, = dims
        for _ in range(depth):
            E = cur.reals((n, n))
            C = cur.reals((k, n, n))
            layers.append(LayerParams(E=E, C=C, gamma=gamma.copy(), alpha=alpha,
                                      alpha_class=alpha_class.copy(), eta=eta, lam=lam))
        model = VectorReduNet(layers=layers, n=n, k=k, eps=eps, eta=eta, lam=lam,
                              trace=trace, gamma=gamma)
    else:
        C = dims[0]
        freq_shape = dims[1:]
        F = int(np.prod(freq_shape, dtype=np.int64))
        for _ in range(depth):
            Ebar = cur.complexes((F, C, C))
            Cbar = cur.complexes((k, F, C, C))
            layers.append(_freq.SpectralLayer(Ebar=Ebar, Cbar=Cbar, freq_shape=freq_shape,
                                              gamma=gamma.copy(), alpha=alpha,
                                              alpha_class=alpha_class.copy(),
                                              eta=eta, lam=lam))
        if kind == KIND_SHIFT1D:
            model = Shift1DReduNet(layers=layers, C=C, T=freq_shape[0], k=k, eps=eps,
                                   eta=eta, lam=lam, trace=trace, gamma=gamma)
        else:
            model = Translation2DReduNet(layers=layers, C=C, H=freq_shape[0],
                                         W=freq_shape[1], k=k, eps=eps, eta=eta,
                                         lam=lam, trace=trace, gamma=gamma)
    if cur.off != len(buf) - 4:
        raise ChecksumFailure(f"{path}: {len(buf) - 4 - cur.off} unread payload bytes")
    return model
