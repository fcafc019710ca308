"""Shared per-frequency machinery for the spectral network variants.

Both the cyclic-shift (1-d) and translation (2-d) constructions reduce to
the same computation once the frequency axes are flattened: the features
become a stack of complex slices V(p) of shape (C, m), one per frequency,
and every operator is block diagonal across frequencies with C x C blocks

    E(p)   = alpha   (I + alpha   V(p) V(p)*)^-1
    C_j(p) = alpha_j (I + alpha_j V(p) Pi_j V(p)*)^-1,   alpha = C/(m eps^2).

The slices V(p) here are the *unitary* transforms of the signals (their
Frobenius norm matches the signal norm, so renormalizing in either domain
is the same sphere projection). The eigenvalues of the underlying
structured dense matrices are the unnormalized transforms, sqrt(F) times
larger, which is why every Gram matrix below is scaled by the frequency
count: with that scale the per-frequency operators are exactly the
diagonal blocks of the dense operators, and the layer update equals the
dense update conjugated by the unitary transform.
"""

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .errors import NotPositiveDefinite, ZeroVector
from .rate import Partition, RateParams

_NORM_FLOOR = 1e-12


@dataclass
class SpectralLayer:
    """Per-frequency operators of one layer, frequency axes flattened.

    ``Ebar`` has shape (F, C, C) and ``Cbar`` (k, F, C, C), where F is the
    number of frequencies (T in 1-d, H*W in 2-d, recorded in
    ``freq_shape``).
    """

    Ebar: np.ndarray
    Cbar: np.ndarray
    freq_shape: tuple
    gamma: np.ndarray
    alpha: float
    alpha_class: np.ndarray
    eta: float
    lam: float


def conjugate_plan_1d(T: int):
    """Frequencies to factor and (target, source) conjugate-mirror pairs."""
    compute = list(range(T // 2 + 1))
    mirror = [(p, T - p) for p in range(T // 2 + 1, T)]
    return compute, mirror


def conjugate_plan_2d(H: int, W: int):
    """Same plan on flattened (p, q) indices; mirroring on the W axis only."""
    compute = [p * W + q for p in range(H) for q in range(W // 2 + 1)]
    mirror = []
    for p in range(H):
        for q in range(W // 2 + 1, W):
            src = ((H - p) % H) * W + (W - q)
            mirror.append((p * W + q, src))
    return compute, mirror


def full_plan(F: int):
    return list(range(F)), []


def hermitian_inverse(A: np.ndarray) -> np.ndarray:
    """Inverse of a Hermitian positive definite matrix via Cholesky."""
    try:
        c = cho_factor(A, lower=True, check_finite=False)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefinite(str(exc)) from exc
    inv = cho_solve(c, np.eye(A.shape[0], dtype=A.dtype), check_finite=False)
    return 0.5 * (inv + inv.conj().T)


def check_conjugate_symmetry(Vt: np.ndarray, mirror, tol: float = 1e-8):
    """Half-spectrum mode requires spectra of real signals; verify it."""
    if not mirror:
        return
    scale = max(1.0, float(np.max(np.abs(Vt))))
    for tgt, src in mirror:
        err = float(np.max(np.abs(Vt[tgt] - Vt[src].conj())))
        if err > tol * scale:
            raise ValueError(
                "half-spectrum mode needs a conjugate-symmetric spectrum "
                f"(max violation {err:.3e}); use full_spectrum=True for complex data")


def build_layer(Vt: np.ndarray, partition: Partition, eps: float, plan,
                eta: float, lam: float, freq_shape: tuple,
                gram_scale: float) -> SpectralLayer:
    """Factor the per-frequency operators from spectral features Vt (F, C, m).

    ``gram_scale`` is the frequency count of the transform; see the module
    docstring for why the Grams of unitary spectra carry that scale.
    """
    F, C, m = Vt.shape
    if m != partition.m:
        raise ValueError(f"partition covers {partition.m} samples, features have {m}")
    compute, mirror = plan
    check_conjugate_symmetry(Vt, mirror)
    params = RateParams(eps)
    alpha = params.alpha(C, m)
    alpha_class = np.array([params.alpha_class(C, int(c)) for c in partition.counts])
    k = partition.k
    eye = np.eye(C, dtype=np.complex128)

    Ebar = np.empty((F, C, C), dtype=np.complex128)
    Cbar = np.empty((k, F, C, C), dtype=np.complex128)
    masks = [partition.mask(j) for j in range(k)]
    for p in compute:
        Vp = Vt[p]
        G = gram_scale * (Vp @ Vp.conj().T)
        Ebar[p] = alpha * hermitian_inverse(eye + alpha * 0.5 * (G + G.conj().T))
        for j in range(k):
            Vpj = Vp[:, masks[j]]
            Gj = gram_scale * (Vpj @ Vpj.conj().T)
            Cbar[j, p] = alpha_class[j] * hermitian_inverse(
                eye + alpha_class[j] * 0.5 * (Gj + Gj.conj().T))
    for tgt, src in mirror:
        Ebar[tgt] = Ebar[src].conj()
        Cbar[:, tgt] = Cbar[:, src].conj()

    return SpectralLayer(Ebar=Ebar, Cbar=Cbar, freq_shape=tuple(freq_shape),
                         gamma=partition.gamma.copy(), alpha=alpha,
                         alpha_class=alpha_class, eta=eta, lam=lam)


def compressions(Vt: np.ndarray, layer: SpectralLayer) -> np.ndarray:
    """All class projections C_j(p) v_i(p), shape (k, F, C, m)."""
    return layer.Cbar @ Vt


def membership(CV: np.ndarray, lam: float) -> np.ndarray:
    """Softmax membership from the Frobenius norms of the class projections.

    CV has shape (k, F, C, m); the norm aggregates every frequency and
    channel of a sample. Largest logit is subtracted before exp.
    """
    norms = np.sqrt(np.sum(np.abs(CV) ** 2, axis=(1, 2)))  # (k, m)
    logits = -lam * norms
    logits -= logits.max(axis=0, keepdims=True)
    w = np.exp(logits)
    return w / w.sum(axis=0, keepdims=True)


def normalize_samples(Vt: np.ndarray) -> np.ndarray:
    """Scale every sample (last axis) to unit Frobenius norm."""
    norms = np.sqrt(np.sum(np.abs(Vt) ** 2, axis=tuple(range(Vt.ndim - 1))))
    if np.any(norms < _NORM_FLOOR):
        raise ZeroVector("zero-norm feature cannot be normalized")
    return Vt / norms


def update_batch(Vt: np.ndarray, layer: SpectralLayer,
                 pi: np.ndarray | None = None) -> np.ndarray:
    """One spectral layer step on (F, C, m) features, then renormalize.

    With ``pi`` omitted the membership is estimated from the projections;
    passing a (k, m) array (e.g. the true one-hot labels) overrides it.
    """
    EV = layer.Ebar @ Vt
    CV = compressions(Vt, layer)
    if pi is None:
        pi = membership(CV, layer.lam)
    sigma = np.einsum("jfcm,jm->fcm", CV, layer.gamma[:, None] * pi)
    return normalize_samples(Vt + layer.eta * EV - layer.eta * sigma)


def _stack_logdet_sum(Vt: np.ndarray, coeff: float) -> float:
    """sum_p logdet(I + coeff V(p) V(p)*) with one batched factorization."""
    G = Vt @ Vt.conj().transpose(0, 2, 1)
    G = 0.5 * (G + G.conj().transpose(0, 2, 1))
    A = np.eye(Vt.shape[1], dtype=np.complex128) + coeff * G
    try:
        L = np.linalg.cholesky(A)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefinite(str(exc)) from exc
    diags = np.real(np.diagonal(L, axis1=-2, axis2=-1))
    return float(2.0 * np.sum(np.log(diags)))


def spectral_components(Vt: np.ndarray, partition: Partition, eps: float,
                        scale: float) -> tuple[float, float, float]:
    """Objective triple (reduction, expand, compress) from spectral features.

    ``scale`` is the frequency count of the transform: it multiplies the
    per-frequency Grams (unitary spectra vs dense eigenvalues) and divides
    the summed log-dets (the objective is the dense rate per position).
    """
    F, C, m = Vt.shape
    params = RateParams(eps)
    R = _stack_logdet_sum(Vt, scale * params.alpha(C, m)) / (2.0 * scale)
    Rc = 0.0
    for j in range(partition.k):
        mask = partition.mask(j)
        aj = params.alpha_class(C, int(partition.counts[j]))
        acc = _stack_logdet_sum(Vt[:, :, mask], scale * aj)
        Rc += partition.gamma[j] * acc / (2.0 * scale)
    return R - Rc, R, Rc
