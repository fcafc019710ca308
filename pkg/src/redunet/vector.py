"""Layer-by-layer constructed network on vector features.

Each layer holds two kinds of linear operators derived from the training
features Z at construction time:

    E   = alpha   (I + alpha   Z Z*)^-1        (expands the whole set)
    C_j = alpha_j (I + alpha_j Z Pi_j Z*)^-1   (compresses class j)

A layer moves a feature z along the rate-reduction ascent direction,
steering the compression term by a softmax membership estimate, and
projects back onto the unit sphere:

    z  <-  normalize( z + eta E z - eta sum_j gamma_j pihat_j(z) C_j z ).

Training-label updates (pihat replaced by the true one-hot membership)
reproduce the per-sample slices of the exact objective gradient and are
kept behind a flag for the gradient oracle tests.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .errors import ZeroVector
from .rate import Partition, RateParams, as_matrix, rate_components

_NORM_FLOOR = 1e-12


def _psd_inverse(A: np.ndarray) -> np.ndarray:
    """Inverse of a symmetric positive definite matrix via Cholesky."""
    c = cho_factor(A, lower=True, check_finite=False)
    inv = cho_solve(c, np.eye(A.shape[0]), check_finite=False)
    return 0.5 * (inv + inv.T)


def expansion_operator(Z, eps: float) -> np.ndarray:
    """E = alpha (I + alpha Z Z*)^-1 for the full feature set."""
    Z = as_matrix(Z)
    n, m = Z.shape
    alpha = RateParams(eps).alpha(n, m)
    G = Z @ Z.T
    return alpha * _psd_inverse(np.eye(n) + alpha * 0.5 * (G + G.T))


def compression_operators(Z, partition: Partition, eps: float) -> np.ndarray:
    """(k, n, n) stack of C_j = alpha_j (I + alpha_j Z Pi_j Z*)^-1."""
    Z = as_matrix(Z)
    n, m = Z.shape
    if m != partition.m:
        raise ValueError(f"partition covers {partition.m} samples, Z has {m}")
    params = RateParams(eps)
    C = np.empty((partition.k, n, n))
    for j in range(partition.k):
        Zj = Z[:, partition.mask(j)]
        aj = params.alpha_class(n, int(partition.counts[j]))
        G = Zj @ Zj.T
        C[j] = aj * _psd_inverse(np.eye(n) + aj * 0.5 * (G + G.T))
    return C


@dataclass
class LayerParams:
    """Operators and scalars of one constructed layer."""

    E: np.ndarray          # (n, n)
    C: np.ndarray          # (k, n, n)
    gamma: np.ndarray      # (k,)
    alpha: float           # coefficient of E
    alpha_class: np.ndarray  # (k,) coefficients of the C_j
    eta: float
    lam: float


@dataclass
class VectorReduNet:
    """A constructed stack of layers plus its construction trace.

    ``trace`` has one row per recorded state, ``(L+1, 3)``: the objective
    triple (rate_reduction, coding_rate, class_rate) of the initial
    normalized features followed by one row per layer.
    """

    layers: list
    n: int
    k: int
    eps: float
    eta: float
    lam: float
    trace: np.ndarray
    gamma: np.ndarray
    features: np.ndarray | None = None
    carry_features: np.ndarray | None = None
    extras: dict = field(default_factory=dict)

    @property
    def depth(self) -> int:
        return len(self.layers)


def default_lambda(k: int) -> float:
    """Softmax sharpness default: scales with the number of classes."""
    return 10.0 * k


def normalize_columns(Z: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(Z, axis=0)
    if np.any(norms < _NORM_FLOOR):
        raise ZeroVector("zero-norm feature cannot be projected to the sphere")
    return Z / norms


def soft_membership(z: np.ndarray, C: np.ndarray, lam: float) -> np.ndarray:
    """Membership estimate pihat_j(z) = softmax_j(-lam ||C_j z||).

    ``z`` may be one feature (n,) or a batch (n, b); returns (k,) or (k, b).
    The largest logit is subtracted before exponentiation so the softmax
    cannot overflow.
    """
    single = z.ndim == 1
    zb = z[:, None] if single else z
    norms = np.linalg.norm(C @ zb, axis=1)  # (k, b)
    logits = -lam * norms
    logits -= logits.max(axis=0, keepdims=True)
    w = np.exp(logits)
    pi = w / w.sum(axis=0, keepdims=True)
    return pi[:, 0] if single else pi


def nonlinear_compression(z: np.ndarray, C: np.ndarray, gamma: np.ndarray,
                          lam: float) -> np.ndarray:
    """sigma(z) = sum_j gamma_j pihat_j(z) C_j z, batched like soft_membership."""
    single = z.ndim == 1
    zb = z[:, None] if single else z
    Cz = C @ zb  # (k, n, b)
    pi = soft_membership(zb, C, lam)  # (k, b)
    sigma = np.einsum("jnb,jb->nb", Cz, gamma[:, None] * pi)
    return sigma[:, 0] if single else sigma


def relu_compression(z: np.ndarray, C: np.ndarray, alpha_class: np.ndarray) -> np.ndarray:
    """Rectified variant of the compression step.

    Uses the residual projections P_j = I - C_j / alpha_j and returns
    z - sum_j relu(P_j z) (unnormalized; callers rescale as needed).
    """
    single = z.ndim == 1
    zb = z[:, None] if single else z
    out = zb.copy()
    n = zb.shape[0]
    for j in range(C.shape[0]):
        P = np.eye(n) - C[j] / alpha_class[j]
        out = out - np.maximum(P @ zb, 0.0)
    return out[:, 0] if single else out


def _update_batch(Z: np.ndarray, layer: LayerParams, pi: np.ndarray) -> np.ndarray:
    """One layer step for every column of Z with membership weights pi (k, b)."""
    EZ = layer.E @ Z
    Cz = layer.C @ Z  # (k, n, b)
    sigma = np.einsum("jnb,jb->nb", Cz, layer.gamma[:, None] * pi)
    return normalize_columns(Z + layer.eta * EZ - layer.eta * sigma)


def apply_layer(z: np.ndarray, layer: LayerParams, label: int | None = None) -> np.ndarray:
    """Move one feature (or batch) through a layer and renormalize.

    With ``label`` given, the compression term uses the true class instead
    of the membership estimate; that variant matches the exact objective
    gradient on training data.
    """
    single = z.ndim == 1
    zb = z[:, None] if single else z
    if label is None:
        pi = soft_membership(zb, layer.C, layer.lam)
    else:
        pi = np.zeros((layer.C.shape[0], zb.shape[1]))
        pi[label] = 1.0
    out = _update_batch(zb, layer, pi)
    return out[:, 0] if single else out


def construct_vector_net(X, partition: Partition, L: int, eta: float, eps: float,
                         lam: float | None = None, use_labels: bool = False,
                         keep_layers: bool = True, carry=None) -> VectorReduNet:
    """Build an L-layer network from labeled features.

    The input columns are normalized to the unit sphere, then each layer's
    operators are computed from the current features and every feature is
    updated in place (operators stay fixed within a layer). Updates use the
    estimated membership; ``use_labels=True`` switches to the true class
    labels. ``carry`` is an optional unlabeled feature batch propagated
    through the same layers (exactly what forward_vector would compute),
    useful with ``keep_layers=False`` when the operator stack would not fit
    in memory.
    """
    X = as_matrix(X)
    n, m = X.shape
    if m != partition.m:
        raise ValueError(f"partition covers {partition.m} samples, X has {m}")
    if L < 0:
        raise ValueError("L must be >= 0")
    if lam is None:
        lam = default_lambda(partition.k)
    params = RateParams(eps)

    Z = normalize_columns(X.astype(np.float64, copy=True))
    Zc = None
    if carry is not None:
        Zc = normalize_columns(as_matrix(carry).astype(np.float64, copy=True))

    onehot = partition.onehot()
    trace = [rate_components(Z, partition, eps)]
    layers = []
    for _ in range(int(L)):
        layer = LayerParams(
            E=expansion_operator(Z, eps),
            C=compression_operators(Z, partition, eps),
            gamma=partition.gamma.copy(),
            alpha=params.alpha(n, m),
            alpha_class=np.array([params.alpha_class(n, int(c)) for c in partition.counts]),
            eta=eta,
            lam=lam,
        )
        pi = onehot if use_labels else soft_membership(Z, layer.C, lam)
        Z = _update_batch(Z, layer, pi)
        if Zc is not None:
            Zc = _update_batch(Zc, layer, soft_membership(Zc, layer.C, lam))
        trace.append(rate_components(Z, partition, eps))
        if keep_layers:
            layers.append(layer)

    return VectorReduNet(layers=layers, n=n, k=partition.k, eps=eps, eta=eta,
                         lam=lam, trace=np.array(trace), gamma=partition.gamma.copy(),
                         features=Z, carry_features=Zc)


def forward_vector(model: VectorReduNet, x: np.ndarray) -> np.ndarray:
    """Map a raw input (n,) or batch (n, b) through the constructed layers.

    The input is normalized first, so a zero-layer model returns the
    normalized input. Membership is always estimated (labels are unknown
    at inference time).
    """
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    Z = normalize_columns(x[:, None] if single else x.copy())
    for layer in model.layers:
        Z = _update_batch(Z, layer, soft_membership(Z, layer.C, layer.lam))
    return Z[:, 0] if single else Z
