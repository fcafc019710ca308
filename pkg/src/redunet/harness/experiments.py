"""Experiment drivers: dataset preparation, construction, evaluation, artifacts.

Every experiment follows the same shape: prepare a labeled training stack
(and a test stack, plus optionally an augmented test stack) in the model's
input space, construct the network with label-driven updates while
co-propagating the test data, fit the nearest-subspace classifier on the
training features, and emit loss_curve.csv, cosine_train.csv,
cosine_test.csv, accuracy.csv, and (optionally) a model archive.

For the shift- and translation-invariant models the classifier is fitted
on the orbit of the training features under the configured shift grid;
those rolls equal forwarding shifted inputs because the constructed maps
are exactly equivariant, so the features are rolled directly instead of
re-propagating every shifted copy.
"""

import os

import numpy as np

from ..classify import evaluate, fit_subspaces, predict
from ..datasets import (LabeledDataset, gaussian_sphere, load_mnist,
                        rotate_augment, shift_augment, signals_1d)
from ..errors import ConfigError, DataError
from ..lifting import lift_1d, lift_2d, polar_transform, random_filters, sparsify
from ..rate import Partition
from ..spectral1d import Shift1DReduNet, construct_shift1d, forward_shift1d, kernel_extract
from ..spectral2d import (Translation2DReduNet, construct_translation2d,
                          forward_translation2d, kernel_extract_2d)
from ..vector import VectorReduNet, construct_vector_net, forward_vector
from .archive import load_model, save_model
from .csvio import emit_csv

ORTHO_COS = 0.1  # |cos| at or below this counts as orthogonal

_MNIST_FILES = {"train_images": "train-images-idx3-ubyte",
                "train_labels": "train-labels-idx1-ubyte",
                "test_images": "t10k-images-idx3-ubyte",
                "test_labels": "t10k-labels-idx1-ubyte"}


class Prepared:
    """Model-space data for one experiment (sample axis last)."""

    def __init__(self, model_kind, train, labels, test, test_labels,
                 aug=None, aug_labels=None, fit_rolls=None):
        self.model_kind = model_kind
        self.train, self.labels = train, labels
        self.test, self.test_labels = test, test_labels
        self.aug, self.aug_labels = aug, aug_labels
        self.fit_rolls = fit_rolls


def _flat(F) -> np.ndarray:
    return F.reshape(-1, F.shape[-1])


def _take_per_class(ds: LabeledDataset, per_class: int, k: int) -> LabeledDataset:
    """First per_class samples of every class, in class order."""
    picks = []
    for j in range(k):
        where = np.flatnonzero(ds.labels == j)
        if where.size < per_class:
            raise DataError(f"class {j} has {where.size} samples, need {per_class}")
        picks.append(where[:per_class])
    order = np.concatenate(picks)
    return LabeledDataset(ds.samples[order], ds.labels[order], ds.seed, ds.kind)


def _resolve_mnist_paths(cfg) -> dict:
    root = cfg.data_dir or os.environ.get("REDUNET_MNIST_DIR")
    paths = {}
    for key, base in _MNIST_FILES.items():
        explicit = getattr(cfg, key)
        if explicit:
            paths[key] = explicit
            continue
        if root is None:
            raise DataError(
                f"no {key} given; set it in the config or point REDUNET_MNIST_DIR "
                "at a directory with the standard IDX files")
        cand = os.path.join(root, base)
        if not os.path.exists(cand) and os.path.exists(cand + ".gz"):
            cand += ".gz"
        if not os.path.exists(cand):
            raise DataError(f"{key}: neither {cand} nor {cand}.gz exists")
        paths[key] = cand
    return paths


def _load_mnist_pair(cfg):
    paths = _resolve_mnist_paths(cfg)
    train = load_mnist(paths["train_images"], paths["train_labels"],
                       digits=(0, 1), seed=cfg.seed)
    test = load_mnist(paths["test_images"], paths["test_labels"],
                      digits=(0, 1), seed=cfg.seed)
    return (_take_per_class(train, cfg.m_per_class, 2),
            _take_per_class(test, cfg.m_test_per_class, 2))


def _default_radii(channels: int, H: int, W: int) -> tuple:
    rmax = (min(H, W) - 1) / 2.0
    return tuple(rmax * (i + 1) / channels for i in range(channels))


def _prepare_gauss(cfg, dim: int) -> Prepared:
    k = dim  # 2 classes on the circle, 3 on the sphere
    train = gaussian_sphere(k=k, sigma=cfg.sigma, m_per_class=cfg.m_per_class,
                            dim=dim, seed=cfg.seed)
    test = gaussian_sphere(k=k, sigma=cfg.sigma, m_per_class=cfg.m_test_per_class,
                           dim=dim, seed=cfg.seed + 1)
    return Prepared("vector", train.samples.T, train.labels,
                    test.samples.T, test.labels)


def _prepare_signals(cfg, want_aug: bool) -> Prepared:
    train = signals_1d(cfg.m_per_class, cfg.n, cfg.seed, cfg.noise)
    test = signals_1d(cfg.m_test_per_class, cfg.n, cfg.seed + 1, cfg.noise)
    bank = random_filters(cfg.channels, cfg.kernel_size, cfg.seed + 2)
    lift = lambda ds: sparsify(lift_1d(ds.samples.T, bank))
    aug = aug_labels = None
    if want_aug:
        shifted = shift_augment(test, cfg.stride)
        aug, aug_labels = lift(shifted), shifted.labels
    rolls = [((s,), (1,)) for s in range(0, cfg.n, cfg.stride)]
    return Prepared("shift1d", lift(train), train.labels, lift(test), test.labels,
                    aug, aug_labels, rolls)


def _prepare_rotation(cfg, want_aug: bool) -> Prepared:
    train, test = _load_mnist_pair(cfg)
    H, W = train.samples.shape[1:]
    radii = cfg.radii or _default_radii(cfg.channels, H, W)

    def to_polar(ds):
        grids = np.stack([polar_transform(img, cfg.gamma, radii)
                          for img in ds.samples])
        return LabeledDataset(grids, ds.labels, ds.seed, ds.kind + "+polar")

    train_p, test_p = to_polar(train), to_polar(test)
    aug_p = rotate_augment(test_p, cfg.gamma // cfg.stride) if want_aug else None

    if cfg.variant == "vector":
        as_input = lambda ds: ds.samples.reshape(ds.m, -1).T
        rolls = None
        kind = "vector"
    else:
        as_input = lambda ds: ds.samples.transpose(2, 1, 0)  # (C, gamma, m)
        rolls = [((s,), (1,)) for s in range(0, cfg.gamma, cfg.stride)]
        kind = "shift1d"
    aug = as_input(aug_p) if aug_p is not None else None
    aug_labels = aug_p.labels if aug_p is not None else None
    return Prepared(kind, as_input(train_p), train_p.labels,
                    as_input(test_p), test_p.labels, aug, aug_labels, rolls)


def _prepare_translation(cfg, want_aug: bool) -> Prepared:
    train, test = _load_mnist_pair(cfg)
    H, W = train.samples.shape[1:]
    aug_ds = shift_augment(test, cfg.stride) if want_aug else None

    if cfg.variant == "vector":
        as_input = lambda ds: ds.samples.reshape(ds.m, -1).T
        rolls = None
        kind = "vector"
    else:
        bank = random_filters(cfg.channels, (cfg.kernel_size, cfg.kernel_size),
                              cfg.seed + 2)
        as_input = lambda ds: sparsify(lift_2d(ds.samples.transpose(1, 2, 0), bank))
        rolls = [((p, q), (1, 2)) for p in range(0, H, cfg.stride)
                 for q in range(0, W, cfg.stride)]
        kind = "translation2d"
    aug = as_input(aug_ds) if aug_ds is not None else None
    aug_labels = aug_ds.labels if aug_ds is not None else None
    return Prepared(kind, as_input(train), train.labels,
                    as_input(test), test.labels, aug, aug_labels, rolls)


def _prepare_custom(cfg) -> Prepared:
    if not cfg.data:
        raise ConfigError("custom-vector needs a data = path/to/arrays.npz entry")
    try:
        arrays = np.load(cfg.data)
    except FileNotFoundError:
        raise DataError(f"data file {cfg.data} does not exist") from None
    for key in ("X", "labels"):
        if key not in arrays:
            raise DataError(f"{cfg.data}: missing array {key!r}")
    X = np.asarray(arrays["X"], dtype=np.float64)
    labels = np.asarray(arrays["labels"], dtype=int)
    if X.ndim != 2 or X.shape[1] != labels.shape[0]:
        raise DataError(f"{cfg.data}: X must be (n, m) with one label per column")
    test = test_labels = None
    if "X_test" in arrays:
        if "labels_test" not in arrays:
            raise DataError(f"{cfg.data}: X_test without labels_test")
        test = np.asarray(arrays["X_test"], dtype=np.float64)
        test_labels = np.asarray(arrays["labels_test"], dtype=int)
    return Prepared("vector", X, labels, test, test_labels)


def _prepare(cfg, want_aug: bool = True) -> Prepared:
    if cfg.kind == "gauss2d":
        return _prepare_gauss(cfg, 2)
    if cfg.kind == "gauss3d":
        return _prepare_gauss(cfg, 3)
    if cfg.kind == "signals1d":
        return _prepare_signals(cfg, want_aug)
    if cfg.kind == "mnist-rotation":
        return _prepare_rotation(cfg, want_aug)
    if cfg.kind == "mnist-translation":
        return _prepare_translation(cfg, want_aug)
    if cfg.kind == "custom-vector":
        return _prepare_custom(cfg)
    raise ConfigError(f"unknown experiment kind {cfg.kind!r}")


_CONSTRUCT = {"vector": construct_vector_net, "shift1d": construct_shift1d,
              "translation2d": construct_translation2d}


def _forward(model, X):
    if isinstance(model, VectorReduNet):
        return forward_vector(model, X)
    if isinstance(model, Shift1DReduNet):
        return forward_shift1d(model, X)
    return forward_translation2d(model, X)


def _check_model_matches(model, prep: Prepared, archive_path):
    shape = prep.train.shape[:-1]
    if isinstance(model, VectorReduNet):
        kind, dims = "vector", (model.n,)
    elif isinstance(model, Shift1DReduNet):
        kind, dims = "shift1d", (model.C, model.T)
    else:
        kind, dims = "translation2d", (model.C, model.H, model.W)
    if kind != prep.model_kind or dims != shape:
        raise ConfigError(
            f"{archive_path}: archive holds a {kind} model of shape {dims}, "
            f"but the experiment needs a {prep.model_kind} model of shape {shape}")


def _within_class_max_angle_deg(flat_tr, partition: Partition) -> float:
    worst = 1.0
    for j in range(partition.k):
        Fj = flat_tr[:, partition.mask(j)]
        worst = min(worst, float(np.clip(Fj.T @ Fj, -1.0, 1.0).min()))
    return float(np.degrees(np.arccos(worst)))


def _cross_class_max_abs_cos(flat_tr, labels) -> float:
    cos = np.abs(flat_tr.T @ flat_tr)
    cross = labels[:, None] != labels[None, :]
    return float(cos[cross].max()) if cross.any() else 0.0


def _orthogonal_fraction_all_shifts(F_test, test_labels, F_train, labels) -> float:
    """Fraction of cross-class (shifted test, train) pairs with |cos| <= 0.1,
    over every cyclic shift of the test features."""
    T = F_train.shape[1]
    flat_tr = _flat(F_train)
    cross = test_labels[:, None] != labels[None, :]
    total = int(cross.sum()) * T
    hits = 0
    for s in range(T):
        cos = np.abs(_flat(np.roll(F_test, s, axis=1)).T @ flat_tr)
        hits += int((cos[cross] <= ORTHO_COS).sum())
    return hits / total


def _fit_classifier(cfg, prep: Prepared, F_train):
    if prep.fit_rolls:
        feats = np.concatenate([np.roll(F_train, s, axis=ax)
                                for s, ax in prep.fit_rolls], axis=-1)
        labels = np.tile(prep.labels, len(prep.fit_rolls))
    else:
        feats, labels = F_train, prep.labels
    return fit_subspaces(feats, Partition(labels), cfg.energy)


def _metric_rows(cfg, prep: Prepared, F_train, F_test, F_aug) -> list:
    clf = _fit_classifier(cfg, prep, F_train)
    rows = [("train_accuracy", evaluate(predict(F_train, clf), prep.labels))]
    if F_test is not None:
        rows.append(("test_accuracy", evaluate(predict(F_test, clf), prep.test_labels)))
    if F_aug is not None:
        rows.append(("augmented_test_accuracy",
                     evaluate(predict(F_aug, clf), prep.aug_labels)))
    if cfg.kind in ("gauss2d", "gauss3d"):
        flat_tr = _flat(F_train)
        P = Partition(prep.labels)
        rows.append(("within_class_max_angle_deg",
                     _within_class_max_angle_deg(flat_tr, P)))
        rows.append(("cross_class_max_abs_cos",
                     _cross_class_max_abs_cos(flat_tr, prep.labels)))
    if cfg.kind == "signals1d" and F_test is not None:
        rows.append(("cross_class_orthogonal_fraction",
                     _orthogonal_fraction_all_shifts(
                         F_test, prep.test_labels, F_train, prep.labels)))
    return rows


def _emit_artifacts(cfg, prep: Prepared, model, F_train, F_test, rows, out_dir):
    os.makedirs(out_dir, exist_ok=True)
    trace = np.asarray(model.trace)
    loss_rows = [(i, trace[i, 0], trace[i, 1], trace[i, 2])
                 for i in range(trace.shape[0])]
    emit_csv(loss_rows, os.path.join(out_dir, "loss_curve.csv"),
             ["layer", "rate_reduction", "rate", "class_rate"])
    flat_tr = _flat(F_train)
    names = [f"c{i}" for i in range(flat_tr.shape[1])]
    emit_csv(np.abs(flat_tr.T @ flat_tr),
             os.path.join(out_dir, "cosine_train.csv"), names)
    if F_test is not None:
        emit_csv(np.abs(_flat(F_test).T @ flat_tr),
                 os.path.join(out_dir, "cosine_test.csv"), names)
    emit_csv(rows, os.path.join(out_dir, "accuracy.csv"), ["metric", "value"])
    if cfg.save_model:
        save_model(model, os.path.join(out_dir, "model.rnet"))


def _split_carry(carry_features, prep: Prepared):
    if carry_features is None:
        return None, None
    if prep.aug is None:
        return carry_features, None
    m_test = prep.test.shape[-1]
    return carry_features[..., :m_test], carry_features[..., m_test:]


def run_experiment(cfg, out_dir) -> dict:
    """Construct, evaluate, and write one experiment's artifacts.

    Returns the accuracy.csv rows as a dict. Deterministic for a fixed
    config: every random draw derives from cfg.seed (test data uses
    seed+1, filter banks seed+2).
    """
    prep = _prepare(cfg)
    carry = prep.test
    if prep.aug is not None:
        carry = np.concatenate([prep.test, prep.aug], axis=-1)
    construct = _CONSTRUCT[prep.model_kind]
    model = construct(prep.train, Partition(prep.labels), cfg.layers, cfg.eta,
                      cfg.eps, lam=cfg.lam, use_labels=True,
                      keep_layers=cfg.save_model, carry=carry)
    F_test, F_aug = _split_carry(model.carry_features, prep)
    rows = _metric_rows(cfg, prep, model.features, F_test, F_aug)
    _emit_artifacts(cfg, prep, model, model.features, F_test, rows, out_dir)
    return dict(rows)


def eval_experiment(cfg, archive_path, out_dir, augmented: bool = False) -> dict:
    """Re-evaluate an archived model on the experiment's data.

    Features come from forwarding (estimated membership at every layer).
    ``augmented`` adds the augmented test stack and its accuracy row.
    """
    prep = _prepare(cfg, want_aug=augmented)
    model = load_model(archive_path)
    _check_model_matches(model, prep, archive_path)
    F_train = _forward(model, prep.train)
    F_test = _forward(model, prep.test) if prep.test is not None else None
    F_aug = _forward(model, prep.aug) if (augmented and prep.aug is not None) else None
    rows = _metric_rows(cfg, prep, F_train, F_test, F_aug)
    _emit_artifacts(cfg, prep, model, F_train, F_test, rows, out_dir)
    return dict(rows)


def export_kernels(archive_path, out_dir) -> list:
    """Write the layer-0 convolution kernels of a spectral archive as CSVs."""
    model = load_model(archive_path)
    if isinstance(model, VectorReduNet):
        raise ConfigError("vector archives store no convolution kernels")
    if not model.layers:
        raise DataError(f"{archive_path}: archive has no stored layers")
    layer = model.layers[0]
    if isinstance(model, Shift1DReduNet):
        extract = kernel_extract
        names = [f"t{t}" for t in range(model.T)]
    else:
        extract = kernel_extract_2d
        names = [f"p{p}q{q}" for p in range(model.H) for q in range(model.W)]
    os.makedirs(out_dir, exist_ok=True)
    header = ["out_channel", "in_channel"] + names

    def rows_of(kern):
        C = kern.shape[0]
        return [(a, b) + tuple(kern[a, b].ravel())
                for a in range(C) for b in range(C)]

    paths = []
    path = os.path.join(out_dir, "kernel_expand.csv")
    emit_csv(rows_of(extract(layer, "expand")), path, header)
    paths.append(path)
    for j in range(model.k):
        path = os.path.join(out_dir, f"kernel_compress_class{j}.csv")
        emit_csv(rows_of(extract(layer, "compress", class_index=j)), path, header)
        paths.append(path)
    return paths
