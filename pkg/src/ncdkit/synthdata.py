"""Seeded synthetic multi-view datasets with known latent structure.

Classes are Gaussian blobs around centroids placed on rotated scaled basis
directions (pairwise distance separation*sqrt(2)); each view applies its
own orthogonal transform + shift to the canonical features, so per-view
class structure is preserved while cross-view generalization requires
view-invariant features. View 0 is the identity (canonical) view.

File format: CSV with header status,label,view,f0..f{n-1} (n = seq_len *
feature_dim, train rows first), 17-significant-digit decimals for exact
round trips, plus a JSON provenance sidecar (config, seed, split sizes and
the nearest-centroid oracle score) at <path>.provenance.json.
"""

import csv
import json
import os
from dataclasses import dataclass, field

import numpy as np

from ncdkit.core import DatasetSpec, Example, InputError


@dataclass
class GeneratorConfig:
    spec: DatasetSpec
    n_per_class: int = 200
    class_separation: float = 6.0
    view_shift_scale: float = 1.0
    labeled_views: tuple = ()    # () = all views populated
    unlabeled_views: tuple = ()
    train_hidden_views_labeled: tuple = ()    # obfuscation applied to the train split
    train_hidden_views_unlabeled: tuple = ()
    holdout_fraction: float = 0.25

    def __post_init__(self):
        if self.n_per_class < 2:
            raise InputError("n_per_class must be >= 2 to allow a train/test split")
        if self.class_separation < 0:
            raise InputError("class_separation must be >= 0")
        if not 0 < self.holdout_fraction < 1:
            raise InputError("holdout_fraction must be in (0, 1)")
        for name in ("labeled_views", "unlabeled_views",
                     "train_hidden_views_labeled", "train_hidden_views_unlabeled"):
            views = tuple(int(v) for v in getattr(self, name))
            if any(v < 0 or v >= self.spec.K for v in views):
                raise InputError(f"{name} contains a view id outside [0, {self.spec.K})")
            setattr(self, name, views)

    def views_for(self, split):
        views = self.labeled_views if split == "labeled" else self.unlabeled_views
        return views if views else tuple(range(self.spec.K))

    def as_dict(self):
        return {
            "spec": {"L": self.spec.L, "U": self.spec.U, "K": self.spec.K,
                     "feature_dim": self.spec.feature_dim, "seq_len": self.spec.seq_len},
            "n_per_class": self.n_per_class,
            "class_separation": self.class_separation,
            "view_shift_scale": self.view_shift_scale,
            "labeled_views": list(self.labeled_views),
            "unlabeled_views": list(self.unlabeled_views),
            "train_hidden_views_labeled": list(self.train_hidden_views_labeled),
            "train_hidden_views_unlabeled": list(self.train_hidden_views_unlabeled),
            "holdout_fraction": self.holdout_fraction,
        }

    @staticmethod
    def from_dict(d):
        d = dict(d)
        spec = DatasetSpec(**d.pop("spec"))
        for key in ("labeled_views", "unlabeled_views",
                    "train_hidden_views_labeled", "train_hidden_views_unlabeled"):
            if key in d:
                d[key] = tuple(d[key])
        return GeneratorConfig(spec=spec, **d)


@dataclass
class ViewTransform:
    matrix: np.ndarray  # orthogonal (d, d)
    shift: np.ndarray   # (d,)

    def apply(self, x):
        return x @ self.matrix.T + self.shift

    def invert(self, x):
        return (x - self.shift) @ self.matrix


@dataclass
class Dataset:
    spec: DatasetSpec
    train: list = field(default_factory=list)
    test: list = field(default_factory=list)
    provenance: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.train) + len(self.test)


def _orthogonal(rng, d):
    q, r = np.linalg.qr(rng.standard_normal((d, d)))
    return q * np.sign(np.diag(r))  # sign fix makes the factorization unique


def make_view_transforms(config: GeneratorConfig, seed):
    """Per-view affine maps, derived deterministically from the seed; view 0
    is the identity."""
    d = config.spec.feature_dim
    rng = np.random.default_rng([int(seed), 353])
    transforms = [ViewTransform(np.eye(d), np.zeros(d))]
    for _ in range(1, config.spec.K):
        transforms.append(ViewTransform(
            _orthogonal(rng, d), rng.normal(0.0, config.view_shift_scale, d)))
    return transforms


def class_centroids(config: GeneratorConfig, seed):
    """Rotated scaled-basis centroid layout; needs feature_dim >= L + U."""
    spec = config.spec
    n = spec.n_classes
    if spec.feature_dim < n:
        raise InputError(
            f"centroid placement needs feature_dim >= L+U: "
            f"got {spec.feature_dim}, minimum required dimension is {n}")
    rng = np.random.default_rng([int(seed), 769])
    q = _orthogonal(rng, spec.feature_dim)
    return config.class_separation * q[:, :n].T  # (n_classes, d)


def generate(config: GeneratorConfig, seed) -> Dataset:
    """Sample the dataset: class c view v produces T_v(mu_c + eps), eps ~ N(0, I)."""
    spec = config.spec
    centroids = class_centroids(config, seed)
    transforms = make_view_transforms(config, seed)
    rng = np.random.default_rng([int(seed), 101])

    train, test = [], []
    for c in range(spec.n_classes):
        split = "labeled" if c < spec.L else "unlabeled"
        views = config.views_for(split)
        n = config.n_per_class
        feats = centroids[c] + rng.standard_normal((n, spec.seq_len, spec.feature_dim))
        view_ids = np.array([views[i % len(views)] for i in range(n)])
        for i in range(n):
            feats[i] = transforms[view_ids[i]].apply(feats[i])
        order = rng.permutation(n)
        n_test = max(1, int(round(n * config.holdout_fraction)))
        for rank, i in enumerate(order):
            ex = Example(features=feats[i].reshape(spec.seq_len, spec.feature_dim),
                         status=split, label=c, view=int(view_ids[i]))
            (test if rank < n_test else train).append(ex)

    provenance = {"config": config.as_dict(), "seed": int(seed)}
    dataset = Dataset(spec=spec, train=train, test=test, provenance=provenance)
    provenance["oracle_accuracy"] = nearest_centroid_oracle(dataset, centroids, transforms)
    provenance["n_train"] = len(train)
    provenance["n_test"] = len(test)

    if config.train_hidden_views_labeled or config.train_hidden_views_unlabeled:
        if config.train_hidden_views_labeled:
            dataset = obfuscate_views(dataset, "labeled", config.train_hidden_views_labeled)
        if config.train_hidden_views_unlabeled:
            dataset = obfuscate_views(dataset, "unlabeled", config.train_hidden_views_unlabeled)
    return dataset


def nearest_centroid_oracle(dataset: Dataset, centroids, transforms):
    """Test accuracy of the ground-truth-aware nearest-centroid classifier,
    computed in canonical space via the exact inverse view transforms."""
    if not dataset.test:
        return 0.0
    hits = 0
    for ex in dataset.test:
        canon = transforms[ex.view].invert(ex.flat_features().reshape(
            dataset.spec.seq_len, dataset.spec.feature_dim))
        mean_feat = canon.mean(axis=0)
        pred = int(np.argmin(((centroids - mean_feat) ** 2).sum(axis=1)))
        hits += pred == ex.label
    return hits / len(dataset.test)


def obfuscate_views(dataset: Dataset, split, hidden_views) -> Dataset:
    """Drop training examples of one split whose view is hidden; test untouched."""
    if split not in ("labeled", "unlabeled"):
        raise InputError(f"split must be 'labeled' or 'unlabeled', got {split!r}")
    hidden = set(int(v) for v in hidden_views)
    if any(v < 0 or v >= dataset.spec.K for v in hidden):
        raise InputError(f"hidden view ids must lie in [0, {dataset.spec.K})")
    keep = [ex for ex in dataset.train
            if ex.status != split or ex.view not in hidden]
    kept_classes = {ex.label for ex in keep}
    lost = {ex.label for ex in dataset.train} - kept_classes
    if lost:
        raise InputError(f"obfuscation would empty classes {sorted(lost)}")
    provenance = dict(dataset.provenance)
    note = provenance.setdefault("obfuscated", [])
    note.append({"split": split, "hidden_views": sorted(hidden)})
    provenance["n_train"] = len(keep)
    return Dataset(spec=dataset.spec, train=keep, test=list(dataset.test),
                   provenance=provenance)


def _sidecar(path):
    return str(path) + ".provenance.json"


def save(dataset: Dataset, path):
    """Write the CSV (train rows then test rows) and the provenance sidecar."""
    n_feat = dataset.spec.input_dim
    header = ["status", "label", "view", *[f"f{i}" for i in range(n_feat)]]
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for ex in list(dataset.train) + list(dataset.test):
            writer.writerow([ex.status, ex.label, ex.view,
                             *[f"{v:.17g}" for v in ex.flat_features()]])
    provenance = dict(dataset.provenance)
    provenance.setdefault("n_train", len(dataset.train))
    provenance.setdefault("n_test", len(dataset.test))
    with open(_sidecar(path), "w", encoding="utf-8") as fh:
        json.dump(provenance, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load(path) -> Dataset:
    """Read a dataset written by save(); errors name the offending line."""
    sidecar = _sidecar(path)
    if not os.path.exists(sidecar):
        raise InputError(f"missing provenance sidecar {sidecar}")
    with open(sidecar, "r", encoding="utf-8") as fh:
        provenance = json.load(fh)
    config = GeneratorConfig.from_dict(provenance["config"])
    spec = config.spec
    n_feat = spec.input_dim
    expected_header = ["status", "label", "view", *[f"f{i}" for i in range(n_feat)]]

    examples = []
    with open(path, "r", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise InputError(f"{path}: line 1: empty file") from None
        if header != expected_header:
            raise InputError(f"{path}: line 1: header mismatch, expected {expected_header[:4]}...")
        for lineno, row in enumerate(reader, start=2):
            if len(row) != 3 + n_feat:
                raise InputError(f"{path}: line {lineno}: expected {3 + n_feat} fields, got {len(row)}")
            status, label, view = row[0], row[1], row[2]
            try:
                feats = np.array([float(v) for v in row[3:]], dtype=np.float64)
                examples.append(Example(
                    features=feats.reshape(spec.seq_len, spec.feature_dim),
                    status=status, label=int(label), view=int(view)))
            except ValueError as exc:
                raise InputError(f"{path}: line {lineno}: {exc}") from None

    n_train = provenance.get("n_train")
    if n_train is None or n_train > len(examples):
        raise InputError(f"{sidecar}: n_train missing or larger than row count")
    return Dataset(spec=spec, train=examples[:n_train], test=examples[n_train:],
                   provenance=provenance)
