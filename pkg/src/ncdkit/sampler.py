"""Seeded joint-batch construction for the training loop.

Sampling rules enforced here, which the losses assume:
  - the unlabeled half of the batch has 10*U instances (configurable);
  - category-contrast positives share the query's labeled class, negatives
    come from other labeled classes or the unlabeled pool;
  - instance-contrast negatives come only from the labeled pool;
  - unlabeled examples are label-stripped before any sampling decision, so
    hidden ground-truth ids cannot leak into training.

Index convention inside a JointBatch: combined indices [0, B_l) refer to
the labeled list and [B_l, B_l + B_u) to the unlabeled list, in order.
"""

import warnings
from dataclasses import dataclass, replace

import numpy as np

from ncdkit.core import DatasetSpec, Example, Hyperparams, InputError, one_hot


@dataclass
class JointBatch:
    labeled: list          # [(Example, one-hot target over L)]
    unlabeled: list        # [Example], label-stripped
    unlabeled_augmented: np.ndarray  # (B_u, input_dim), index-aligned with unlabeled
    contrast_category: list  # [(query idx, positive idx, [negative combined idx])]
    contrast_instance: list  # [(query idx into unlabeled, [negative idx into labeled])]

    @property
    def n_labeled(self):
        return len(self.labeled)

    @property
    def n_unlabeled(self):
        return len(self.unlabeled)

    def labeled_features(self):
        return np.stack([ex.flat_features() for ex, _ in self.labeled])

    def labeled_targets(self):
        return np.stack([t for _, t in self.labeled])

    def unlabeled_features(self):
        return np.stack([ex.flat_features() for ex in self.unlabeled])


def strip_hidden_labels(examples):
    """Label-stripped views of unlabeled examples (labeled pass through)."""
    return [replace(ex, label=None) if not ex.is_labeled else ex for ex in examples]


def augment(features, rng, strength):
    """Additive Gaussian jitter (sigma = strength * feature std) plus random
    coordinate dropout at rate 0.1; strength 0 returns the input unchanged."""
    if strength < 0:
        raise InputError(f"augment strength must be >= 0, got {strength}")
    features = np.asarray(features, dtype=np.float64)
    if strength == 0:
        return features.copy()
    sigma = strength * features.std()
    out = features + rng.normal(0.0, sigma if sigma > 0 else 0.0, size=features.shape)
    out[rng.random(features.shape) < 0.1] = 0.0
    return out


def make_joint_batch(examples, spec: DatasetSpec, hyper: Hyperparams, rng,
                     labeled_batch_size=0, cross_view_positives=False) -> JointBatch:
    """Build one training batch from the train split; deterministic per rng state."""
    labeled_pool = [ex for ex in examples if ex.is_labeled]
    unlabeled_pool = strip_hidden_labels([ex for ex in examples if not ex.is_labeled])
    if not labeled_pool or not unlabeled_pool:
        raise InputError("training data must contain labeled and unlabeled examples")

    class_counts = {}
    for ex in labeled_pool:
        class_counts[ex.label] = class_counts.get(ex.label, 0) + 1
    singletons = sorted(c for c, n in class_counts.items() if n < 2)
    if singletons:
        warnings.warn(
            f"labeled classes {singletons} have a single example; "
            "excluded from category-contrast queries")

    b_u = hyper.unlabeled_batch(spec)
    b_l = labeled_batch_size if labeled_batch_size > 0 else b_u

    uidx = rng.choice(len(unlabeled_pool), size=b_u, replace=len(unlabeled_pool) < b_u)
    lidx = rng.choice(len(labeled_pool), size=b_l, replace=len(labeled_pool) < b_l)
    unlabeled = [unlabeled_pool[i] for i in uidx]
    labeled = [(labeled_pool[i], one_hot(labeled_pool[i].label, spec.L)) for i in lidx]

    augmented = np.stack([
        augment(ex.flat_features(), rng, hyper.augment_strength) for ex in unlabeled
    ])

    # batch-position lookup per labeled class
    by_class = {}
    for pos, (ex, _) in enumerate(labeled):
        by_class.setdefault(ex.label, []).append(pos)

    contrast_category = []
    all_unlabeled = np.arange(b_l, b_l + b_u)
    for q, (ex, _) in enumerate(labeled):
        mates = [p for p in by_class[ex.label] if p != q]
        if not mates:
            continue
        if cross_view_positives:
            other_view = [p for p in mates if labeled[p][0].view != ex.view]
            if other_view:
                mates = other_view
        positive = int(mates[rng.integers(len(mates))])
        eligible = np.concatenate([
            np.array([p for p in range(b_l) if labeled[p][0].label != ex.label], dtype=int),
            all_unlabeled,
        ])
        negs = rng.choice(eligible, size=hyper.n_negatives,
                          replace=eligible.size < hyper.n_negatives)
        contrast_category.append((q, positive, [int(n) for n in negs]))

    contrast_instance = []
    for q in range(b_u):
        negs = rng.choice(b_l, size=hyper.n_negatives, replace=b_l < hyper.n_negatives)
        contrast_instance.append((q, [int(n) for n in negs]))

    return JointBatch(labeled=labeled, unlabeled=unlabeled,
                      unlabeled_augmented=augmented,
                      contrast_category=contrast_category,
                      contrast_instance=contrast_instance)
