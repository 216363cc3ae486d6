"""Quantitative evaluation: labeled accuracy, Hungarian-matched clustering
accuracy, silhouette coefficient, confusion counts and embedding export.
"""

import csv
import warnings
from dataclasses import dataclass, field

import numpy as np

from ncdkit.core import DatasetSpec, InputError
from ncdkit.model import ModelParams, forward_batch


def hungarian_assignment(cost):
    """Minimum-cost perfect matching on a square cost matrix.

    Potentials-based O(n^3) algorithm. Returns (perm, total) where perm[i]
    is the column assigned to row i.
    """
    cost = np.asarray(cost, dtype=np.float64)
    if cost.ndim != 2 or cost.shape[0] != cost.shape[1]:
        raise InputError(f"cost matrix must be square, got shape {cost.shape}")
    if not np.all(np.isfinite(cost)):
        raise InputError("cost matrix must be finite")
    n = cost.shape[0]
    INF = np.inf
    u = np.zeros(n + 1)
    v = np.zeros(n + 1)
    p = np.zeros(n + 1, dtype=int)   # p[j]: row matched to column j (1-based, 0 = free)
    way = np.zeros(n + 1, dtype=int)
    for i in range(1, n + 1):
        p[0] = i
        j0 = 0
        minv = np.full(n + 1, INF)
        used = np.zeros(n + 1, dtype=bool)
        while True:
            used[j0] = True
            i0 = p[j0]
            delta = INF
            j1 = 0
            for j in range(1, n + 1):
                if used[j]:
                    continue
                cur = cost[i0 - 1, j - 1] - u[i0] - v[j]
                if cur < minv[j]:
                    minv[j] = cur
                    way[j] = j0
                if minv[j] < delta:
                    delta = minv[j]
                    j1 = j
            for j in range(n + 1):
                if used[j]:
                    u[p[j]] += delta
                    v[j] -= delta
                else:
                    minv[j] -= delta
            j0 = j1
            if p[j0] == 0:
                break
        while j0 != 0:
            j1 = way[j0]
            p[j0] = p[j1]
            j0 = j1
    perm = np.zeros(n, dtype=int)
    for j in range(1, n + 1):
        perm[p[j] - 1] = j - 1
    total = float(cost[np.arange(n), perm].sum())
    # optimality sanity bound: never worse than leaving rows in place
    assert total <= float(np.trace(cost)) + 1e-9
    return perm, total


def acc(predictions, truths, spec: DatasetSpec):
    """Average clustering accuracy: the best matched fraction over all
    bijections between predicted novel heads and ground-truth novel classes.

    Ids must lie in [L, L+U). Returns (fraction, perm) with perm[j] = the
    ground-truth novel class index matched to predicted head j (0-based
    within the novel block).
    """
    predictions = np.asarray(predictions, dtype=int).reshape(-1)
    truths = np.asarray(truths, dtype=int).reshape(-1)
    if predictions.size != truths.size:
        raise InputError("predictions and truths must have equal length")
    if predictions.size == 0:
        raise InputError("acc requires at least one instance")
    L, U = spec.L, spec.U
    for name, ids in (("prediction", predictions), ("truth", truths)):
        if ids.min() < L or ids.max() >= L + U:
            raise InputError(f"{name} ids must lie in [{L}, {L + U})")
    counts = np.zeros((U, U))
    for pred, true in zip(predictions - L, truths - L):
        counts[pred, true] += 1
    perm, _ = hungarian_assignment(-counts)
    matched = counts[np.arange(U), perm].sum()
    return float(matched / predictions.size), perm


def acr(predictions, truths, L):
    """Top-1 accuracy over labeled test instances."""
    predictions = np.asarray(predictions, dtype=int).reshape(-1)
    truths = np.asarray(truths, dtype=int).reshape(-1)
    if predictions.size == 0:
        raise InputError("acr requires at least one instance")
    if predictions.size != truths.size:
        raise InputError("predictions and truths must have equal length")
    if truths.min() < 0 or truths.max() >= L:
        raise InputError(f"labeled truth ids must lie in [0, {L})")
    return float((predictions == truths).mean())


def silhouette(embeddings, labels):
    """Mean silhouette score (b - a) / max(a, b) on L2-normalized embeddings
    with Euclidean distance; singleton-class points score 0 with a warning."""
    z = np.asarray(embeddings, dtype=np.float64)
    labels = np.asarray(labels).reshape(-1)
    if z.ndim != 2 or z.shape[0] != labels.size:
        raise InputError("embeddings must be (n, d) with one label per row")
    classes = np.unique(labels)
    if classes.size < 2:
        raise InputError("silhouette needs at least 2 classes")
    norms = np.linalg.norm(z, axis=1, keepdims=True)
    zn = z / np.maximum(norms, 1e-12)
    d2 = np.maximum(
        (zn * zn).sum(1)[:, None] + (zn * zn).sum(1)[None, :] - 2.0 * zn @ zn.T, 0.0)
    dist = np.sqrt(d2)

    masks = {c: labels == c for c in classes}
    sizes = {c: int(masks[c].sum()) for c in classes}
    if any(n == 1 for n in sizes.values()):
        warnings.warn("singleton class in silhouette input; its points score 0")

    scores = np.zeros(labels.size)
    for i in range(labels.size):
        own = labels[i]
        if sizes[own] == 1:
            continue
        a = dist[i, masks[own]].sum() / (sizes[own] - 1)
        b = min(dist[i, masks[c]].mean() for c in classes if c != own)
        m = max(a, b)
        scores[i] = 0.0 if m == 0 else (b - a) / m
    return float(scores.mean())


def confusion_matrix(truths, predictions, n_classes):
    counts = np.zeros((n_classes, n_classes), dtype=int)
    for t, p in zip(truths, predictions):
        counts[t, p] += 1
    return counts


@dataclass
class EvalReport:
    acr: float
    acc: float
    permutation: list  # perm[j]: ground-truth novel class matched to head j
    silhouette: float
    confusion: list    # (L+U) x (L+U) counts, rows true, cols full-head argmax
    n_labeled_test: int = 0
    n_unlabeled_test: int = 0

    def as_dict(self):
        return {"acr": self.acr, "acc": self.acc, "permutation": self.permutation,
                "silhouette": self.silhouette, "confusion": self.confusion,
                "n_labeled_test": self.n_labeled_test,
                "n_unlabeled_test": self.n_unlabeled_test}


def predictions_of(params: ModelParams, examples, sr, sharpen_mode="log"):
    """Forward the examples and split out per-head argmax predictions."""
    spec = params.spec
    feats = np.stack([ex.flat_features() for ex in examples])
    out = forward_batch(params, feats, sr, sharpen_mode)
    labeled_pred = out["y_hat"][:, :spec.L].argmax(axis=1)
    novel_pred = spec.L + out["y_hat"][:, spec.L:].argmax(axis=1)
    full_pred = out["y_hat"].argmax(axis=1)
    return out, labeled_pred, novel_pred, full_pred


def evaluate(params: ModelParams, examples, sr=0.1, sharpen_mode="log") -> EvalReport:
    """Full test-split evaluation: ACR on labeled instances, Hungarian ACC on
    unlabeled ones, silhouette over all embeddings, and raw confusion counts."""
    spec = params.spec
    if not examples:
        raise InputError("evaluate needs at least one example")
    out, labeled_pred, novel_pred, full_pred = predictions_of(params, examples, sr, sharpen_mode)
    is_lab = np.array([ex.is_labeled for ex in examples])
    labels = np.array([ex.label for ex in examples])

    acr_val = acr(labeled_pred[is_lab], labels[is_lab], spec.L) if is_lab.any() else 0.0
    if (~is_lab).any():
        acc_val, perm = acc(novel_pred[~is_lab], labels[~is_lab], spec)
    else:
        acc_val, perm = 0.0, np.arange(spec.U)
    sil = silhouette(out["z"], labels) if np.unique(labels).size >= 2 else 0.0
    conf = confusion_matrix(labels, full_pred, spec.n_classes)
    return EvalReport(acr=acr_val, acc=acc_val, permutation=[int(j) for j in perm],
                      silhouette=sil, confusion=conf.tolist(),
                      n_labeled_test=int(is_lab.sum()),
                      n_unlabeled_test=int((~is_lab).sum()))


def export_embeddings(params: ModelParams, examples, path, sr=0.1, sharpen_mode="log"):
    """CSV of embeddings: status,label,view,z0..z{d-1}, one row per example."""
    out, *_ = predictions_of(params, examples, sr, sharpen_mode)
    z = out["z"]
    header = ["status", "label", "view", *[f"z{i}" for i in range(z.shape[1])]]
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for ex, row in zip(examples, z):
            writer.writerow([ex.status, ex.label, ex.view, *[f"{v:.17g}" for v in row]])


def load_embeddings(path):
    """Round-trip reader for export_embeddings output."""
    with open(path, "r", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header[:3] != ["status", "label", "view"]:
            raise InputError(f"{path}: unexpected embedding header")
        rows = list(reader)
    statuses = [r[0] for r in rows]
    labels = np.array([int(r[1]) for r in rows])
    views = np.array([int(r[2]) for r in rows])
    z = np.array([[float(v) for v in r[3:]] for r in rows])
    return statuses, labels, views, z
