"""The differentiable network and its parameter plumbing.

Architecture: a dense ReLU encoder over flattened features, a dense ReLU
embedding layer producing z, a linear head of L+U logits whose first L
columns classify labeled categories and last U columns carry the novel
heads, and a small dense discriminator mapping z to K view logits.

Parameters live in an ordered name -> float64 array mapping so gradient
bundles, optimizer state and checkpoints all share one layout.
"""

import hashlib
import json
from dataclasses import dataclass

import numpy as np

from ncdkit import autodiff as ad
from ncdkit.core import DatasetSpec, ForwardOutput, InputError, NumericError, sharpen

CHECKPOINT_MAGIC = "ncdkit-checkpoint v1"


@dataclass
class ModelConfig:
    encoder_widths: tuple = (64,)
    embed_dim: int = 32
    disc_widths: tuple = (16,)

    def __post_init__(self):
        self.encoder_widths = tuple(int(w) for w in self.encoder_widths)
        self.disc_widths = tuple(int(w) for w in self.disc_widths)
        if not self.encoder_widths:
            raise InputError("encoder_widths must be non-empty")
        if any(w < 1 for w in self.encoder_widths) or self.embed_dim < 1:
            raise InputError("layer widths must be >= 1")
        if any(w < 1 for w in self.disc_widths):
            raise InputError("discriminator widths must be >= 1")


@dataclass
class ModelParams:
    spec: DatasetSpec
    config: ModelConfig
    tensors: dict  # name -> np.ndarray, insertion-ordered

    def copy(self):
        return ModelParams(self.spec, self.config, {k: v.copy() for k, v in self.tensors.items()})

    def names(self):
        return list(self.tensors.keys())

    def n_parameters(self):
        return sum(v.size for v in self.tensors.values())


ENCODER_GROUPS = ("encoder", "embedding", "head")
DISC_GROUP = "disc"


def group_of(name):
    return name.split(".", 1)[0]


def encoder_names(params):
    return [n for n in params.tensors if group_of(n) in ENCODER_GROUPS]


def disc_names(params):
    return [n for n in params.tensors if group_of(n) == DISC_GROUP]


def _layer_sizes(spec: DatasetSpec, config: ModelConfig):
    enc = [spec.input_dim, *config.encoder_widths]
    disc = [config.embed_dim, *config.disc_widths, spec.K]
    return enc, disc


def init_params(spec: DatasetSpec, config: ModelConfig, seed: int) -> ModelParams:
    """Zero-mean weights scaled by 1/sqrt(fan_in), zero biases, seeded."""
    rng = np.random.default_rng(seed)
    tensors = {}

    def dense(name, fan_in, fan_out):
        tensors[f"{name}.W"] = rng.standard_normal((fan_in, fan_out)) / np.sqrt(fan_in)
        tensors[f"{name}.b"] = np.zeros(fan_out)

    enc_sizes, disc_sizes = _layer_sizes(spec, config)
    for i in range(len(enc_sizes) - 1):
        dense(f"encoder.{i}", enc_sizes[i], enc_sizes[i + 1])
    dense("embedding", enc_sizes[-1], config.embed_dim)
    dense("head", config.embed_dim, spec.n_classes)
    for i in range(len(disc_sizes) - 1):
        dense(f"disc.{i}", disc_sizes[i], disc_sizes[i + 1])
    return ModelParams(spec, config, tensors)


def as_tensors(params: ModelParams, trainable=("encoder", "embedding", "head", "disc")):
    """Wrap parameter arrays as graph leaves; groups not listed become constants."""
    return {
        name: (ad.param(arr) if group_of(name) in trainable else ad.constant(arr))
        for name, arr in params.tensors.items()
    }


def encode(pt, x):
    """Encoder stack + embedding layer; returns the embedding tensor z."""
    h = ad.wrap(x)
    i = 0
    while f"encoder.{i}.W" in pt:
        h = ad.relu(ad.linear(h, pt[f"encoder.{i}.W"], pt[f"encoder.{i}.b"]))
        i += 1
    return ad.relu(ad.linear(h, pt["embedding.W"], pt["embedding.b"]))


def head_logits(pt, z):
    return ad.linear(z, pt["head.W"], pt["head.b"])


def disc_logits(pt, z):
    h = ad.wrap(z)
    i = 0
    while f"disc.{i+1}.W" in pt:  # all but the final layer get ReLU
        h = ad.relu(ad.linear(h, pt[f"disc.{i}.W"], pt[f"disc.{i}.b"]))
        i += 1
    return ad.linear(h, pt[f"disc.{i}.W"], pt[f"disc.{i}.b"])


def _check_features(spec, x):
    """Normalize features to (B, input_dim); accepts one instance or a batch."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1 and x.size == spec.input_dim:
        flat = x.reshape(1, spec.input_dim)
    elif x.ndim == 2 and x.shape == (spec.seq_len, spec.feature_dim) and spec.seq_len > 1:
        flat = x.reshape(1, spec.input_dim)
    elif x.ndim == 2 and x.shape[1] == spec.input_dim:
        flat = x
    else:
        raise InputError(
            f"feature shape mismatch: expected {spec.input_dim} values per instance "
            f"(seq_len {spec.seq_len} x feature_dim {spec.feature_dim}), got {x.shape}"
        )
    return flat


def forward_batch(params: ModelParams, x, sr: float, sharpen_mode="log"):
    """Run the network on a (B, input_dim) batch; returns numpy arrays."""
    spec = params.spec
    flat = _check_features(spec, x)
    pt = {name: ad.constant(arr) for name, arr in params.tensors.items()}
    z = encode(pt, flat)
    logits = head_logits(pt, z)
    y_hat = ad.softmax_rows(logits).data
    if sharpen_mode == "log":
        y_tilde = ad.softmax_rows(ad.slice_cols(logits, spec.L, spec.n_classes), sr).data
    elif sharpen_mode == "prob":
        y_tilde = np.vstack([sharpen(row[spec.L:], sr, mode="prob") for row in y_hat])
    else:
        raise InputError(f"unknown sharpen mode {sharpen_mode!r}")
    return {"z": z.data, "logits": logits.data, "y_hat": y_hat, "y_tilde": y_tilde}


def forward(params: ModelParams, features, hyper, sharpen_mode="log") -> ForwardOutput:
    """Single-instance forward pass."""
    out = forward_batch(params, features, hyper.sr, sharpen_mode)
    return ForwardOutput(z=out["z"][0], logits=out["logits"][0],
                         y_hat=out["y_hat"][0], y_tilde=out["y_tilde"][0])


def forward_discriminator(params: ModelParams, z):
    """View-membership probabilities for embeddings z (one row per instance)."""
    z = np.atleast_2d(np.asarray(z, dtype=np.float64))
    if z.shape[1] != params.config.embed_dim:
        raise InputError(f"embedding width mismatch: expected {params.config.embed_dim}, got {z.shape[1]}")
    pt = {name: ad.constant(arr) for name, arr in params.tensors.items()}
    probs = ad.softmax_rows(disc_logits(pt, z)).data
    return probs[0] if probs.shape[0] == 1 and np.asarray(z).ndim == 1 else probs


def backward(pt, loss) -> dict:
    """Gradient bundle for a scalar loss node built over `as_tensors` leaves.

    Entries for constant (non-trainable) groups come back as exact zeros.
    """
    ad.backward(loss)
    grads = {name: ad.grad_or_zero(t) for name, t in pt.items()}
    for name, g in grads.items():
        if not np.all(np.isfinite(g)):
            raise NumericError(f"non-finite gradient for parameter {name}")
    return grads


def save_checkpoint(path, params: ModelParams, meta: dict, extras: dict = None):
    """Self-describing text checkpoint: key -> shape -> row-major values."""
    lines = [CHECKPOINT_MAGIC]
    lines.append("meta " + json.dumps(_full_meta(params, meta), sort_keys=True))
    items = list(params.tensors.items()) + sorted((extras or {}).items())
    for name, arr in items:
        arr = np.asarray(arr, dtype=np.float64)
        dims = " ".join(str(d) for d in arr.shape) or "scalar"
        lines.append(f"tensor {name} {dims}")
        rows = arr.reshape(arr.shape[0], -1) if arr.ndim > 1 else arr.reshape(1, -1)
        for row in rows:
            lines.append(" ".join(f"{v:.17g}" for v in row))
    lines.append("end")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def _full_meta(params, meta):
    out = dict(meta)
    out["spec"] = {"L": params.spec.L, "U": params.spec.U, "K": params.spec.K,
                   "feature_dim": params.spec.feature_dim, "seq_len": params.spec.seq_len}
    out["model"] = {"encoder_widths": list(params.config.encoder_widths),
                    "embed_dim": params.config.embed_dim,
                    "disc_widths": list(params.config.disc_widths)}
    return out


def load_checkpoint(path):
    """Parse a checkpoint; returns (ModelParams, meta, extras).

    Rejects shape mismatches between declared dims and parsed values, and
    any layout drift from what the meta's spec/model config predicts.
    """
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0] != CHECKPOINT_MAGIC:
        raise InputError(f"{path}: not a ncdkit checkpoint (bad or missing magic line)")
    if not lines[1].startswith("meta "):
        raise InputError(f"{path}: line 2: expected meta line")
    meta = json.loads(lines[1][5:])
    spec = DatasetSpec(**meta["spec"])
    config = ModelConfig(encoder_widths=tuple(meta["model"]["encoder_widths"]),
                         embed_dim=meta["model"]["embed_dim"],
                         disc_widths=tuple(meta["model"]["disc_widths"]))

    tensors = {}
    i = 2
    while i < len(lines):
        line = lines[i]
        if line == "end":
            break
        parts = line.split()
        if not parts or parts[0] != "tensor":
            raise InputError(f"{path}: line {i+1}: expected 'tensor' or 'end', got {line!r}")
        name = parts[1]
        shape = () if parts[2:] == ["scalar"] else tuple(int(d) for d in parts[2:])
        n_rows = shape[0] if len(shape) > 1 else 1
        row_len = int(np.prod(shape[1:], dtype=int)) if len(shape) > 1 else (shape[0] if shape else 1)
        vals = []
        for r in range(n_rows):
            i += 1
            if i >= len(lines):
                raise InputError(f"{path}: line {i+1}: truncated tensor {name}")
            row = [float(v) for v in lines[i].split()]
            if len(row) != row_len:
                raise InputError(f"{path}: line {i+1}: tensor {name} expected {row_len} values, got {len(row)}")
            vals.append(row)
        tensors[name] = np.array(vals, dtype=np.float64).reshape(shape)
        i += 1
    else:
        raise InputError(f"{path}: missing 'end' line (truncated file)")

    reference = init_params(spec, config, seed=0)
    model_tensors, extras = {}, {}
    for name, arr in tensors.items():
        if name in reference.tensors:
            if arr.shape != reference.tensors[name].shape:
                raise InputError(
                    f"{path}: tensor {name} shape {arr.shape} does not match "
                    f"expected {reference.tensors[name].shape}")
            model_tensors[name] = arr
        else:
            extras[name] = arr
    missing = set(reference.tensors) - set(model_tensors)
    if missing:
        raise InputError(f"{path}: checkpoint missing tensors: {sorted(missing)}")
    ordered = {name: model_tensors[name] for name in reference.tensors}
    return ModelParams(spec, config, ordered), meta, extras


def params_digest(params: ModelParams) -> str:
    h = hashlib.sha256()
    for name, arr in params.tensors.items():
        h.update(name.encode())
        h.update(np.ascontiguousarray(arr).tobytes())
    return h.hexdigest()
