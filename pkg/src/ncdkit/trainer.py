"""Single-stage joint optimization with adversarial alternation.

Per step: build a joint batch, compute the enabled losses, and take one
optimizer step on the encoder/embedding/head parameters from the joint
gradient. With adversarial view-invariance enabled, each step first runs
disc_steps_per_enc_step discriminator updates (on detached embeddings),
then the encoder update additionally carries lambda_adv times the
view-confusion term. Weights follow the adaptive schedule at epoch
boundaries. Everything is deterministic per seed: epoch e draws its
batches from a generator seeded by (seed, e).
"""

import json
import os
import time
from dataclasses import dataclass, field

import numpy as np

from ncdkit import autodiff as ad
from ncdkit import losses as L
from ncdkit import model as M
from ncdkit.core import Hyperparams, InputError, NumericError
from ncdkit.evaluation import evaluate
from ncdkit.sampler import make_joint_batch


@dataclass
class TrainConfig:
    epochs: int = 30
    steps_per_epoch: int = 20
    optimizer: str = "adam"       # adam | sgd
    learning_rate: float = 3e-3
    momentum: float = 0.9         # sgd only
    beta1: float = 0.9
    beta2: float = 0.999
    enable_ce: bool = True
    enable_cl: bool = True
    enable_nl: bool = True
    enable_H: bool = True
    enable_var: bool = True
    adversarial: str = "off"      # off | literal | uniform
    lambda_adv: float = 1.0
    disc_steps_per_enc_step: int = 1
    variance_mode: str = "batchwise"
    sharpen_mode: str = "log"
    schedule_mode: str = "adaptive"
    fixed_weights: dict = field(default_factory=dict)
    lambda_max: float = 0.0       # 0 = uncapped, faithful to the published ramp
    cross_view_positives: bool = False
    labeled_batch_size: int = 0   # 0 = match the unlabeled batch
    seed: int = 0
    checkpoint_every: int = 0     # 0 = final checkpoint only
    eval_every: int = 1

    def __post_init__(self):
        if self.epochs < 1:
            raise InputError(f"epochs must be >= 1, got {self.epochs}")
        if self.steps_per_epoch < 1:
            raise InputError("steps_per_epoch must be >= 1")
        if self.learning_rate <= 0:
            raise InputError(f"learning rate must be > 0, got {self.learning_rate}")
        if self.optimizer not in ("adam", "sgd"):
            raise InputError(f"optimizer must be 'adam' or 'sgd', got {self.optimizer!r}")
        if self.adversarial not in ("off", "literal", "uniform"):
            raise InputError(f"adversarial must be off|literal|uniform, got {self.adversarial!r}")
        if self.disc_steps_per_enc_step < 1:
            raise InputError("disc_steps_per_enc_step must be >= 1")


@dataclass
class EpochRecord:
    epoch: int
    losses: dict
    weights: dict
    acr: float
    acc: float
    wall_clock: float

    def as_dict(self):
        return {"epoch": self.epoch, "losses": self.losses, "weights": self.weights,
                "acr": self.acr, "acc": self.acc, "wall_clock": self.wall_clock}


@dataclass
class TrainLog:
    records: list = field(default_factory=list)

    def append(self, record):
        if self.records and record.epoch != self.records[-1].epoch + 1:
            raise InputError("epoch records must be consecutive")
        self.records.append(record)

    def to_jsonl(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            for r in self.records:
                fh.write(json.dumps(r.as_dict(), sort_keys=True) + "\n")

    @staticmethod
    def from_jsonl(path):
        log = TrainLog()
        with open(path, "r", encoding="utf-8") as fh:
            for line in fh:
                d = json.loads(line)
                log.records.append(EpochRecord(**d))
        return log


class Optimizer:
    """Adam (default) or momentum SGD over the name -> array parameter map.

    Per-parameter step counts, so the encoder and discriminator partitions
    can update at different cadences without corrupting bias correction.
    """

    def __init__(self, cfg: TrainConfig):
        self.kind = cfg.optimizer
        self.lr = cfg.learning_rate
        self.momentum = cfg.momentum
        self.beta1, self.beta2 = cfg.beta1, cfg.beta2
        self.eps = 1e-8
        self.m = {}
        self.v = {}
        self.t = {}

    def step(self, params: M.ModelParams, grads: dict, names):
        for name in names:
            g = grads[name]
            if name not in self.m:
                self.m[name] = np.zeros_like(g)
                self.v[name] = np.zeros_like(g)
                self.t[name] = 0
            if self.kind == "sgd":
                self.m[name] = self.momentum * self.m[name] + g
                params.tensors[name] -= self.lr * self.m[name]
                continue
            self.t[name] += 1
            t = self.t[name]
            self.m[name] = self.beta1 * self.m[name] + (1 - self.beta1) * g
            self.v[name] = self.beta2 * self.v[name] + (1 - self.beta2) * g * g
            mhat = self.m[name] / (1 - self.beta1 ** t)
            vhat = self.v[name] / (1 - self.beta2 ** t)
            params.tensors[name] -= self.lr * mhat / (np.sqrt(vhat) + self.eps)

    def state_tensors(self):
        out = {}
        for name in self.m:
            out[f"opt.m.{name}"] = self.m[name]
            out[f"opt.v.{name}"] = self.v[name]
            out[f"opt.t.{name}"] = np.array([float(self.t.get(name, 0))])
        return out

    def load_state(self, extras):
        for key, arr in extras.items():
            if key.startswith("opt.m."):
                self.m[key[6:]] = arr.copy()
            elif key.startswith("opt.v."):
                self.v[key[6:]] = arr.copy()
            elif key.startswith("opt.t."):
                self.t[key[6:]] = int(arr.reshape(-1)[0])


def loss_weights_for(cfg: TrainConfig, n_ep) -> L.LossWeights:
    lambda_adv = cfg.lambda_adv if cfg.adversarial != "off" else 0.0
    if cfg.schedule_mode == "adaptive":
        return L.schedule_weights(n_ep, lambda_adv=lambda_adv, lambda_max=cfg.lambda_max)
    if cfg.schedule_mode == "fixed":
        kw = {"lambda_ce": 1.0, "lambda_cl": 1.0, "lambda_nl": 1.0,
              "lambda_H": 1.0, "lambda_var": 1.0}
        kw.update(cfg.fixed_weights)
        return L.LossWeights(**kw, lambda_adv=lambda_adv, n_ep=n_ep, schedule_mode="fixed")
    raise InputError(f"unknown schedule mode {cfg.schedule_mode!r}")


def _finite(value, term, epoch, step):
    if not np.isfinite(value):
        raise NumericError(f"loss term {term} became non-finite at epoch {epoch} step {step}")
    return value


def _batch_views(batch):
    return np.array([ex.view for ex, _ in batch.labeled] +
                    [ex.view for ex in batch.unlabeled], dtype=int)


def _encoder_step_loss(params, batch, cfg, hyper, weights, epoch, step):
    """Build the full joint graph for one encoder update; returns the scalar
    total, the parameter tensors, and the logged breakdown."""
    spec = params.spec
    pt = M.as_tensors(params, trainable=M.ENCODER_GROUPS)

    x_l = batch.labeled_features()
    x_u = batch.unlabeled_features()
    z_l = M.encode(pt, x_l)
    z_u = M.encode(pt, x_u)
    z_ua = M.encode(pt, batch.unlabeled_augmented)
    logits_l = M.head_logits(pt, z_l)
    logits_u = M.head_logits(pt, z_u)
    y_hat_l = ad.softmax_rows(logits_l)
    y_hat_u = ad.softmax_rows(logits_u)

    terms = {}
    if cfg.enable_ce:
        terms["ce"] = L.ce_loss(y_hat_l, batch.labeled_targets(), spec.L)
    if cfg.enable_nl:
        terms["nl"] = L.nl_loss(y_hat_u, spec.L)
    if cfg.enable_H:
        terms["H"] = L.entropy_loss(y_hat_u)
    if cfg.enable_var:
        if cfg.sharpen_mode == "log":
            y_tilde = ad.softmax_rows(ad.slice_cols(logits_u, spec.L, spec.n_classes), hyper.sr)
        else:
            y_tilde = ad.softmax_rows(ad.slice_cols(y_hat_u, spec.L, spec.n_classes), hyper.sr)
        terms["var"] = L.variance_loss(y_tilde, spec.U, mode=cfg.variance_mode)
    if cfg.enable_cl:
        z_all = ad.concat_rows(z_l, z_u)
        if batch.contrast_category:
            q_idx = [t[0] for t in batch.contrast_category]
            p_idx = [t[1] for t in batch.contrast_category]
            n_idx = np.array([t[2] for t in batch.contrast_category], dtype=int)
            n_per = n_idx.shape[1]
            negs = ad.reshape(ad.take_rows(z_all, n_idx.reshape(-1)),
                              (len(q_idx), n_per, z_all.data.shape[1]))
            terms["cl_category"] = L.category_contrastive(
                ad.take_rows(z_all, q_idx), ad.take_rows(z_all, p_idx), negs, hyper.tau)
        q_idx = [t[0] for t in batch.contrast_instance]
        n_idx = np.array([t[1] for t in batch.contrast_instance], dtype=int)
        negs = ad.reshape(ad.take_rows(z_l, n_idx.reshape(-1)),
                          (len(q_idx), n_idx.shape[1], z_l.data.shape[1]))
        statuses = [batch.labeled[i][0].status for i in n_idx.reshape(-1)]
        terms["cl_instance"] = L.instance_contrastive(
            ad.take_rows(z_u, q_idx), ad.take_rows(z_ua, q_idx), negs, hyper.tau,
            negative_statuses=statuses)
        terms["mse"] = L.consistency_mse(z_u, z_ua)

    for name, t in terms.items():
        _finite(t.item(), name, epoch, step)
    total, breakdown = L.joint_loss(terms, weights)

    if cfg.adversarial != "off":
        z_all_adv = ad.concat_rows(z_l, z_u)
        probs = ad.softmax_rows(M.disc_logits(pt, z_all_adv))
        adv = L.adversarial_loss(probs, mode=cfg.adversarial)
        breakdown.adv = _finite(adv.item(), "adv", epoch, step)
        total = ad.add(total, ad.mul(adv, weights.lambda_adv))
    return total, pt, breakdown


def _discriminator_step(params, batch, cfg, optimizer, epoch, step):
    """One discriminator update on detached embeddings; returns the loss."""
    pt = M.as_tensors(params, trainable=(M.DISC_GROUP,))
    x_all = np.vstack([batch.labeled_features(), batch.unlabeled_features()])
    z = M.encode(pt, x_all)  # encoder params are constants here: no grads flow back
    probs = ad.softmax_rows(M.disc_logits(pt, z))
    dloss = L.discriminator_loss(probs, _batch_views(batch), params.spec.K)
    _finite(dloss.item(), "disc", epoch, step)
    grads = M.backward(pt, dloss)
    optimizer.step(params, grads, M.disc_names(params))
    return dloss.item()


def train(dataset, params: M.ModelParams, cfg: TrainConfig, hyper: Hyperparams,
          config_hash="", out_dir=None, start_epoch=0, optimizer=None,
          log: TrainLog = None):
    """Run the joint optimization; returns (params, TrainLog, EvalReport)."""
    spec = params.spec
    if dataset.spec != spec:
        raise InputError(f"dataset spec {dataset.spec} does not match model spec {spec}")
    optimizer = optimizer or Optimizer(cfg)
    log = log or TrainLog()
    enc_names = M.encoder_names(params)

    for epoch in range(start_epoch, cfg.epochs):
        t0 = time.monotonic()
        weights = loss_weights_for(cfg, epoch)
        rng = np.random.default_rng([cfg.seed, 104729, epoch])
        sums = {}
        for step in range(cfg.steps_per_epoch):
            batch = make_joint_batch(dataset.train, spec, hyper, rng,
                                     labeled_batch_size=cfg.labeled_batch_size,
                                     cross_view_positives=cfg.cross_view_positives)
            if cfg.adversarial != "off":
                dvals = [_discriminator_step(params, batch, cfg, optimizer, epoch, step)
                         for _ in range(cfg.disc_steps_per_enc_step)]
            total, pt, breakdown = _encoder_step_loss(
                params, batch, cfg, hyper, weights, epoch, step)
            if cfg.adversarial != "off":
                breakdown.disc = float(np.mean(dvals))
            grads = M.backward(pt, total)
            optimizer.step(params, grads, enc_names)
            for key, val in breakdown.as_dict().items():
                sums[key] = sums.get(key, 0.0) + val

        means = {k: v / cfg.steps_per_epoch for k, v in sums.items()}
        report = evaluate(params, dataset.test, sr=hyper.sr, sharpen_mode=cfg.sharpen_mode)
        log.append(EpochRecord(epoch=epoch, losses=means, weights=weights.as_dict(),
                               acr=report.acr, acc=report.acc,
                               wall_clock=time.monotonic() - t0))
        if out_dir and cfg.checkpoint_every and (epoch + 1) % cfg.checkpoint_every == 0:
            _save(out_dir, f"checkpoint_ep{epoch + 1}.txt", params, optimizer,
                  epoch + 1, cfg, config_hash)

    final_report = evaluate(params, dataset.test, sr=hyper.sr, sharpen_mode=cfg.sharpen_mode)
    if out_dir:
        _save(out_dir, "checkpoint_final.txt", params, optimizer,
              cfg.epochs, cfg, config_hash)
        log.to_jsonl(os.path.join(out_dir, "train_log.jsonl"))
        with open(os.path.join(out_dir, "eval_report.json"), "w", encoding="utf-8") as fh:
            json.dump(final_report.as_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")
    return params, log, final_report


def _save(out_dir, name, params, optimizer, epoch, cfg, config_hash):
    os.makedirs(out_dir, exist_ok=True)
    meta = {"epoch": epoch, "config_hash": config_hash, "seed": cfg.seed}
    M.save_checkpoint(os.path.join(out_dir, name), params, meta,
                      extras=optimizer.state_tensors())


def resume(checkpoint_path, dataset, cfg: TrainConfig, hyper: Hyperparams,
           config_hash="", out_dir=None, log: TrainLog = None):
    """Continue training from a checkpoint; the config hash must match."""
    params, meta, extras = M.load_checkpoint(checkpoint_path)
    if meta.get("config_hash") != config_hash:
        raise InputError(
            f"checkpoint config hash {meta.get('config_hash')!r} does not match "
            f"current config {config_hash!r}")
    optimizer = Optimizer(cfg)
    optimizer.load_state(extras)
    start_epoch = int(meta["epoch"])
    return train(dataset, params, cfg, hyper, config_hash=config_hash,
                 out_dir=out_dir, start_epoch=start_epoch,
                 optimizer=optimizer, log=log)
