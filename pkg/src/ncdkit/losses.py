"""Every training loss, the adaptive weight schedule, and the joint sum.

All loss functions build autodiff graphs, so they accept Tensors (for
training) or plain arrays (for direct evaluation; call .item() on the
result). Class-id convention: labeled heads are columns [0, L), novel
heads [L, L+U).
"""

from dataclasses import dataclass, field

import numpy as np

from ncdkit import autodiff as ad
from ncdkit.core import InputError

TERM_NAMES = ("ce", "nl", "H", "cl_category", "cl_instance", "mse", "var")


@dataclass
class LossWeights:
    lambda_ce: float = 1.5
    lambda_cl: float = 0.2
    lambda_nl: float = 0.2
    lambda_H: float = 1.0
    lambda_var: float = 0.2
    lambda_adv: float = 0.0  # 0 disables the view-invariance term
    n_ep: int = 0
    schedule_mode: str = "adaptive"

    def __post_init__(self):
        for name in ("lambda_ce", "lambda_cl", "lambda_nl", "lambda_H", "lambda_var", "lambda_adv"):
            if getattr(self, name) < 0:
                raise InputError(f"{name} must be nonnegative, got {getattr(self, name)}")

    def as_dict(self):
        return {"lambda_ce": self.lambda_ce, "lambda_cl": self.lambda_cl,
                "lambda_nl": self.lambda_nl, "lambda_H": self.lambda_H,
                "lambda_var": self.lambda_var, "lambda_adv": self.lambda_adv,
                "n_ep": self.n_ep}


def schedule_weights(n_ep, lambda_adv=0.0, lambda_max=0.0) -> LossWeights:
    """Adaptive weights by epoch: clustering terms ramp 0.2 + 0.5*n_ep while
    the supervised weight decays max(0, 1 - 0.01*n_ep) + 0.5; entropy stays 1.

    lambda_max > 0 optionally caps the ramping weights.
    """
    if n_ep < 0:
        raise InputError(f"n_ep must be >= 0, got {n_ep}")
    ramp = 0.2 + 0.5 * n_ep
    if lambda_max > 0:
        ramp = min(ramp, lambda_max)
    return LossWeights(
        lambda_ce=max(0.0, 1.0 - 0.01 * n_ep) + 0.5,
        lambda_cl=ramp, lambda_nl=ramp, lambda_var=ramp,
        lambda_H=1.0, lambda_adv=lambda_adv,
        n_ep=n_ep, schedule_mode="adaptive",
    )


@dataclass
class LossBreakdown:
    ce: float = 0.0
    nl: float = 0.0
    H: float = 0.0
    cl_category: float = 0.0
    cl_instance: float = 0.0
    mse: float = 0.0
    var: float = 0.0
    disc: float = 0.0
    adv: float = 0.0
    joint: float = 0.0

    def as_dict(self):
        return {k: getattr(self, k) for k in (*TERM_NAMES, "disc", "adv", "joint")}


def _targets_to_one_hot(targets, L):
    targets = np.asarray(targets)
    if targets.ndim == 1:  # class ids
        if targets.size and (targets.min() < 0 or targets.max() >= L):
            raise InputError(f"labeled target ids must lie in [0, {L}), got {targets}")
        hot = np.zeros((targets.size, L))
        hot[np.arange(targets.size), targets] = 1.0
        return hot
    if targets.shape[1] != L or np.any((targets != 0) & (targets != 1)):
        raise InputError(f"targets must be one-hot over [0, {L})")
    return targets.astype(np.float64)


def ce_loss(y_hat, targets, L):
    """Mean categorical cross-entropy of labeled instances against one-hot
    targets over the labeled heads only."""
    hot = _targets_to_one_hot(targets, L)
    y_hat = ad.wrap(y_hat)
    labeled = ad.slice_cols(y_hat, 0, L)
    per = ad.tsum(ad.mul(hot, ad.log(labeled)), axis=1)
    return ad.tmean(ad.mul(per, -1.0))


def nl_loss(y_hat, L):
    """Negative learning: every labeled class is a complementary label for an
    unlabeled instance, so drive labeled-head confidence to zero."""
    y_hat = ad.wrap(y_hat)
    labeled = ad.slice_cols(y_hat, 0, L)
    per = ad.tsum(ad.log(ad.sub(1.0, labeled)), axis=1)
    return ad.tmean(ad.mul(per, -1.0))


def entropy_loss(y_hat):
    """Mean Shannon entropy of the full prediction; a Dirac-delta minimizes it."""
    y_hat = ad.wrap(y_hat)
    per = ad.tsum(ad.mul(y_hat, ad.log(y_hat)), axis=1)
    return ad.tmean(ad.mul(per, -1.0))


def _as_queries(t, name):
    t = ad.wrap(t)
    if t.data.ndim == 1:
        t = ad.reshape(t, (1, t.data.shape[0]))
    if t.data.ndim != 2:
        raise InputError(f"{name} must be a vector or (Q, E) matrix, got shape {t.data.shape}")
    return t


def _info_nce(q, pos, negs, tau):
    """-log( e^(s_qp/tau) / (e^(s_qp/tau) + sum_n e^(s_qn/tau)) ), mean over queries."""
    qn = ad.l2_normalize(q)
    pn = ad.l2_normalize(pos)
    nn = ad.l2_normalize(negs)
    sp = ad.tsum(ad.mul(qn, pn), axis=1)                       # (Q,)
    q3 = ad.reshape(qn, (qn.data.shape[0], 1, qn.data.shape[1]))
    sn = ad.tsum(ad.mul(q3, nn), axis=2)                       # (Q, N)
    e_p = ad.exp(ad.mul(sp, 1.0 / tau))
    e_n = ad.tsum(ad.exp(ad.mul(sn, 1.0 / tau)), axis=1)
    return ad.tmean(ad.sub(ad.log(ad.add(e_p, e_n)), ad.mul(sp, 1.0 / tau)))


def _check_negs(negs, q, name):
    negs = ad.wrap(negs)
    if negs.data.ndim == 2:
        negs = ad.reshape(negs, (1, *negs.data.shape))
    if negs.data.ndim != 3 or negs.data.shape[1] == 0:
        raise InputError(f"{name} requires a non-empty (Q, N, E) negative set")
    if negs.data.shape[0] != q.data.shape[0]:
        raise InputError(f"{name}: negative set rows {negs.data.shape[0]} != queries {q.data.shape[0]}")
    return negs


def category_contrastive(query, positive, negatives, tau):
    """InfoNCE where query/positive share a labeled class and negatives come
    from other labeled classes and the unlabeled pool."""
    q = _as_queries(query, "query")
    p = _as_queries(positive, "positive")
    negs = _check_negs(negatives, q, "category_contrastive")
    return _info_nce(q, p, negs, tau)


def instance_contrastive(query, augmented, negatives, tau, negative_statuses=None):
    """InfoNCE for an unlabeled query against its augmented view; negatives
    must come from the labeled pool (the disjointness guard against false
    negatives), enforced when statuses are supplied."""
    if negative_statuses is not None:
        statuses = np.asarray(negative_statuses).reshape(-1)
        bad = [s for s in statuses if s != "labeled"]
        if bad:
            raise InputError(
                f"instance_contrastive negatives must all be labeled, got status {bad[0]!r}")
    q = _as_queries(query, "query")
    a = _as_queries(augmented, "augmented")
    negs = _check_negs(negatives, q, "instance_contrastive")
    return _info_nce(q, a, negs, tau)


def consistency_mse(z, z_prime):
    """Mean squared distance between L2-normalized embeddings of an instance
    and its augmented view; range [0, 4]."""
    zn = ad.l2_normalize(_as_queries(z, "z"))
    zpn = ad.l2_normalize(_as_queries(z_prime, "z_prime"))
    d = ad.sub(zn, zpn)
    return ad.tmean(ad.tsum(ad.square(d), axis=1))


def variance_target(U):
    """Fair U-face dice variance (U-1)/U**2 of a per-face indicator."""
    return (U - 1) / (U * U)


def variance_loss(y_tilde, U, mode="batchwise"):
    """Penalize deviation of sharpened novel-head statistics from the fair
    U-face dice variance (U-1)/U**2.

    batchwise (default): per head, the empirical variance across the batch
    (n-1 denominator), squared deviation from target, mean over heads. This
    is the collapse-preventing form: a head that every instance avoids (or
    hogs) has near-zero variance and gets penalized.

    componentwise: per instance, the population variance across its U
    components, squared deviation from target, mean over the batch. A
    one-hot row hits the target exactly.
    """
    yt = ad.wrap(y_tilde)
    if yt.data.ndim != 2 or yt.data.shape[1] != U:
        raise InputError(f"y_tilde must be (batch, U={U}), got {yt.data.shape}")
    n = yt.data.shape[0]
    target = variance_target(U)
    if mode == "batchwise":
        if n < max(U, 2):
            raise InputError(
                f"batchwise variance needs batch >= max(U, 2) = {max(U, 2)}, got {n}")
        mean = ad.tmean(yt, axis=0, keepdims=True)
        var = ad.mul(ad.tsum(ad.square(ad.sub(yt, mean)), axis=0), 1.0 / (n - 1))
        return ad.tmean(ad.square(ad.sub(var, target)))
    if mode == "componentwise":
        mean = ad.tmean(yt, axis=1, keepdims=True)
        var = ad.tmean(ad.square(ad.sub(yt, mean)), axis=1)
        return ad.tmean(ad.square(ad.sub(var, target)))
    raise InputError(f"unknown variance mode {mode!r}")


def discriminator_loss(probs, views, K):
    """Mean cross-entropy of the view discriminator against true view ids."""
    views = np.asarray(views, dtype=int).reshape(-1)
    if views.size and (views.min() < 0 or views.max() >= K):
        raise InputError(f"view ids must lie in [0, {K}), got {views}")
    probs = ad.wrap(probs)
    hot = np.zeros((views.size, K))
    hot[np.arange(views.size), views] = 1.0
    per = ad.tsum(ad.mul(hot, ad.log(probs)), axis=1)
    return ad.tmean(ad.mul(per, -1.0))


def adversarial_loss(probs, mode="uniform"):
    """Encoder-side view-invariance objective over frozen discriminator output.

    uniform (default): cross-entropy against the uniform 1/K target, which
    the stated no-better-than-random-guess goal minimizes at uniform output.
    literal: -log p(view 0) for every instance regardless of its true view.
    """
    probs = ad.wrap(probs)
    K = probs.data.shape[1]
    if mode == "uniform":
        per = ad.tsum(ad.mul(ad.log(probs), 1.0 / K), axis=1)
        return ad.tmean(ad.mul(per, -1.0))
    if mode == "literal":
        first = ad.slice_cols(probs, 0, 1)
        return ad.tmean(ad.mul(ad.log(first), -1.0))
    raise InputError(f"unknown adversarial mode {mode!r}")


def joint_loss(terms: dict, weights: LossWeights):
    """Weighted sum of the clustering objective:

        lambda_ce*ce + lambda_cl*(cl_category + cl_instance + mse)
        + lambda_nl*nl + lambda_H*H + lambda_var*var

    `terms` maps term name -> scalar Tensor (or float); names absent or None
    are skipped and must carry zero weight. Adversarial terms are tracked
    outside this sum (the alternation handles them). Returns (joint tensor,
    LossBreakdown of floats).
    """
    lam = {
        "ce": weights.lambda_ce,
        "nl": weights.lambda_nl,
        "H": weights.lambda_H,
        "var": weights.lambda_var,
        "cl_category": weights.lambda_cl,
        "cl_instance": weights.lambda_cl,
        "mse": weights.lambda_cl,
    }
    total = ad.constant(0.0)
    values = {}
    for name in TERM_NAMES:
        t = terms.get(name)
        if t is None:
            values[name] = 0.0
            continue
        t = ad.wrap(t)
        values[name] = t.item()
        if lam[name] != 0.0:
            total = ad.add(total, ad.mul(t, lam[name]))
    unknown = set(terms) - set(TERM_NAMES)
    if unknown:
        raise InputError(f"unknown loss terms: {sorted(unknown)}")
    breakdown = LossBreakdown(**values, joint=total.item())
    return total, breakdown
