"""Loss functions over classifier output pairs: symmetric KL, its
cross-entropy / entropy decomposition, the joint divergence, the supervised
and combined source losses, small-loss selection, the hinge-style divergence
separation loss, and the ablation-variant configurations.

All per-sample quantities are N x 1 graph nodes so that subsets of a batch
can be gathered and reduced differentiably.
"""

import math
from dataclasses import dataclass

import numpy as np

from . import diffcore as dc
from .errors import ParameterError


def per_sample_symmetric_kl(pair):
    """D(p1 || p2) + D(p2 || p1) per row."""
    log1 = dc.log_clamped(pair.p1)
    log2 = dc.log_clamped(pair.p2)
    fwd = dc.mul(pair.p1, dc.sub(log1, log2))
    bwd = dc.mul(pair.p2, dc.sub(log2, log1))
    return dc.sum_rows(dc.add(fwd, bwd))


def per_sample_crs_ent(pair):
    """(H(p1,p2) + H(p2,p1), H(p1) + H(p2)) per row."""
    log1 = dc.log_clamped(pair.p1)
    log2 = dc.log_clamped(pair.p2)
    crs = dc.scale(dc.sum_rows(dc.add(dc.mul(pair.p1, log2), dc.mul(pair.p2, log1))), -1.0)
    ent = dc.scale(dc.sum_rows(dc.add(dc.mul(pair.p1, log1), dc.mul(pair.p2, log2))), -1.0)
    return crs, ent


def per_sample_joint_divergence(pair):
    crs, ent = per_sample_crs_ent(pair)
    return dc.add(crs, ent)


def per_sample_supervised(pair, labels_onehot):
    """Twin cross-entropy -log p1[y] - log p2[y] per row."""
    labels = labels_onehot if isinstance(labels_onehot, dc.Node) else dc.constant(labels_onehot)
    rows = labels.value.sum(axis=1)
    if not np.allclose(rows, 1.0) or not np.all((labels.value == 0) | (labels.value == 1)):
        raise ParameterError("labels must be one-hot rows")
    picked1 = dc.sum_rows(dc.mul(labels, dc.log_clamped(pair.p1)))
    picked2 = dc.sum_rows(dc.mul(labels, dc.log_clamped(pair.p2)))
    return dc.scale(dc.add(picked1, picked2), -1.0)


def per_sample_source_loss(pair, labels_onehot, lam):
    """Supervised loss plus lam * symmetric KL agreement term."""
    if lam < 0:
        raise ParameterError("lambda must be nonnegative")
    sup = per_sample_supervised(pair, labels_onehot)
    if lam == 0.0:
        return sup
    return dc.add(sup, dc.scale(per_sample_symmetric_kl(pair), lam))


def batch_mean(per_sample):
    return dc.mean_all(per_sample)


def small_loss_select(per_sample_loss, alpha):
    """Indices of the ceil((1 - alpha) * N) smallest losses, low index wins ties."""
    if not 0.0 <= alpha < 1.0:
        raise ParameterError("alpha must be in [0, 1)")
    values = np.asarray(per_sample_loss, dtype=np.float64).ravel()
    n = len(values)
    if n == 0:
        return np.empty(0, dtype=np.intp)
    keep = math.ceil((1.0 - alpha) * n)
    order = np.argsort(values, kind="stable")
    return np.sort(order[:keep])


def margin_terms(per_sample, delta, margin):
    """Hinge push away from delta: -|x - delta| outside the margin band, 0 inside."""
    if delta <= 0 or margin < 0:
        raise ParameterError("need delta > 0 and margin >= 0")
    return dc.margin_push(per_sample, delta, margin)


def separation_loss(pair, delta, margin, use_crs=True, use_ent=True, kl_sign=False):
    """mean(crs hinge) + mean(ent hinge); kl_sign flips the ent term's sign
    (the symmetric-KL-shaped ablation). Dropping both terms yields zero."""
    crs, ent = per_sample_crs_ent(pair)
    terms = []
    if use_crs:
        terms.append(dc.mean_all(margin_terms(crs, delta, margin)))
    if use_ent:
        ent_term = dc.mean_all(margin_terms(ent, delta, margin))
        terms.append(dc.scale(ent_term, -1.0) if kl_sign else ent_term)
    if not terms:
        return None
    total = terms[0]
    for t in terms[1:]:
        total = dc.add(total, t)
    return total


def select_target_common(crs_values, delta, margin):
    """{ i : crs[i] < delta - margin }, the presumed-common target rows."""
    if delta <= 0 or margin < 0:
        raise ParameterError("need delta > 0 and margin >= 0")
    values = np.asarray(crs_values, dtype=np.float64).ravel()
    return np.nonzero(values < delta - margin)[0]


VARIANT_MODES = ("full", "source_only", "no_select", "no_sep", "kl_sep",
                 "no_div", "no_crs", "no_ent", "no_minimax")


@dataclass(frozen=True)
class VariantConfig:
    """Which pieces of the full objective a training variant keeps."""

    mode: str = "full"
    use_selection: bool = True      # small-loss selection of source rows
    use_source_divergence: bool = True  # lam * SKLD term inside the source loss
    use_separation: bool = True     # target hinge step
    sep_use_crs: bool = True
    sep_use_ent: bool = True
    sep_kl_sign: bool = False
    use_minimax: bool = True        # adversarial classifier/generator steps
    supervised_only: bool = False   # plain supervised objective, nothing else


def variant_losses(mode):
    """Training-objective configuration for each ablation variant."""
    if mode not in VARIANT_MODES:
        raise ParameterError(f"unknown variant mode {mode!r}")
    if mode == "source_only":
        return VariantConfig(mode=mode, use_selection=False, use_source_divergence=False,
                             use_separation=False, use_minimax=False, supervised_only=True)
    if mode == "no_select":
        return VariantConfig(mode=mode, use_selection=False)
    if mode == "no_sep":
        return VariantConfig(mode=mode, use_separation=False)
    if mode == "kl_sep":
        return VariantConfig(mode=mode, sep_kl_sign=True)
    if mode == "no_div":
        return VariantConfig(mode=mode, use_source_divergence=False)
    if mode == "no_crs":
        return VariantConfig(mode=mode, sep_use_crs=False)
    if mode == "no_ent":
        return VariantConfig(mode=mode, sep_use_ent=False)
    if mode == "no_minimax":
        return VariantConfig(mode=mode, use_minimax=False)
    return VariantConfig()
