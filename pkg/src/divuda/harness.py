"""Evaluation and analysis: unknown-aware prediction, |C|+1-class averaged
accuracy on the target domain, the 80/20 source-domain evaluation, divergence
density export, decision-boundary grids, and config-driven experiment runs.
"""

import csv
import hashlib
import json
import os
import shutil
from dataclasses import dataclass, replace

import numpy as np

from . import divergence as dv
from .errors import ConfigError, DataError, DimensionError
from .synthdata import NO_LABEL, save_csv_dataset
from .trainer import Trainer

UNKNOWN = -1
SCHEMA_VERSION = 1


@dataclass(frozen=True)
class Prediction:
    class_or_unknown: int       # class id, or UNKNOWN
    crs_value: float
    mean_probs: np.ndarray


def _pair_values(model, features, eval_seed=0):
    pair = model.forward(features, seed=eval_seed)
    return pair.p1.value, pair.p2.value


def predict_batch(model, features, delta, eval_seed=0):
    """Vectorized unknown-aware prediction.

    Returns (labels, crs, mean_probs); labels hold UNKNOWN where the
    inter-head cross entropy strictly exceeds delta.
    """
    features = np.asarray(features, dtype=np.float64)
    if features.ndim != 2 or features.shape[1] != model.arch.in_dim:
        raise DimensionError(f"expected n x {model.arch.in_dim} features")
    p1, p2 = _pair_values(model, features, eval_seed)
    eps = 1e-12
    crs = -(p1 * np.log(np.maximum(p2, eps))).sum(axis=1) \
          - (p2 * np.log(np.maximum(p1, eps))).sum(axis=1)
    mean_probs = 0.5 * (p1 + p2)
    labels = mean_probs.argmax(axis=1)
    labels[crs > delta] = UNKNOWN
    return labels, crs, mean_probs


def predict(model, x, delta, eval_seed=0):
    """Single-sample convenience wrapper around predict_batch."""
    labels, crs, probs = predict_batch(model, np.atleast_2d(x), delta, eval_seed)
    return Prediction(int(labels[0]), float(crs[0]), probs[0])


def joint_divergence_values(model, features, eval_seed=0):
    p1, p2 = _pair_values(model, features, eval_seed)
    eps = 1e-12
    l1, l2 = np.log(np.maximum(p1, eps)), np.log(np.maximum(p2, eps))
    crs = -(p1 * l2).sum(axis=1) - (p2 * l1).sum(axis=1)
    ent = -(p1 * l1).sum(axis=1) - (p2 * l2).sum(axis=1)
    return crs + ent


@dataclass
class EvalReport:
    per_class_accuracy: dict    # class id (or "unknown") -> accuracy
    averaged_accuracy: float
    confusion: dict             # true -> {pred -> count}
    n_samples: int

    def to_json(self, path):
        payload = {
            "schema_version": SCHEMA_VERSION,
            "per_class_accuracy": {str(k): v for k, v in self.per_class_accuracy.items()},
            "averaged_accuracy": self.averaged_accuracy,
            "confusion": {str(t): {str(p): c for p, c in row.items()}
                          for t, row in self.confusion.items()},
            "n_samples": self.n_samples,
        }
        with open(path, "w") as fh:
            json.dump(payload, fh, sort_keys=True, indent=1)

    @classmethod
    def from_json(cls, path):
        with open(path) as fh:
            payload = json.load(fh)
        return cls(
            per_class_accuracy={k: v for k, v in payload["per_class_accuracy"].items()},
            averaged_accuracy=payload["averaged_accuracy"],
            confusion={t: {p: c for p, c in row.items()}
                       for t, row in payload["confusion"].items()},
            n_samples=payload["n_samples"],
        )


def _score(true_labels, pred_labels):
    classes = sorted(set(int(t) for t in true_labels))
    per_class, confusion = {}, {}
    for c in classes:
        mask = true_labels == c
        key = "unknown" if c == UNKNOWN else str(c)
        per_class[key] = float((pred_labels[mask] == c).mean())
        row = {}
        for p in np.unique(pred_labels[mask]):
            pkey = "unknown" if p == UNKNOWN else str(int(p))
            row[pkey] = int((pred_labels[mask] == p).sum())
        confusion[key] = row
    averaged = float(np.mean(list(per_class.values())))
    return EvalReport(per_class, averaged, confusion, int(len(true_labels)))


def evaluate_target(model, target_dataset, delta, eval_seed=0):
    """Accuracy averaged over the common classes plus one unified unknown
    class; target-private truths collapse onto UNKNOWN."""
    if len(target_dataset) == 0:
        raise DataError("cannot evaluate an empty dataset")
    preds, _, _ = predict_batch(model, target_dataset.features, delta, eval_seed)
    truths = target_dataset.true_labels.copy()
    truths[(truths < 0) | (truths >= model.arch.num_classes)] = UNKNOWN
    return _score(truths, preds)


def split_indices_80_20(n, split_seed):
    rng = np.random.default_rng(np.random.SeedSequence([split_seed, 0x73706c69]))
    perm = rng.permutation(n)
    n_test = int(round(0.2 * n))
    return perm[n_test:], perm[:n_test]


def evaluate_source(model, source_dataset, delta, split_seed=0, eval_seed=0):
    """Deterministic 80/20 split; scored on the clean 20% with the unknown
    rejection rule still active (rejections count as errors)."""
    if len(source_dataset) == 0:
        raise DataError("cannot evaluate an empty dataset")
    _, test_idx = split_indices_80_20(len(source_dataset), split_seed)
    feats = source_dataset.features[test_idx]
    truths = source_dataset.true_labels[test_idx]
    preds, _, _ = predict_batch(model, feats, delta, eval_seed)
    return _score(truths, preds)


def divergence_density(model, target_dataset, bins=50, eval_seed=0):
    """Joint-divergence histograms for target-common vs target-private
    samples; each mass vector sums to 1 (or is all zero when empty)."""
    jd = joint_divergence_values(model, target_dataset.features, eval_seed)
    private = (target_dataset.true_labels < 0) | \
        (target_dataset.true_labels >= model.arch.num_classes)
    hi = max(float(jd.max()), 1e-9)
    edges = np.linspace(0.0, hi, bins + 1)

    def mass(values):
        if len(values) == 0:
            return np.zeros(bins)
        counts, _ = np.histogram(values, bins=edges)
        return counts / counts.sum()

    return edges, mass(jd[~private]), mass(jd[private])


def write_density_csv(path, edges, common_mass, private_mass):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["bin_left", "bin_right", "common_mass", "private_mass"])
        for i in range(len(common_mass)):
            writer.writerow([repr(float(edges[i])), repr(float(edges[i + 1])),
                             repr(float(common_mass[i])), repr(float(private_mass[i]))])


def decision_grid(model, bounds, resolution, delta, eval_seed=0):
    """Rows (x, y, pred1, pred2, pred_mean, crs, unknown) over a 2-D grid."""
    if model.arch.in_dim != 2:
        raise DimensionError("decision grids need a 2-D feature space")
    x0, x1, y0, y1 = bounds
    xs = np.linspace(x0, x1, resolution)
    ys = np.linspace(y0, y1, resolution)
    gx, gy = np.meshgrid(xs, ys)
    points = np.column_stack([gx.ravel(), gy.ravel()])
    p1, p2 = _pair_values(model, points, eval_seed)
    eps = 1e-12
    crs = -(p1 * np.log(np.maximum(p2, eps))).sum(axis=1) \
          - (p2 * np.log(np.maximum(p1, eps))).sum(axis=1)
    return {
        "points": points,
        "pred1": p1.argmax(axis=1),
        "pred2": p2.argmax(axis=1),
        "pred_mean": (0.5 * (p1 + p2)).argmax(axis=1),
        "crs": crs,
        "unknown": crs > delta,
    }


def write_grid_csv(path, grid):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["x", "y", "pred1", "pred2", "pred_mean", "crs", "unknown"])
        pts = grid["points"]
        for i in range(len(pts)):
            writer.writerow([repr(float(pts[i, 0])), repr(float(pts[i, 1])),
                             int(grid["pred1"][i]), int(grid["pred2"][i]),
                             int(grid["pred_mean"][i]), repr(float(grid["crs"][i])),
                             int(grid["unknown"][i])])


# -- config-driven experiment execution -----------------------------------

def _auto_bounds(scenario, pad=2.0):
    centers = np.array([scenario.blob_centers[c]
                        for c in set(scenario.source_classes) | set(scenario.target_classes)])
    return (float(centers[:, 0].min() - pad), float(centers[:, 0].max() + pad),
            float(centers[:, 1].min() - pad), float(centers[:, 1].max() + pad))


def run_single(scenario, hyper, variant, seed, model_mode, out_dir,
               eval_every=500, density_bins=50, grid_resolution=0,
               grid_bounds=None, check_routing=False):
    """Train one configuration and write its artifact files into out_dir."""
    from .synthdata import make_noisy_scenario
    source, target = make_noisy_scenario(scenario)
    trainer = Trainer(source, target, hyper=hyper, variant=variant, seed=seed,
                      model_mode=model_mode, check_routing=check_routing)
    delta = trainer.delta

    def eval_fn(model, iteration):
        return {
            "eval_target_acc": evaluate_target(model, target, delta).averaged_accuracy,
            "eval_source_acc": evaluate_source(model, source, delta,
                                               split_seed=seed).averaged_accuracy,
        }

    model, log = trainer.run(eval_fn=eval_fn, eval_every=eval_every)
    os.makedirs(out_dir, exist_ok=True)
    try:
        log.to_csv(os.path.join(out_dir, "trainlog.csv"))
        model.save(os.path.join(out_dir, "model.json"))
        evaluate_target(model, target, delta).to_json(
            os.path.join(out_dir, "eval_target.json"))
        evaluate_source(model, source, delta, split_seed=seed).to_json(
            os.path.join(out_dir, "eval_source.json"))
        write_density_csv(os.path.join(out_dir, "density.csv"),
                          *divergence_density(model, target, bins=density_bins))
        if grid_resolution:
            bounds = grid_bounds or _auto_bounds(scenario)
            write_grid_csv(os.path.join(out_dir, "grid.csv"),
                           decision_grid(model, bounds, grid_resolution, delta))
    except Exception:
        shutil.rmtree(out_dir, ignore_errors=True)
        raise
    return model, log


def run_experiment(config):
    """Execute every (sweep point, seed) run of an ExperimentConfig and write
    a manifest tying the outputs to the config hash."""
    out_root = config.out_dir
    os.makedirs(out_root, exist_ok=True)
    results = {}
    for label, scenario, hyper in config.sweep_points():
        for seed in config.seeds:
            run_dir = os.path.join(out_root, label, f"seed{seed}")
            scenario_for_seed = replace(scenario, seed=seed)
            run_single(scenario_for_seed, hyper, config.variant, seed,
                       config.model_mode, run_dir, eval_every=config.eval_every,
                       density_bins=config.density_bins,
                       grid_resolution=config.grid_resolution,
                       grid_bounds=config.grid_bounds)
            report = EvalReport.from_json(os.path.join(run_dir, "eval_target.json"))
            results.setdefault(label, {})[seed] = report.averaged_accuracy
    manifest = {
        "schema_version": SCHEMA_VERSION,
        "config_hash": config.content_hash,
        "seeds": list(config.seeds),
        "sweep_labels": sorted(results),
        "variant": config.variant,
        "model_mode": config.model_mode,
    }
    with open(os.path.join(out_root, "manifest.json"), "w") as fh:
        json.dump(manifest, fh, sort_keys=True, indent=1)
    return results


def generate_data(scenario, out_dir):
    """Write source.csv / target.csv for a scenario."""
    from .synthdata import make_noisy_scenario
    source, target = make_noisy_scenario(scenario)
    os.makedirs(out_dir, exist_ok=True)
    save_csv_dataset(source, os.path.join(out_dir, "source.csv"))
    save_csv_dataset(target, os.path.join(out_dir, "target.csv"))


def config_hash(text):
    return hashlib.sha256(text.encode()).hexdigest()
