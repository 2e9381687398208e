"""Scenario generation: Gaussian-blob datasets with a partitioned label space,
label-noise injection via row-stochastic transition matrices, deterministic
mini-batch streams and CSV ingestion/export.
"""

import csv
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ConfigError, DataError, ParameterError, ParseError

NO_LABEL = -1


def build_noise_matrix(kind, rate, num_classes):
    """Row-stochastic K x K transition matrix for pair or symmetric flipping."""
    if not 0.0 <= rate < 1.0:
        raise ParameterError(f"noise rate must be in [0, 1), got {rate}")
    if num_classes < 2:
        raise ParameterError(f"need at least 2 classes, got {num_classes}")
    q = np.eye(num_classes)
    if rate == 0.0 or kind == "none":
        return q
    if kind == "symmetric":
        q = np.full((num_classes, num_classes), rate / (num_classes - 1))
        np.fill_diagonal(q, 1.0 - rate)
    elif kind == "pair":
        q = np.zeros((num_classes, num_classes))
        for i in range(num_classes):
            q[i, i] = 1.0 - rate
            q[i, (i + 1) % num_classes] = rate
    else:
        raise ParameterError(f"unknown noise kind {kind!r}")
    return q


@dataclass(frozen=True)
class NoiseSpec:
    kind: str = "none"
    rate: float = 0.0

    def matrix(self, num_classes):
        return build_noise_matrix(self.kind, self.rate, num_classes)


@dataclass(frozen=True)
class ScenarioSpec:
    """Class-set partition, blob geometry and noise model for one scenario.

    Source classes must be the contiguous ids 0..|C_s|-1 so that labels double
    as classifier output indices; target-private ids are unconstrained.
    """

    common: tuple
    source_private: tuple
    target_private: tuple
    blob_centers: dict          # class id -> center vector
    blob_std: float = 0.5
    samples_per_class: int = 300
    feature_dim: int = 2
    noise: NoiseSpec = field(default_factory=NoiseSpec)
    seed: int = 0

    @property
    def source_classes(self):
        return tuple(sorted(set(self.common) | set(self.source_private)))

    @property
    def target_classes(self):
        return tuple(sorted(set(self.common) | set(self.target_private)))

    def validate(self):
        common = set(self.common)
        if common & set(self.source_private) or common & set(self.target_private) \
                or set(self.source_private) & set(self.target_private):
            raise ConfigError("common / source-private / target-private sets must be disjoint")
        if self.samples_per_class < 1:
            raise ConfigError("samples_per_class must be >= 1")
        n_source = len(self.source_classes)
        if self.source_classes != tuple(range(n_source)):
            raise ConfigError(
                f"source class ids must be 0..{n_source - 1}, got {self.source_classes}")
        for c in set(self.source_classes) | set(self.target_classes):
            if c not in self.blob_centers:
                raise ConfigError(f"no blob center configured for class {c}")
            if len(self.blob_centers[c]) != self.feature_dim:
                raise ConfigError(f"center for class {c} has wrong dimension")


def toy_scenario(noise_kind="symmetric", noise_rate=0.2, seed=0,
                 samples_per_class=300, target_private=(3,)):
    """Default two-moons-free toy: three source blobs (one source-private),
    shared common blobs in the target, and a far-away target-private cluster.
    """
    centers = {
        0: (-2.0, 0.0),
        1: (2.0, 0.0),
        2: (0.0, 3.5),       # source-private
        3: (7.0, -7.0),      # target-private, far from every source blob
        4: (-7.0, -7.0),     # extra target-private classes for openness sweeps
        5: (-7.0, 7.0),
    }
    return ScenarioSpec(
        common=(0, 1),
        source_private=(2,),
        target_private=tuple(target_private),
        blob_centers=centers,
        blob_std=0.5,
        samples_per_class=samples_per_class,
        feature_dim=2,
        noise=NoiseSpec(noise_kind, noise_rate),
        seed=seed,
    )


@dataclass(frozen=True)
class Dataset:
    """Immutable sample table for one domain."""

    features: np.ndarray        # n x d float64
    observed_labels: np.ndarray  # n int64; NO_LABEL for target samples
    true_labels: np.ndarray     # n int64, evaluation only
    domain: str                 # "source" | "target"

    def __len__(self):
        return self.features.shape[0]

    @property
    def feature_dim(self):
        return self.features.shape[1]


def _sample_blobs(classes, spec, rng):
    feats, labels = [], []
    for c in classes:
        center = np.asarray(spec.blob_centers[c], dtype=np.float64)
        pts = rng.normal(0.0, spec.blob_std,
                         size=(spec.samples_per_class, spec.feature_dim)) + center
        feats.append(pts)
        labels.append(np.full(spec.samples_per_class, c, dtype=np.int64))
    return np.concatenate(feats), np.concatenate(labels)


def make_blobs(spec):
    """Generate (source, target) datasets; deterministic under spec.seed.

    Source labels come out clean; apply_label_noise corrupts them separately.
    """
    spec.validate()
    ss = np.random.SeedSequence(spec.seed)
    src_seed, tgt_seed = ss.spawn(2)
    sf, sl = _sample_blobs(spec.source_classes, spec, np.random.default_rng(src_seed))
    tf, tl = _sample_blobs(spec.target_classes, spec, np.random.default_rng(tgt_seed))
    source = Dataset(sf, sl.copy(), sl, "source")
    target = Dataset(tf, np.full(len(tl), NO_LABEL, dtype=np.int64), tl, "target")
    return source, target


def apply_label_noise(dataset, noise, seed):
    """Resample each observed label from row Q[true_label]; features and
    true labels are untouched."""
    if dataset.domain != "source":
        raise DataError("label noise applies to source datasets only")
    labels = dataset.true_labels
    num_classes = int(labels.max()) + 1 if len(labels) else 0
    if len(labels) and (labels.min() < 0):
        raise DataError("source labels must be nonnegative class ids")
    if noise.kind == "none" or noise.rate == 0.0 or len(labels) == 0:
        return replace(dataset, observed_labels=labels.copy())
    q = noise.matrix(num_classes)
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0x6e6f6973]))
    observed = np.empty_like(labels)
    for i, y in enumerate(labels):
        observed[i] = rng.choice(num_classes, p=q[y])
    return replace(dataset, observed_labels=observed)


def make_noisy_scenario(spec):
    """Blob generation plus label corruption in one call."""
    source, target = make_blobs(spec)
    source = apply_label_noise(source, spec.noise, spec.seed)
    return source, target


@dataclass(frozen=True)
class Batch:
    features: np.ndarray        # N x d
    labels_onehot: np.ndarray   # N x K for source batches, else None
    indices: np.ndarray         # dataset row ids


def one_hot(labels, num_classes):
    out = np.zeros((len(labels), num_classes))
    out[np.arange(len(labels)), labels] = 1.0
    return out


def minibatch_stream(dataset, batch_size, seed, epoch, num_classes=None):
    """Yield the epoch's batches under a per-(seed, epoch) permutation."""
    if batch_size < 1:
        raise ParameterError("batch_size must be >= 1")
    rng = np.random.default_rng(np.random.SeedSequence([seed, epoch]))
    perm = rng.permutation(len(dataset))
    with_labels = dataset.domain == "source"
    if with_labels and num_classes is None:
        num_classes = int(dataset.observed_labels.max()) + 1
    for start in range(0, len(dataset), batch_size):
        idx = perm[start:start + batch_size]
        labels = one_hot(dataset.observed_labels[idx], num_classes) if with_labels else None
        yield Batch(dataset.features[idx], labels, idx)


def endless_batches(dataset, batch_size, seed, num_classes=None):
    """Concatenated epoch streams, recycling forever."""
    epoch = 0
    while True:
        yield from minibatch_stream(dataset, batch_size, seed, epoch, num_classes)
        epoch += 1


def save_csv_dataset(dataset, path):
    d = dataset.feature_dim
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([f"f{i}" for i in range(d)] + ["label", "true_label", "domain"])
        for i in range(len(dataset)):
            obs = dataset.observed_labels[i]
            writer.writerow(
                [repr(float(v)) for v in dataset.features[i]]
                + ["" if obs == NO_LABEL else int(obs), int(dataset.true_labels[i]),
                   dataset.domain])


def load_csv_dataset(path):
    """Parse a dataset CSV written by save_csv_dataset (or hand-made to the
    same schema). Malformed cells raise ParseError with the line number."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError("empty file, expected a header row", line=1)
        feat_cols = [c for c in header if c.startswith("f")]
        d = len(feat_cols)
        if feat_cols != [f"f{i}" for i in range(d)] or "label" not in header \
                or "domain" not in header:
            raise ParseError(f"unexpected header {header}", line=1)
        has_true = "true_label" in header
        col = {name: i for i, name in enumerate(header)}
        feats, obs, true, domains = [], [], [], []
        for lineno, row in enumerate(reader, start=2):
            if len(row) != len(header):
                raise ParseError(f"expected {len(header)} cells, got {len(row)}", line=lineno)
            try:
                feats.append([float(row[i]) for i in range(d)])
            except ValueError:
                raise ParseError("non-numeric feature value", line=lineno)
            raw = row[col["label"]]
            try:
                obs.append(NO_LABEL if raw == "" else int(raw))
            except ValueError:
                raise ParseError(f"bad label {raw!r}", line=lineno)
            if has_true:
                try:
                    true.append(int(row[col["true_label"]]))
                except ValueError:
                    raise ParseError("bad true_label value", line=lineno)
            domains.append(row[col["domain"]])
    if domains and len(set(domains)) != 1:
        raise DataError("mixed domains in one dataset file")
    domain = domains[0] if domains else "source"
    features = np.asarray(feats, dtype=np.float64).reshape(len(feats), d)
    observed = np.asarray(obs, dtype=np.int64)
    true_arr = np.asarray(true if has_true else obs, dtype=np.int64)
    return Dataset(features, observed, true_arr, domain)
