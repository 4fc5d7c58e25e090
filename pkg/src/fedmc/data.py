"""Dataset construction: IDX ingestion, synthetic generation, and Dirichlet
label-skew partitioning into client shards."""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import ConsistencyError, FormatError, PartitionInfeasibleError

IDX_IMAGE_MAGIC = 0x00000803
IDX_LABEL_MAGIC = 0x00000801

#: alpha value meaning "no label skew": uniform shuffle into near-equal shards.
IID = math.inf


@dataclass(frozen=True)
class Dataset:
    """Feature matrix (n x d, float64) plus per-sample labels.

    Labels are integer class ids for classification data and may be real
    targets for single-output regression use.
    """

    features: np.ndarray
    labels: np.ndarray
    name: str = ""

    def __post_init__(self):
        feats = np.ascontiguousarray(self.features, dtype=np.float64)
        labels = np.ascontiguousarray(self.labels)
        if feats.ndim != 2:
            raise ValueError(f"features must be 2-d, got shape {feats.shape}")
        if feats.shape[0] == 0:
            raise ValueError("dataset must contain at least one sample")
        if labels.shape != (feats.shape[0],):
            raise ValueError(
                f"labels must be 1-d of length {feats.shape[0]}, got {labels.shape}")
        if not np.isfinite(feats).all():
            raise ValueError("features contain non-finite values")
        feats.setflags(write=False)
        labels.setflags(write=False)
        object.__setattr__(self, "features", feats)
        object.__setattr__(self, "labels", labels)

    @property
    def num_samples(self) -> int:
        return self.features.shape[0]

    @property
    def num_features(self) -> int:
        return self.features.shape[1]

    def slice(self, start: int, stop: int) -> "Dataset":
        """Contiguous row range as a zero-copy view (hot path for evaluation)."""
        return _dataset_view(self.features[start:stop],
                             self.labels[start:stop], self.name)


def _dataset_view(features, labels, name) -> Dataset:
    """Build a Dataset from already-validated arrays without re-checking."""
    ds = object.__new__(Dataset)
    object.__setattr__(ds, "features", features)
    object.__setattr__(ds, "labels", labels)
    object.__setattr__(ds, "name", name)
    return ds


def subset(data: Dataset, indices) -> Dataset:
    """Rows selected by position, preserving the given order."""
    idx = np.asarray(indices, dtype=np.int64).ravel()
    if idx.size == 0:
        raise ValueError("subset needs at least one index")
    if idx.min() < 0 or idx.max() >= data.num_samples:
        raise ValueError(f"indices must lie in [0, {data.num_samples})")
    feats = data.features[idx]
    labels = data.labels[idx]
    feats.setflags(write=False)
    labels.setflags(write=False)
    return _dataset_view(feats, labels, data.name)


@dataclass(frozen=True)
class Partition:
    """Disjoint client index sets covering [0, n)."""

    client_indices: tuple
    alpha: float
    seed: int
    num_samples: int = field(default=0)

    def __post_init__(self):
        clients = tuple(np.ascontiguousarray(c, dtype=np.int64) for c in self.client_indices)
        if not clients:
            raise ValueError("partition needs at least one client")
        total = int(sum(c.size for c in clients))
        n = self.num_samples or total
        seen = np.concatenate(clients)
        if any(c.size == 0 for c in clients):
            raise ValueError("every client must receive at least one sample")
        if total != n or np.unique(seen).size != n or seen.min() < 0 or seen.max() >= n:
            raise ValueError("client index sets must be disjoint and cover [0, n)")
        for c in clients:
            c.setflags(write=False)
        object.__setattr__(self, "client_indices", clients)
        object.__setattr__(self, "num_samples", n)

    @property
    def num_clients(self) -> int:
        return len(self.client_indices)

    @property
    def client_sizes(self) -> np.ndarray:
        return np.array([c.size for c in self.client_indices], dtype=np.int64)

    def weights(self) -> np.ndarray:
        """Sample-count weights n_k / n."""
        sizes = self.client_sizes
        return sizes / sizes.sum()

    def class_proportions(self, labels, num_classes: int) -> np.ndarray:
        """Realized per-class client shares, shape (num_classes, K)."""
        labels = np.asarray(labels, dtype=np.int64)
        out = np.zeros((num_classes, self.num_clients))
        for k, idx in enumerate(self.client_indices):
            counts = np.bincount(labels[idx], minlength=num_classes)
            out[:, k] = counts
        totals = out.sum(axis=1, keepdims=True)
        totals[totals == 0.0] = 1.0
        return out / totals


def _largest_remainder(proportions: np.ndarray, count: int) -> np.ndarray:
    """Integer class counts per client matching `proportions` exactly."""
    raw = proportions * count
    counts = np.floor(raw).astype(np.int64)
    short = count - int(counts.sum())
    if short > 0:
        order = np.argsort(-(raw - counts), kind="stable")
        counts[order[:short]] += 1
    return counts


def _assign_by_proportions(labels, num_classes, proportions, rng):
    """Shuffle each class and slice it across clients by the given shares."""
    num_clients = proportions.shape[1]
    per_client = [[] for _ in range(num_clients)]
    for c in range(num_classes):
        class_idx = np.flatnonzero(labels == c)
        if class_idx.size == 0:
            continue
        class_idx = rng.permutation(class_idx)
        counts = _largest_remainder(proportions[c], class_idx.size)
        start = 0
        for k in range(num_clients):
            per_client[k].append(class_idx[start:start + counts[k]])
            start += counts[k]
    return [np.concatenate(parts) if parts else np.empty(0, dtype=np.int64)
            for parts in per_client]


def dirichlet_partition(labels, num_classes: int, num_clients: int, alpha: float,
                        seed: int) -> Partition:
    """Label-skew split: per class, client shares are drawn Dir(alpha) and the
    class's samples are dealt out by largest-remainder rounding. ``alpha=IID``
    (infinity) means a uniform shuffle into near-equal shards. Draws that
    leave any client empty are redrawn with a reseeded stream, up to 100
    attempts.
    """
    labels = np.asarray(labels, dtype=np.int64).ravel()
    n = labels.size
    if num_clients < 1:
        raise ValueError("need at least one client")
    if num_clients > n:
        raise ValueError(f"cannot split {n} samples across {num_clients} clients")
    if not (alpha == IID or alpha > 0):
        raise ValueError(f"alpha must be positive or IID, got {alpha}")
    if num_classes < 1 or (labels.min() < 0 or labels.max() >= num_classes):
        raise ValueError(f"labels must be class ids in [0, {num_classes})")

    for attempt in range(100):
        rng = np.random.default_rng(np.random.SeedSequence((seed, attempt)))
        if alpha == IID:
            order = rng.permutation(n)
            clients = [np.sort(part) for part in np.array_split(order, num_clients)]
        else:
            proportions = rng.dirichlet(np.full(num_clients, alpha), size=num_classes)
            clients = _assign_by_proportions(labels, num_classes, proportions, rng)
        if all(c.size > 0 for c in clients):
            return Partition(tuple(clients), alpha, seed, n)
    raise PartitionInfeasibleError(
        f"no partition without empty clients in 100 draws "
        f"(n={n}, clients={num_clients}, alpha={alpha})")


def partition_like(train_partition: Partition, train_labels, labels,
                   num_classes: int) -> Partition:
    """Split another label set (e.g. the test split) by the same realized
    per-class client proportions as an existing partition."""
    labels = np.asarray(labels, dtype=np.int64).ravel()
    proportions = train_partition.class_proportions(train_labels, num_classes)
    for attempt in range(100):
        rng = np.random.default_rng(
            np.random.SeedSequence((train_partition.seed, 1 + attempt, 7)))
        clients = _assign_by_proportions(labels, num_classes, proportions, rng)
        if all(c.size > 0 for c in clients):
            return Partition(tuple(clients), train_partition.alpha,
                             train_partition.seed, labels.size)
    raise PartitionInfeasibleError("proportions leave a client with no samples")


def _read_exact(fh, count: int, path, what: str) -> bytes:
    data = fh.read(count)
    if len(data) != count:
        raise FormatError(
            f"{path}: truncated {what}: expected {count} bytes, got {len(data)}")
    return data


def load_idx(images_path, labels_path) -> Dataset:
    """Read a big-endian IDX image/label file pair.

    Images (magic 0x00000803, u8, n x rows x cols) are flattened row-major and
    scaled by 1/255; labels (magic 0x00000801, u8, n) become class ids.
    """
    with open(images_path, "rb") as fh:
        magic, count, rows, cols = struct.unpack(
            ">iiii", _read_exact(fh, 16, images_path, "image header"))
        if magic != IDX_IMAGE_MAGIC:
            raise FormatError(
                f"{images_path}: bad image magic 0x{magic & 0xffffffff:08x}, "
                f"expected 0x{IDX_IMAGE_MAGIC:08x}")
        if min(count, rows, cols) < 0:
            raise FormatError(f"{images_path}: negative dimension in header")
        raw = _read_exact(fh, count * rows * cols, images_path, "image payload")
        images = np.frombuffer(raw, dtype=np.uint8).reshape(count, rows * cols)
    with open(labels_path, "rb") as fh:
        magic, label_count = struct.unpack(
            ">ii", _read_exact(fh, 8, labels_path, "label header"))
        if magic != IDX_LABEL_MAGIC:
            raise FormatError(
                f"{labels_path}: bad label magic 0x{magic & 0xffffffff:08x}, "
                f"expected 0x{IDX_LABEL_MAGIC:08x}")
        if label_count < 0:
            raise FormatError(f"{labels_path}: negative count in header")
        labels = np.frombuffer(_read_exact(fh, label_count, labels_path,
                                           "label payload"), dtype=np.uint8)
    if label_count != count:
        raise ConsistencyError(
            f"image count {count} does not match label count {label_count}")
    return Dataset(images.astype(np.float64) / 255.0,
                   labels.astype(np.int64), name=str(images_path))


def write_idx(images, labels, images_path, labels_path):
    """Inverse of load_idx for u8 images shaped (n, rows, cols)."""
    images = np.ascontiguousarray(images, dtype=np.uint8)
    labels = np.ascontiguousarray(labels, dtype=np.uint8)
    if images.ndim != 3 or labels.shape != (images.shape[0],):
        raise ValueError("expected images (n, rows, cols) and labels (n,)")
    with open(images_path, "wb") as fh:
        fh.write(struct.pack(">iiii", IDX_IMAGE_MAGIC, *images.shape))
        fh.write(images.tobytes())
    with open(labels_path, "wb") as fh:
        fh.write(struct.pack(">ii", IDX_LABEL_MAGIC, labels.shape[0]))
        fh.write(labels.tobytes())


def synth_gaussian(num_classes: int, per_class: int, dims: int, spread: float,
                   seed: int) -> Dataset:
    """Gaussian blobs: class means uniform on the unit sphere, isotropic
    per-class noise with the given spread. Samples are class-major."""
    if min(num_classes, per_class, dims) < 1:
        raise ValueError("num_classes, per_class and dims must all be >= 1")
    if spread < 0:
        raise ValueError(f"spread must be nonnegative, got {spread}")
    rng = np.random.default_rng(np.random.SeedSequence((seed, 0xB10B)))
    means = rng.standard_normal((num_classes, dims))
    means /= np.linalg.norm(means, axis=1, keepdims=True)
    feats = np.repeat(means, per_class, axis=0)
    if spread > 0:
        feats = feats + spread * rng.standard_normal(feats.shape)
    labels = np.repeat(np.arange(num_classes, dtype=np.int64), per_class)
    return Dataset(feats, labels, name=f"synth(C={num_classes},m={per_class})")
