import csv
import logging
import struct
from typing import Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np

from parasgd.lib import STREAM_BATCH, STREAM_SHARD, STREAM_SYNTHETIC, derive_seed
from parasgd.models import Batch, Dataset, Shard
from parasgd.tensor import NDArray

logger = logging.getLogger(__name__)

IDX_IMAGES_MAGIC = 2051  # 0x00000803: unsigned byte, rank 3
IDX_LABELS_MAGIC = 2049  # 0x00000801: unsigned byte, rank 1

# real value x is written as byte clip(round(127.5 + 12.75 x)), ie. +-10 covers the range
PIXEL_OFFSET = 127.5
PIXEL_SCALE = 12.75


class DataFormatError(ValueError):
    pass


def generate_synthetic(
    num_classes: int,
    shape: Union[int, Sequence[int]],
    per_class: int,
    separation: float,
    seed: int,
) -> Dataset:
    """
    Gaussian class clusters with unit within-class variance

    Class means are `separation / sqrt(2)` times orthonormal directions, so
    every pair of means is exactly `separation` apart (random unit directions
    are used when the dimension is smaller than num_classes).
    Examples are laid out class by class.
    """
    if num_classes < 1:
        raise ValueError(f"num_classes must be >= 1, got {num_classes}")
    if per_class < 1:
        raise ValueError(f"per_class must be >= 1, got {per_class}")
    if separation < 0:
        raise ValueError(f"separation must be >= 0, got {separation}")
    example_shape: Tuple[int, ...] = (1, 1, shape) if isinstance(shape, int) else tuple(shape)
    if len(example_shape) != 3 or any(e < 1 for e in example_shape):
        raise ValueError(f"shape must be a dimension or (c, h, w), got {shape}")

    rng = np.random.default_rng(derive_seed(seed, STREAM_SYNTHETIC))
    dim = int(np.prod(example_shape))
    gaussian = rng.standard_normal((dim, num_classes))
    if dim >= num_classes:
        directions, _ = np.linalg.qr(gaussian)
    else:
        directions = gaussian / np.linalg.norm(gaussian, axis=0, keepdims=True)
    means = (separation / np.sqrt(2.0)) * directions.T  # (num_classes, dim)

    noise = rng.standard_normal((num_classes, per_class, dim))
    images = (means[:, None, :] + noise).reshape(num_classes * per_class, *example_shape)
    labels = np.repeat(np.arange(num_classes, dtype=np.int64), per_class)
    logger.debug(
        "Generated %d examples, %d classes, shape %s", len(labels), num_classes, example_shape
    )
    return Dataset(images=NDArray(images, copy=False), labels=labels, num_classes=num_classes)


def _read_idx(path: str, magic: int, rank: int) -> np.ndarray:
    with open(path, "rb") as f:
        content = f.read()
    header_size = 4 + 4 * rank
    if len(content) < header_size:
        raise DataFormatError(f"{path}: truncated IDX header")
    found_magic, *dims = struct.unpack(">" + "I" * (1 + rank), content[:header_size])
    if found_magic != magic:
        raise DataFormatError(f"{path}: bad magic number {found_magic} (expected {magic})")
    expected = int(np.prod(dims))
    body = content[header_size:]
    if len(body) < expected:
        raise DataFormatError(f"{path}: truncated, {len(body)} of {expected} bytes")
    return np.frombuffer(body, dtype=np.uint8, count=expected).reshape(dims)


def load_idx(images_path: str, labels_path: str, num_classes: Optional[int] = None) -> Dataset:
    """
    Standard big-endian IDX pair (rank-3 unsigned byte images, rank-1 labels),
    pixels rescaled to p / 255
    """
    images = _read_idx(images_path, IDX_IMAGES_MAGIC, 3)
    labels = _read_idx(labels_path, IDX_LABELS_MAGIC, 1).astype(np.int64)
    if images.shape[0] != labels.shape[0]:
        raise DataFormatError(
            f"{images.shape[0]} images in {images_path} but {labels.shape[0]} labels "
            f"in {labels_path}"
        )
    if images.shape[0] == 0:
        raise DataFormatError(f"{images_path}: no images")
    classes = num_classes if num_classes is not None else int(labels.max()) + 1
    if labels.max() >= classes:
        raise DataFormatError(f"{labels_path}: label {labels.max()} outside [0, {classes})")
    n, height, width = images.shape
    pixels = images.reshape(n, 1, height, width).astype(np.float64) / 255.0
    logger.info("Loaded %d IDX examples (%dx%d) from %s", n, height, width, images_path)
    return Dataset(images=NDArray(pixels, copy=False), labels=labels, num_classes=classes)


def load_csv(path: str, layout: Sequence[int], num_classes: int) -> Dataset:
    """
    Header-less `label,p0,p1,...` rows; `layout` is the (c, h, w) of one example.
    Pixels are integers in 0..255, rescaled to p / 255.
    """
    if len(layout) != 3:
        raise ValueError(f"layout must be (c, h, w), got {layout}")
    width = int(np.prod(layout))
    labels: List[int] = []
    rows: List[List[int]] = []
    with open(path, newline="") as f:
        for line_no, row in enumerate(csv.reader(f), start=1):
            if not row:
                continue
            if len(row) != width + 1:
                raise DataFormatError(
                    f"{path}:{line_no}: expected {width + 1} fields, got {len(row)}"
                )
            try:
                label = int(row[0])
                pixels = [int(p) for p in row[1:]]
            except ValueError as e:
                raise DataFormatError(f"{path}:{line_no}: {e}") from None
            if min(pixels, default=0) < 0 or max(pixels, default=0) > 255:
                raise DataFormatError(f"{path}:{line_no}: pixels must be integers in 0..255")
            if not 0 <= label < num_classes:
                raise DataFormatError(f"{path}:{line_no}: label {label} outside [0, {num_classes})")
            labels.append(label)
            rows.append(pixels)
    if not rows:
        raise DataFormatError(f"{path}: no rows")
    images = np.asarray(rows, dtype=np.float64).reshape(len(rows), *layout) / 255.0
    logger.info("Loaded %d CSV examples from %s", len(rows), path)
    return Dataset(
        images=NDArray(images, copy=False),
        labels=np.asarray(labels, dtype=np.int64),
        num_classes=num_classes,
    )


def to_pixels(dataset: Dataset) -> np.ndarray:
    values = dataset.images.array.reshape(len(dataset), -1)
    return np.clip(np.round(PIXEL_OFFSET + PIXEL_SCALE * values), 0, 255).astype(np.uint8)


def write_csv(dataset: Dataset, path: str) -> None:
    """Write in the layout load_csv() reads, real values quantized to bytes"""
    pixels = to_pixels(dataset)
    with open(path, "w", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        for label, row in zip(dataset.labels, pixels):
            writer.writerow([int(label), *row.tolist()])


def shard(dataset: Dataset, workers: int, seed: int) -> List[Shard]:
    """
    Shuffle once, then split contiguously; sizes differ by at most one,
    larger shards first. eg. n=10, workers=3 -> sizes [4, 3, 3]
    """
    n = len(dataset)
    if workers < 1:
        raise ValueError(f"Need at least one worker, got {workers}")
    if workers > n:
        raise ValueError(f"Cannot split {n} examples among {workers} workers")
    permutation = np.random.default_rng(derive_seed(seed, STREAM_SHARD)).permutation(n)
    base, extra = divmod(n, workers)
    shards: List[Shard] = []
    start = 0
    for worker_id in range(workers):
        stop = start + base + (1 if worker_id < extra else 0)
        shards.append(Shard(dataset, worker_id, permutation, start, stop))
        start = stop
    return shards


class BatchIterator:
    """
    Endless batches from one shard

    Each epoch visits the shard in a fresh order drawn from a stream derived
    from (seed, worker id, epoch) and drops the final partial batch.
    """

    def __init__(self, shard: Shard, batch_size: int, seed: int):
        if batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {batch_size}")
        if batch_size > len(shard):
            raise ValueError(
                f"Batch size {batch_size} exceeds shard {shard.worker_id} size {len(shard)}"
            )
        self.shard = shard
        self.batch_size = batch_size
        self.seed = seed
        self.epoch = 0
        self._batches: Iterator[Batch] = iter(())

    @property
    def batches_per_epoch(self) -> int:
        return len(self.shard) // self.batch_size

    def _epoch_batches(self, epoch: int) -> Iterator[Batch]:
        rng = np.random.default_rng(
            derive_seed(self.seed, STREAM_BATCH, self.shard.worker_id, epoch)
        )
        order = self.shard.indices[rng.permutation(len(self.shard))]
        for i in range(self.batches_per_epoch):
            yield self.shard.dataset.batch(order[i * self.batch_size : (i + 1) * self.batch_size])

    def __iter__(self) -> "BatchIterator":
        return self

    def __next__(self) -> Batch:
        batch = next(self._batches, None)
        if batch is None:
            self._batches = self._epoch_batches(self.epoch)
            self.epoch += 1
            batch = next(self._batches)
        return batch


def batch_iterator(shard: Shard, batch_size: int, seed: int) -> BatchIterator:
    return BatchIterator(shard, batch_size, seed)

