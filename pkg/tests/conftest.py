import struct

import numpy as np
import pytest

from parasgd.data import generate_synthetic
from parasgd.models import CostModel
from parasgd.schemes import Workload
from parasgd.settings import mlp


def make_workload(
    batch_size: int = 8,
    dim: int = 16,
    classes: int = 3,
    per_class: int = 80,
    seed: int = 0,
    learning_rate: float = 0.05,
    momentum: float = 0.0,
    threads: int = 1,
) -> Workload:
    dataset = generate_synthetic(classes, dim, per_class, separation=4.0, seed=seed)
    train, validation = dataset.split(0.25, seed)
    return Workload(
        net_params=mlp(batch_size, (1, 1, dim), classes, hidden=12),
        train=train,
        validation=validation,
        learning_rate=learning_rate,
        momentum=momentum,
        seed=seed,
        threads=threads,
    )


@pytest.fixture
def workload() -> Workload:
    return make_workload()


@pytest.fixture
def workload_factory():
    return make_workload


@pytest.fixture
def unit_cost() -> CostModel:
    return CostModel(C_b=1.0, S=0.0)


@pytest.fixture
def write_idx(tmp_path):
    """Writes (images [n, h, w], labels [n]) as an IDX pair; returns both paths"""

    def write(images: np.ndarray, labels: np.ndarray):
        images_path = tmp_path / "images.idx"
        labels_path = tmp_path / "labels.idx"
        n, h, w = images.shape
        header = struct.pack(">IIII", 2051, n, h, w)
        images_path.write_bytes(header + images.astype(np.uint8).tobytes())
        labels_header = struct.pack(">II", 2049, len(labels))
        labels_path.write_bytes(labels_header + labels.astype(np.uint8).tobytes())
        return str(images_path), str(labels_path)

    return write
