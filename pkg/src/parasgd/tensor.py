"""
Dense float64 tensors.

NDArray wraps a row-major numpy array with an explicit shape and refuses
to hold NaN or infinity. Consumers treat it as immutable; the only
mutating method, `sub_scaled_`, is reserved for the worker owning it.
"""

from typing import Iterable, Sequence, Tuple, Union

import numpy as np

Shape = Tuple[int, ...]


class ShapeError(ValueError):
    pass


class NonFiniteError(FloatingPointError):
    pass


def _check_finite(array: np.ndarray, what: str = "result") -> None:
    if not np.isfinite(array).all():
        raise NonFiniteError(f"Non-finite value in {what}")


class NDArray:
    __slots__ = ("_array",)

    def __init__(self, array: Union[np.ndarray, Sequence[float]], copy: bool = True):
        if copy:
            arr = np.array(array, dtype=np.float64, order="C")
        else:
            arr = np.asarray(array, dtype=np.float64, order="C")
        if arr.ndim == 0:
            raise ShapeError("NDArray needs rank >= 1")
        if any(extent < 1 for extent in arr.shape):
            raise ShapeError(f"Extents must be positive, got {arr.shape}")
        _check_finite(arr, "NDArray contents")
        self._array = arr

    @property
    def shape(self) -> Shape:
        return tuple(self._array.shape)

    @property
    def size(self) -> int:
        return int(self._array.size)

    @property
    def data(self) -> np.ndarray:
        """Flat row-major copy of the contents."""
        return self._array.ravel().copy()

    @property
    def array(self) -> np.ndarray:
        """Read-only view, for kernels that compute on raw numpy."""
        view = self._array.view()
        view.flags.writeable = False
        return view

    def copy(self) -> "NDArray":
        return NDArray(self._array)

    def tolist(self) -> list:
        return self._array.tolist()

    def equals(self, other: "NDArray") -> bool:
        """Bitwise equality of shape and contents."""
        return self.shape == other.shape and bool(np.array_equal(self._array, other._array))

    def sub_scaled_(self, other: "NDArray", factor: float) -> None:
        """In place: self <- self - factor * other."""
        _require_same_shape(self, other)
        updated = self._array - factor * other._array
        _check_finite(updated, "in-place update")
        self._array = updated

    def __repr__(self) -> str:
        return f"NDArray(shape={self.shape})"


def _wrap(array: np.ndarray) -> NDArray:
    # fresh numpy results, not shared with anyone
    return NDArray(array, copy=False)


def _require_same_shape(a: NDArray, b: NDArray) -> None:
    if a.shape != b.shape:
        raise ShapeError(f"Shape mismatch: {a.shape} vs {b.shape}")


def create(shape: Sequence[int], fill: Union[float, Iterable[float]] = 0.0) -> NDArray:
    extents = tuple(int(e) for e in shape)
    if not extents or any(e < 1 for e in extents):
        raise ShapeError(f"Extents must be positive, got {extents}")
    if isinstance(fill, (int, float)):
        return _wrap(np.full(extents, float(fill), dtype=np.float64))
    values = np.asarray(list(fill), dtype=np.float64)
    expected = int(np.prod(extents))
    if values.size != expected:
        raise ShapeError(f"Got {values.size} values for shape {extents} ({expected} needed)")
    return NDArray(values.reshape(extents))


def from_numpy(array: np.ndarray) -> NDArray:
    return NDArray(array)


_ELEMENTWISE = {
    "add": np.add,
    "sub": np.subtract,
    "mul": np.multiply,
}


def elementwise(a: NDArray, b: NDArray, op: str) -> NDArray:
    try:
        ufunc = _ELEMENTWISE[op]
    except KeyError:
        raise ValueError(f"Unknown op {op!r} (valid: {', '.join(_ELEMENTWISE)})") from None
    _require_same_shape(a, b)
    with np.errstate(over="ignore", invalid="ignore"):
        return _wrap(ufunc(a.array, b.array))


def add(a: NDArray, b: NDArray) -> NDArray:
    return elementwise(a, b, "add")


def sub(a: NDArray, b: NDArray) -> NDArray:
    return elementwise(a, b, "sub")


def mul(a: NDArray, b: NDArray) -> NDArray:
    return elementwise(a, b, "mul")


def scale(a: NDArray, c: float) -> NDArray:
    with np.errstate(over="ignore", invalid="ignore"):
        return _wrap(a.array * float(c))


def matmul(a: NDArray, b: NDArray) -> NDArray:
    if len(a.shape) != 2 or len(b.shape) != 2:
        raise ShapeError(f"matmul needs rank-2 operands, got {a.shape} and {b.shape}")
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"Inner extents differ: {a.shape} x {b.shape}")
    with np.errstate(over="ignore", invalid="ignore"):
        return _wrap(a.array @ b.array)


def mean_collection(items: Sequence[NDArray]) -> NDArray:
    """
    Entrywise mean, accumulated in list order

    The fixed order makes the result independent of how the items were
    produced (sequentially or on a thread pool).
    """
    if not items:
        raise ValueError("mean_collection of an empty list")
    first = items[0]
    total = first.array.copy()
    for item in items[1:]:
        _require_same_shape(first, item)
        total += item.array
    return _wrap(total / len(items))


def argmax_rows(a: NDArray) -> np.ndarray:
    if len(a.shape) != 2:
        raise ShapeError(f"argmax_rows needs a rank-2 array, got {a.shape}")
    # np.argmax returns the first occurrence: ties go to the lowest index
    return np.argmax(a.array, axis=1)
