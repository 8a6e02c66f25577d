from typing import Optional

MASK64 = (1 << 64) - 1

# stream tags, so different consumers of one global seed never share a stream
STREAM_INIT = 1
STREAM_SHARD = 2
STREAM_BATCH = 3
STREAM_SYNTHETIC = 4
STREAM_SPLIT = 5


def mix64(value: int) -> int:
    """SplitMix64 finalizer: a bijective 64-bit mixing function."""
    value = (value + 0x9E3779B97F4A7C15) & MASK64
    value = ((value ^ (value >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    value = ((value ^ (value >> 27)) * 0x94D049BB133111EB) & MASK64
    return value ^ (value >> 31)


def derive_seed(*parts: int) -> int:
    """
    Fold integers into one 64-bit seed

    eg. derive_seed(global_seed, STREAM_BATCH, worker_id, epoch)
    Order matters: derive_seed(1, 2) != derive_seed(2, 1)
    """
    state = 0
    for part in parts:
        state = mix64(state ^ (part & MASK64))
    return state


def coerce_to_int(string: str) -> Optional[int]:
    try:
        return int(string)
    except ValueError:
        return None


def coerce_to_float(string: str) -> Optional[float]:
    try:
        return float(string)
    except ValueError:
        return None


def parse_extents(string: str) -> tuple:
    """
    Parse extents written with 'x' or ',' separators

    eg. '50x1x28x28' -> (50, 1, 28, 28)
        '5,5'        -> (5, 5)
    """
    parts = [p.strip() for p in string.replace("x", ",").split(",") if p.strip()]
    extents = tuple(int(p) for p in parts)
    if not extents:
        raise ValueError(f"No extents in {string!r}")
    return extents
