"""Counter-based uniform streams, one per replica.

Replica r of a run with seed s owns the stream keyed by splitmix64(s ^ r); its
d-th uniform is splitmix64(key + (d + 1) * golden) >> 11, scaled to [0, 1).
Any replica's numbers can therefore be produced independently of how the
replicas are partitioned across workers, and many replicas are generated in
one vectorised call.
"""

import os

import numpy as np

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_MASK64 = (1 << 64) - 1
CHUNK = 8192


def _mix(z: np.ndarray) -> np.ndarray:
    """SplitMix64 finaliser; works in place on ``z`` (a fresh array)."""
    with np.errstate(over="ignore"):
        z ^= z >> np.uint64(30)
        z *= _M1
        z ^= z >> np.uint64(27)
        z *= _M2
        z ^= z >> np.uint64(31)
    return z


def stream_keys(seed: int, replicas: np.ndarray) -> np.ndarray:
    r = np.asarray(replicas, dtype=np.uint64)
    return _mix(np.uint64(int(seed) & _MASK64) ^ r)


def uniforms(keys: np.ndarray, counter: int) -> np.ndarray:
    """The ``counter``-th uniform of every stream in ``keys``."""
    with np.errstate(over="ignore"):
        z = keys + np.uint64((counter + 1) & _MASK64) * _GOLDEN
    z = _mix(z)
    z >>= np.uint64(11)
    u = z.astype(np.float64)
    u *= 1.0 / 9007199254740992.0
    return u


def thread_cap() -> int:
    env = os.environ.get("COUPDOOB_THREADS")
    cpus = os.cpu_count() or 1
    if env:
        try:
            return max(1, min(int(env), cpus))
        except ValueError:
            pass
    return cpus


def chunks(replicas: int, size: int = CHUNK):
    for lo in range(0, replicas, size):
        yield lo, min(lo + size, replicas)
