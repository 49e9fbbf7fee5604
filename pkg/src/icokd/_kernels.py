"""Hot numeric kernels with a numba path and a pure-numpy fallback.

The numba path is used when numba imports cleanly and the environment
variable ``ICOKD_NO_NUMBA`` is unset (or ``0``).  Both paths produce
bit-identical results; the test-suite checks this and
``benchmarks/bench_kernels.py`` compares their speed.

Kernels
-------
counter_uniforms(seed, start, n)
    Counter-based uniform stream: round ``k`` always gets the same double,
    whatever chunking or worker layout produced it.
sample_categorical(cdf, u)
    Inverse-CDF sampling; zero-width bins are never selected.
bilinear_grid_min(coeffs, n)
    Grid minimum of ``c0 + c1 F + c2 G + c3 F G`` over ``[0, 1]^2``.
"""

from __future__ import annotations

import os

import numpy as np

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S11 = np.uint64(11)
_INV53 = 1.0 / 9007199254740992.0  # 2**-53


def _disabled() -> bool:
    return os.environ.get("ICOKD_NO_NUMBA", "0").strip().lower() not in ("", "0", "false", "no")


# ---------------------------------------------------------------------------
# numpy implementations
# ---------------------------------------------------------------------------


def _mix64_np(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> _S30)) * _M1
    z = (z ^ (z >> _S27)) * _M2
    return z ^ (z >> _S31)


def _seed_key(seed: int) -> np.uint64:
    s = np.array([seed & 0xFFFFFFFFFFFFFFFF], dtype=np.uint64)
    return _mix64_np(s + _GOLDEN)[0]


def counter_uniforms_np(seed: int, start: int, n: int) -> np.ndarray:
    key = _seed_key(seed)
    idx = np.arange(start, start + n, dtype=np.uint64) + np.uint64(1)
    with np.errstate(over="ignore"):
        z = _mix64_np(key + idx * _GOLDEN)
    return (z >> _S11).astype(np.float64) * _INV53


def sample_categorical_np(cdf: np.ndarray, u: np.ndarray) -> np.ndarray:
    return np.searchsorted(cdf, u, side="right").astype(np.int64)


def bilinear_grid_min_np(coeffs: np.ndarray, n: int) -> tuple[float, int, int]:
    g = np.linspace(0.0, 1.0, n)
    c0, c1, c2, c3 = coeffs
    vals = c0 + c1 * g[:, None] + c2 * g[None, :] + c3 * g[:, None] * g[None, :]
    k = int(np.argmin(vals))
    a, b = divmod(k, n)
    return float(vals[a, b]), a, b


# ---------------------------------------------------------------------------
# numba implementations
# ---------------------------------------------------------------------------

try:  # pragma: no cover - exercised implicitly when numba is present
    from numba import njit

    @njit(cache=True, nogil=True)
    def _mix64_nb(z):
        z = (z ^ (z >> _S30)) * _M1
        z = (z ^ (z >> _S27)) * _M2
        return z ^ (z >> _S31)

    @njit(cache=True, nogil=True)
    def _counter_uniforms_nb(key, start, n):
        out = np.empty(n, dtype=np.float64)
        one = np.uint64(1)
        for k in range(n):
            idx = np.uint64(start + k) + one
            z = _mix64_nb(key + idx * _GOLDEN)
            out[k] = np.float64(z >> _S11) * _INV53
        return out

    @njit(cache=True, nogil=True)
    def _sample_categorical_nb(cdf, u):
        m = cdf.shape[0]
        out = np.empty(u.shape[0], dtype=np.int64)
        for k in range(u.shape[0]):
            lo = 0
            hi = m
            x = u[k]
            while lo < hi:
                mid = (lo + hi) // 2
                if cdf[mid] <= x:
                    lo = mid + 1
                else:
                    hi = mid
            out[k] = lo
        return out

    @njit(cache=True, nogil=True)
    def _bilinear_grid_min_nb(coeffs, n):
        c0 = coeffs[0]
        c1 = coeffs[1]
        c2 = coeffs[2]
        c3 = coeffs[3]
        best = np.inf
        ba = 0
        bb = 0
        step = 1.0 / (n - 1)
        for a in range(n):
            f = a * step if a < n - 1 else 1.0
            for b in range(n):
                g = b * step if b < n - 1 else 1.0
                v = c0 + c1 * f + c2 * g + c3 * f * g
                if v < best:
                    best = v
                    ba = a
                    bb = b
        return best, ba, bb

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    HAVE_NUMBA = False


def counter_uniforms_nb(seed: int, start: int, n: int) -> np.ndarray:
    return _counter_uniforms_nb(_seed_key(seed), np.int64(start), np.int64(n))


def sample_categorical_nb(cdf: np.ndarray, u: np.ndarray) -> np.ndarray:
    return _sample_categorical_nb(np.ascontiguousarray(cdf, dtype=np.float64),
                                  np.ascontiguousarray(u, dtype=np.float64))


def bilinear_grid_min_nb(coeffs: np.ndarray, n: int) -> tuple[float, int, int]:
    v, a, b = _bilinear_grid_min_nb(np.asarray(coeffs, dtype=np.float64), np.int64(n))
    return float(v), int(a), int(b)


USE_NUMBA = HAVE_NUMBA and not _disabled()
BACKEND = "numba" if USE_NUMBA else "numpy"

if USE_NUMBA:
    counter_uniforms = counter_uniforms_nb
    sample_categorical = sample_categorical_nb
    bilinear_grid_min = bilinear_grid_min_nb
else:
    counter_uniforms = counter_uniforms_np
    sample_categorical = sample_categorical_np
    bilinear_grid_min = bilinear_grid_min_np
