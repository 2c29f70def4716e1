"""Monte Carlo simulation of SDEs with counter-based random numbers.

Every Gaussian increment is a pure function of ``(seed, step, path,
channel)``: a Philox4x32-10 block is generated for the counter
``(step, path, channel pair, stream)`` and turned into two normals with the
Box-Muller transform.  Paths are advanced in fixed blocks, so the samples
do not depend on the number of worker threads.
"""

from __future__ import annotations

import csv
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from uqprop.dynamics.base import SdeModel, time_grid

log = logging.getLogger(__name__)

_M0 = np.uint64(0xD2511F53)
_M1 = np.uint64(0xCD9E8D57)
_W0 = np.uint64(0x9E3779B9)
_W1 = np.uint64(0xBB67AE85)
_MASK = np.uint64(0xFFFFFFFF)
_S32 = np.uint64(32)

STREAM_INCREMENT = 0
STREAM_INITIAL = 1


def philox4x32(counter, key, rounds: int = 10):
    """Philox4x32 on broadcastable arrays of 32-bit words.

    ``counter`` is a sequence of four arrays, ``key`` of two; returns four
    ``uint32`` arrays.
    """
    c0, c1, c2, c3 = (np.asarray(c, dtype=np.uint64) & _MASK for c in counter)
    k0, k1 = (np.asarray(k, dtype=np.uint64) & _MASK for k in key)
    c0, c1, c2, c3 = np.broadcast_arrays(c0, c1, c2, c3)
    for r in range(rounds):
        if r:
            k0 = (k0 + _W0) & _MASK
            k1 = (k1 + _W1) & _MASK
        p0 = _M0 * c0
        p1 = _M1 * c2
        c0, c1, c2, c3 = (
            (p1 >> _S32) ^ c1 ^ k0,
            p1 & _MASK,
            (p0 >> _S32) ^ c3 ^ k1,
            p0 & _MASK,
        )
    return tuple(c.astype(np.uint32) for c in (c0, c1, c2, c3))


def _split_seed(seed: int) -> tuple[int, int]:
    if not 0 <= seed < 2**64:
        raise ValueError("seed must fit in 64 unsigned bits")
    return seed & 0xFFFFFFFF, seed >> 32


def philox_normals(seed: int, step, paths: np.ndarray, nch: int, stream: int = STREAM_INCREMENT) -> np.ndarray:
    """Standard normals of shape ``(len(paths), nch)`` for one step index."""
    k0, k1 = _split_seed(seed)
    npair = (nch + 1) // 2
    pairs = np.arange(npair, dtype=np.uint64)[None, :]
    p = np.asarray(paths, dtype=np.uint64)[:, None]
    r0, r1, r2, r3 = philox4x32((np.uint64(step), p, pairs, np.uint64(stream)), (k0, k1))
    # two 53-bit uniforms per block, both in (0, 1)
    u1 = ((r0.astype(np.uint64) >> np.uint64(5)) * np.uint64(67108864) + (r1.astype(np.uint64) >> np.uint64(6))).astype(float)
    u2 = ((r2.astype(np.uint64) >> np.uint64(5)) * np.uint64(67108864) + (r3.astype(np.uint64) >> np.uint64(6))).astype(float)
    u1 = (u1 + 0.5) / 9007199254740992.0
    u2 = (u2 + 0.5) / 9007199254740992.0
    rad = np.sqrt(-2.0 * np.log(u1))
    ang = 2.0 * np.pi * u2
    z = np.empty((p.shape[0], 2 * npair))
    z[:, 0::2] = rad * np.cos(ang)
    z[:, 1::2] = rad * np.sin(ang)
    return z[:, :nch]


# ---------------------------------------------------------------------------
# initial conditions and configuration


@dataclass
class DeterministicIC:
    state: np.ndarray

    def sample(self, seed: int, paths: np.ndarray) -> np.ndarray:
        x = np.asarray(self.state, dtype=float)
        return np.broadcast_to(x, (len(paths), x.size)).copy()


@dataclass
class GaussianIC:
    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        self.mean = np.asarray(self.mean, dtype=float)
        self.cov = np.asarray(self.cov, dtype=float)
        lam, vec = np.linalg.eigh(self.cov)
        if lam.min() < -1e-12 * max(1.0, abs(lam).max()):
            raise ValueError("covariance is not positive semi-definite")
        self._sqrt = vec * np.sqrt(np.clip(lam, 0.0, None))

    def sample(self, seed: int, paths: np.ndarray) -> np.ndarray:
        z = philox_normals(seed, 0, paths, self.mean.size, STREAM_INITIAL)
        return self.mean + z @ self._sqrt.T


def as_initial_condition(ic):
    if isinstance(ic, (DeterministicIC, GaussianIC)):
        return ic
    return DeterministicIC(np.asarray(ic, dtype=float))


SCHEMES = ("euler_maruyama", "rk4_additive_noise")


@dataclass
class McConfig:
    n_samples: int
    h: float
    scheme: str = "euler_maruyama"
    seed: int = 0
    threads: int = 1
    block_size: int = 1024
    output_times: list | None = None

    def __post_init__(self):
        if self.n_samples < 1:
            raise ValueError("n_samples must be >= 1")
        if not self.h > 0:
            raise ValueError("h must be positive")
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}; expected one of {SCHEMES}")
        if self.threads < 1 or self.block_size < 1:
            raise ValueError("threads and block_size must be >= 1")
        _split_seed(self.seed)


@dataclass
class McResult:
    times: np.ndarray  # output times
    samples: np.ndarray  # (len(times), N, n); rows of failed paths are NaN
    valid: np.ndarray  # (N,) paths finite over the whole span
    config: McConfig = field(repr=False, default=None)

    @property
    def terminal(self) -> np.ndarray:
        """Terminal samples of the valid paths."""
        return self.samples[-1][self.valid]

    def moments(self, k: int = -1) -> tuple[np.ndarray, np.ndarray]:
        return sample_moments(self.samples[k][self.valid])


# ---------------------------------------------------------------------------
# stepping


def _rows(x: np.ndarray) -> list:
    return [x[:, i] for i in range(x.shape[1])]


def _noise(model: SdeModel, xs: list, t: float, dw: np.ndarray, npath: int) -> np.ndarray:
    gw = model.apply_noise(xs, t, _rows(dw))
    return np.column_stack([np.broadcast_to(g, (npath,)) for g in gw])


def _drift(model: SdeModel, xs: list, t: float, npath: int) -> np.ndarray:
    return np.column_stack([np.broadcast_to(u, (npath,)) for u in model.drift(xs, t)])


def _advance(model: SdeModel, x: np.ndarray, t: float, h: float, dw: np.ndarray, scheme: str) -> np.ndarray:
    npath = x.shape[0]
    xs = _rows(x)
    if scheme == "euler_maruyama":
        out = x + h * _drift(model, xs, t, npath)
    else:
        k1 = _drift(model, xs, t, npath)
        k2 = _drift(model, _rows(x + 0.5 * h * k1), t + 0.5 * h, npath)
        k3 = _drift(model, _rows(x + 0.5 * h * k2), t + 0.5 * h, npath)
        k4 = _drift(model, _rows(x + h * k3), t + h, npath)
        out = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    if model.m:
        out = out + _noise(model, xs, t, dw, npath)
    return out


def _run_block(model, ic, cfg, grid, keep, paths):
    x = ic.sample(cfg.seed, paths)
    out = np.empty((len(keep), len(paths), model.n))
    slot = 0
    if 0 in keep:
        out[0] = x
        slot = 1
    with np.errstate(all="ignore"):
        for k in range(1, len(grid)):
            hk = grid[k] - grid[k - 1]
            dw = philox_normals(cfg.seed, k, paths, model.m) * math.sqrt(hk) if model.m else None
            x = _advance(model, x, grid[k - 1], hk, dw, cfg.scheme)
            if k in keep:
                out[slot] = x
                slot += 1
    return out


def simulate_paths(model: SdeModel, ic, t0: float, tf: float, cfg: McConfig) -> McResult:
    """Simulate ``cfg.n_samples`` paths of ``model`` on a fixed-step grid.

    ``ic`` is a state vector, :class:`DeterministicIC` or
    :class:`GaussianIC`.  Paths that leave the finite range are flagged in
    ``valid`` and left out of the statistics.
    """
    ic = as_initial_condition(ic)
    grid = time_grid(t0, tf, cfg.h) if tf > t0 else np.array([t0])
    if cfg.output_times is None:
        keep_idx = [len(grid) - 1]
    else:
        keep_idx = sorted({int(np.argmin(np.abs(grid - to))) for to in cfg.output_times})
    keep = {k: i for i, k in enumerate(keep_idx)}
    blocks = [np.arange(s, min(s + cfg.block_size, cfg.n_samples)) for s in range(0, cfg.n_samples, cfg.block_size)]
    if cfg.threads > 1 and len(blocks) > 1:
        with ThreadPoolExecutor(cfg.threads) as pool:
            parts = list(pool.map(lambda b: _run_block(model, ic, cfg, grid, keep, b), blocks))
    else:
        parts = [_run_block(model, ic, cfg, grid, keep, b) for b in blocks]
    samples = np.concatenate(parts, axis=1)
    valid = np.all(np.isfinite(samples), axis=(0, 2))
    bad = int((~valid).sum())
    if bad:
        log.warning("%d of %d paths became non-finite and are excluded", bad, cfg.n_samples)
        samples[:, ~valid] = np.nan
    return McResult(grid[keep_idx], samples, valid, cfg)


# ---------------------------------------------------------------------------
# statistics and export


def sample_moments(samples: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Sample mean and unbiased covariance (pairwise summation)."""
    xs = np.ascontiguousarray(np.asarray(samples, dtype=float).T)
    npts = xs.shape[1]
    if npts < 2:
        raise ValueError("need at least two samples")
    mean = xs.sum(axis=1) / npts
    d = xs - mean[:, None]
    cov = np.empty((xs.shape[0], xs.shape[0]))
    for i in range(xs.shape[0]):
        for j in range(i, xs.shape[0]):
            cov[i, j] = cov[j, i] = (d[i] * d[j]).sum() / (npts - 1)
    return mean, cov


def sample_raw_moment(samples: np.ndarray, r) -> float:
    """``E[X^r]`` estimated from samples."""
    xs = np.asarray(samples, dtype=float)
    prod = np.ones(xs.shape[0])
    for i, ri in enumerate(r):
        if ri:
            prod = prod * xs[:, i] ** ri
    return float(prod.sum() / xs.shape[0])


def write_samples(path, result: McResult, names: list[str] | None = None) -> Path:
    """Write all output snapshots as ``time, path, valid, state...`` rows."""
    path = Path(path)
    n = result.samples.shape[2]
    names = names or [f"x{i}" for i in range(n)]
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["time_s", "path", "valid", *names])
        for t, snap in zip(result.times, result.samples):
            for p, (ok, row) in enumerate(zip(result.valid, snap)):
                w.writerow([repr(float(t)), p, int(ok), *map(repr, map(float, row))])
    return path
