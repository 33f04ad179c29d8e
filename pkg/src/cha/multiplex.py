"""Multiplexed measurement, demultiplexing and the noise/SNR statistics of
linear weighing designs, Y = W X + N with N i.i.d. Gaussian added after W.
"""
from __future__ import annotations

import enum
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .codes import CodeKind, CodeMatrix, build_code, is_valid_s_order, s_matrix_inverse

MAX_CONDITION = 1e8
MC_BATCH = 256  # trials per RNG substream; fixed so results never depend on scheduling


class SignalRole(str, enum.Enum):
    TRUE = "true"
    MEASURED = "measured"
    RECOVERED = "recovered"


@dataclass(frozen=True, eq=False)
class SignalMatrix:
    """n x t block of time samples, one row per element or measurement."""

    values: np.ndarray
    time_step: float = 1.0
    role: SignalRole = SignalRole.TRUE
    t0: float = 0.0

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.ndim == 1:
            v = v[:, None]
        if v.ndim != 2 or v.shape[1] < 1:
            raise ValueError(f"signal matrix must be n x t with t >= 1, got shape {v.shape}")
        if not self.time_step > 0:
            raise ValueError("time_step must be positive")
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "role", SignalRole(self.role))

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def times(self) -> np.ndarray:
        return self.t0 + self.time_step * np.arange(self.values.shape[1])


@dataclass(frozen=True)
class NoiseModel:
    """Additive zero-mean Gaussian detector noise with a master seed.

    Independent substreams are keyed by integer tuples, so a given
    (master_seed, stream) pair always yields the same draws.
    """

    sigma: float = 0.0
    master_seed: int = 0

    def __post_init__(self):
        if not (self.sigma >= 0 and math.isfinite(self.sigma)):
            raise ValueError(f"sigma must be finite and >= 0, got {self.sigma}")

    def rng(self, *stream: int) -> np.random.Generator:
        ss = np.random.SeedSequence(self.master_seed % 2**64, spawn_key=tuple(int(s) for s in stream))
        return np.random.default_rng(ss)

    def sample(self, shape, *stream: int) -> np.ndarray:
        if self.sigma == 0:
            return np.zeros(shape)
        return self.sigma * self.rng(*stream).standard_normal(shape)


def _values(x) -> np.ndarray:
    if isinstance(x, SignalMatrix):
        return x.values
    v = np.asarray(x, dtype=float)
    return v[:, None] if v.ndim == 1 else v


def _check_order(n: int, w: CodeMatrix):
    if n != w.order:
        raise ValueError(f"signal has {n} rows but weighing matrix has order {w.order}")


def multiplex_measure(x, w: CodeMatrix, noise: NoiseModel | None = None, stream: tuple = (0,)):
    """Y = W X + N. Accepts a SignalMatrix or an n x t array and returns the same kind."""
    xv = _values(x)
    _check_order(xv.shape[0], w)
    y = w.as_float() @ xv
    if noise is not None and noise.sigma > 0:
        y = y + noise.sample(y.shape, *stream)
    if isinstance(x, SignalMatrix):
        return replace(x, values=y, role=SignalRole.MEASURED)
    return y


def inverse(w: CodeMatrix) -> np.ndarray:
    """W^-1 using the exact form for each design family."""
    n = w.order
    if w.kind is CodeKind.IDENTITY:
        return np.eye(n)
    if w.kind is CodeKind.SMATRIX:
        return s_matrix_inverse(w)
    if w.kind is CodeKind.HADAMARD:
        return w.entries.T.astype(float) / n
    a = w.as_float()
    cond = np.linalg.cond(a)
    if not cond <= MAX_CONDITION:
        raise ValueError(f"weighing matrix is singular or ill-conditioned (condition estimate {cond:.3g})")
    return np.linalg.inv(a)


def demultiplex(y, w: CodeMatrix):
    """X^ = W^-1 Y."""
    yv = _values(y)
    _check_order(yv.shape[0], w)
    xhat = inverse(w) @ yv
    if isinstance(y, SignalMatrix):
        return replace(y, values=xhat, role=SignalRole.RECOVERED)
    return xhat


def noise_covariance(w: CodeMatrix, sigma: float) -> np.ndarray:
    """K = sigma^2 (W^T W)^-1 for the recovered signal."""
    winv = inverse(w)
    k = sigma**2 * (winv @ winv.T)
    return 0.5 * (k + k.T)


def average_mse(w: CodeMatrix, sigma: float) -> float:
    winv = inverse(w)
    return sigma**2 * float(np.sum(winv**2)) / w.order


def snr_gain(w: CodeMatrix) -> float:
    """sqrt(n / tr[(W^T W)^-1]); tr[(W^T W)^-1] is the squared Frobenius norm of W^-1."""
    return math.sqrt(w.order / float(np.sum(inverse(w) ** 2)))


def theoretical_gain(kind: CodeKind | str, n: int) -> float:
    kind = CodeKind(kind)
    if n < 1:
        raise ValueError("order must be positive")
    if kind is CodeKind.IDENTITY:
        return 1.0
    if kind is CodeKind.SMATRIX:
        if n == 1:
            return 1.0
        if not is_valid_s_order(n):
            raise ValueError(f"no cyclic S-matrix of order {n}")
        return (n + 1) / (2 * math.sqrt(n))
    if kind is CodeKind.HADAMARD:
        if n & (n - 1):
            raise ValueError(f"no Sylvester Hadamard matrix of order {n}")
        return math.sqrt(n)
    raise ValueError("custom matrices have no closed-form gain; use snr_gain")


@dataclass(frozen=True)
class GainEstimate:
    """Monte-Carlo multiplexing advantage.

    ``measured_gain`` is the per-element ratio of direct to multiplexed RMS
    error, averaged over elements. ``peak_gain`` is the same ratio taken only
    at the element with the strongest signal.
    """

    measured_gain: float
    stderr: float
    peak_gain: float
    per_element: np.ndarray
    trials: int


def _squared_errors(winv, bias, noise, batch_index, count, shape):
    rng = noise.rng(batch_index)
    mux_noise = rng.standard_normal((count, *shape))
    direct_noise = rng.standard_normal((count, *shape))
    # X^ - X = W^-1 (Y - W X) + W^-1 N; bias is zero unless Y came from another route
    err = noise.sigma * (winv @ mux_noise) + bias
    e_mux = np.einsum("bit,bit->i", err, err)
    e_dir = noise.sigma**2 * np.einsum("bit,bit->i", direct_noise, direct_noise)
    return e_mux, e_dir


def monte_carlo_gain(w: CodeMatrix, sigma: float, trials: int, seed: int = 0, *,
                     x=None, y=None, workers: int = 1) -> GainEstimate:
    """Simulate ``trials`` multiplexed and direct acquisitions of a known X.

    ``y`` may carry the noise-free multiplexed data when it was produced by
    another route (e.g. the acoustic simulator); it defaults to W X. Direct
    acquisitions measure X itself with the same sigma.
    """
    if trials < 100:
        raise ValueError(f"need at least 100 trials, got {trials}")
    if not sigma > 0:
        raise ValueError("Monte-Carlo gain needs sigma > 0")
    n = w.order
    xv = np.ones((n, 1)) if x is None else _values(x)
    _check_order(xv.shape[0], w)
    yv = w.as_float() @ xv if y is None else _values(y)
    if yv.shape != xv.shape:
        raise ValueError(f"measurement shape {yv.shape} does not match signal shape {xv.shape}")
    noise = NoiseModel(sigma, seed)
    winv = inverse(w)

    counts = [min(MC_BATCH, trials - b * MC_BATCH) for b in range(-(-trials // MC_BATCH))]
    bias = winv @ yv - xv
    jobs = [(winv, bias, noise, b, c, xv.shape) for b, c in enumerate(counts)]
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            parts = list(pool.map(lambda a: _squared_errors(*a), jobs))
    else:
        parts = [_squared_errors(*a) for a in jobs]

    e_mux = np.array([p[0] for p in parts])
    e_dir = np.array([p[1] for p in parts])
    per_element = np.sqrt(e_dir.sum(0) / e_mux.sum(0))
    measured = float(per_element.mean())

    # batch means: group the fixed-size batches into ~20 blocks
    n_blocks = min(20, len(parts))
    block_gain = [
        float(np.mean(np.sqrt(d.sum(0) / m.sum(0))))
        for d, m in zip(np.array_split(e_dir, n_blocks), np.array_split(e_mux, n_blocks))
    ]
    stderr = float(np.std(block_gain, ddof=1) / math.sqrt(n_blocks)) if n_blocks > 1 else float("nan")
    strongest = int(np.argmax(np.abs(xv).max(axis=1)))
    return GainEstimate(measured, stderr, float(per_element[strongest]), per_element, trials)


def monte_carlo_noise(w: CodeMatrix, sigma: float, trials: int, seed: int = 0) -> np.ndarray:
    """Recovered-signal error W^-1 n for ``trials`` noise-only acquisitions, shape (trials, n)."""
    noise = NoiseModel(sigma, seed)
    winv = inverse(w)
    out = []
    for b in range(-(-trials // MC_BATCH)):
        c = min(MC_BATCH, trials - b * MC_BATCH)
        out.append(noise.sample((c, w.order), b) @ winv.T)
    return np.concatenate(out)


