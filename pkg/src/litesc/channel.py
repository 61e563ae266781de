"""Fading channels, zero-forcing and finite-bit constellations.

All channel matrices are handled in complex-expanded real form::

    H_real = [[Re H, -Im H],
              [Im H,  Re H]]

acting on column vectors ``[Re x; Im x]``. Signals are laid out as
``(..., 2 * n_ant, channel_uses)``. Transmit power is normalised to 1 per
real dimension and the noise variance per real dimension is
``10 ** (-snr_db / 10)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .nncore import Tensor
from .nncore.functional import fake_quantize
from .nncore.tensor import matmul

KINDS = ("awgn", "rayleigh", "rician")
ZF_COND_LIMIT = 1e8


class SingularChannelError(np.linalg.LinAlgError):
    def __init__(self, cond: float):
        super().__init__(f"channel is ill-conditioned for zero-forcing (cond={cond:.3g})")
        self.cond = cond


def complex_to_real(Hc: np.ndarray) -> np.ndarray:
    """Expand ``(..., n, m)`` complex matrices to ``(..., 2n, 2m)`` real ones."""
    re, im = Hc.real, Hc.imag
    top = np.concatenate([re, -im], axis=-1)
    bottom = np.concatenate([im, re], axis=-1)
    return np.concatenate([top, bottom], axis=-2)


def real_to_complex(Hr: np.ndarray) -> np.ndarray:
    n = Hr.shape[-2] // 2
    m = Hr.shape[-1] // 2
    return Hr[..., :n, :m] + 1j * Hr[..., n:, :m]


def vec_to_real(xc: np.ndarray) -> np.ndarray:
    """Stack ``(..., n, cols)`` complex signals as ``(..., 2n, cols)`` real."""
    return np.concatenate([xc.real, xc.imag], axis=-2)


def vec_to_complex(xr: np.ndarray) -> np.ndarray:
    n = xr.shape[-2] // 2
    return xr[..., :n, :] + 1j * xr[..., n:, :]


def rician_params(k: float) -> tuple[float, float]:
    """Line-of-sight mean and scatter standard deviation for Rician factor ``k``."""
    if k < 0:
        raise ValueError("Rician factor must be non-negative")
    return float(np.sqrt(k / (k + 1.0))), float(np.sqrt(1.0 / (k + 1.0)))


def noise_variance(snr_db: float) -> float:
    return float(10.0 ** (-snr_db / 10.0))


def channel_stats(kind: str, k: float = 2.0) -> tuple[complex, float]:
    """Per-entry prior mean and complex variance of the channel coefficients."""
    if kind == "rayleigh":
        return 0.0, 1.0
    if kind == "rician":
        mu, sigma = rician_params(k)
        return mu, sigma**2
    if kind == "awgn":
        return 1.0, 0.0
    raise ValueError(f"unknown channel kind {kind!r}")


@dataclass
class ChannelRealization:
    H: np.ndarray  # real-expanded, (2n, 2n) or (batch, 2n, 2n)
    kind: str
    k: float = 0.0
    sigma_n2: float = 0.0

    @property
    def n_ant(self) -> int:
        return self.H.shape[-1] // 2

    @property
    def H_complex(self) -> np.ndarray:
        return real_to_complex(self.H)


def sample_channel(
    kind: str,
    n_ant: int,
    k: float = 2.0,
    rng: np.random.Generator | None = None,
    batch: int | None = None,
) -> ChannelRealization:
    """Draw square ``n_ant x n_ant`` channel(s), returned in real-expanded form.

    Rayleigh entries are CN(0, 1); Rician entries are CN(mu, sigma^2) with
    ``mu = sqrt(k/(k+1))`` and ``sigma = sqrt(1/(k+1))``; AWGN is the identity.
    ``batch`` draws one independent matrix per sentence (block fading).
    """
    if kind not in KINDS:
        raise ValueError(f"unknown channel kind {kind!r}")
    if n_ant <= 0 or (batch is not None and batch <= 0):
        raise ValueError("channel dimensions must be positive")
    rng = rng if rng is not None else np.random.default_rng()
    shape = (n_ant, n_ant) if batch is None else (batch, n_ant, n_ant)
    if kind == "awgn":
        Hc = np.broadcast_to(np.eye(n_ant), shape).astype(complex)
    else:
        mean, sigma = (0.0, 1.0) if kind == "rayleigh" else rician_params(k)
        scatter = (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) * np.sqrt(0.5)
        Hc = mean + sigma * scatter
    return ChannelRealization(complex_to_real(Hc), kind, k if kind == "rician" else 0.0)


def awgn(shape, snr_db: float, rng: np.random.Generator, dtype=np.float64) -> np.ndarray:
    return (rng.standard_normal(shape) * np.sqrt(noise_variance(snr_db))).astype(dtype, copy=False)


def transmit(X, ch: ChannelRealization, snr_db: float | None, rng: np.random.Generator | None = None):
    """``Y = H X + N``.

    ``X`` is a real ``(..., 2n, uses)`` array or :class:`Tensor` (gradients
    flow through ``H X``). ``snr_db=None`` means a noiseless link.
    """
    is_tensor = isinstance(X, Tensor)
    shape = X.shape
    if shape[-2] != ch.H.shape[-1]:
        raise ValueError(f"signal has {shape[-2]} real rows, channel expects {ch.H.shape[-1]}")
    if is_tensor:
        Y = matmul(Tensor(ch.H.astype(X.dtype, copy=False), dtype=X.dtype), X)
    else:
        Y = ch.H @ np.asarray(X)
    if snr_db is None:
        ch.sigma_n2 = 0.0
        return Y
    rng = rng if rng is not None else np.random.default_rng()
    ch.sigma_n2 = noise_variance(snr_db)
    dtype = X.dtype if is_tensor else Y.dtype
    return Y + awgn(Y.shape, snr_db, rng, dtype)


def zf_matrix(H: np.ndarray, cond_limit: float = ZF_COND_LIMIT) -> np.ndarray:
    """``(H^T H)^{-1} H^T`` for real-expanded ``H`` (equivalently ``(H^H H)^{-1} H^H``)."""
    H = np.asarray(H, dtype=np.float64)
    cond = np.linalg.cond(H)
    worst = float(np.max(cond))
    if not np.isfinite(worst) or worst > cond_limit:
        raise SingularChannelError(worst)
    Ht = np.swapaxes(H, -1, -2)
    return np.linalg.solve(Ht @ H, Ht)


def zero_forcing(Y, H: np.ndarray, cond_limit: float = ZF_COND_LIMIT):
    """Undo the channel: ``(H^H H)^{-1} H^H Y``; accepts arrays or Tensors."""
    G = zf_matrix(H, cond_limit)
    if isinstance(Y, Tensor):
        return matmul(Tensor(G.astype(Y.dtype), dtype=Y.dtype), Y)
    return G @ np.asarray(Y)


# -- constellation quantisation ----------------------------------------------
@dataclass
class ConstellationSpec:
    m_bits: int
    x_min: float
    x_max: float

    def __post_init__(self):
        if self.m_bits < 1:
            raise ValueError("m_bits must be >= 1")
        if not self.x_max > self.x_min:
            raise ValueError(f"degenerate constellation range [{self.x_min}, {self.x_max}]")

    @property
    def levels(self) -> int:
        return 2**self.m_bits - 1

    @property
    def q_x(self) -> float:
        return self.levels / (self.x_max - self.x_min)

    def to_dict(self) -> dict:
        return {"m_bits": self.m_bits, "x_min": self.x_min, "x_max": self.x_max}


class EmaRange:
    """Running min/max with exponential smoothing, seeded from the first batch."""

    def __init__(self, c: float):
        if not 0.0 <= c <= 1.0:
            raise ValueError("EMA coefficient must lie in [0, 1]")
        self.c = c
        self.lo: float | None = None
        self.hi: float | None = None
        self.batches = 0

    def update(self, batch) -> None:
        arr = batch.data if isinstance(batch, Tensor) else np.asarray(batch)
        lo, hi = float(arr.min()), float(arr.max())
        if self.lo is None:
            self.lo, self.hi = lo, hi
        else:
            self.lo = (1.0 - self.c) * self.lo + self.c * lo
            self.hi = (1.0 - self.c) * self.hi + self.c * hi
        self.batches += 1


def calibrate_constellation(samples: Iterable, m_bits: int, c: float = 0.1) -> ConstellationSpec:
    """Track the symbol range over calibration batches and build the quantiser."""
    ema = EmaRange(c)
    for batch in samples:
        ema.update(batch)
    if ema.batches == 0:
        raise ValueError("need at least one calibration batch")
    if not ema.hi > ema.lo:
        raise ValueError(f"degenerate constellation range: x_min = x_max = {ema.lo}")
    return ConstellationSpec(m_bits, ema.lo, ema.hi)


def constellation_quantize_dequantize(X, spec: ConstellationSpec):
    """Snap symbols to at most ``2**m`` levels per real dimension.

    ``code = clamp(round(q_x (X - x_min)), 0, 2**m - 1)`` and the output is
    ``code / q_x + x_min``. Tensors keep a straight-through gradient.
    """
    if isinstance(X, Tensor):
        return fake_quantize(X, spec.x_min, spec.q_x, spec.levels)
    X = np.asarray(X, dtype=np.float64)
    codes = np.clip(np.round(spec.q_x * (X - spec.x_min)), 0, spec.levels)
    return codes / spec.q_x + spec.x_min
