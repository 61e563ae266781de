"""Pilot-based channel estimation and learned refinement of rough estimates.

Estimates are complex ``(n, n)`` (or ``(batch, n, n)``) arrays; the
real-expanded form used by :mod:`litesc.channel` is available through
:attr:`CsiEstimate.H_real`. Error figures are mean squared error per real
component (Re and Im of every entry counted separately).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .channel import ChannelRealization, channel_stats, complex_to_real, noise_variance, sample_channel
from .nncore import Adam, LayerSpec, ParamSet, Tensor, backward, forward, init_params, no_grad
from .nncore.functional import frobenius_loss

log = logging.getLogger(__name__)

MODES = ("perfect", "rough", "refined", "none")


@dataclass
class CsiEstimate:
    mode: str
    H_est: np.ndarray | None
    snr_db: float | None = None

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"unknown CSI mode {self.mode!r}")
        if self.mode == "none" and self.H_est is not None:
            raise ValueError("mode 'none' carries no estimate")
        if self.mode != "none" and self.H_est is None:
            raise ValueError(f"mode {self.mode!r} needs an estimate")

    @property
    def H_real(self) -> np.ndarray | None:
        return None if self.H_est is None else complex_to_real(self.H_est)


def pilot_matrix(n_ant: int, amplitude: float = 1.0) -> np.ndarray:
    """Orthogonal (scaled identity) pilot block, one column per antenna."""
    return amplitude * np.eye(n_ant, dtype=complex)


def send_pilots(
    ch: ChannelRealization, snr_db: float | None, rng: np.random.Generator, pilots: np.ndarray | None = None
) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(Y_pilot, P)`` with ``Y_pilot = H P + N`` in complex form."""
    H = ch.H_complex
    P = pilot_matrix(ch.n_ant) if pilots is None else pilots
    Y = H @ P
    if snr_db is not None:
        std = np.sqrt(noise_variance(snr_db))
        Y = Y + std * (rng.standard_normal(Y.shape) + 1j * rng.standard_normal(Y.shape))
    return Y, P


def ls_estimate(Y_pilot: np.ndarray, P_pilot: np.ndarray) -> np.ndarray:
    """Least squares: ``H_rough = Y_pilot P^{-1}``."""
    P = np.asarray(P_pilot)
    if P.shape[-1] != P.shape[-2]:
        raise ValueError("pilot matrix must be square")
    if np.linalg.matrix_rank(P) < P.shape[-1]:
        raise ValueError("pilot matrix is singular")
    return np.asarray(Y_pilot) @ np.linalg.inv(P)


def ls_error_variance(sigma_n2: float, pilots: np.ndarray) -> float:
    """Per-real-component LS error variance for orthogonal pilots of equal power."""
    energy = float(np.mean(np.sum(np.abs(pilots) ** 2, axis=0)))
    return sigma_n2 / energy


def lmmse_estimate(
    H_rough: np.ndarray,
    channel_stats: tuple[complex, float],
    sigma_n2: float,
    pilots: np.ndarray | None = None,
) -> np.ndarray:
    """Per-entry Wiener shrinkage of an LS estimate toward the prior mean.

    ``channel_stats`` is ``(mean, variance)`` of each complex coefficient.
    """
    mean, var = channel_stats
    if var < 0 or sigma_n2 < 0:
        raise ValueError("covariance must be positive semi-definite")
    err = sigma_n2 if pilots is None else ls_error_variance(sigma_n2, pilots)
    prior = var / 2.0
    if prior + err == 0:
        return np.full_like(H_rough, mean)
    gain = prior / (prior + err)
    return mean + gain * (np.asarray(H_rough) - mean)


def lmmse_theory(kind: str, snr_db: float, k: float = 2.0) -> float:
    _, var = channel_stats(kind, k)
    prior, err = var / 2.0, noise_variance(snr_db)
    return prior * err / (prior + err)


def channel_mse(H_est: np.ndarray, H_true: np.ndarray) -> float:
    d = np.asarray(H_est) - np.asarray(H_true)
    return float(np.mean(d.real**2 + d.imag**2) / 2.0)


def per_sample_se(H_est: np.ndarray, H_true: np.ndarray) -> np.ndarray:
    """Per-realisation mean squared error (for confidence intervals)."""
    d = np.asarray(H_est) - np.asarray(H_true)
    axes = tuple(range(1, d.ndim))
    return np.mean(d.real**2 + d.imag**2, axis=axes) / 2.0


# -- learned refinement -------------------------------------------------------
@dataclass
class DenoiserModel:
    """Residual MLP on the (Re, Im) planes of ``H_rough`` plus the noise level.

    ``H_refine = H_rough - s * f([Re H_rough, Im H_rough, s])`` where ``s`` is
    the LS error standard deviation, so the correction vanishes as the noise
    does.
    """

    params: ParamSet
    n_ant: int
    specs: list
    snr_range: tuple[float, float]
    kind: str = "rayleigh"
    history: list = field(default_factory=list)

    @property
    def width(self) -> int:
        return 2 * self.n_ant * self.n_ant


def _denoiser_specs(n_ant: int, hidden: int) -> list[LayerSpec]:
    out = 2 * n_ant * n_ant
    return [
        LayerSpec("dense", "dn1", units=hidden),
        LayerSpec("relu"),
        LayerSpec("dense", "dn2", units=hidden),
        LayerSpec("relu"),
        LayerSpec("dense", "dn3", units=hidden),
        LayerSpec("relu"),
        LayerSpec("dense", "dn4", units=out),
    ]


def _planes(H: np.ndarray) -> np.ndarray:
    n = H.shape[-1]
    flat = H.reshape(-1, n * n)
    return np.concatenate([flat.real, flat.imag], axis=-1)


def _from_planes(x: np.ndarray, n: int) -> np.ndarray:
    return (x[:, : n * n] + 1j * x[:, n * n :]).reshape(-1, n, n)


def _features(H_rough: np.ndarray, noise_std: np.ndarray) -> np.ndarray:
    x = _planes(H_rough)
    return np.concatenate([x, noise_std.reshape(-1, 1)], axis=-1)


def _apply(model: DenoiserModel, H_rough: np.ndarray, noise_std: np.ndarray, dtype) -> Tensor:
    feats = _features(H_rough, noise_std).astype(dtype)
    correction = forward(model.params, model.specs, Tensor(feats, dtype=dtype))
    base = Tensor(_planes(H_rough).astype(dtype), dtype=dtype)
    return base - correction * Tensor(noise_std.reshape(-1, 1).astype(dtype), dtype=dtype)


def make_pairs(
    kind: str,
    n_ant: int,
    count: int,
    snr_range: tuple[float, float],
    rng: np.random.Generator,
    k: float = 2.0,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Draw ``(H_rough, H_true, sigma_n2)`` triples with SNR uniform in ``snr_range`` (dB)."""
    ch = sample_channel(kind, n_ant, k=k, rng=rng, batch=count)
    H = ch.H_complex
    snr = rng.uniform(snr_range[0], snr_range[1], size=count)
    s2 = 10.0 ** (-snr / 10.0)
    std = np.sqrt(s2)[:, None, None]
    noise = std * (rng.standard_normal(H.shape) + 1j * rng.standard_normal(H.shape))
    return H + noise, H, s2


def train_denoiser(
    pairs: tuple[np.ndarray, np.ndarray, np.ndarray],
    snr_range: tuple[float, float] = (0.0, 10.0),
    kind: str = "rayleigh",
    hidden: int = 64,
    epochs: int = 20,
    batch_size: int = 256,
    lr: float = 2e-3,
    seed: int = 0,
) -> DenoiserModel:
    """Fit the refinement network by minimising ``0.5 * ||H_refine - H||_F^2``."""
    H_rough, H_true, sigma_n2 = (np.asarray(a) for a in pairs)
    if len(H_rough) == 0:
        raise ValueError("no training pairs")
    n = H_rough.shape[-1]
    rng = np.random.default_rng(seed)
    specs = _denoiser_specs(n, hidden)
    params = init_params(specs, 2 * n * n + 1, rng, "denoiser", dtype=np.float64)
    # start from the identity map: the last layer outputs zero correction
    params["dn4.W"].data[:] = 0.0
    model = DenoiserModel(params, n, specs, tuple(snr_range), kind)
    opt = Adam(params, lr=lr)
    noise_std = np.sqrt(np.asarray(sigma_n2, dtype=np.float64))
    target = _planes(H_true)
    count = len(H_rough)
    steps_per_epoch = max(1, count // batch_size)
    total = epochs * steps_per_epoch
    step = 0
    for epoch in range(epochs):
        order = rng.permutation(count)
        running = 0.0
        for b in range(steps_per_epoch):
            idx = order[b * batch_size : (b + 1) * batch_size]
            opt.lr = lr * 0.5 * (1 + np.cos(np.pi * step / total))
            out = _apply(model, H_rough[idx], noise_std[idx], np.float64)
            loss = frobenius_loss(out, target[idx])
            backward(loss)
            opt.step()
            running += loss.item()
            step += 1
        model.history.append(running / steps_per_epoch)
        log.debug("denoiser epoch %d loss %.5f", epoch, model.history[-1])
    return model


def refine(model: DenoiserModel, H_rough: np.ndarray, sigma_n2, pilots: np.ndarray | None = None) -> np.ndarray:
    """``H_refine = model(H_rough)``; output has the input's shape."""
    H_rough = np.asarray(H_rough)
    if H_rough.shape[-2:] != (model.n_ant, model.n_ant):
        raise ValueError(f"expected {model.n_ant}x{model.n_ant} estimates, got {H_rough.shape[-2:]}")
    batch = H_rough.reshape(-1, model.n_ant, model.n_ant)
    err = np.broadcast_to(np.asarray(sigma_n2, dtype=np.float64), (len(batch),))
    if pilots is not None:
        err = err * ls_error_variance(1.0, pilots)
    with no_grad():
        out = _apply(model, batch, np.sqrt(err), np.float64).data
    return _from_planes(out, model.n_ant).reshape(H_rough.shape)


# -- per-batch estimation used by the transceiver ------------------------------
def estimate(
    mode: str,
    ch: ChannelRealization,
    snr_db: float | None,
    rng: np.random.Generator,
    denoiser: DenoiserModel | None = None,
) -> CsiEstimate:
    """Produce the channel knowledge a receiver in ``mode`` would have."""
    if mode == "none":
        return CsiEstimate("none", None, snr_db)
    if mode == "perfect":
        return CsiEstimate("perfect", ch.H_complex.copy(), snr_db)
    Y, P = send_pilots(ch, snr_db, rng)
    rough = ls_estimate(Y, P)
    if mode == "rough":
        return CsiEstimate("rough", rough, snr_db)
    if denoiser is None:
        raise ValueError("refined CSI needs a trained denoiser")
    s2 = 0.0 if snr_db is None else noise_variance(snr_db)
    return CsiEstimate("refined", refine(denoiser, rough, s2, P), snr_db)
