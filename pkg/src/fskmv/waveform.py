"""CP-OFDM modulation, demodulation with an early DFT window, and PMEPR.

Scaling is unitary: the IDFT is scaled by ``1/sqrt(n_fft)`` and the DFT by the
same factor, so the energy of the CP-free body equals the energy of the
subcarrier symbols. Active subcarriers sit on the signed bins
``-M/2 .. M/2 - 1`` with no DC null.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class OfdmConfig:
    n_fft: int = 256
    n_cp: int = 32
    m_active: int = 120
    subcarrier_spacing: float = 15e3
    oversampling: int = 4

    def __post_init__(self):
        if self.m_active < 1 or self.m_active > self.n_fft:
            raise ValueError(f"m_active must lie in [1, n_fft={self.n_fft}], got {self.m_active}")
        if self.n_cp < 1:
            raise ValueError(f"n_cp must be >= 1, got {self.n_cp}")
        if self.oversampling < 1:
            raise ValueError(f"oversampling must be >= 1, got {self.oversampling}")
        if self.subcarrier_spacing <= 0:
            raise ValueError("subcarrier_spacing must be positive")

    @property
    def sample_rate(self) -> float:
        return self.n_fft * self.subcarrier_spacing

    @property
    def bandwidth(self) -> float:
        """Occupied bandwidth ``M * spacing`` (Hz)."""
        return self.m_active * self.subcarrier_spacing

    @property
    def symbol_length(self) -> int:
        return self.n_fft + self.n_cp

    @property
    def symbol_duration(self) -> float:
        return self.symbol_length / self.sample_rate

    @property
    def signed_bins(self) -> np.ndarray:
        """Signed frequency index of each active subcarrier."""
        return np.arange(self.m_active) - self.m_active // 2

    @property
    def fft_bins(self) -> np.ndarray:
        """FFT array index of each active subcarrier."""
        return self.signed_bins % self.n_fft


DESK_OFDM = OfdmConfig()
PAPER_OFDM = OfdmConfig(n_fft=2048, n_cp=144, m_active=1200)


def _check_row(symbols, cfg: OfdmConfig) -> np.ndarray:
    x = np.asarray(symbols, dtype=complex)
    if x.shape[-1] != cfg.m_active:
        raise ValueError(f"expected {cfg.m_active} subcarrier symbols, got {x.shape[-1]}")
    return x


def _to_time(x: np.ndarray, cfg: OfdmConfig, oversampling: int = 1) -> np.ndarray:
    n = cfg.n_fft * oversampling
    spec = np.zeros(x.shape[:-1] + (n,), dtype=complex)
    spec[..., cfg.signed_bins % n] = x
    # unitary w.r.t. the critically sampled grid
    return np.fft.ifft(spec, axis=-1) * (n / np.sqrt(cfg.n_fft))


def ofdm_modulate(symbols, cfg: OfdmConfig) -> np.ndarray:
    """Map ``M`` symbols (last axis) to ``n_cp + n_fft`` time samples with cyclic prefix."""
    x = _check_row(symbols, cfg)
    body = _to_time(x, cfg)
    return np.concatenate([body[..., -cfg.n_cp :], body], axis=-1)


def ofdm_demodulate(samples, cfg: OfdmConfig, window_offset: int = 0) -> np.ndarray:
    """Recover the active subcarriers from one CP-OFDM symbol.

    The DFT window starts ``window_offset`` samples before the end of the CP.
    For a channel contained in the CP this multiplies subcarrier ``l`` by
    ``exp(-2j*pi*l*window_offset/n_fft)`` with ``l`` the signed bin, leaving
    magnitudes untouched.
    """
    y = np.asarray(samples, dtype=complex)
    if y.shape[-1] != cfg.symbol_length:
        raise ValueError(f"expected {cfg.symbol_length} samples, got {y.shape[-1]}")
    if not 0 <= window_offset <= cfg.n_cp:
        raise ValueError(f"window_offset must lie in [0, n_cp={cfg.n_cp}], got {window_offset}")
    start = cfg.n_cp - window_offset
    body = y[..., start : start + cfg.n_fft]
    spec = np.fft.fft(body, axis=-1) / np.sqrt(cfg.n_fft)
    return spec[..., cfg.fft_bins]


def modulate_grid(grid, cfg: OfdmConfig) -> np.ndarray:
    """Serialize an ``S x M`` grid into a stream of ``S`` CP-OFDM symbols."""
    g = np.atleast_2d(_check_row(grid, cfg))
    return ofdm_modulate(g, cfg).reshape(g.shape[:-2] + (-1,))


def demodulate_stream(stream, cfg: OfdmConfig, n_symbols: int, window_offset: int = 0) -> np.ndarray:
    """Inverse of :func:`modulate_grid` for the first ``n_symbols`` symbols of a stream."""
    y = np.asarray(stream, dtype=complex)
    frames = y[..., : n_symbols * cfg.symbol_length].reshape(y.shape[:-1] + (n_symbols, cfg.symbol_length))
    return ofdm_demodulate(frames, cfg, window_offset)


def window_phase(cfg: OfdmConfig, delay_samples) -> np.ndarray:
    """Per-subcarrier phase of a delay of ``delay_samples`` (may be fractional or an array)."""
    d = np.asarray(delay_samples, dtype=float)[..., None]
    return np.exp(-2j * np.pi * cfg.signed_bins * d / cfg.n_fft)


def pmepr(symbols, cfg: OfdmConfig, oversampling: int | None = None):
    """Peak-to-mean envelope power ratio (linear) of OFDM symbols.

    Evaluated on the CP-free body interpolated by a zero-padded IDFT of size
    ``n_fft * oversampling``. The last axis holds the ``M`` subcarriers; any
    leading axes are treated as independent symbols.

    Raises
    ------
    ValueError
        If a symbol has no energy.
    """
    x = _check_row(symbols, cfg)
    os_ = cfg.oversampling if oversampling is None else oversampling
    if os_ < 1:
        raise ValueError("oversampling must be >= 1")
    energy = np.sum(np.abs(x) ** 2, axis=-1)
    if np.any(energy == 0):
        raise ValueError("PMEPR is undefined for an all-zero symbol")
    p = np.abs(_to_time(x, cfg, os_)) ** 2
    ratio = p.max(axis=-1) / p.mean(axis=-1)
    return float(ratio) if ratio.ndim == 0 else ratio


def ccdf(values, thresholds) -> np.ndarray:
    """Empirical ``P[value > threshold]`` for each threshold."""
    v = np.sort(np.ravel(np.asarray(values, dtype=float)))
    t = np.asarray(thresholds, dtype=float)
    return 1.0 - np.searchsorted(v, t, side="right") / v.size


def to_db(x):
    return 10 * np.log10(x)
