"""Tapped-delay-line Rayleigh fading, timing misalignment and superposition at the server.

Two equivalent paths produce the superposed grid. :func:`superpose_at_es`
works per subcarrier in the frequency domain and is what the simulations use.
:func:`superpose_time_domain` modulates, convolves, delays and demodulates
explicitly; it exists to check the shortcut.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from fskmv.waveform import OfdmConfig, demodulate_stream, modulate_grid, window_phase


@dataclass(frozen=True)
class TapProfile:
    """Power-delay profile. Powers are normalized to unit sum on use."""

    delays_ns: tuple[float, ...]
    powers_db: tuple[float, ...]

    def __post_init__(self):
        d = np.asarray(self.delays_ns, dtype=float)
        if len(self.delays_ns) != len(self.powers_db) or d.size == 0:
            raise ValueError("delays_ns and powers_db must be non-empty and of equal length")
        if d[0] != 0 or np.any(np.diff(d) <= 0):
            raise ValueError("tap delays must start at 0 and be strictly increasing")

    @property
    def linear_powers(self) -> np.ndarray:
        p = 10 ** (np.asarray(self.powers_db, dtype=float) / 10)
        return p / p.sum()

    def sample_powers(self, sample_rate: float) -> np.ndarray:
        """Tap powers on the sample grid; taps rounding to the same sample add up."""
        idx = np.rint(np.asarray(self.delays_ns) * 1e-9 * sample_rate).astype(int)
        out = np.zeros(idx.max() + 1)
        np.add.at(out, idx, self.linear_powers)
        return out


# 3GPP Extended Pedestrian A
EPA = TapProfile(
    delays_ns=(0.0, 30.0, 70.0, 90.0, 110.0, 190.0, 410.0),
    powers_db=(0.0, -1.0, -2.0, -3.0, -8.0, -17.2, -20.8),
)

FLAT = TapProfile(delays_ns=(0.0,), powers_db=(0.0,))


@dataclass
class ChannelRealization:
    """One device's channel for one round.

    ``timing_offset`` is the arrival delay in samples relative to the earliest
    possible arrival; it may be fractional.
    """

    taps: np.ndarray
    freq_response: np.ndarray
    timing_offset: float = 0.0

    def effective_response(self, cfg: OfdmConfig, n_err: int = 0) -> np.ndarray:
        """Frequency response including the arrival delay and the receiver's early window."""
        return self.freq_response * window_phase(cfg, self.timing_offset + n_err)


def freq_response(taps, cfg: OfdmConfig) -> np.ndarray:
    """Response of a sample-spaced tap vector on the active subcarriers.

    Same as the ``n_fft``-point DFT of the zero-padded taps read at the active bins.
    """
    h = np.asarray(taps, dtype=complex)
    n = np.arange(h.shape[-1])
    kernel = np.exp(-2j * np.pi * np.outer(n, cfg.signed_bins) / cfg.n_fft)
    return h @ kernel


def max_timing_offset(cfg: OfdmConfig, t_sync: float | None = None) -> float:
    """Largest arrival spread in samples; defaults to one over the occupied bandwidth."""
    if t_sync is None:
        t_sync = 1.0 / cfg.bandwidth
    return t_sync * cfg.sample_rate


def realize_channel(
    profile: TapProfile,
    cfg: OfdmConfig,
    rng: np.random.Generator,
    max_offset: float = 0.0,
    n_err: int = 0,
    integer_offset: bool = True,
) -> ChannelRealization:
    """Draw an independent Rayleigh realization of ``profile``.

    Each sample-spaced tap is circularly-symmetric complex Gaussian with
    variance equal to its share of the normalized profile power. The timing
    offset is uniform on ``[0, max_offset]`` samples, rounded to an integer
    unless ``integer_offset`` is False.

    Raises
    ------
    ValueError
        If delay spread, maximum offset and ``n_err`` overrun the cyclic prefix.
    """
    powers = profile.sample_powers(cfg.sample_rate)
    spread = powers.size - 1
    if spread + int(np.ceil(max_offset)) + n_err > cfg.n_cp:
        raise ValueError(
            f"delay spread {spread} + timing offset {max_offset:.3g} + n_err {n_err} exceeds n_cp={cfg.n_cp}"
        )
    g = rng.standard_normal(powers.size) + 1j * rng.standard_normal(powers.size)
    taps = g * np.sqrt(powers / 2)
    offset = rng.uniform(0.0, max_offset) if max_offset > 0 else 0.0
    if integer_offset:
        offset = float(np.rint(offset))
    return ChannelRealization(taps=taps, freq_response=freq_response(taps, cfg), timing_offset=offset)


def rayleigh_flat(rng: np.random.Generator, size) -> np.ndarray:
    """Unit-variance circularly-symmetric complex Gaussian coefficients."""
    return (rng.standard_normal(size) + 1j * rng.standard_normal(size)) * np.sqrt(0.5)


def complex_noise(rng: np.random.Generator, size, noise_var: float) -> np.ndarray:
    if noise_var == 0:
        return np.zeros(size, dtype=complex)
    return rayleigh_flat(rng, size) * np.sqrt(noise_var)


def superpose_at_es(
    grids,
    powers,
    responses,
    noise_var: float,
    rng: np.random.Generator | None = None,
) -> np.ndarray:
    """Superposed receive grid ``Y = sum_k sqrt(P_k) H_k X_k + W``.

    Parameters
    ----------
    grids : array, shape (K, S, M)
        Transmitted grids.
    powers : array, shape (K,)
        Received power of each device.
    responses : array, shape (K, M) or (K, S, M)
        Effective frequency responses, i.e. including any timing phase ramp
        (see :meth:`ChannelRealization.effective_response`). Broadcastable
        shapes such as (K, S, 1) are accepted for flat fading.
    noise_var : float
        Per-subcarrier complex noise variance.
    rng : Generator
        Noise source; required when ``noise_var > 0``.
    """
    x = np.asarray(grids, dtype=complex)
    p = np.asarray(powers, dtype=float)
    h = np.asarray(responses, dtype=complex)
    if x.ndim != 3:
        raise ValueError(f"grids must have shape (K, S, M), got {x.shape}")
    k = x.shape[0]
    if p.shape != (k,):
        raise ValueError(f"expected {k} powers, got shape {p.shape}")
    if h.ndim == 2:
        h = h[:, None, :]
    if h.shape[0] != k:
        raise ValueError(f"expected {k} channel responses, got {h.shape[0]}")
    try:
        np.broadcast_shapes(h.shape, x.shape)
    except ValueError:
        raise ValueError(f"channel shape {h.shape} does not match grids {x.shape}") from None
    y = np.einsum("k,ksm->sm", np.sqrt(p), np.broadcast_to(h, x.shape) * x)
    if noise_var > 0:
        if rng is None:
            raise ValueError("a random generator is required for noise_var > 0")
        y = y + complex_noise(rng, y.shape, noise_var)
    return y


def superpose_time_domain(
    grids,
    powers,
    channels: list[ChannelRealization],
    cfg: OfdmConfig,
    noise_var: float = 0.0,
    rng: np.random.Generator | None = None,
    n_err: int = 0,
) -> np.ndarray:
    """Reference path: modulate, convolve, delay, sum, add noise, demodulate early.

    Only integer timing offsets are supported. Noise is white with variance
    ``noise_var`` per time sample, which maps to ``noise_var`` per subcarrier.
    """
    x = np.asarray(grids, dtype=complex)
    k, s, _ = x.shape
    length = s * cfg.symbol_length
    rx = np.zeros(length, dtype=complex)
    for xk, pk, ch in zip(x, powers, channels):
        tau = ch.timing_offset
        if tau != int(tau):
            raise ValueError("the time-domain path needs integer timing offsets")
        tx = modulate_grid(xk, cfg)
        conv = np.convolve(tx, ch.taps)
        delayed = np.concatenate([np.zeros(int(tau), dtype=complex), conv])[:length]
        rx[: delayed.size] += np.sqrt(pk) * delayed
    if noise_var > 0:
        if rng is None:
            raise ValueError("a random generator is required for noise_var > 0")
        rx = rx + complex_noise(rng, rx.shape, noise_var)
    return demodulate_stream(rx, cfg, s, window_offset=n_err)


def effective_responses(channels: list[ChannelRealization], cfg: OfdmConfig, n_err: int = 0) -> np.ndarray:
    """Stack the per-device effective responses into a (K, M) array."""
    return np.stack([ch.effective_response(cfg, n_err) for ch in channels])
