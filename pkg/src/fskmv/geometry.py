"""Single-cell geometry, fractional power control and the path-loss summary lambda."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

# below this distance from 2 the logarithmic branch of lambda is used
_ALPHA2_TOL = 1e-9


@dataclass(frozen=True)
class CellConfig:
    """Cell layout and link budget.

    Attributes
    ----------
    r_min, r_max : float
        Inner and outer radius of the annulus holding the edge devices (m).
    r_ref : float
        Reference distance at which the SNR equals ``1 / noise_var`` (m).
    alpha : float
        Path-loss exponent.
    beta : float
        Fraction of the path-loss exponent compensated by power control,
        ``0 <= beta <= alpha``. ``beta == alpha`` is perfect power alignment.
    noise_var : float
        Noise variance per subcarrier, linear.
    num_eds : int
        Number of edge devices K.
    """

    r_min: float = 10.0
    r_max: float = 100.0
    r_ref: float = 10.0
    alpha: float = 4.0
    beta: float = 4.0
    noise_var: float = 0.01
    num_eds: int = 10

    def __post_init__(self):
        if not self.r_ref <= self.r_min < self.r_max:
            raise ValueError(
                f"need r_ref <= r_min < r_max, got r_ref={self.r_ref}, r_min={self.r_min}, r_max={self.r_max}"
            )
        if self.r_ref <= 0:
            raise ValueError(f"r_ref must be positive, got {self.r_ref}")
        if not 0 <= self.beta <= self.alpha:
            raise ValueError(f"beta must lie in [0, alpha={self.alpha}], got {self.beta}")
        if self.noise_var < 0:
            raise ValueError(f"noise_var must be >= 0, got {self.noise_var}")
        if self.num_eds < 1:
            raise ValueError(f"num_eds must be >= 1, got {self.num_eds}")

    @property
    def alpha_eff(self) -> float:
        return self.alpha - self.beta

    @property
    def snr_db(self) -> float:
        """Reference SNR ``1 / noise_var`` in dB."""
        return float(10 * np.log10(1.0 / self.noise_var)) if self.noise_var > 0 else float("inf")

    def with_alpha_eff(self, alpha_eff: float) -> "CellConfig":
        """Copy with ``beta`` chosen so that ``alpha - beta == alpha_eff``.

        ``alpha`` is raised to ``alpha_eff`` when needed.
        """
        alpha = max(self.alpha, alpha_eff)
        return replace(self, alpha=alpha, beta=alpha - alpha_eff)

    def with_snr_db(self, snr_db: float) -> "CellConfig":
        return replace(self, noise_var=10 ** (-snr_db / 10))

    @classmethod
    def from_snr_db(cls, snr_db: float, **kwargs) -> "CellConfig":
        return cls(noise_var=10 ** (-snr_db / 10), **kwargs)


def ed_link_distances(cfg: CellConfig) -> np.ndarray:
    """Deterministic placement with uniformly spaced squared distances.

    ``d_k = sqrt(r_min**2 + (k - 1) * (r_max**2 - r_min**2) / (K - 1))`` for
    ``k = 1..K``. A single device sits at ``r_min``.
    """
    k = cfg.num_eds
    if k == 1:
        return np.array([cfg.r_min], dtype=float)
    d2 = cfg.r_min**2 + np.arange(k) * (cfg.r_max**2 - cfg.r_min**2) / (k - 1)
    d = np.sqrt(d2)
    # pin the endpoints against rounding
    d[0], d[-1] = cfg.r_min, cfg.r_max
    return d


def sample_link_distance(cfg: CellConfig, rng: np.random.Generator, size=None):
    """Draw distances of devices dropped uniformly over the annulus.

    Inverse-CDF sampling of ``f(d) = 2 d / (r_max**2 - r_min**2)``.
    """
    u = rng.random(size)
    return np.sqrt(cfg.r_min**2 + u * (cfg.r_max**2 - cfg.r_min**2))


def received_power(d, cfg: CellConfig):
    """Received power ``(d / r_ref) ** -alpha_eff`` after power control.

    Raises
    ------
    ValueError
        If any distance is below ``r_ref``.
    """
    d_arr = np.asarray(d, dtype=float)
    if np.any(d_arr < cfg.r_ref):
        raise ValueError(f"link distance below r_ref={cfg.r_ref} is outside the model")
    p = (d_arr / cfg.r_ref) ** (-cfg.alpha_eff)
    return float(p) if p.ndim == 0 else p


def lambda_param(cfg: CellConfig) -> float:
    """Expected received power ``E[(d / r_ref) ** -alpha_eff]`` over a uniform drop.

    Closed form of the mean over the annulus. Equals 1 for perfect power
    control and shrinks with the residual path-loss exponent and cell size.
    """
    a = cfg.alpha_eff
    r_min, r_max, r_ref = cfg.r_min, cfg.r_max, cfg.r_ref
    scale = 2 * r_ref**a / (r_max**2 - r_min**2)
    if abs(a - 2) < _ALPHA2_TOL:
        return float(scale * np.log(r_max / r_min))
    return float(scale * (r_min ** (2 - a) - r_max ** (2 - a)) / (a - 2))


def effective_snr(cfg: CellConfig, es: float = 2.0) -> float:
    """``xi = es * lambda / noise_var``, the SNR governing detector errors."""
    if cfg.noise_var == 0:
        return float("inf")
    return es * lambda_param(cfg) / cfg.noise_var


def ring_radii(cfg: CellConfig, n_rings: int = 5) -> np.ndarray:
    """Outer radii of ``n_rings`` equal-area rings between r_min and r_max."""
    u = np.arange(1, n_rings + 1)
    return np.sqrt(cfg.r_min**2 + u * (cfg.r_max**2 - cfg.r_min**2) / n_rings)


def ring_index(d, cfg: CellConfig, n_rings: int = 5) -> np.ndarray:
    """0-based equal-area ring index for each distance; r_max falls in the last ring."""
    d2 = np.asarray(d, dtype=float) ** 2
    bounds = ring_radii(cfg, n_rings) ** 2
    idx = np.searchsorted(bounds, d2, side="right")
    return np.minimum(idx, n_rings - 1)
