"""Detector statistics, flip probabilities and the convergence bound.

The energy on each resource of a vote pair is modelled as exponential with
mean ``mu = es * K_side * lambda + noise_var``. Under that model the detector
errs with probability ``mu_minus / (mu_plus + mu_minus)`` when the true
majority is +1, which in turn drives the convergence bound of signSGD with a
noisy majority vote. Monte Carlo harnesses in this module run the full
encode/superpose/detect pipeline to check the model.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln, xlog1py, xlogy

from fskmv.channel import rayleigh_flat, superpose_at_es
from fskmv.geometry import CellConfig, received_power, sample_link_distance
from fskmv.oac import ES, build_fsk_map, fskmv_detect, fskmv_encode, fskmv_energies

# brute-force mixture is only evaluated up to this many devices
MIXTURE_MAX_K = 60


@dataclass(frozen=True)
class DetectorStats:
    mu_plus: float
    mu_minus: float
    xi: float
    k_plus: int
    k_minus: int


def detector_stats(k_plus: int, num_eds: int, lam: float, noise_var: float, es: float = ES) -> DetectorStats:
    mu_p, mu_m = expected_energies(k_plus, num_eds, es, lam, noise_var)
    xi = es * lam / noise_var if noise_var > 0 else math.inf
    return DetectorStats(mu_p, mu_m, xi, k_plus, num_eds - k_plus)


def expected_energies(k_plus: int, num_eds: int, es: float, lam: float, noise_var: float) -> tuple[float, float]:
    """Mean energies on the + and - resources for a ``k_plus`` / ``K - k_plus`` split."""
    if not 0 <= k_plus <= num_eds:
        raise ValueError(f"k_plus must lie in [0, {num_eds}], got {k_plus}")
    return es * k_plus * lam + noise_var, es * (num_eds - k_plus) * lam + noise_var


def _check_means(mu_plus, mu_minus):
    if np.any(np.asarray(mu_plus) <= 0) or np.any(np.asarray(mu_minus) <= 0):
        raise ValueError("energy means must be positive")


def delta_pdf(delta, mu_plus: float, mu_minus: float):
    """Density of ``e_plus - e_minus`` for independent exponential energies."""
    _check_means(mu_plus, mu_minus)
    d = np.asarray(delta, dtype=float)
    out = np.where(d <= 0, np.exp(np.minimum(d, 0) / mu_minus), np.exp(-np.maximum(d, 0) / mu_plus))
    out = out / (mu_plus + mu_minus)
    return float(out) if out.ndim == 0 else out


def delta_cdf(delta, mu_plus: float, mu_minus: float):
    _check_means(mu_plus, mu_minus)
    d = np.asarray(delta, dtype=float)
    total = mu_plus + mu_minus
    neg = mu_minus * np.exp(np.minimum(d, 0) / mu_minus) / total
    pos = 1 - mu_plus * np.exp(-np.maximum(d, 0) / mu_plus) / total
    out = np.where(d <= 0, neg, pos)
    return float(out) if out.ndim == 0 else out


def flip_prob_given_split(num_eds: int, k_plus: int, xi: float) -> float:
    """P[detected vote is not +1 | k_plus of K devices vote +1].

    ``((K - k_plus) + 1/xi) / (K + 2/xi)``; ``xi = inf`` is the noiseless limit.
    """
    if not xi > 0:
        raise ValueError(f"xi must be positive, got {xi}")
    if not 0 <= k_plus <= num_eds:
        raise ValueError(f"k_plus must lie in [0, {num_eds}], got {k_plus}")
    inv = 0.0 if math.isinf(xi) else 1.0 / xi
    return ((num_eds - k_plus) + inv) / (num_eds + 2 * inv)


def flip_prob(q_i: float, num_eds: int, xi: float) -> float:
    """Probability that the detected vote disagrees with the true gradient sign.

    Each device votes wrongly with probability ``q_i``, independently. The
    binomial mixture over splits collapses to
    ``(q_i + 1/(xi K)) / (1 + 2/(xi K))``.
    """
    if not 0 <= q_i <= 0.5:
        raise ValueError(f"q_i must lie in [0, 0.5], got {q_i}")
    if not xi > 0:
        raise ValueError(f"xi must be positive, got {xi}")
    inv = 0.0 if math.isinf(xi) else 1.0 / (xi * num_eds)
    return (q_i + inv) / (1 + 2 * inv)


def flip_prob_mixture(q_i: float, num_eds: int, xi: float) -> float:
    """Explicit binomial mixture of :func:`flip_prob_given_split` (log-space weights)."""
    if num_eds > MIXTURE_MAX_K:
        raise ValueError(f"mixture evaluated only for K <= {MIXTURE_MAX_K}; use flip_prob")
    k = np.arange(num_eds + 1)
    cond = np.array([flip_prob_given_split(num_eds, int(j), xi) for j in k])
    log_binom = gammaln(num_eds + 1) - gammaln(k + 1) - gammaln(num_eds - k + 1)
    log_w = log_binom + xlog1py(k, -q_i) + xlogy(num_eds - k, q_i)
    w = np.exp(log_w)
    return float(np.sum(w * cond))


def q_bound(sigma_coord: float, grad_coord: float, n_b: int) -> float:
    """Upper bound on a single device's vote error probability for one coordinate.

    ``sqrt(2) * sigma / (3 |g| sqrt(n_b))`` for unimodal symmetric gradient
    noise, capped at 0.5. A zero gradient gives 0.5.
    """
    if grad_coord == 0:
        return 0.5
    return min(0.5, math.sqrt(2) * sigma_coord / (3 * abs(grad_coord) * math.sqrt(n_b)))


@dataclass(frozen=True)
class BoundInputs:
    n_rounds: int
    gamma: int
    l1_smoothness: float
    sigma1: float
    f0_minus_fstar: float
    num_eds: int
    xi: float

    def __post_init__(self):
        if self.n_rounds < 1 or self.gamma < 1 or self.num_eds < 1:
            raise ValueError("n_rounds, gamma and num_eds must be positive integers")
        for name in ("l1_smoothness", "sigma1", "f0_minus_fstar"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")
        if not self.xi > 0:
            raise ValueError("xi must be positive")


def bound_prefactor(num_eds: int, xi: float, gamma: int) -> float:
    """``a = (1 + 2/(xi K)) / sqrt(gamma)``."""
    inv = 0.0 if math.isinf(xi) else 2.0 / (xi * num_eds)
    return (1 + inv) / math.sqrt(gamma)


def descent_factor(num_eds: int, xi: float) -> float:
    """Per-round fraction ``1 / (1 + 2/(K xi))`` of the l1 gradient norm kept in expectation.

    This is the reciprocal of ``sqrt(gamma) * a``.
    """
    inv = 0.0 if math.isinf(xi) else 2.0 / (xi * num_eds)
    return 1.0 / (1 + inv)


def bound_schedule(n_rounds: int, gamma: int, l1_smoothness: float) -> tuple[float, float]:
    """Batch size ``N / gamma`` and learning rate ``1 / sqrt(||L||_1 n_b)`` assumed by the bound."""
    n_b = n_rounds / gamma
    return n_b, 1.0 / math.sqrt(l1_smoothness * n_b)


def convergence_bound(b: BoundInputs) -> float:
    """Bound on the average l1 gradient norm after ``N`` rounds."""
    a = bound_prefactor(b.num_eds, b.xi, b.gamma)
    first = a * math.sqrt(b.l1_smoothness) * (b.f0_minus_fstar + b.gamma / 2)
    second = 2 * math.sqrt(2) / 3 * math.sqrt(b.gamma) * b.sigma1
    return (first + second) / math.sqrt(b.n_rounds)


@dataclass
class McResult:
    flip_rate: float
    stderr: float
    mean_e_plus: float
    mean_e_minus: float
    trials: int
    flips: int


def _trial_powers(k: int, n: int, cell: CellConfig | None, rng: np.random.Generator) -> np.ndarray:
    if cell is None or cell.alpha_eff == 0:
        return np.ones((k, n))
    d = sample_link_distance(cell, rng, size=(k, n))
    return received_power(d, cell)


def mc_flip_prob(
    num_eds: int,
    k_plus: int,
    trials: int,
    rng: np.random.Generator,
    noise_var: float,
    cell: CellConfig | None = None,
    es: float = ES,
    chunk: int = 20_000,
) -> McResult:
    """Empirical detector flip rate for a fixed vote split.

    Each trial is one coordinate: ``k_plus`` devices vote +1, the rest -1,
    every device sees an independent flat Rayleigh coefficient and, when
    ``cell`` has ``alpha_eff > 0``, an independent uniform drop in the cell.
    The votes go through :func:`fskmv_encode`, :func:`superpose_at_es` and
    :func:`fskmv_detect`. A flip is a detected vote other than +1.
    """
    if trials < 1:
        raise ValueError("trials must be positive")
    enc_rng, chan_rng, noise_rng, det_rng, drop_rng = rng.spawn(5)
    flips = 0
    sum_ep = sum_em = 0.0
    done = 0
    while done < trials:
        n = min(chunk, trials - done)
        rmap = build_fsk_map(n, 2, n_symbols=n)
        grids = np.empty((num_eds, n, 2), dtype=complex)
        for k in range(num_eds):
            votes = np.full(n, 1 if k < k_plus else -1, dtype=np.int8)
            grids[k] = fskmv_encode(votes, rmap, enc_rng, es=es)
        h = rayleigh_flat(chan_rng, (num_eds, n, 1))
        # per-trial powers enter through the channel amplitude
        amp = np.sqrt(_trial_powers(num_eds, n, cell, drop_rng))[:, :, None]
        y = superpose_at_es(grids, np.ones(num_eds), h * amp, noise_var, noise_rng)
        v = fskmv_detect(y, rmap, det_rng)
        ep, em = fskmv_energies(y, rmap)
        flips += int(np.sum(v != 1))
        sum_ep += float(ep.sum())
        sum_em += float(em.sum())
        done += n
    p = flips / trials
    return McResult(
        flip_rate=p,
        stderr=math.sqrt(p * (1 - p) / trials),
        mean_e_plus=sum_ep / trials,
        mean_e_minus=sum_em / trials,
        trials=trials,
        flips=flips,
    )


def binomial_stderr(p: float, trials: int) -> float:
    return math.sqrt(p * (1 - p) / trials)
