"""Over-the-air majority vote: FSK-MV, the OBDA baseline, and the ideal vote.

Votes are int8 arrays over {+1, -1}. Every function that may need to break a
tie takes an explicit generator.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from fskmv.rng import random_signs

ES = 2.0


def sign_random_ties(x, rng: np.random.Generator) -> np.ndarray:
    """Entrywise sign with zeros replaced by uniform random signs."""
    x = np.asarray(x)
    out = np.sign(x).astype(np.int8)
    zero = out == 0
    n_zero = int(zero.sum())
    if n_zero:
        out[zero] = random_signs(n_zero, rng)
    return out


def check_votes(votes) -> np.ndarray:
    v = np.asarray(votes)
    if not np.all((v == 1) | (v == -1)):
        raise ValueError("votes must be exactly +1 or -1")
    return v.astype(np.int8)


@dataclass(frozen=True)
class ResourceMap:
    """Two resources ``(t, f)`` per gradient coordinate, one per vote option."""

    t_plus: np.ndarray
    f_plus: np.ndarray
    t_minus: np.ndarray
    f_minus: np.ndarray
    n_symbols: int
    m_active: int

    def __post_init__(self):
        q = self.q
        for arr in (self.f_plus, self.t_minus, self.f_minus):
            if len(arr) != q:
                raise ValueError("all coordinate arrays must have the same length")
        if 2 * q > self.n_symbols * self.m_active:
            raise ValueError(f"{2 * q} resources do not fit in {self.n_symbols} x {self.m_active}")
        t = np.concatenate([self.t_plus, self.t_minus])
        f = np.concatenate([self.f_plus, self.f_minus])
        if t.size and (t.min() < 0 or t.max() >= self.n_symbols or f.min() < 0 or f.max() >= self.m_active):
            raise ValueError("resource coordinates out of the grid")
        if np.unique(t * self.m_active + f).size != 2 * q:
            raise ValueError("resource map is not injective")

    @property
    def q(self) -> int:
        return len(self.t_plus)


def fsk_symbols_needed(q: int, m_active: int) -> int:
    return math.ceil(q / (m_active // 2))


def build_fsk_map(q: int, m_active: int, n_symbols: int | None = None) -> ResourceMap:
    """Canonical FSK-MV map: coordinate ``i`` uses subcarriers ``2j`` (+) and ``2j+1`` (-).

    Pairs are packed row-major, ``M/2`` coordinates per OFDM symbol. With
    ``n_symbols`` omitted the smallest sufficient grid is used.
    """
    if m_active % 2:
        raise ValueError(f"m_active must be even, got {m_active}")
    if q < 1:
        raise ValueError("q must be positive")
    needed = fsk_symbols_needed(q, m_active)
    if n_symbols is None:
        n_symbols = needed
    elif n_symbols < needed:
        raise ValueError(f"q={q} needs {needed} OFDM symbols of {m_active} subcarriers, got {n_symbols}")
    i = np.arange(q)
    per_row = m_active // 2
    t = i // per_row
    f = 2 * (i % per_row)
    return ResourceMap(t_plus=t, f_plus=f, t_minus=t.copy(), f_minus=f + 1, n_symbols=n_symbols, m_active=m_active)


def qpsk(rng: np.random.Generator, size) -> np.ndarray:
    """Uniform unit-modulus QPSK symbols."""
    return np.exp(0.5j * np.pi * (rng.integers(0, 4, size=size) + 0.5))


def fskmv_encode(
    votes,
    rmap: ResourceMap,
    rng: np.random.Generator | None = None,
    es: float = ES,
    randomize: bool = True,
) -> np.ndarray:
    """Place ``sqrt(es) * r`` on the resource of each vote and zero on its partner.

    ``r`` is a random QPSK symbol per coordinate when ``randomize`` is set,
    otherwise 1. Unmapped resources stay zero.
    """
    v = check_votes(votes)
    if v.size != rmap.q:
        raise ValueError(f"expected {rmap.q} votes, got {v.size}")
    if randomize:
        if rng is None:
            raise ValueError("randomization needs a random generator")
        sym = np.sqrt(es) * qpsk(rng, v.size)
    else:
        sym = np.full(v.size, np.sqrt(es), dtype=complex)
    grid = np.zeros((rmap.n_symbols, rmap.m_active), dtype=complex)
    plus = v > 0
    grid[rmap.t_plus[plus], rmap.f_plus[plus]] = sym[plus]
    grid[rmap.t_minus[~plus], rmap.f_minus[~plus]] = sym[~plus]
    return grid


def fskmv_energies(received, rmap: ResourceMap) -> tuple[np.ndarray, np.ndarray]:
    """Energies ``(e_plus, e_minus)`` on the two resources of every coordinate."""
    y = np.asarray(received)
    if y.shape != (rmap.n_symbols, rmap.m_active):
        raise ValueError(f"received grid shape {y.shape} does not match map")
    e_plus = np.abs(y[rmap.t_plus, rmap.f_plus]) ** 2
    e_minus = np.abs(y[rmap.t_minus, rmap.f_minus]) ** 2
    return e_plus, e_minus


def fskmv_detect(received, rmap: ResourceMap, rng: np.random.Generator) -> np.ndarray:
    """Energy detector: ``sign(e_plus - e_minus)``, exact ties broken at random."""
    e_plus, e_minus = fskmv_energies(received, rmap)
    return sign_random_ties(e_plus - e_minus, rng)


def obda_symbols_needed(q: int, m_active: int) -> int:
    return math.ceil(q / (2 * m_active))


def obda_encode(
    votes,
    m_active: int,
    rng: np.random.Generator,
    response=None,
    tci_threshold: float = 0.2,
) -> np.ndarray:
    """OBDA transmit grid: vote pairs as QPSK, optionally with truncated channel inversion.

    Coordinate pairs ``(2j, 2j+1)`` form ``(v_2j + 1j*v_2j+1)/sqrt(2)`` on
    subcarrier ``j`` (row-major). Given a per-subcarrier ``response`` of shape
    (M,) or (S, M), symbols are multiplied by ``conj(h)/|h|**2`` where
    ``|h| > tci_threshold`` and zeroed elsewhere. ``response=None`` sends the
    raw QPSK grid (no CSI). An odd ``q`` is padded with one random vote.
    """
    v = check_votes(votes)
    if v.size % 2:
        v = np.concatenate([v, random_signs(1, rng)])
    sym = (v[0::2] + 1j * v[1::2]) / np.sqrt(2)
    n_sym = obda_symbols_needed(v.size, m_active)
    grid = np.zeros(n_sym * m_active, dtype=complex)
    grid[: sym.size] = sym
    grid = grid.reshape(n_sym, m_active)
    if response is not None:
        h = np.broadcast_to(np.asarray(response, dtype=complex), grid.shape)
        mag = np.abs(h)
        keep = mag > tci_threshold
        inv = np.zeros_like(h)
        inv[keep] = np.conj(h[keep]) / mag[keep] ** 2
        grid = grid * inv
    return grid


def obda_detect(received, q: int, rng: np.random.Generator) -> np.ndarray:
    """Signs of the real and imaginary parts of the first ``ceil(q/2)`` subcarriers."""
    y = np.ravel(np.asarray(received))
    n_pairs = math.ceil(q / 2)
    if y.size < n_pairs:
        raise ValueError(f"received grid too small for q={q}")
    y = y[:n_pairs]
    out = np.empty(2 * n_pairs, dtype=np.int8)
    out[0::2] = sign_random_ties(y.real, rng)
    out[1::2] = sign_random_ties(y.imag, rng)
    return out[:q]


def ideal_mv(vote_vectors, rng: np.random.Generator) -> np.ndarray:
    """Coordinate-wise majority of a (K, q) vote array; ties at random."""
    v = np.atleast_2d(check_votes(vote_vectors))
    return sign_random_ties(v.astype(np.int64).sum(axis=0), rng)
