"""Experiment drivers behind the command-line subcommands.

Each driver takes plain parameters and returns ``(columns, rows)`` ready for
:func:`write_csv`; nothing here touches the file system except that function.
"""

from __future__ import annotations

import csv
from dataclasses import replace
from pathlib import Path

import numpy as np

from fskmv import rng as streams
from fskmv.analysis import (
    BoundInputs,
    convergence_bound,
    expected_energies,
    flip_prob,
    flip_prob_given_split,
    mc_flip_prob,
)
from fskmv.channel import EPA, TapProfile, max_timing_offset, realize_channel, superpose_at_es
from fskmv.geometry import CellConfig, ed_link_distances, effective_snr, lambda_param, received_power
from fskmv.oac import build_fsk_map, fskmv_detect, fskmv_encode, fskmv_energies, obda_encode, qpsk
from fskmv.rng import random_signs, substream
from fskmv.waveform import OfdmConfig, ccdf, pmepr, to_db

PMEPR_KINDS = ("fsk_mv_randomized", "fsk_mv_unrandomized", "obda_correlated", "obda_random", "qpsk_ofdm")


def write_csv(path, columns, rows, meta: str) -> None:
    """CSV with one ``#``-prefixed metadata line followed by a header row."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        fh.write(f"# {meta}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    return v


def lambda_table(cell: CellConfig, r_max_values, alpha_eff_values):
    """lambda over cell radius and effective path-loss exponent."""
    rows = []
    for a in alpha_eff_values:
        for r in r_max_values:
            c = replace(cell, r_max=float(r)).with_alpha_eff(float(a))
            rows.append((float(a), float(r), lambda_param(c)))
    return ["alpha_eff", "r_max", "lambda"], rows


def flip_table(cell: CellConfig, alpha_eff_values, snr_db_values, q_values, es: float = 2.0):
    """Effective SNR and flip probability for each (alpha_eff, SNR, q_i)."""
    rows = []
    for a in alpha_eff_values:
        for snr in snr_db_values:
            c = cell.with_alpha_eff(float(a)).with_snr_db(float(snr))
            lam = lambda_param(c)
            xi = effective_snr(c, es)
            for qi in q_values:
                rows.append((float(a), float(snr), lam, xi, float(qi), flip_prob(float(qi), c.num_eds, xi)))
    return ["alpha_eff", "snr_db", "lambda", "xi", "q_i", "p_i"], rows


def bound_table(cell: CellConfig, alpha_eff_values, rounds_values, gamma: int, l1: float, sigma1: float,
                f0_gap: float, es: float = 2.0):
    """Right-hand side of the convergence bound over N for each alpha_eff."""
    rows = []
    for a in alpha_eff_values:
        c = cell.with_alpha_eff(float(a))
        xi = effective_snr(c, es)
        for n in rounds_values:
            b = BoundInputs(int(n), gamma, l1, sigma1, f0_gap, c.num_eds, xi)
            rows.append((float(a), int(n), xi, convergence_bound(b)))
    return ["alpha_eff", "rounds", "xi", "bound"], rows


def detector_table(cell: CellConfig, k_plus_values, snr_db_values, alpha_eff_values, trials: int, seed: int,
                   es: float = 2.0):
    """Analytic versus Monte Carlo flip probability with binomial standard errors.

    Energies are also reported against their expected values. Rows with
    ``alpha_eff > 0`` use random drops in the cell, where the exponential
    energy model is only approximate.
    """
    rows = []
    point = 0
    for a in alpha_eff_values:
        for snr in snr_db_values:
            c = cell.with_alpha_eff(float(a)).with_snr_db(float(snr))
            lam = lambda_param(c)
            xi = effective_snr(c, es)
            for kp in k_plus_values:
                res = mc_flip_prob(c.num_eds, int(kp), trials, substream(seed, streams.MONTE_CARLO, 0, point),
                                   c.noise_var, cell=c, es=es)
                mu_p, mu_m = expected_energies(int(kp), c.num_eds, es, lam, c.noise_var)
                analytic = flip_prob_given_split(c.num_eds, int(kp), xi)
                z = (res.flip_rate - analytic) / res.stderr if res.stderr > 0 else 0.0
                rows.append((float(a), float(snr), c.num_eds, int(kp), analytic, res.flip_rate, res.stderr, z,
                             mu_p, res.mean_e_plus, mu_m, res.mean_e_minus))
                point += 1
    cols = ["alpha_eff", "snr_db", "K", "k_plus", "analytic", "empirical", "stderr", "z_score",
            "mu_plus", "mean_e_plus", "mu_minus", "mean_e_minus"]
    return cols, rows


def sync_pair(cell: CellConfig, ofdm: OfdmConfig, n_coords: int, seed: int, trial: int,
              profile: TapProfile = EPA, t_sync: float | None = None, n_err: int = 3,
              integer_offset: bool = True):
    """One paired trial of FSK-MV detection with and without timing errors.

    Both runs share votes, randomization symbols, channel taps, noise and
    tie-break streams; only the per-device arrival delays (uniform up to
    ``t_sync``) and the receiver's early window of ``n_err`` samples differ.

    Returns
    -------
    (v_sync, v_aligned, tie) : arrays of length ``n_coords``
        Decisions of both runs and a mask of exact energy ties in either run.
    """
    k = cell.num_eds
    m = ofdm.m_active
    rmap = build_fsk_map(n_coords, m)
    max_off = max_timing_offset(ofdm, t_sync)
    powers = np.atleast_1d(received_power(ed_link_distances(cell), cell))
    votes = [random_signs(n_coords, substream(seed, streams.SIGN, trial, e)) for e in range(k)]
    grids = np.stack([fskmv_encode(votes[e], rmap, substream(seed, streams.ENCODE, trial, e)) for e in range(k)])
    out = []
    for off, err in ((max_off, n_err), (0.0, 0)):
        chans = [realize_channel(profile, ofdm, substream(seed, streams.CHANNEL, trial, e), max_offset=off, n_err=err,
                                 integer_offset=integer_offset) for e in range(k)]
        h = np.stack([c.effective_response(ofdm, err) for c in chans])
        y = superpose_at_es(grids, powers, h, cell.noise_var, substream(seed, streams.NOISE, trial))
        ep, em = fskmv_energies(y, rmap)
        out.append((fskmv_detect(y, rmap, substream(seed, streams.DETECTOR, trial)), ep == em))
    (v_sync, tie_sync), (v_aligned, tie_aligned) = out
    return v_sync, v_aligned, tie_sync | tie_aligned


def pmepr_samples(kind: str, n_symbols: int, ofdm: OfdmConfig, rng: np.random.Generator,
                  oversampling: int | None = None, correlation: float = 0.9, chunk: int = 2000) -> np.ndarray:
    """PMEPR (linear) of ``n_symbols`` independent OFDM symbols of a given kind.

    ``fsk_mv_randomized``
        random votes, QPSK randomization symbols
    ``fsk_mv_unrandomized``
        all votes +1, no randomization (in-phase tones on every other subcarrier)
    ``obda_correlated`` / ``obda_random``
        QPSK vote pairs on all subcarriers; correlated votes follow a common
        sign with probability ``correlation``
    ``qpsk_ofdm``
        random QPSK on ``M/2`` contiguous subcarriers, the reference for FSK-MV
    """
    m = ofdm.m_active
    out = np.empty(n_symbols)
    rmap = build_fsk_map(m // 2, m)
    done = 0
    while done < n_symbols:
        n = min(chunk, n_symbols - done)
        rows = np.zeros((n, m), dtype=complex)
        for i in range(n):
            if kind == "fsk_mv_randomized":
                rows[i] = fskmv_encode(random_signs(m // 2, rng), rmap, rng)[0]
            elif kind == "fsk_mv_unrandomized":
                rows[i] = fskmv_encode(np.ones(m // 2, dtype=np.int8), rmap, randomize=False)[0]
            elif kind in ("obda_correlated", "obda_random"):
                if kind == "obda_random":
                    v = random_signs(2 * m, rng)
                else:
                    common = random_signs(1, rng)[0]
                    follow = rng.random(2 * m) < correlation
                    v = np.where(follow, common, random_signs(2 * m, rng)).astype(np.int8)
                rows[i] = obda_encode(v, m, rng)[0]
            elif kind == "qpsk_ofdm":
                lo = m // 4
                rows[i, lo : lo + m // 2] = qpsk(rng, m // 2)
            else:
                raise ValueError(f"unknown PMEPR kind {kind!r}; expected one of {PMEPR_KINDS}")
        out[done : done + n] = pmepr(rows, ofdm, oversampling)
        done += n
    return out


def pmepr_table(ofdm: OfdmConfig, n_symbols: int, seed: int, thresholds_db, kinds=PMEPR_KINDS,
                oversampling: int | None = None, correlation: float = 0.9):
    """CCDF of PMEPR in dB for each kind, one column per kind."""
    thresholds_db = np.asarray(thresholds_db, dtype=float)
    cols = ["threshold_db"]
    curves = []
    for i, kind in enumerate(kinds):
        vals = pmepr_samples(kind, n_symbols, ofdm, substream(seed, streams.PMEPR, 0, i), oversampling, correlation)
        curves.append(ccdf(to_db(vals), thresholds_db))
        cols.append(kind)
    rows = [(float(t),) + tuple(float(c[j]) for c in curves) for j, t in enumerate(thresholds_db)]
    return cols, rows


def ccdf_quantile_db(values_linear, prob: float) -> float:
    """Threshold (dB) exceeded with probability ``prob``."""
    return float(np.quantile(to_db(np.asarray(values_linear)), 1 - prob))


def rounds_grid(n_max: int, points: int = 10) -> list[int]:
    return sorted({max(1, int(round(x))) for x in np.geomspace(1, n_max, points)}) if n_max > 1 else [1]
