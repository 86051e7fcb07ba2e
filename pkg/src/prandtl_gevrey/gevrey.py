"""Gevrey weights, weighted sequence norms and convolution inequality harnesses.

Everything is computed in log space: the linear weights
``alpha_j = tau^j (j!)^(-m) (j+1)^p`` under- or overflow long before the
sequences of interest become negligible.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np
from scipy.special import gammaln


class GevreyError(ValueError):
    """Invalid Gevrey weight or sequence."""


@dataclass(frozen=True)
class GevreyWeight:
    tau: float
    m: float = 1.75
    p_corr: float = 10.0

    def __post_init__(self):
        if not self.tau > 0:
            raise GevreyError(f"tau must be positive, got {self.tau}")

    def log_weights(self, j_max: int) -> np.ndarray:
        j = np.arange(j_max + 1, dtype=float)
        return j * np.log(self.tau) - self.m * gammaln(j + 1) + self.p_corr * np.log(j + 1)


@dataclass(frozen=True)
class GevreySeq:
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 1:
            raise GevreyError("sequence must be one-dimensional")
        if len(v) < 6:
            raise GevreyError(f"need j_max >= 5, got {len(v) - 1}")
        if not np.all(np.isfinite(v)) or np.any(v < 0):
            raise GevreyError("sequence entries must be finite and nonnegative")
        object.__setattr__(self, "values", v)

    @property
    def j_max(self) -> int:
        return len(self.values) - 1

    def log_values(self) -> np.ndarray:
        with np.errstate(divide="ignore"):
            return np.log(self.values)


def weight(j: int, w: GevreyWeight) -> float:
    """log alpha_j(tau) = j ln tau - m ln j! + p ln(j+1)."""
    if j < 0:
        raise GevreyError("j must be >= 0")
    return float(w.log_weights(j)[j])


def _lse(terms: np.ndarray, axis=None):
    """logsumexp that treats all -inf slices as an empty sum."""
    terms = np.asarray(terms, dtype=float)
    peak = np.max(terms, axis=axis, keepdims=True)
    safe = np.where(np.isfinite(peak), peak, 0.0)
    with np.errstate(divide="ignore"):
        out = np.log(np.sum(np.exp(terms - safe), axis=axis, keepdims=True)) + safe
    out = np.where(np.isfinite(peak), out, -np.inf)
    return float(out.reshape(())) if axis is None else np.squeeze(out, axis=axis)


def log_lp_sum(log_a: np.ndarray, w: GevreyWeight, p: float = 2.0) -> float:
    """log of sum_j alpha_j^2 |a_j|^p given log|a_j|."""
    return _lse(2 * w.log_weights(len(log_a) - 1) + p * np.asarray(log_a))


def lp_tau_norm(seq: GevreySeq, w: GevreyWeight, p: float = 2.0) -> float:
    """(sum_j alpha_j(tau)^2 |a_j|^p)^(1/p)."""
    if p < 1:
        raise GevreyError(f"p must be >= 1, got {p}")
    return float(np.exp(log_lp_sum(seq.log_values(), w, p) / p))


class DtauReport(NamedTuple):
    exact: float
    surrogate: float


def dtau_lp2(seq: GevreySeq, w: GevreyWeight) -> DtauReport:
    """Exact tau derivative of the squared l^2(tau) norm.

    ``exact = sum (2j/tau) alpha_j^2 a_j^2`` and
    ``surrogate = ||j^(1/2) a_j||^2``, so exact = (2/tau) surrogate.
    """
    j = np.arange(seq.j_max + 1, dtype=float)
    with np.errstate(divide="ignore"):
        log_j = np.log(j)
    surrogate = np.exp(log_lp_sum(seq.log_values() + 0.5 * log_j, w, 2.0))
    return DtauReport(float(2.0 / w.tau * surrogate), float(surrogate))


def log_binom(n, k):
    return gammaln(np.asarray(n) + 1.0) - gammaln(np.asarray(k) + 1.0) - gammaln(np.asarray(n) - np.asarray(k) + 1.0)


class ConvolutionReport(NamedTuple):
    lhs: float
    rhs_product: float
    ratio: float
    hypothesis_ok: bool


def _ratio_report(log_c: np.ndarray, factors: Sequence[GevreySeq], w: GevreyWeight,
                  hypothesis_ok: bool) -> ConvolutionReport:
    lhs = float(np.exp(0.5 * log_lp_sum(log_c, w)))
    log_rhs = sum(0.5 * log_lp_sum(f.log_values(), w) for f in factors)
    rhs = float(np.exp(log_rhs))
    if lhs == 0.0:
        ratio = 0.0
    elif not np.isfinite(log_rhs):
        ratio = np.inf
    else:
        ratio = float(np.exp(np.log(lhs) - log_rhs))
    return ConvolutionReport(lhs, rhs, ratio, hypothesis_ok)


def _shifted(log_a: np.ndarray, m: int, n: int) -> np.ndarray:
    out = np.full(n, -np.inf)
    src = log_a[m:m + n]
    out[:len(src)] = src
    return out


def binom_convolution_check(a: GevreySeq, b: GevreySeq, m: int, w: GevreyWeight,
                            side: str = "low") -> ConvolutionReport:
    """Ratio ||c||_{l2(tau)} / (||a|| ||b||) for the half binomial convolutions.

    low:  c_j = sum_{k <= [j/2]} C(j,k) a_{k+m} b_{j-k}
    high: c_j = sum_{[j/2] <= k <= j} C(j,k) a_k b_{j-k+m}

    Shifted indices beyond the stored range count as zero. ``m > 5`` is
    reported through ``hypothesis_ok`` rather than rejected.
    """
    if side not in ("low", "high"):
        raise GevreyError(f"side must be 'low' or 'high', got {side!r}")
    if m < 0:
        raise GevreyError("shift m must be >= 0")
    if a.j_max != b.j_max:
        raise GevreyError("sequences must share j_max")
    n = a.j_max + 1
    la, lb = a.log_values(), b.log_values()
    j, k = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    if side == "low":
        mask = k <= j // 2
        terms = _shifted(la, m, n)[k] + lb[np.maximum(j - k, 0)]
    else:
        mask = (k >= j // 2) & (k <= j)
        terms = la[k] + _shifted(lb, m, n)[np.maximum(j - k, 0)]
    with np.errstate(invalid="ignore"):
        terms = np.where(mask, terms + log_binom(j, np.minimum(k, j)), -np.inf)
    log_c = _lse(terms, axis=1)
    return _ratio_report(log_c, (a, b), w, m <= 5)


def _log_convolve(lx: np.ndarray, ly: np.ndarray) -> np.ndarray:
    n = len(lx)
    r, q = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    terms = np.where(q <= r, lx[q] + ly[np.maximum(r - q, 0)], -np.inf)
    return _lse(terms, axis=1)


def multinom_convolution_check(seqs: Sequence[GevreySeq], shifts: Sequence[int],
                               w: GevreyWeight) -> ConvolutionReport:
    """Restricted multinomial convolution ratio.

    c_j = sum over k_1 + ... + k_N = j with k_1 >= j/N of
    j!/(k_1! ... k_N!) a^1_{k_1} prod_{l>=2} a^l_{k_l + m_l}.
    """
    nseq = len(seqs)
    if nseq < 2 or len(shifts) != nseq - 1:
        raise GevreyError("need N >= 2 sequences and N-1 shifts")
    if any(m < 0 for m in shifts):
        raise GevreyError("shifts must be >= 0")
    n = seqs[0].j_max + 1
    if any(s.j_max + 1 != n for s in seqs):
        raise GevreyError("sequences must share j_max")
    k = np.arange(n, dtype=float)
    log_fact = gammaln(k + 1)
    # tail: sum over k_2..k_N = r of prod a^l_{k_l+m_l}/k_l!
    tail = None
    for s, m in zip(seqs[1:], shifts):
        term = _shifted(s.log_values(), m, n) - log_fact
        tail = term if tail is None else _log_convolve(tail, term)
    head = seqs[0].log_values() - log_fact
    j, k1 = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    mask = (k1 * nseq >= j) & (k1 <= j)
    terms = np.where(mask, head[k1] + tail[np.maximum(j - k1, 0)], -np.inf)
    log_c = log_fact + _lse(terms, axis=1)
    return _ratio_report(log_c, seqs, w, all(m <= 5 for m in shifts))


def random_sequence(rng: np.random.Generator, j_max: int, w: GevreyWeight) -> GevreySeq:
    """Log-normal sequence scaled so every weighted term is O(1/(j+1))."""
    z = rng.standard_normal(j_max + 1)
    j = np.arange(j_max + 1)
    log_a = z - np.log(j + 1.0) - w.log_weights(j_max)
    return GevreySeq(np.exp(log_a))
