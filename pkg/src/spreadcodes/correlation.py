"""Periodic correlation kernels and the family evaluation objective.

All correlations are cyclic, normalized by the sequence length, and computed
on the signed (+1/-1) view. Numerators are sums of +/-1 terms and therefore
exact integers; both spectrum paths (direct sum and FFT) recover the integer
numerator before normalizing, so they agree exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .bitseq import BitSequence, CodeFamily

__all__ = [
    "CorrelationSpectrum",
    "ObjectiveReport",
    "auto_corr",
    "cross_corr",
    "odd_auto_corr",
    "odd_cross_corr",
    "full_auto_spectrum",
    "full_cross_spectrum",
    "evaluate_family",
    "evaluate_chips",
    "welch_bound",
    "FFT_MIN_LENGTH",
]

# Direct O(l^2) summation below this length, FFT above. Both paths stay
# available for cross-checking regardless of length.
FFT_MIN_LENGTH = 256


@dataclass(frozen=True)
class CorrelationSpectrum:
    """Normalized correlation values indexed by delay 0..length-1."""

    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=np.float64)
        vals.flags.writeable = False
        object.__setattr__(self, "values", vals)
        if np.abs(vals).max() > 1.0:
            raise ValueError("normalized correlation values must lie in [-1, 1]")

    def __len__(self) -> int:
        return int(self.values.size)

    def __getitem__(self, delay: int) -> float:
        return float(self.values[delay])


@dataclass(frozen=True)
class ObjectiveReport:
    """Family evaluation result: f = max(f_ac, f_cc), both in [0, 1]."""

    f_ac: float
    f_cc: float
    f: float

    def __post_init__(self):
        if not (0.0 <= self.f_ac <= 1.0 and 0.0 <= self.f_cc <= 1.0):
            raise ValueError(f"components out of [0, 1]: f_ac={self.f_ac}, f_cc={self.f_cc}")
        if self.f != max(self.f_ac, self.f_cc):
            raise ValueError("f must equal max(f_ac, f_cc)")

    @classmethod
    def from_components(cls, f_ac: float, f_cc: float) -> "ObjectiveReport":
        return cls(f_ac=f_ac, f_cc=f_cc, f=max(f_ac, f_cc))


def _check_delay(delay: int, length: int) -> None:
    if not 0 <= delay < length:
        raise ValueError(f"delay must be in [0, {length - 1}], got {delay}")


def auto_corr(seq: BitSequence, delay: int) -> float:
    """Normalized periodic even auto-correlation at the given chip delay."""
    _check_delay(delay, len(seq))
    s = seq.signed
    return int(np.dot(s, np.roll(s, delay))) / len(seq)


def cross_corr(a: BitSequence, b: BitSequence, delay: int) -> float:
    """Normalized periodic even cross-correlation at the given chip delay."""
    if len(a) != len(b):
        raise ValueError(f"length mismatch: {len(a)} vs {len(b)}")
    _check_delay(delay, len(a))
    # np.roll(s, d)[i] == s[i - d], matching the cyclic second factor.
    return int(np.dot(a.signed, np.roll(b.signed, delay))) / len(a)


def _odd_numerator(sa: np.ndarray, sb: np.ndarray, delay: int) -> int:
    # Sign of the wrapped second factor flips for i < delay (a data-bit
    # transition inside the integration window).
    terms = sa * np.roll(sb, delay)
    return int(terms[delay:].sum() - terms[:delay].sum())


def odd_auto_corr(seq: BitSequence, delay: int) -> float:
    """Odd auto-correlation: even form with the wrapped terms negated."""
    _check_delay(delay, len(seq))
    s = seq.signed
    return _odd_numerator(s, s, delay) / len(seq)


def odd_cross_corr(a: BitSequence, b: BitSequence, delay: int) -> float:
    """Odd cross-correlation: even form with the wrapped terms negated."""
    if len(a) != len(b):
        raise ValueError(f"length mismatch: {len(a)} vs {len(b)}")
    _check_delay(delay, len(a))
    return _odd_numerator(a.signed, b.signed, delay) / len(a)


@lru_cache(maxsize=8)
def _roll_index(length: int) -> np.ndarray:
    # idx[d, i] = (i - d) mod length; row d of signed[idx] is the sequence
    # delayed by d chips.
    i = np.arange(length)
    return (i[None, :] - i[:, None]) % length


def _pair_indices(num_codes: int) -> tuple[np.ndarray, np.ndarray]:
    return np.triu_indices(num_codes, k=1)


def _numerators_naive(signed: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Direct-sum correlation numerators for one family.

    Returns (auto, cross): auto[k, d] and cross[p, d] as exact int64, with
    pairs ordered lexicographically (k < j). Sums of +/-1 terms are exact in
    float64, so BLAS matmuls are safe before the integer cast.
    """
    num_codes, length = signed.shape
    idx = _roll_index(length)
    s = signed.astype(np.float64)
    auto = np.empty((num_codes, length), dtype=np.int64)
    rows_i, rows_j = _pair_indices(num_codes)
    cross = np.empty((rows_i.size, length), dtype=np.int64)
    for m in range(num_codes):
        delayed = s[m][idx]  # (length, length): delayed[d, i] = s[m][i - d]
        block = s[: m + 1] @ delayed.T  # row k, col d: sum_i s[k, i] s[m, i-d]
        auto[m] = np.rint(block[m]).astype(np.int64)
        if m > 0:
            # pairs (k, m) for k < m land at the positions where rows_j == m,
            # in ascending k order on both sides
            cross[np.nonzero(rows_j == m)[0]] = np.rint(block[:m]).astype(np.int64)
    return auto, cross


def _numerators_fft(signed: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """FFT circular-correlation numerators; rounded to the exact integers."""
    num_codes, length = signed.shape
    spec = np.fft.rfft(signed.astype(np.float64), axis=1)
    auto = np.fft.irfft(spec * np.conj(spec), n=length, axis=1)
    rows_i, rows_j = _pair_indices(num_codes)
    cross_spec = spec[rows_i] * np.conj(spec[rows_j])
    cross = np.fft.irfft(cross_spec, n=length, axis=1)
    return (
        np.rint(auto).astype(np.int64),
        np.rint(cross).astype(np.int64),
    )


def _family_numerators(signed: np.ndarray, method: str) -> tuple[np.ndarray, np.ndarray]:
    if method == "auto":
        method = "fft" if signed.shape[1] >= FFT_MIN_LENGTH else "naive"
    if method == "naive":
        return _numerators_naive(signed)
    if method == "fft":
        return _numerators_fft(signed)
    raise ValueError(f"unknown method {method!r}")


def full_auto_spectrum(seq: BitSequence, method: str = "auto") -> CorrelationSpectrum:
    """Auto-correlation at every delay; values[0] is exactly 1."""
    signed = seq.signed[None, :]
    auto, _ = _family_numerators(signed, method)
    return CorrelationSpectrum(auto[0] / len(seq))


def full_cross_spectrum(a: BitSequence, b: BitSequence, method: str = "auto") -> CorrelationSpectrum:
    """Cross-correlation of a against b at every delay."""
    if len(a) != len(b):
        raise ValueError(f"length mismatch: {len(a)} vs {len(b)}")
    signed = np.stack([a.signed, b.signed])
    _, cross = _family_numerators(signed, method)
    return CorrelationSpectrum(cross[0] / len(a))


def evaluate_chips(chips: np.ndarray, method: str = "auto") -> ObjectiveReport:
    """Family objective from a raw (num_codes, length) 0/1 chip matrix.

    f_ac averages squared auto-correlations over the non-central delays
    (1..length-1); f_cc averages squared cross-correlations over all delays
    including 0. Hot loops call this directly to skip object construction.
    """
    num_codes, length = chips.shape
    if num_codes < 2:
        raise ValueError("cross-correlation needs at least 2 codes in the family")
    signed = 1 - 2 * chips.astype(np.float64)
    auto, cross = _family_numerators(signed, method)
    # Integer squares summed in int64: bounded by K_p * l^3 < 2^63 at any
    # supported size, so both accumulations are exact.
    auto_sq = int(np.sum(auto[:, 1:].astype(np.int64) ** 2))
    cross_sq = int(np.sum(cross.astype(np.int64) ** 2))
    pair_count = num_codes * (num_codes - 1) // 2
    f_ac = auto_sq / (num_codes * length**3)
    f_cc = cross_sq / (pair_count * length**3)
    return ObjectiveReport.from_components(f_ac, f_cc)


def evaluate_family(family: CodeFamily, method: str = "auto") -> ObjectiveReport:
    """Evaluate max(mean-square auto, mean-square cross) for a family."""
    return evaluate_chips(family.chips, method)


def welch_bound(num_codes: int, length: int) -> float:
    """Normalized lower bound on the maximum off-peak correlation magnitude.

    Reporting reference only; not part of any objective.
    """
    if num_codes < 2:
        raise ValueError(f"num_codes must be >= 2, got {num_codes}")
    if length < 2:
        raise ValueError(f"length must be >= 2, got {length}")
    return math.sqrt((num_codes - 1) / (num_codes * length - 1))
