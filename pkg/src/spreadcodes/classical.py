"""Classical spreading-code generators: m-sequences, Gold and Weil families.

Also provides random family-subset sampling and the best-of-N search used to
pick well-performing classical subsets for benchmarking.
"""

from __future__ import annotations

import importlib.resources
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .bitseq import BitSequence, CodeFamily
from .correlation import ObjectiveReport, evaluate_chips, full_cross_spectrum

__all__ = [
    "LfsrSpec",
    "GoldFamilySpec",
    "WeilFamilySpec",
    "NonPrimitiveTapsError",
    "PRIMITIVE_TAPS",
    "lfsr_sequence",
    "gold_family",
    "gold_spec_for_degree",
    "legendre_sequence",
    "weil_family",
    "load_tap_table",
    "default_tap_table",
    "sample_subset",
    "best_of_samples",
]

# One primitive polynomial per degree, as feedback tap positions (position n
# is the register output stage and is always tapped). Each entry is verified
# by the full-period check in lfsr_sequence.
PRIMITIVE_TAPS: dict[int, tuple[int, ...]] = {
    3: (3, 1),
    4: (4, 1),
    5: (5, 2),
    6: (6, 1),
    7: (7, 3),
    8: (8, 6, 5, 4),
    9: (9, 4),
    10: (10, 3),
}


class NonPrimitiveTapsError(ValueError):
    """Raised when an LFSR's observed period falls short of 2^n - 1."""


def _poly_name(degree: int, taps: Sequence[int]) -> str:
    terms = [f"x^{t}" for t in sorted(taps, reverse=True)] + ["1"]
    return " + ".join(terms)


@dataclass(frozen=True)
class LfsrSpec:
    """Fibonacci LFSR: feedback is the XOR of the tapped stages.

    State cell j holds stage j+1; the output is the last stage. The default
    seed is the all-ones state.
    """

    degree: int
    taps: tuple[int, ...]
    seed: tuple[int, ...] = ()

    def __post_init__(self):
        if not 2 <= self.degree <= 16:
            raise ValueError(f"degree must be in [2, 16], got {self.degree}")
        taps = tuple(sorted(set(self.taps)))
        if not taps or any(t < 1 or t > self.degree for t in taps):
            raise ValueError(f"taps must lie in 1..{self.degree}, got {self.taps}")
        if self.degree not in taps:
            raise ValueError(f"tap {self.degree} (the output stage) must be present")
        object.__setattr__(self, "taps", taps)
        seed = tuple(self.seed) if self.seed else (1,) * self.degree
        if len(seed) != self.degree or set(seed) - {0, 1}:
            raise ValueError(f"seed must be {self.degree} bits, got {self.seed}")
        if not any(seed):
            raise ValueError("seed must be nonzero (all-zero state is a fixed point)")
        object.__setattr__(self, "seed", seed)

    @property
    def period(self) -> int:
        return 2**self.degree - 1


def lfsr_sequence(spec: LfsrSpec) -> BitSequence:
    """Run the register for one full period and return its output sequence.

    Raises NonPrimitiveTapsError if the state cycle is shorter than 2^n - 1,
    i.e. the characteristic polynomial is not primitive.
    """
    n = spec.degree
    tap_idx = [t - 1 for t in spec.taps]
    state = list(spec.seed)
    start = tuple(state)
    out = np.empty(spec.period, dtype=np.uint8)
    for i in range(spec.period):
        out[i] = state[-1]
        fb = 0
        for j in tap_idx:
            fb ^= state[j]
        state = [fb] + state[:-1]
        if tuple(state) == start and i + 1 != spec.period:
            raise NonPrimitiveTapsError(
                f"{_poly_name(n, spec.taps)} is not primitive: period {i + 1} < {spec.period}"
            )
    if tuple(state) != start:
        raise NonPrimitiveTapsError(
            f"{_poly_name(n, spec.taps)} is not primitive: state did not recur at {spec.period}"
        )
    return BitSequence(out)


@dataclass(frozen=True)
class GoldFamilySpec:
    """A preferred pair of same-degree LFSRs defining a Gold family."""

    g1: LfsrSpec
    g2: LfsrSpec

    def __post_init__(self):
        if self.g1.degree != self.g2.degree:
            raise ValueError("both registers must share one degree")
        if self.g1.degree % 4 == 0:
            raise ValueError(
                f"no Gold preferred pairs exist for degree {self.g1.degree} (degree % 4 == 0)"
            )

    @property
    def degree(self) -> int:
        return self.g1.degree

    @property
    def length(self) -> int:
        return 2**self.degree - 1

    @property
    def family_size(self) -> int:
        return 2**self.degree + 1


def gold_three_values(degree: int) -> tuple[int, int, int]:
    """The three admissible off-peak correlation numerators {-t, -1, t-2}."""
    t = 2 ** ((degree + 2) // 2) + 1
    return (-t, -1, t - 2)


def gold_family(spec: GoldFamilySpec) -> CodeFamily:
    """Both m-sequences plus every phase-offset XOR combination.

    Member order is pinned for reproducible subset sampling:
    [u, v, u^shift(v,0), u^shift(v,1), ...] where shift(v, d) rotates v left
    by d chips (element i of the shifted sequence is v[(i+d) mod length]).
    """
    u = lfsr_sequence(spec.g1).chips
    v = lfsr_sequence(spec.g2).chips
    rows = [u, v]
    rows.extend(u ^ np.roll(v, -d) for d in range(spec.length))
    return CodeFamily(np.stack(rows))


def gold_spec_for_degree(degree: int, table: dict[int, tuple[tuple[int, ...], tuple[int, ...]]] | None = None) -> GoldFamilySpec:
    """Build a GoldFamilySpec from the preferred-pair tap table."""
    if table is None:
        table = default_tap_table()
    if degree not in table:
        raise ValueError(f"no preferred pair on file for degree {degree}; have {sorted(table)}")
    taps_g1, taps_g2 = table[degree]
    return GoldFamilySpec(LfsrSpec(degree, taps_g1), LfsrSpec(degree, taps_g2))


def _is_prime(n: int) -> bool:
    if n < 2:
        return False
    if n % 2 == 0:
        return n == 2
    d = 3
    while d * d <= n:
        if n % d == 0:
            return False
        d += 2
    return True


def legendre_sequence(p: int) -> BitSequence:
    """Length-p sequence marking the nonzero quadratic residues mod p.

    chip(i) = 1 iff i is a nonzero quadratic residue; chip(0) = 0 by
    convention (the residue-indicator form).
    """
    if not _is_prime(p) or p < 3:
        raise ValueError(f"length must be an odd prime, got {p}")
    chips = np.zeros(p, dtype=np.uint8)
    for k in range(1, p):
        chips[(k * k) % p] = 1
    return BitSequence(chips)


@dataclass(frozen=True)
class WeilFamilySpec:
    """All Weil codes of one prime length."""

    prime_length: int

    def __post_init__(self):
        if not _is_prime(self.prime_length) or self.prime_length < 3:
            raise ValueError(f"length must be an odd prime, got {self.prime_length}")

    @property
    def length(self) -> int:
        return self.prime_length

    @property
    def family_size(self) -> int:
        return (self.prime_length - 1) // 2


def weil_family(spec: WeilFamilySpec) -> CodeFamily:
    """Each member XORs the Legendre sequence with a cyclic shift of itself.

    Offsets run 1..(p-1)/2; larger offsets would repeat earlier members up to
    a cyclic shift. shift(seq, w) rotates left by w, as in gold_family.
    """
    leg = legendre_sequence(spec.prime_length).chips
    rows = [leg ^ np.roll(leg, -w) for w in range(1, spec.family_size + 1)]
    return CodeFamily(np.stack(rows))


def _validate_preferred_pair(degree: int, taps_g1, taps_g2) -> None:
    spec = GoldFamilySpec(LfsrSpec(degree, taps_g1), LfsrSpec(degree, taps_g2))
    u = lfsr_sequence(spec.g1)
    v = lfsr_sequence(spec.g2)
    allowed = {x / spec.length for x in gold_three_values(degree)}
    values = set(full_cross_spectrum(u, v).values.tolist())
    if not values <= allowed:
        raise ValueError(
            f"degree-{degree} pair is not preferred: cross-correlation is not three-valued"
        )


def _parse_taps(text: str) -> tuple[int, ...]:
    return tuple(sorted(int(tok) for tok in text.split(",")))


def load_tap_table(path=None, validate: bool = True) -> dict[int, tuple[tuple[int, ...], tuple[int, ...]]]:
    """Parse a preferred-pair table: one `degree taps_g1 taps_g2` row per line.

    Taps are comma-separated positions. Every row is checked at load: both
    registers must reach full period and their cross-correlation must be
    three-valued, the defining property of a preferred pair.
    """
    if path is None:
        text = (
            importlib.resources.files("spreadcodes")
            .joinpath("data/preferred_pairs.txt")
            .read_text(encoding="ascii")
        )
    else:
        with open(path, "r", encoding="ascii") as fh:
            text = fh.read()
    table: dict[int, tuple[tuple[int, ...], tuple[int, ...]]] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 3:
            raise ValueError(f"tap table line {lineno}: expected 3 fields, got {len(parts)}")
        degree = int(parts[0])
        taps_g1, taps_g2 = _parse_taps(parts[1]), _parse_taps(parts[2])
        if degree in table:
            raise ValueError(f"tap table line {lineno}: duplicate degree {degree}")
        if validate:
            _validate_preferred_pair(degree, taps_g1, taps_g2)
        table[degree] = (taps_g1, taps_g2)
    return table


_DEFAULT_TABLE: dict[int, tuple[tuple[int, ...], tuple[int, ...]]] = {}


def default_tap_table() -> dict[int, tuple[tuple[int, ...], tuple[int, ...]]]:
    """The packaged preferred-pair table, validated once per process."""
    if not _DEFAULT_TABLE:
        _DEFAULT_TABLE.update(load_tap_table())
    return _DEFAULT_TABLE


def sample_subset(full: CodeFamily, num_codes: int, rng_seed) -> CodeFamily:
    """Uniform random subset of num_codes members, without replacement.

    rng_seed may be an int, a SeedSequence, or a Generator; passing the same
    seed always yields the same subset.
    """
    if num_codes > full.num_codes:
        raise ValueError(f"cannot draw {num_codes} codes from a family of {full.num_codes}")
    if num_codes < 1:
        raise ValueError(f"num_codes must be >= 1, got {num_codes}")
    rng = rng_seed if isinstance(rng_seed, np.random.Generator) else np.random.default_rng(rng_seed)
    picks = rng.choice(full.num_codes, size=num_codes, replace=False)
    return CodeFamily(full.chips[picks])


def _relative_deviation(report: ObjectiveReport) -> float:
    top = max(report.f_ac, report.f_cc)
    if top == 0.0:
        return 0.0
    return abs(report.f_ac - report.f_cc) / top


def best_of_samples(
    full: CodeFamily,
    num_codes: int,
    num_samples: int,
    *,
    master_seed: int = 0,
    balance_resampling: bool = False,
    deviation_threshold: float = 0.2,
    max_redraws: int = 10,
) -> tuple[CodeFamily, ObjectiveReport]:
    """Best subset (lowest f) over num_samples random draws.

    With balance_resampling, a draw whose auto/cross components differ by
    more than deviation_threshold (relative to the larger one) is redrawn up
    to max_redraws times; the least-imbalanced draw of the slot is kept. Each
    sample slot uses an RNG stream derived from (master_seed, slot), so
    results do not depend on evaluation order or worker count.
    """
    if num_samples < 1:
        raise ValueError(f"num_samples must be >= 1, got {num_samples}")
    best_chips = None
    best_report = None
    for slot in range(num_samples):
        rng = np.random.default_rng(np.random.SeedSequence(master_seed, spawn_key=(slot,)))
        subset = sample_subset(full, num_codes, rng)
        report = evaluate_chips(subset.chips)
        if balance_resampling:
            kept = (subset, report, _relative_deviation(report))
            redraws = 0
            while kept[2] > deviation_threshold and redraws < max_redraws:
                subset = sample_subset(full, num_codes, rng)
                report = evaluate_chips(subset.chips)
                dev = _relative_deviation(report)
                if dev < kept[2]:
                    kept = (subset, report, dev)
                redraws += 1
            subset, report, _ = kept
        if best_report is None or report.f < best_report.f:
            best_chips = subset
            best_report = report
    return best_chips, best_report
