"""Binary spreading-code sequences and code families.

Sequences are stored canonically with chips in {0, 1}. Correlation math runs
on the signed view, which maps chip 0 -> +1 and chip 1 -> -1 so that XOR of
chips becomes multiplication of signed symbols.
"""

from __future__ import annotations

import re
from typing import Iterable, Iterator

import numpy as np

__all__ = [
    "BitSequence",
    "CodeFamily",
    "to_signed",
    "from_signed",
    "save_family",
    "load_family",
]

_HEADER_RE = re.compile(
    r"#\s*length=(\d+)\s+count=(\d+)\s+seed=(\d+)\s+generator=(\S+)\s*$"
)


def _as_chip_array(chips: Iterable[int]) -> np.ndarray:
    arr = np.asarray(chips)
    if arr.ndim != 1:
        raise ValueError(f"chips must be one-dimensional, got shape {arr.shape}")
    if arr.size < 2:
        raise ValueError(f"sequence length must be >= 2, got {arr.size}")
    if not np.isin(arr, (0, 1)).all():
        raise ValueError("chips must contain only 0 and 1")
    out = arr.astype(np.uint8)
    out.flags.writeable = False
    return out


class BitSequence:
    """One binary spreading code; immutable after construction."""

    __slots__ = ("_chips",)

    def __init__(self, chips: Iterable[int]):
        self._chips = _as_chip_array(chips)

    @property
    def chips(self) -> np.ndarray:
        """Chips as a read-only uint8 array of 0/1 values."""
        return self._chips

    @property
    def signed(self) -> np.ndarray:
        """Signed view: chip 0 -> +1, chip 1 -> -1 (int64)."""
        return 1 - 2 * self._chips.astype(np.int64)

    def __len__(self) -> int:
        return int(self._chips.size)

    def __getitem__(self, i: int) -> int:
        return int(self._chips[i])

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, BitSequence):
            return NotImplemented
        return np.array_equal(self._chips, other._chips)

    def __hash__(self) -> int:
        return hash(self._chips.tobytes())

    def __repr__(self) -> str:
        body = "".join(str(c) for c in self._chips[:16])
        tail = "..." if len(self) > 16 else ""
        return f"BitSequence(len={len(self)}, chips={body}{tail})"

    def to_string(self) -> str:
        """Contiguous '0'/'1' string, the on-disk representation."""
        return "".join("1" if c else "0" for c in self._chips)

    @classmethod
    def from_string(cls, text: str) -> "BitSequence":
        if not text or set(text) - {"0", "1"}:
            raise ValueError(f"not a binary chip string: {text!r}")
        return cls(np.frombuffer(text.encode("ascii"), dtype=np.uint8) - ord("0"))


def to_signed(seq: BitSequence) -> np.ndarray:
    """Map a sequence to its +1/-1 representation (0 -> +1, 1 -> -1)."""
    return seq.signed


def from_signed(vec: Iterable[float]) -> BitSequence:
    """Inverse of :func:`to_signed`; rejects any element not in {+1, -1}."""
    arr = np.asarray(vec)
    if not np.isin(arr, (1, -1)).all():
        bad = arr[~np.isin(arr, (1, -1))]
        raise ValueError(f"signed values must be +1 or -1, got {bad[:5]}")
    return BitSequence(((1 - arr) // 2).astype(np.uint8))


class CodeFamily:
    """Ordered set of equal-length BitSequences; the unit being optimized."""

    __slots__ = ("_chips",)

    def __init__(self, codes):
        if isinstance(codes, np.ndarray) and codes.ndim == 2:
            chips = codes
        else:
            codes = list(codes)
            if not codes:
                raise ValueError("a code family needs at least one sequence")
            rows = [c.chips if isinstance(c, BitSequence) else np.asarray(c) for c in codes]
            lengths = {r.size for r in rows}
            if len(lengths) != 1:
                raise ValueError(f"all sequences must share one length, got {sorted(lengths)}")
            chips = np.stack(rows)
        if chips.shape[0] < 1:
            raise ValueError("a code family needs at least one sequence")
        if chips.shape[1] < 2:
            raise ValueError(f"sequence length must be >= 2, got {chips.shape[1]}")
        if not np.isin(chips, (0, 1)).all():
            raise ValueError("chips must contain only 0 and 1")
        self._chips = chips.astype(np.uint8)
        self._chips.flags.writeable = False

    @property
    def chips(self) -> np.ndarray:
        """Read-only (num_codes, length) uint8 matrix."""
        return self._chips

    @property
    def signed(self) -> np.ndarray:
        """(num_codes, length) matrix of +1/-1 values (int64)."""
        return 1 - 2 * self._chips.astype(np.int64)

    @property
    def num_codes(self) -> int:
        return int(self._chips.shape[0])

    @property
    def length(self) -> int:
        return int(self._chips.shape[1])

    @property
    def pair_count(self) -> int:
        """Number of unordered pairs of distinct member indices."""
        k = self.num_codes
        return k * (k - 1) // 2

    def __len__(self) -> int:
        return self.num_codes

    def __getitem__(self, k: int) -> BitSequence:
        return BitSequence(self._chips[k])

    def __iter__(self) -> Iterator[BitSequence]:
        for k in range(self.num_codes):
            yield self[k]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, CodeFamily):
            return NotImplemented
        return np.array_equal(self._chips, other._chips)

    def __repr__(self) -> str:
        return f"CodeFamily(num_codes={self.num_codes}, length={self.length})"


def save_family(path, family: CodeFamily, *, seed: int, generator: str) -> None:
    """Write a family in the line-oriented text format.

    Header line carries length, member count, the seed that produced the
    family, and the generator name; each following line is one sequence as a
    contiguous '0'/'1' string.
    """
    if seed < 0 or seed >= 2 ** 64:
        raise ValueError(f"seed must fit in u64, got {seed}")
    if not generator or any(ch.isspace() for ch in generator):
        raise ValueError(f"generator must be a non-empty token, got {generator!r}")
    lines = [f"# length={family.length} count={family.num_codes} seed={seed} generator={generator}"]
    lines.extend(seq.to_string() for seq in family)
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def load_family(path):
    """Read a family file; returns (CodeFamily, metadata dict).

    Round-trips bit-exactly with :func:`save_family`.
    """
    with open(path, "r", encoding="ascii") as fh:
        lines = [ln.rstrip("\n") for ln in fh if ln.strip()]
    if not lines:
        raise ValueError(f"{path}: empty family file")
    m = _HEADER_RE.match(lines[0])
    if m is None:
        raise ValueError(f"{path}: bad header line: {lines[0]!r}")
    length, count, seed = int(m.group(1)), int(m.group(2)), int(m.group(3))
    meta = {"length": length, "count": count, "seed": seed, "generator": m.group(4)}
    body = lines[1:]
    if len(body) != count:
        raise ValueError(f"{path}: header promises {count} sequences, found {len(body)}")
    seqs = []
    for i, ln in enumerate(body):
        if len(ln) != length:
            raise ValueError(f"{path}: line {i + 2} has length {len(ln)}, expected {length}")
        seqs.append(BitSequence.from_string(ln))
    return CodeFamily(seqs), meta
