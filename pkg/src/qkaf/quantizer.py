"""Online scalar quantizer for error samples.

A new error joins the nearest existing codeword when it lies within the
threshold ``gamma`` of it (lowest index wins ties); otherwise it becomes a
new codeword.  Codewords never move once created and are dropped when their
count reaches zero.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, List, Tuple


@dataclass
class Codebook:
    """Codewords ``c_h`` with their counts ``H_h`` and threshold ``gamma``."""

    gamma: float = 0.0
    codewords: List[float] = field(default_factory=list)
    counts: List[int] = field(default_factory=list)

    def __post_init__(self):
        if not self.gamma >= 0.0:
            raise ValueError(f"gamma must be >= 0, got {self.gamma!r}")
        if len(self.codewords) != len(self.counts):
            raise ValueError("codewords and counts differ in length")
        if any(c < 1 for c in self.counts):
            raise ValueError("every count must be >= 1")

    def __len__(self) -> int:
        return len(self.codewords)

    @property
    def size(self) -> int:
        return len(self.codewords)

    @property
    def total(self) -> int:
        """Number of error samples currently represented."""
        return sum(self.counts)

    def copy(self) -> "Codebook":
        return Codebook(self.gamma, list(self.codewords), list(self.counts))

    def nearest(self, e: float) -> Tuple[int, float]:
        """Index of and distance to the nearest codeword (-1, inf if empty)."""
        best, best_d = -1, float("inf")
        for j, c in enumerate(self.codewords):
            d = abs(e - c)
            if d < best_d:
                best, best_d = j, d
        return best, best_d

    def insert(self, e: float) -> int:
        """Quantize ``e`` in place and return its codeword index."""
        e = float(e)
        j, dist = self.nearest(e)
        if j >= 0 and dist <= self.gamma:
            self.counts[j] += 1
            return j
        self.codewords.append(e)
        self.counts.append(1)
        return len(self.codewords) - 1

    def remove(self, index: int) -> bool:
        """Decrement a count in place.

        Returns True when the codeword was deleted, in which case every index
        above ``index`` shifts down by one.
        """
        if not 0 <= index < len(self.codewords):
            raise IndexError(f"codeword index {index} out of range [0, {len(self.codewords)})")
        self.counts[index] -= 1
        if self.counts[index] == 0:
            del self.codewords[index]
            del self.counts[index]
            return True
        return False


def quantize_insert(cb: Codebook, e: float) -> Tuple[int, Codebook]:
    """Value-semantics insert: returns ``(index, new_codebook)``."""
    out = cb.copy()
    return out.insert(e), out


def quantize_remove(cb: Codebook, index: int) -> Codebook:
    """Value-semantics removal of one sample from codeword ``index``."""
    out = cb.copy()
    out.remove(index)
    return out


def build_codebook(errors: Iterable[float], gamma: float) -> Codebook:
    """Quantize ``errors`` in order, starting from an empty codebook."""
    cb = Codebook(gamma)
    for e in errors:
        cb.insert(e)
    return cb
