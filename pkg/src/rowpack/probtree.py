"""Probability decision trees: the coder's model-side interface.

A tree factors a distribution over one attribute into a sequence of
small branch decisions.  Walking from the root, every inner node holds
a probability distribution over its branches; a concrete value selects
one branch per node, and the product of the selected branch
probabilities is the mass the tree assigns to the leaf's bucket.  The
coder consumes exactly this decision sequence, so any value family can
be plugged in by providing a tree.

A cursor tracks one walk.  The five-function contract:

  * ``is_end()``            -- True when positioned on a leaf;
  * ``generate_branch()``   -- probabilities of this node's branches;
  * ``get_branch(value)``   -- which branch the encoded value selects;
  * ``choose_branch(i)``    -- move to child i;
  * ``get_result()``        -- representative and error bound at a leaf.

Leaves define the loss: every value routed to a leaf is reconstructed
as the leaf's representative, and trees guarantee the representative
differs from the original by at most the leaf's worst-case error.
Lossless coding is the special case where every leaf holds at most one
encodable value.

Trees are immutable and shareable; cursors are single-consumer mutable
walks.
"""

from __future__ import annotations

import bisect
from dataclasses import dataclass
from typing import Protocol, Sequence


class TreeError(Exception):
    """Malformed tree structure or a value the tree cannot route."""


@dataclass(frozen=True)
class BranchDistribution:
    """Branch probabilities of one inner node."""

    probabilities: tuple[float, ...]

    def __post_init__(self) -> None:
        if len(self.probabilities) < 2:
            raise TreeError("a decision node needs at least two branches")
        if any(p < 0.0 for p in self.probabilities):
            raise TreeError("negative branch probability")
        if not any(p > 0.0 for p in self.probabilities):
            raise TreeError("distribution has no mass")
        total = sum(self.probabilities)
        if abs(total - 1.0) > 1e-9:
            raise TreeError(f"branch probabilities sum to {total}, not 1")


@dataclass(frozen=True)
class LeafOutcome:
    """Reconstruction value and its guaranteed worst-case error."""

    representative: object
    worst_case_error: float = 0.0


class TreeCursor(Protocol):
    def is_end(self) -> bool: ...

    def generate_branch(self) -> BranchDistribution: ...

    def get_branch(self, value) -> int: ...

    def choose_branch(self, branch: int) -> "TreeCursor": ...

    def get_result(self) -> LeafOutcome: ...


class ProbabilityTree(Protocol):
    def cursor(self) -> TreeCursor: ...


def interpret(interpreter: "Interpreter", value):
    """Apply an interpreter to a source value."""
    return interpreter.apply(value)


def route(tree: "ProbabilityTree", value) -> LeafOutcome:
    """Walk a value straight to its leaf, skipping the probabilities."""
    cur = tree.cursor()
    while not cur.is_end():
        cur.choose_branch(cur.get_branch(value))
    return cur.get_result()


class CategoricalTree:
    """Depth-one tree: one node, one branch per category."""

    def __init__(self, probabilities: Sequence[float]):
        self._dist = BranchDistribution(tuple(probabilities))

    @property
    def size(self) -> int:
        return len(self._dist.probabilities)

    def cursor(self) -> "CategoricalCursor":
        return CategoricalCursor(self._dist)


class CategoricalCursor:
    def __init__(self, dist: BranchDistribution):
        self._dist = dist
        self._chosen: int | None = None

    def is_end(self) -> bool:
        return self._chosen is not None

    def generate_branch(self) -> BranchDistribution:
        if self._chosen is not None:
            raise TreeError("cursor is at a leaf")
        return self._dist

    def get_branch(self, value) -> int:
        i = int(value)
        if not 0 <= i < len(self._dist.probabilities):
            raise TreeError(f"category index {i} out of range")
        return i

    def choose_branch(self, branch: int) -> "CategoricalCursor":
        if self._chosen is not None:
            raise TreeError("cursor is at a leaf")
        if not 0 <= branch < len(self._dist.probabilities):
            raise TreeError("branch out of range")
        self._chosen = branch
        return self

    def get_result(self) -> LeafOutcome:
        if self._chosen is None:
            raise TreeError("cursor is not at a leaf")
        return LeafOutcome(self._chosen, 0.0)


class BisectionTree:
    """Numeric tree splitting a root range at interval midpoints.

    Every node covers a half-open range (lo, hi]; its two children
    split at the arithmetic midpoint, and the branch probabilities are
    the law's conditional masses of the halves.  Descent stops when the
    node is narrower than twice the tolerance, so the representative is
    within tolerance of every value in the node.  In integer mode
    splits land on integers and, with zero tolerance, leaves are unit
    ranges reconstructing exactly; zero tolerance on a real-valued
    range is rejected (no finite tree could be lossless).
    """

    def __init__(self, law, lo: float, hi: float, tolerance: float, integer: bool = False):
        if not lo < hi:
            raise TreeError("empty root range")
        if tolerance < 0:
            raise TreeError("negative tolerance")
        if integer:
            lo, hi = float(int(lo)), float(int(hi))
            if not lo < hi:
                raise TreeError("integer root range collapsed")
        if not integer and tolerance == 0.0:
            raise TreeError("lossless real-valued ranges are not encodable")
        self.law = law
        self.lo = lo
        self.hi = hi
        self.tolerance = tolerance
        self.integer = integer

    def cursor(self) -> "BisectionCursor":
        return BisectionCursor(self)

    def clamp(self, value: float):
        """Nearest encodable value; out-of-range inputs land on the edge."""
        if self.integer:
            v = int(value)
            lo, hi = int(self.lo), int(self.hi)
            return min(max(v, lo + 1), hi)
        if value <= self.lo:
            eps = min(self.tolerance, self.hi - self.lo) / 2.0
            return self.lo + (eps if eps > 0.0 else (self.hi - self.lo) / 2.0)
        if value > self.hi:
            return self.hi
        return value


def build_numerical_tree(
    law, lo: float, hi: float, tolerance: float, integer: bool = False
) -> BisectionTree:
    """Bisection tree over (lo, hi] under a fitted numeric law."""
    return BisectionTree(law, lo, hi, tolerance, integer)


class BisectionCursor:
    def __init__(self, tree: BisectionTree):
        self._t = tree
        self._lo = tree.lo
        self._hi = tree.hi

    def _mid(self) -> float:
        if self._t.integer:
            return float((int(self._lo) + int(self._hi)) // 2)
        return self._lo + (self._hi - self._lo) / 2.0

    def is_end(self) -> bool:
        if self._t.integer and self._hi - self._lo <= 1.0:
            return True
        return self._hi - self._lo < 2.0 * self._t.tolerance

    def generate_branch(self) -> BranchDistribution:
        if self.is_end():
            raise TreeError("cursor is at a leaf")
        mid = self._mid()
        total = self._t.law.mass(self._lo, self._hi)
        if total <= 0.0:
            # Degenerate slice of the law: fall back to an even split.
            return BranchDistribution((0.5, 0.5))
        left = self._t.law.mass(self._lo, mid)
        p = left / total
        p = min(max(p, 0.0), 1.0)
        return BranchDistribution((p, 1.0 - p))

    def get_branch(self, value) -> int:
        v = float(value)
        if not self._lo < v <= self._hi:
            raise TreeError(f"value {v} outside node range ({self._lo}, {self._hi}]")
        return 0 if v <= self._mid() else 1

    def choose_branch(self, branch: int) -> "BisectionCursor":
        if self.is_end():
            raise TreeError("cursor is at a leaf")
        mid = self._mid()
        if branch == 0:
            self._hi = mid
        elif branch == 1:
            self._lo = mid
        else:
            raise TreeError("branch out of range")
        return self

    def get_result(self) -> LeafOutcome:
        if not self.is_end():
            raise TreeError("cursor is not at a leaf")
        if self._t.integer:
            lo, hi = int(self._lo), int(self._hi)
            if hi - lo <= 1:
                return LeafOutcome(hi, 0.0)
            rep = (lo + 1 + hi) // 2
            return LeafOutcome(rep, float(max(rep - lo - 1, hi - rep)))
        width = self._hi - self._lo
        return LeafOutcome(self._lo + width / 2.0, width / 2.0)


class GeometricBucketTree:
    """Unary-style chain over unit buckets (k-1, k], k = 1, 2, ...

    Every node asks "is the value in the current bucket?" with
    probability ``p_stop``; otherwise it moves one bucket right, up to
    ``max_buckets`` where the walk is forced to stop.  The mass of
    bucket k is p_stop * (1 - p_stop)^(k-1), the geometric law.
    Representatives are bucket midpoints with worst-case error 1/2.
    """

    def __init__(self, p_stop: float, max_buckets: int = 64):
        if not 0.0 < p_stop < 1.0:
            raise TreeError("p_stop must be strictly between 0 and 1")
        if max_buckets < 2:
            raise TreeError("need at least two buckets")
        self.p_stop = p_stop
        self.max_buckets = max_buckets

    def cursor(self) -> "GeometricBucketCursor":
        return GeometricBucketCursor(self)


class GeometricBucketCursor:
    def __init__(self, tree: GeometricBucketTree):
        self._t = tree
        self._bucket = 1
        self._stopped = False

    def is_end(self) -> bool:
        return self._stopped or self._bucket >= self._t.max_buckets

    def generate_branch(self) -> BranchDistribution:
        if self.is_end():
            raise TreeError("cursor is at a leaf")
        return BranchDistribution((self._t.p_stop, 1.0 - self._t.p_stop))

    def get_branch(self, value) -> int:
        v = float(value)
        if v <= self._bucket - 1:
            raise TreeError(f"value {v} below bucket {self._bucket}")
        return 0 if v <= self._bucket else 1

    def choose_branch(self, branch: int) -> "GeometricBucketCursor":
        if self.is_end():
            raise TreeError("cursor is at a leaf")
        if branch == 0:
            self._stopped = True
        elif branch == 1:
            self._bucket += 1
        else:
            raise TreeError("branch out of range")
        return self

    def get_result(self) -> LeafOutcome:
        if not self.is_end():
            raise TreeError("cursor is not at a leaf")
        return LeafOutcome(self._bucket - 0.5, 0.5)


START: int = 256
"""Pseudo-symbol used as the bigram context before the first byte."""


class StringTree:
    """Byte-string tree: length first, then one node per position.

    The length lives in (-1, max_length] and is resolved by integer
    bisection against a length histogram.  Each byte is then a 256-way
    branch conditioned on the previous byte, with ``START`` standing in
    before the first one.  Histogram and bigram rows are add-one
    smoothed, so every byte string up to the maximum length stays
    encodable.
    """

    def __init__(
        self,
        max_length: int,
        length_counts: Sequence[int],
        bigram_rows: dict[int, Sequence[int]] | None = None,
    ):
        if max_length < 0:
            raise TreeError("negative maximum length")
        if len(length_counts) != max_length + 1:
            raise TreeError("length histogram must cover 0..max_length")
        if any(c < 0 for c in length_counts):
            raise TreeError("negative length count")
        self.max_length = max_length
        smoothed = [int(c) + 1 for c in length_counts]
        self._len_cum = [0]
        for c in smoothed:
            self._len_cum.append(self._len_cum[-1] + c)
        self._rows: dict[int, BranchDistribution] = {}
        for ctx, counts in (bigram_rows or {}).items():
            if not 0 <= ctx <= START:
                raise TreeError("bigram context out of range")
            row = [int(c) for c in counts]
            if len(row) != 256 or any(c < 0 for c in row):
                raise TreeError("bigram row must hold 256 non-negative counts")
            total = sum(row) + 256
            self._rows[ctx] = BranchDistribution(tuple((c + 1) / total for c in row))
        self._uniform = BranchDistribution(tuple([1.0 / 256] * 256))

    def row(self, ctx: int) -> BranchDistribution:
        return self._rows.get(ctx, self._uniform)

    def length_mass(self, lo: int, hi: int) -> int:
        """Smoothed count of lengths in (lo, hi]."""
        return self._len_cum[hi + 1] - self._len_cum[lo + 1]

    def cursor(self) -> "StringCursor":
        return StringCursor(self)


def build_string_tree(
    max_length: int,
    length_counts: Sequence[int],
    bigram_rows: dict[int, Sequence[int]] | None = None,
) -> StringTree:
    """Composite tree: integer bisection over length, then byte nodes."""
    return StringTree(max_length, length_counts, bigram_rows)


class StringCursor:
    def __init__(self, tree: StringTree):
        self._t = tree
        # Length-bisection phase over the integer range (_lo, _hi].
        self._lo = -1
        self._hi = tree.max_length
        self._length: int | None = None
        self._decoded: list[int] = []
        self._ctx = START

    def _in_length_phase(self) -> bool:
        if self._length is None and self._hi - self._lo == 1:
            # A unit range resolves the length without a decision.
            self._length = self._hi
        return self._length is None

    def is_end(self) -> bool:
        if self._in_length_phase():
            return False
        return len(self._decoded) >= self._length

    def generate_branch(self) -> BranchDistribution:
        if self.is_end():
            raise TreeError("cursor is at a leaf")
        if self._in_length_phase():
            mid = (self._lo + self._hi) // 2
            total = self._t.length_mass(self._lo, self._hi)
            left = self._t.length_mass(self._lo, mid)
            return BranchDistribution((left / total, (total - left) / total))
        return self._t.row(self._ctx)

    def get_branch(self, value) -> int:
        data = bytes(value)
        if len(data) > self._t.max_length:
            raise TreeError("string longer than the tree's maximum")
        if self._in_length_phase():
            n = len(data)
            if not self._lo < n <= self._hi:
                raise TreeError("length fell outside the live range")
            return 0 if n <= (self._lo + self._hi) // 2 else 1
        return data[len(self._decoded)]

    def choose_branch(self, branch: int) -> "StringCursor":
        if self.is_end():
            raise TreeError("cursor is at a leaf")
        if self._in_length_phase():
            mid = (self._lo + self._hi) // 2
            if branch == 0:
                self._hi = mid
            elif branch == 1:
                self._lo = mid
            else:
                raise TreeError("branch out of range")
            return self
        if not 0 <= branch < 256:
            raise TreeError("branch out of range")
        self._decoded.append(branch)
        self._ctx = branch
        return self

    def get_result(self) -> LeafOutcome:
        if not self.is_end():
            raise TreeError("cursor is not at a leaf")
        return LeafOutcome(bytes(self._decoded), 0.0)


class Interpreter(Protocol):
    """Deterministic map from a source value to a predictor value."""

    def apply(self, value): ...


class IdentityInterpreter:
    def apply(self, value):
        return value


class LengthInterpreter:
    """Byte length of a string-like value."""

    def apply(self, value) -> int:
        return len(value)


class RangeBinning:
    """Maps numbers to bin indices over sorted edges.

    ``edges`` are the interior boundaries; value v lands in the first
    bin whose upper edge is >= v, with everything above the last edge
    in the final bin.  With edges (0, 10) the bins are
    (-inf, 0], (0, 10], (10, inf).
    """

    def __init__(self, edges: Sequence[float]):
        es = [float(e) for e in edges]
        if not es:
            raise TreeError("at least one bin edge required")
        if sorted(es) != es or len(set(es)) != len(es):
            raise TreeError("bin edges must be strictly increasing")
        self.edges = tuple(es)

    @classmethod
    def equal_width(cls, lo: float, hi: float, bins: int) -> "RangeBinning":
        if bins < 1 or not lo < hi:
            raise TreeError("bad binning request")
        step = (hi - lo) / bins
        return cls([lo + i * step for i in range(bins + 1)])

    @property
    def bins(self) -> int:
        return len(self.edges) + 1

    def apply(self, value) -> int:
        return bisect.bisect_left(self.edges, float(value))
