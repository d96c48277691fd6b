"""Finite-precision interval coder.

A branch sequence is encoded by folding the branches' probability
intervals with the product

    [l1, r1] o [l2, r2] = [l1 + (r1 - l1) * l2,  l1 + (r1 - l1) * r2]

and emitting a bit k whenever the working interval fits inside
[k/2, (k+1)/2], doubling back to full scale after each emission.  The
fold is computed by a deterministic approximation of ``o`` on a fixed
grid of 2^-precision endpoints, so the decoder can replay the identical
interval states from the bit stream alone.

The approximation guarantees two properties:

  * subset: the approximated interval is contained in the exact
    product, which keeps intervals of different branch choices disjoint
    (unique decodability hangs on this);
  * renormalized width: after the emission loop the working interval is
    never narrower than ``eps_min``.

Both the product and the emission loop are fused into one step working
on double-width integers: the exact product is renormalized first and
only then rounded inward onto the grid.  Rounding the un-renormalized
product would be unsound, because a product of two near-minimal
intervals is far narrower than one grid cell.  When the renormalized
product still rounds below an internal floor (2^-18 by default, far
above ``eps_min``), the step falls back to the wider half of the
product split at the midpoint it straddles; the half renormalizes to
width > 1/2 and remains a subset of the exact product.
"""

from __future__ import annotations

import bisect
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence


class CodecError(Exception):
    """Invariant violation or misuse inside the coder."""


class CorruptStream(CodecError):
    """The bit stream cannot be a valid encoding under this model."""

    def __init__(self, message: str, decoded_rows: int | None = None):
        super().__init__(message)
        self.decoded_rows = decoded_rows


@dataclass(frozen=True)
class CodecConfig:
    """Grid precision and the minimum snapped branch width."""

    precision: int = 63
    eps_min: float = 2.0 ** -40

    def __post_init__(self) -> None:
        if self.precision < 8:
            raise CodecError("precision too small")
        if not 0.0 < self.eps_min <= 0.25:
            raise CodecError("eps_min must lie in (0, 1/4]")
        # The half-interval fallback needs a few grid cells of room below
        # the product width, hence the +3 over the bare grid resolution.
        if self.eps_min < 2.0 ** (3 - self.precision):
            raise CodecError("eps_min must be at least 8 grid units")

    @property
    def scale(self) -> int:
        return 1 << self.precision

    @property
    def eps_units(self) -> int:
        return max(1, round(self.eps_min * self.scale))

    @property
    def strong_units(self) -> int:
        # Internal renormalized-width floor.  Keeping the working interval
        # this wide guarantees the next product spans >= 8 grid cells, so
        # the subset property never has to be given up.
        ebits = self.eps_units.bit_length() - 1
        strong_exp = min(18, self.precision - ebits - 3)
        return max(self.eps_units, 1 << (self.precision - strong_exp))


DEFAULT_CONFIG = CodecConfig()


@dataclass(frozen=True)
class ProbabilityInterval:
    """A sub-interval of [0, 1] with l < r."""

    l: Fraction
    r: Fraction

    def __init__(self, l, r):
        lf, rf = Fraction(l), Fraction(r)
        if not (0 <= lf < rf <= 1):
            raise CodecError(f"invalid probability interval [{lf}, {rf}]")
        object.__setattr__(self, "l", lf)
        object.__setattr__(self, "r", rf)

    @property
    def width(self) -> Fraction:
        return self.r - self.l


def interval_product(*intervals: ProbabilityInterval) -> ProbabilityInterval:
    """Exact left-to-right fold of ``o`` in rational arithmetic.

    This is the reference semantics; the coder itself uses the
    deterministic grid approximation.
    """
    if not intervals:
        return ProbabilityInterval(0, 1)
    lo, hi = Fraction(0), Fraction(1)
    for iv in intervals:
        w = hi - lo
        lo, hi = lo + w * iv.l, lo + w * iv.r
    return ProbabilityInterval(lo, hi)


class Bits:
    """A growable bit string (MSB first) stored as an int plus a length."""

    __slots__ = ("value", "length")

    def __init__(self, value: int = 0, length: int = 0):
        if length < 0 or value < 0 or value >> length:
            raise CodecError("bit value does not fit the declared length")
        self.value = value
        self.length = length

    def append(self, value: int, length: int) -> None:
        if length < 0 or value < 0 or (length < value.bit_length()):
            raise CodecError("bit value does not fit the declared length")
        self.value = (self.value << length) | value
        self.length += length

    def append_bit(self, bit: int) -> None:
        self.value = (self.value << 1) | (bit & 1)
        self.length += 1

    def extend(self, other: "Bits") -> None:
        self.append(other.value, other.length)

    def bit(self, i: int) -> int:
        if not 0 <= i < self.length:
            raise IndexError(i)
        return (self.value >> (self.length - 1 - i)) & 1

    def to01(self) -> str:
        return format(self.value, f"0{self.length}b") if self.length else ""

    @classmethod
    def from01(cls, s: str) -> "Bits":
        return cls(int(s, 2) if s else 0, len(s))

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, Bits)
            and self.value == other.value
            and self.length == other.length
        )

    def __hash__(self) -> int:
        return hash((self.value, self.length))

    def __len__(self) -> int:
        return self.length

    def __repr__(self) -> str:
        return f"Bits({self.to01()!r})"


class BitWriter:
    """Packs bits most-significant-bit-first into bytes."""

    def __init__(self) -> None:
        self._chunks = Bits()

    def write(self, bits: Bits) -> None:
        self._chunks.extend(bits)

    def write_uint(self, value: int, length: int) -> None:
        self._chunks.append(value, length)

    @property
    def bit_length(self) -> int:
        return self._chunks.length

    def getvalue(self) -> bytes:
        """Byte-packed stream; the last partial byte is zero-padded."""
        n = self._chunks.length
        pad = (-n) % 8
        v = self._chunks.value << pad
        return v.to_bytes((n + pad) // 8, "big")


class BitReader:
    """Reads bits most-significant-bit-first from bytes.

    Forward-only: the position never moves backward, and each bit is
    handed out once.
    """

    def __init__(self, data: bytes, start_bit: int = 0):
        self._data = data
        self._pos = start_bit
        self._end = 8 * len(data)
        if start_bit > self._end:
            raise CodecError("start position beyond the stream")

    @property
    def position(self) -> int:
        return self._pos

    @property
    def remaining(self) -> int:
        return self._end - self._pos

    def read_bit(self) -> int | None:
        if self._pos >= self._end:
            return None
        byte = self._data[self._pos >> 3]
        bit = (byte >> (7 - (self._pos & 7))) & 1
        self._pos += 1
        return bit

    def read_bits(self, n: int) -> Bits:
        return Bits(self.read_chunk(n), n)

    def read_chunk(self, n: int) -> int:
        """Read ``n`` bits at once as an unsigned integer (MSB first)."""
        if n < 0:
            raise CodecError("negative read")
        stop = self._pos + n
        if stop > self._end:
            raise CorruptStream("bit stream exhausted")
        if n == 0:
            return 0
        first, last = self._pos >> 3, (stop + 7) >> 3
        word = int.from_bytes(self._data[first:last], "big")
        word >>= 8 * last - stop
        self._pos = stop
        return word & ((1 << n) - 1)


class IterBitSource:
    """Adapter giving one-way iterators the read_bit protocol."""

    def __init__(self, bits: Iterable[int]):
        self._it = iter(bits)

    def read_bit(self) -> int | None:
        try:
            return next(self._it) & 1
        except StopIteration:
            return None


def snap_distribution(probs: Sequence[float], cfg: CodecConfig = DEFAULT_CONFIG) -> list[int]:
    """Cumulative grid positions for a branch distribution.

    Branch widths are proportional to the probabilities, except that
    every branch narrower than ``eps_min`` is snapped up to ``eps_min``
    and the rest are proportionally renormalized over the remaining
    mass, repeating until no branch is below the floor.  Returns
    ``K + 1`` integers from 0 to ``scale``; branch i owns
    [cum[i], cum[i+1]] and every branch is at least ``eps_units`` wide.
    Deterministic in the float inputs.
    """
    k = len(probs)
    if k == 0:
        raise CodecError("empty distribution")
    scale, floor_units = cfg.scale, cfg.eps_units
    if k * floor_units > scale:
        raise CodecError("too many branches for the precision grid")
    clean = []
    for p in probs:
        if p < 0.0:
            if p < -1e-9:
                raise CodecError("negative branch probability")
            p = 0.0
        clean.append(p)
    total = sum(clean)
    if total <= 0.0:
        raise CodecError("distribution has no mass")
    eps = floor_units / scale
    share = [p / total for p in clean]
    pinned = [False] * k
    free_mass = 1.0
    free_sum = 1.0
    while True:
        free_mass = 1.0 - eps * sum(pinned)
        free_sum = sum(s for s, f in zip(share, pinned) if not f)
        changed = False
        for i in range(k):
            if pinned[i]:
                continue
            if free_sum <= 0.0 or share[i] * free_mass < eps * free_sum:
                pinned[i] = True
                changed = True
        if not changed:
            break
    widths = []
    for i in range(k):
        if pinned[i]:
            widths.append(floor_units)
        else:
            u = int(share[i] / free_sum * free_mass * scale)
            widths.append(u if u > floor_units else floor_units)
    drift = scale - sum(widths)
    while drift != 0:
        if drift > 0:
            # Grow the widest entry; ties go to the smallest index.
            i = max(range(k), key=lambda j: (widths[j], -j))
            widths[i] += drift
            drift = 0
        else:
            i = max(range(k), key=lambda j: (widths[j], -j))
            room = widths[i] - floor_units
            take = min(room, -drift)
            widths[i] -= take
            drift += take
            if take == 0:
                raise CodecError("cannot satisfy minimum widths")  # pragma: no cover
    cum = [0]
    for w in widths:
        cum.append(cum[-1] + w)
    return cum


def cumulative_intervals(
    probs: Sequence[float], cfg: CodecConfig = DEFAULT_CONFIG
) -> list[ProbabilityInterval]:
    """Snapped branch intervals tiling [0, 1], each at least eps_min wide."""
    cum = snap_distribution(probs, cfg)
    s = cfg.scale
    return [
        ProbabilityInterval(Fraction(a, s), Fraction(b, s))
        for a, b in zip(cum, cum[1:])
    ]


def _det_step(
    lo: int, hi: int, bl: int, bh: int, cfg: CodecConfig
) -> tuple[int, int, int, int]:
    """One fused fold-and-renormalize step on grid integers.

    Returns ``(bits_value, bits_length, new_lo, new_hi)`` where the new
    interval is the renormalized approximation of
    [lo, hi]/scale o [bl, bh]/scale and the emitted bits are the
    dyadic levels zoomed through.
    """
    prec = cfg.precision
    scale = cfg.scale
    w = hi - lo
    # Exact product endpoints over scale^2.
    a = (lo << prec) + w * bl
    b = (lo << prec) + w * bh
    t = 2 * prec
    # Longest dyadic prefix shared by the product: those bits are decided.
    nbits = t - (a ^ (b - 1)).bit_length()
    if nbits:
        shift = t - nbits
        val = a >> shift
        a = (a - (val << shift)) << nbits
        b = (b - (val << shift)) << nbits
    else:
        val = 0
    glo = (a + scale - 1) >> prec
    ghi = b >> prec
    if ghi - glo < cfg.strong_units:
        # Too narrow after rounding: keep the wider half of the product,
        # split at the straddled midpoint (a grid point by construction).
        halfpoint = 1 << (t - 1)
        if halfpoint - a >= b - halfpoint:
            ghi = scale >> 1
        else:
            glo = scale >> 1
        if ghi <= glo:
            raise CodecError("interval underflow")  # pragma: no cover
    # Sweep out any remaining decided halves (always for the fallback,
    # boundary-touch cases for the normal path).
    half = scale >> 1
    while True:
        if ghi <= half:
            val <<= 1
            nbits += 1
            glo <<= 1
            ghi <<= 1
        elif glo >= half:
            val = (val << 1) | 1
            nbits += 1
            glo = (glo << 1) - scale
            ghi = (ghi << 1) - scale
        else:
            break
    return val, nbits, glo, ghi


@dataclass(frozen=True)
class DetProduct:
    """Result of the deterministic approximate product.

    ``interval`` is the renormalized working interval on the grid and
    ``bits`` are the emissions the step produced.  ``in_parent_frame``
    undoes the renormalization exactly, for comparisons against the
    rational product.
    """

    bits: Bits
    interval: ProbabilityInterval
    _scale: int

    def in_parent_frame(self) -> ProbabilityInterval:
        denom = self._scale << self.bits.length
        base = self.bits.value * self._scale
        lo_num = base + int(self.interval.l * self._scale)
        hi_num = base + int(self.interval.r * self._scale)
        return ProbabilityInterval(Fraction(lo_num, denom), Fraction(hi_num, denom))


def det_product(
    a: ProbabilityInterval, b: ProbabilityInterval, cfg: CodecConfig = DEFAULT_CONFIG
) -> DetProduct:
    """Deterministic grid approximation of ``a o b``.

    Both inputs are snapped to the grid (they are expected to already
    lie on it) and must be at least eps_min wide.
    """
    s = cfg.scale
    alo, ahi = round(a.l * s), round(a.r * s)
    blo, bhi = round(b.l * s), round(b.r * s)
    if ahi - alo < cfg.eps_units or bhi - blo < cfg.eps_units:
        raise CodecError("det_product inputs must be at least eps_min wide")
    val, nbits, glo, ghi = _det_step(alo, ahi, blo, bhi, cfg)
    return DetProduct(
        Bits(val, nbits),
        ProbabilityInterval(Fraction(glo, s), Fraction(ghi, s)),
        s,
    )


def _smallest_dyadic(lo: int, hi: int, cfg: CodecConfig) -> tuple[int, int]:
    """Smallest k (and its M) with [M/2^k, (M+1)/2^k] inside [lo, hi]/scale."""
    prec, scale = cfg.precision, cfg.scale
    # A fitting dyadic needs 2^-k <= width/scale, so start right below that.
    start = max(0, prec - (hi - lo).bit_length())
    for k in range(start, prec + 2):
        m = ((lo << k) + scale - 1) >> prec
        if (m + 1) * scale <= hi << k:
            return k, m
    raise CodecError("no dyadic interval fits; interval too narrow")  # pragma: no cover


class Encoder:
    """Accumulates one code: fold branch intervals, then ``finish``."""

    def __init__(self, cfg: CodecConfig = DEFAULT_CONFIG):
        self.cfg = cfg
        self._lo = 0
        self._hi = cfg.scale
        self._bits = Bits()
        self._finished = False

    @property
    def interval(self) -> ProbabilityInterval:
        return ProbabilityInterval(
            Fraction(self._lo, self.cfg.scale), Fraction(self._hi, self.cfg.scale)
        )

    @property
    def absolute_interval(self) -> ProbabilityInterval:
        """Exact position of the working interval within [0, 1].

        Prepends the bits already emitted, undoing every renormalization.
        """
        s = self.cfg.scale
        denom = s << self._bits.length
        base = self._bits.value * s
        return ProbabilityInterval(
            Fraction(base + self._lo, denom), Fraction(base + self._hi, denom)
        )

    def push_units(self, bl: int, bh: int) -> None:
        if self._finished:
            raise CodecError("encoder already finished")
        if bh - bl < self.cfg.eps_units:
            raise CodecError("branch interval narrower than eps_min")
        val, nbits, self._lo, self._hi = _det_step(self._lo, self._hi, bl, bh, self.cfg)
        if nbits:
            self._bits.append(val, nbits)
        if self._hi - self._lo < self.cfg.eps_units:  # pragma: no cover
            raise CodecError("working interval narrower than eps_min")

    def push(self, cum: Sequence[int], branch: int) -> None:
        self.push_units(cum[branch], cum[branch + 1])

    def push_interval(self, iv: ProbabilityInterval) -> None:
        s = self.cfg.scale
        self.push_units(round(iv.l * s), round(iv.r * s))

    def finish(self) -> Bits:
        """Close the code with the shortest in-interval dyadic tag."""
        if self._finished:
            raise CodecError("encoder already finished")
        self._finished = True
        k, m = _smallest_dyadic(self._lo, self._hi, self.cfg)
        self._bits.append(m, k)
        if self._bits.length == 0:
            # Codes are kept non-empty by format rule.
            self._bits.append_bit(0)
        return self._bits


def encode_intervals(
    intervals: Iterable[ProbabilityInterval], cfg: CodecConfig = DEFAULT_CONFIG
) -> Bits:
    enc = Encoder(cfg)
    for iv in intervals:
        enc.push_interval(iv)
    return enc.finish()


class Decoder:
    """Streams branches back out of a bit source.

    Mirrors the encoder's interval states exactly (same ``_det_step``),
    reads each input bit at most once and never seeks backward.  One
    Decoder instance handles one code; ``finish`` consumes and verifies
    the code's terminal bits so the source is left positioned on the
    next code.
    """

    def __init__(self, source, cfg: CodecConfig = DEFAULT_CONFIG):
        self.cfg = cfg
        self._src = source
        self._chunk = getattr(source, "read_chunk", None)
        self._lo = 0
        self._hi = cfg.scale
        # Bit-frame interval [bv, bv + 1] / 2^bd in the current frame.
        self._bv = 0
        self._bd = 0
        self._reads = 0
        self._emitted = Bits()  # lock-step replay of the encoder's emissions

    def _read(self) -> None:
        bit = self._src.read_bit()
        if bit is None:
            raise CorruptStream("bit stream exhausted mid-code")
        self._reads += 1
        self._bv = (self._bv << 1) | bit
        self._bd += 1

    def _read_many(self, n: int) -> None:
        if self._chunk is not None:
            v = self._chunk(n)
        else:
            v = 0
            for _ in range(n):
                bit = self._src.read_bit()
                if bit is None:
                    raise CorruptStream("bit stream exhausted mid-code")
                v = (v << 1) | bit
        self._reads += n
        self._bv = (self._bv << n) | v
        self._bd += n

    def _candidate(self, cum: Sequence[int]) -> int | None:
        """Index of the branch whose exact product contains the bit frame."""
        lo, hi, bv, bd = self._lo, self._hi, self._bv, self._bd
        w = hi - lo
        num = (bv << (2 * self.cfg.precision)) - ((lo << self.cfg.precision) << bd)
        if num < 0:
            return None
        q = num // (w << bd)
        # Largest i with cum[i] <= q; clamp into the branch range.
        kbr = len(cum) - 1
        if kbr == 2:
            i = 1 if cum[1] <= q else 0
        else:
            i = bisect.bisect_right(cum, q) - 1
        if i >= kbr:
            i = kbr - 1
        # Upper containment against the exact product of branch i.
        upper = ((lo << self.cfg.precision) + w * cum[i + 1]) << bd
        if ((bv + 1) << (2 * self.cfg.precision)) <= upper:
            return i
        return None

    def _contained(self, step: tuple[int, int, int, int]) -> bool:
        val, nbits, glo, ghi = step
        prec = self.cfg.precision
        bv, bd = self._bv, self._bd
        lo_num = (val << prec) + glo
        hi_num = (val << prec) + ghi
        if (bv << (prec + nbits)) < (lo_num << bd):
            return False
        return ((bv + 1) << (prec + nbits)) <= (hi_num << bd)

    def next_branch(self, cum: Sequence[int], max_width: int | None = None) -> int:
        """Resolve one branch decision against the snapped tiling ``cum``.

        ``max_width`` is the largest branch width in ``cum`` (computed
        when omitted); it feeds a lower bound on the bits any commit
        needs, letting narrow branches pull whole chunks at once.  The
        bound never reaches past the current code: the branch actually
        encoded needs at least that many bits itself.
        """
        if max_width is None:
            max_width = max(b - a for a, b in zip(cum, cum[1:]))
        steps: dict[int, tuple[int, int, int, int]] = {}
        two_prec = 2 * self.cfg.precision
        while True:
            need = two_prec - ((self._hi - self._lo) * max_width).bit_length() + 1
            if self._bd < need:
                self._read_many(need - self._bd)
            i = self._candidate(cum)
            if i is not None:
                step = steps.get(i)
                if step is None:
                    step = _det_step(self._lo, self._hi, cum[i], cum[i + 1], self.cfg)
                    steps[i] = step
                if self._contained(step):
                    val, nbits, self._lo, self._hi = step
                    if nbits:
                        self._emitted.append(val, nbits)
                        self._bv -= val << (self._bd - nbits)
                        self._bd -= nbits
                    return i
            self._read()

    def finish(self) -> int:
        """Consume the code's unread terminal bits; returns the code length.

        The expected full code is reconstructible from the replayed
        emissions plus the terminal dyadic tag, so the consumed suffix is
        verified as a corruption check.
        """
        k, m = _smallest_dyadic(self._lo, self._hi, self.cfg)
        expected = Bits(self._emitted.value, self._emitted.length)
        expected.append(m, k)
        if expected.length == 0:
            expected.append_bit(0)
        # Bits read but never folded into a commit are still in the frame
        # value; they must form a prefix of the terminal tag.
        if self._bd > k or self._bv != m >> (k - self._bd):
            raise CorruptStream("terminal tag mismatch")
        tail = expected.length - self._reads
        if tail:
            if self._chunk is not None:
                got = self._chunk(tail)
            else:
                got = 0
                for _ in range(tail):
                    bit = self._src.read_bit()
                    if bit is None:
                        raise CorruptStream("bit stream exhausted in terminal tag")
                    got = (got << 1) | bit
            if got != expected.value & ((1 << tail) - 1):
                raise CorruptStream("terminal tag mismatch")
        return expected.length
