"""Shared-prefix coding of a batch of tuple codes.

Tuple codes drawn from similar rows share long prefixes.  Sorting the
codes and transmitting each one as the gap to its predecessor turns
that redundancy into savings of about ``log2(n) - 2`` bits per code:

  * sort the n codes lexicographically (short codes padded with zeros
    for comparison);
  * with l = floor(log2 n), split each (zero-padded to at least l)
    code into its l-bit prefix value a_i and suffix b_i;
  * emit unary(a_i - a_{i-1}) followed by b_i, with a_0 taken as 0.

Unary(d) is d ones followed by a zero, so consecutive equal prefixes
cost one bit instead of l.  The prefix differences are non-negative
exactly because the codes are sorted.  Original code lengths travel in
a side table; the decoder rebuilds the sorted multiset of codes, and
the original order is deliberately not recoverable.
"""

from __future__ import annotations

from typing import Sequence

from .codec import Bits, CodecError, CorruptStream


def _sort_key(code: Bits) -> tuple[str, int]:
    return (code.to01(), code.length)


def sorted_codes(codes: Sequence[Bits]) -> list[Bits]:
    """Codes in transmission order: lexicographic, zero-padded comparison.

    Padding with zeros cannot reorder prefixes of one another: a code
    that is a prefix of another sorts first via the length tiebreak.
    """
    width = max((c.length for c in codes), default=0)
    return sorted(codes, key=lambda c: (c.to01().ljust(width, "0"), c.length))


def delta_encode(codes: Sequence[Bits]) -> tuple[Bits, list[int]]:
    """Returns the shared-prefix payload and the sorted-order length table."""
    if not codes:
        return Bits(), []
    batch = sorted_codes(codes)
    n = len(batch)
    l = n.bit_length() - 1
    out = Bits()
    prev = 0
    lengths = []
    for code in batch:
        lengths.append(code.length)
        padded = code.value << (l - code.length) if code.length < l else code.value
        plen = max(code.length, l)
        a = padded >> (plen - l) if l else 0
        gap = a - prev
        if gap < 0:
            raise CodecError("sorted prefixes must be non-decreasing")  # pragma: no cover
        prev = a
        # unary(gap): gap ones, then a zero
        out.append((1 << gap) - 1, gap)
        out.append_bit(0)
        if plen > l:
            out.append(padded & ((1 << (plen - l)) - 1), plen - l)
    return out, lengths


def delta_decode(payload: Bits, lengths: Sequence[int]) -> list[Bits]:
    """Rebuilds the sorted codes from the payload and the length table."""
    n = len(lengths)
    if n == 0:
        if payload.length:
            raise CorruptStream("unexpected shared-prefix payload")
        return []
    l = n.bit_length() - 1
    pos = 0
    prev = 0
    out = []
    for length in lengths:
        if length < 0:
            raise CorruptStream("negative code length")
        gap = 0
        while True:
            if pos >= payload.length:
                raise CorruptStream("shared-prefix payload exhausted")
            bit = payload.bit(pos)
            pos += 1
            if bit == 0:
                break
            gap += 1
        prev += gap
        plen = max(length, l)
        rest_len = plen - l
        if pos + rest_len > payload.length:
            raise CorruptStream("shared-prefix payload exhausted")
        rest = 0
        if rest_len:
            shift = payload.length - pos - rest_len
            rest = (payload.value >> shift) & ((1 << rest_len) - 1)
            pos += rest_len
        if prev >> l:
            raise CorruptStream("prefix value out of range")
        padded = (prev << rest_len) | rest
        if plen > length:
            value = padded >> (plen - length)
            if padded & ((1 << (plen - length)) - 1):
                raise CorruptStream("nonzero padding bits")
        else:
            value = padded
        out.append(Bits(value, length))
    if pos != payload.length:
        raise CorruptStream("trailing bits after the last code")
    return out
