"""Per-column probability models conditioned on parent contexts.

A model owns one column.  Given a context (the tuple of interpreted
parent values) it produces a probability tree over the column's values,
and it can estimate the information content of a value under that tree.
Three families cover the attribute kinds:

  * ``CategoricalModel``  -- one probability row per context;
  * ``NumericModel``      -- a location/scale law per context, shared
    root range, one distribution family for the whole column;
  * ``StringModel``       -- length histogram plus byte bigram rows,
    never conditioned on parents.

Fitting quantizes every learned parameter to single precision before
anything is encoded, so the exact numbers the decoder reads back from
the archive are the numbers the encoder used.  Model sizes are
accounted at a flat 32 bits per parameter.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from io import BytesIO
from typing import Sequence

from . import wire
from .core import Categorical, Column, Numerical
from .dists import Gaussian, Laplace, Uniform
from .probtree import (
    BisectionTree,
    CategoricalTree,
    IdentityInterpreter,
    LengthInterpreter,
    RangeBinning,
    StringTree,
    build_numerical_tree,
    build_string_tree,
)

CONTEXT_CAP = 4096
"""Most distinct parent contexts a single column may condition on."""

PARAM_BITS = 32
PARENT_BINS = 8
MIN_MASS = 2.0 ** -40
_SQRT2 = math.sqrt(2.0)

Context = tuple


class ModelError(Exception):
    """Model misuse: wrong lifecycle order, missing data, bad value."""


class ConfigError(Exception):
    """A requested configuration the engine refuses to run."""


@dataclass(frozen=True)
class ModelCost:
    """Two-part cost of a fitted model, in bits."""

    model_bits: float
    data_bits: float

    @property
    def total(self) -> float:
        return self.model_bits + self.data_bits


def _runtime_row(head: Sequence[float], size: int) -> tuple[float, ...]:
    """Probability row reconstructed from its stored first ``size - 1`` entries.

    The reconstruction (derive the last entry, clamp, renormalize in
    double precision) runs identically after fitting and after reading
    a model back, which is what keeps both coder sides on the same
    numbers.
    """
    last = 1.0 - math.fsum(head)
    if last < 0.0:
        last = 0.0
    row = list(head)
    row.append(last)
    total = math.fsum(row)
    if total <= 0.0:
        return tuple([1.0 / size] * size)
    return tuple(p / total for p in row)


class CategoricalModel:
    """Add-one smoothed probability rows keyed by parent context."""

    TAG = 0

    def __init__(self, size: int, arity: int, heads: dict[Context, tuple[float, ...]]):
        if size < 1:
            raise ModelError("categorical size must be positive")
        self.size = size
        self.arity = arity
        self.heads = heads
        self._rows = {ctx: _runtime_row(h, size) for ctx, h in heads.items()}
        self._uniform = tuple([1.0 / size] * size)

    def row(self, ctx: Context) -> tuple[float, ...]:
        return self._rows.get(ctx, self._uniform)

    def tree(self, ctx: Context) -> CategoricalTree:
        return CategoricalTree(self.row(ctx))

    def value_bits(self, ctx: Context, value: int) -> float:
        p = self.row(ctx)[value]
        return -math.log2(p if p > MIN_MASS else MIN_MASS)

    def param_count(self) -> int:
        return (self.size - 1) * len(self.heads)


def fit_categorical(
    size: int,
    arity: int,
    contexts: Sequence[Context],
    values: Sequence[int],
    smoothing: bool = True,
) -> tuple[CategoricalModel, ModelCost]:
    if not values:
        raise ModelError("cannot fit a model on zero rows")
    counts: dict[Context, list[int]] = {}
    for ctx, v in zip(contexts, values):
        row = counts.get(ctx)
        if row is None:
            counts[ctx] = row = [0] * size
        row[v] += 1
    if len(counts) > CONTEXT_CAP:
        raise ConfigError(
            f"{len(counts)} distinct parent contexts exceed the cap of {CONTEXT_CAP}"
        )
    heads: dict[Context, tuple[float, ...]] = {}
    for ctx in sorted(counts):
        cs = counts[ctx]
        n = sum(cs)
        if smoothing:
            probs = [(c + 1) / (n + size) for c in cs]
        else:
            probs = [c / n for c in cs]
        heads[ctx] = tuple(wire.f32(p) for p in probs[:-1])
    model = CategoricalModel(size, arity, heads)
    data_bits = 0.0
    for ctx, v in zip(contexts, values):
        data_bits += model.value_bits(ctx, v)
    cost = ModelCost(float(PARAM_BITS * model.param_count()), data_bits)
    return model, cost


FAMILY_UNIFORM = 0
FAMILY_GAUSSIAN = 1
FAMILY_LAPLACE = 2
FAMILY_NAMES = {FAMILY_UNIFORM: "uniform", FAMILY_GAUSSIAN: "gaussian", FAMILY_LAPLACE: "laplace"}


def _sel_gauss_mass(mu: float, sigma: float, a: float, b: float) -> float:
    s = sigma * _SQRT2
    return 0.5 * (math.erf((b - mu) / s) - math.erf((a - mu) / s))


def _sel_laplace_cdf(mu: float, b: float, x: float) -> float:
    t = (x - mu) / b
    if t < 0.0:
        return 0.5 * math.exp(t)
    return 1.0 - 0.5 * math.exp(-t)


def _window(value: float, tolerance: float, integer: bool) -> tuple[float, float]:
    """The value's reconstruction window, the mass a leaf roughly owns."""
    if integer and tolerance == 0.0:
        return value - 1.0, value
    return value - tolerance, value + tolerance


def _ratio_bits(window_mass: float, root_mass: float) -> float:
    if root_mass <= 0.0:
        return -math.log2(MIN_MASS)
    r = window_mass / root_mass
    if r > 1.0:
        r = 1.0
    if r < MIN_MASS:
        r = MIN_MASS
    return -math.log2(r)


class NumericModel:
    """One location/scale family with per-context parameters.

    The root range is shared by all contexts; contexts never seen at
    fit time (and the whole column, under the uniform family) fall back
    to the uniform law over the root range.
    """

    TAG = 1

    def __init__(
        self,
        integer: bool,
        tolerance: float,
        lo: float,
        hi: float,
        family: int,
        arity: int,
        params: dict[Context, tuple[float, float]],
    ):
        if not lo < hi:
            raise ModelError("empty root range")
        self.integer = integer
        self.tolerance = tolerance
        self.lo = lo
        self.hi = hi
        self.family = family
        self.arity = arity
        self.params = params
        self._root = Uniform(lo, hi)

    def law(self, ctx: Context):
        if self.family == FAMILY_UNIFORM:
            return self._root
        p = self.params.get(ctx)
        if p is None:
            return self._root
        if self.family == FAMILY_GAUSSIAN:
            return Gaussian(p[0], p[1])
        return Laplace(p[0], p[1])

    def tree(self, ctx: Context) -> BisectionTree:
        return build_numerical_tree(
            self.law(ctx), self.lo, self.hi, self.tolerance, self.integer
        )

    def value_bits(self, ctx: Context, value: float) -> float:
        law = self.law(ctx)
        a, b = _window(float(value), self.tolerance, self.integer)
        return _ratio_bits(law.mass(a, b), law.mass(self.lo, self.hi))

    def param_count(self) -> int:
        if self.family == FAMILY_UNIFORM:
            return 0
        return 2 * len(self.params)


def root_range(
    integer: bool,
    tolerance: float,
    values: Sequence[float] | None,
    declared_lo: float | None = None,
    declared_hi: float | None = None,
) -> tuple[float, float]:
    """Half-open root range (lo, hi] guaranteed to hold every value.

    Declared bounds are honoured as given; otherwise the observed range
    is widened so the extremes sit strictly inside.
    """
    if declared_lo is not None and declared_hi is not None:
        lo, hi = float(declared_lo), float(declared_hi)
    else:
        if not values:
            raise ModelError("cannot derive a range from zero values")
        lo, hi = float(min(values)), float(max(values))
        if not integer:
            hi += tolerance
    lo -= 1.0 if integer else max(tolerance, 1e-9)
    return lo, hi


def fit_numeric(
    integer: bool,
    tolerance: float,
    lo: float,
    hi: float,
    arity: int,
    contexts: Sequence[Context],
    values: Sequence[float],
) -> tuple[NumericModel, ModelCost]:
    if not values:
        raise ModelError("cannot fit a model on zero rows")
    groups: dict[Context, list[float]] = {}
    for ctx, v in zip(contexts, values):
        g = groups.get(ctx)
        if g is None:
            groups[ctx] = g = []
        g.append(float(v))
    if len(groups) > CONTEXT_CAP:
        raise ConfigError(
            f"{len(groups)} distinct parent contexts exceed the cap of {CONTEXT_CAP}"
        )
    floor = max(tolerance / 4.0, 1e-9)
    params_g: dict[Context, tuple[float, float]] = {}
    params_l: dict[Context, tuple[float, float]] = {}
    for ctx in sorted(groups):
        g = groups[ctx]
        n = len(g)
        mu = math.fsum(g) / n
        var = math.fsum((x - mu) ** 2 for x in g) / n
        if var < 0.0:
            var = 0.0
        sigma = max(math.sqrt(var), floor)
        b = max(math.sqrt(var / 2.0), floor)
        params_g[ctx] = (wire.f32(mu), wire.f32(sigma))
        params_l[ctx] = (wire.f32(mu), wire.f32(b))

    span = hi - lo
    bits_u = 0.0
    for v in values:
        a, b2 = _window(v, tolerance, integer)
        w = min(b2, hi) - max(a, lo)
        bits_u += _ratio_bits(w if w > 0.0 else 0.0, span)

    root_g = {ctx: _sel_gauss_mass(p[0], p[1], lo, hi) for ctx, p in params_g.items()}
    bits_g = 0.0
    for ctx, v in zip(contexts, values):
        p = params_g[ctx]
        a, b2 = _window(v, tolerance, integer)
        bits_g += _ratio_bits(_sel_gauss_mass(p[0], p[1], a, b2), root_g[ctx])

    root_l = {}
    for ctx, p in params_l.items():
        root_l[ctx] = _sel_laplace_cdf(p[0], p[1], hi) - _sel_laplace_cdf(p[0], p[1], lo)
    bits_l = 0.0
    for ctx, v in zip(contexts, values):
        p = params_l[ctx]
        a, b2 = _window(v, tolerance, integer)
        mass = _sel_laplace_cdf(p[0], p[1], b2) - _sel_laplace_cdf(p[0], p[1], a)
        bits_l += _ratio_bits(mass, root_l[ctx])

    per_ctx_bits = float(PARAM_BITS * 2 * len(groups))
    candidates = [
        (0.0 + bits_u, 0.0, FAMILY_UNIFORM, {}),
        (per_ctx_bits + bits_g, per_ctx_bits, FAMILY_GAUSSIAN, params_g),
        (per_ctx_bits + bits_l, per_ctx_bits, FAMILY_LAPLACE, params_l),
    ]
    best = min(range(3), key=lambda i: (candidates[i][0], i))
    total, model_bits, family, params = candidates[best]
    model = NumericModel(integer, tolerance, lo, hi, family, arity, params)
    cost = ModelCost(model_bits, total - model_bits)
    return model, cost


class StringModel:
    """Length histogram plus byte bigram rows; takes no parents."""

    TAG = 2

    def __init__(
        self,
        max_length: int,
        length_counts: tuple[int, ...],
        rows: dict[int, tuple[int, ...]],
    ):
        self.max_length = max_length
        self.length_counts = length_counts
        self.rows = rows
        self._tree = build_string_tree(max_length, length_counts, rows)

    def tree(self, ctx: Context = ()) -> StringTree:
        return self._tree

    def value_bits(self, ctx: Context, value: bytes) -> float:
        n_total = sum(self.length_counts) + self.max_length + 1
        bits = -math.log2((self.length_counts[len(value)] + 1) / n_total)
        prev = 256
        for byte in value:
            row = self.rows.get(prev)
            if row is None:
                bits += 8.0
            else:
                bits += -math.log2((row[byte] + 1) / (sum(row) + 256))
            prev = byte
        return bits

    def param_count(self) -> int:
        return (self.max_length + 1) + 256 * len(self.rows)


def fit_string(values: Sequence[bytes]) -> tuple[StringModel, ModelCost]:
    if not values:
        raise ModelError("cannot fit a model on zero rows")
    max_length = max(len(v) for v in values)
    length_counts = [0] * (max_length + 1)
    rows: dict[int, list[int]] = {}
    for s in values:
        length_counts[len(s)] += 1
        prev = 256
        for byte in s:
            row = rows.get(prev)
            if row is None:
                rows[prev] = row = [0] * 256
            row[byte] += 1
            prev = byte
    model = StringModel(
        max_length,
        tuple(length_counts),
        {ctx: tuple(row) for ctx, row in sorted(rows.items())},
    )
    data_bits = 0.0
    for s in values:
        data_bits += model.value_bits((), s)
    cost = ModelCost(float(PARAM_BITS * model.param_count()), data_bits)
    return model, cost


ColumnModel = CategoricalModel | NumericModel | StringModel


def parent_interpreter(column: Column, model: ColumnModel):
    """How a parent's recovered value becomes a context component."""
    kind = column.kind
    if isinstance(kind, Categorical):
        return IdentityInterpreter()
    if isinstance(kind, Numerical):
        return RangeBinning.equal_width(model.lo, model.hi, PARENT_BINS)
    return LengthInterpreter()


_ABSENT = 255
_VERSION = 1


def write_model(out: BytesIO, model: ColumnModel | None) -> None:
    if model is None:
        out.write(bytes([_ABSENT, _VERSION]))
        return
    out.write(bytes([model.TAG, _VERSION]))
    if isinstance(model, CategoricalModel):
        wire.write_uvarint(out, model.size)
        wire.write_uvarint(out, model.arity)
        wire.write_uvarint(out, len(model.heads))
        for ctx in sorted(model.heads):
            for part in ctx:
                wire.write_uvarint(out, part)
            for p in model.heads[ctx]:
                wire.write_f32(out, p)
    elif isinstance(model, NumericModel):
        out.write(bytes([1 if model.integer else 0, model.family]))
        wire.write_f64(out, model.lo)
        wire.write_f64(out, model.hi)
        wire.write_f64(out, model.tolerance)
        wire.write_uvarint(out, model.arity)
        wire.write_uvarint(out, len(model.params))
        for ctx in sorted(model.params):
            for part in ctx:
                wire.write_uvarint(out, part)
            mu, scale = model.params[ctx]
            wire.write_f32(out, mu)
            wire.write_f32(out, scale)
    elif isinstance(model, StringModel):
        wire.write_uvarint(out, model.max_length)
        for c in model.length_counts:
            wire.write_uvarint(out, c)
        wire.write_uvarint(out, len(model.rows))
        for ctx in sorted(model.rows):
            wire.write_uvarint(out, ctx)
            for c in model.rows[ctx]:
                wire.write_uvarint(out, c)
    else:
        raise ModelError(f"unknown model type {type(model).__name__}")


def read_model(src: BytesIO) -> ColumnModel | None:
    header = src.read(2)
    if len(header) != 2:
        raise wire.WireError("truncated model header")
    tag, version = header
    if version != _VERSION:
        raise wire.WireError(f"unsupported model version {version}")
    if tag == _ABSENT:
        return None
    if tag == CategoricalModel.TAG:
        size = wire.read_uvarint(src)
        arity = wire.read_uvarint(src)
        n_rows = wire.read_uvarint(src)
        heads: dict[Context, tuple[float, ...]] = {}
        for _ in range(n_rows):
            ctx = tuple(wire.read_uvarint(src) for _ in range(arity))
            heads[ctx] = tuple(wire.read_f32(src) for _ in range(size - 1))
        return CategoricalModel(size, arity, heads)
    if tag == NumericModel.TAG:
        flags = src.read(2)
        if len(flags) != 2:
            raise wire.WireError("truncated model")
        integer, family = bool(flags[0]), flags[1]
        if family not in FAMILY_NAMES:
            raise wire.WireError(f"unknown distribution family {family}")
        lo = wire.read_f64(src)
        hi = wire.read_f64(src)
        tolerance = wire.read_f64(src)
        arity = wire.read_uvarint(src)
        n_ctx = wire.read_uvarint(src)
        params: dict[Context, tuple[float, float]] = {}
        for _ in range(n_ctx):
            ctx = tuple(wire.read_uvarint(src) for _ in range(arity))
            params[ctx] = (wire.read_f32(src), wire.read_f32(src))
        return NumericModel(integer, tolerance, lo, hi, family, arity, params)
    if tag == StringModel.TAG:
        max_length = wire.read_uvarint(src)
        counts = tuple(wire.read_uvarint(src) for _ in range(max_length + 1))
        n_rows = wire.read_uvarint(src)
        rows: dict[int, tuple[int, ...]] = {}
        for _ in range(n_rows):
            ctx = wire.read_uvarint(src)
            rows[ctx] = tuple(wire.read_uvarint(src) for _ in range(256))
        return StringModel(max_length, counts, rows)
    raise wire.WireError(f"unknown model tag {tag}")
