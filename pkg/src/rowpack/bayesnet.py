"""Dependency structure learning over the columns of a dataset.

The structure is a Bayesian network: each column gets a set of parent
columns, and its model is conditioned on the parents' interpreted
values.  Learning greedily minimizes a two-part objective, the model
size in bits plus the estimated bits needed for the column's data
under that model, which makes spurious parents pay for their own
parameters.

The search seeds columns one round at a time: every still-unseeded
column grows a parent set greedily from the already-seeded columns
while the objective strictly improves, the column with the lowest
resulting objective is seeded, and the seeding order doubles as the
topological order used by the coder.  Objective evaluations are
counted and bounded to keep the search predictably cheap.
"""

from __future__ import annotations

import random
from dataclasses import dataclass

import numpy as np

from .core import Categorical, Dataset, Numerical, Schema
from .models import (
    CONTEXT_CAP,
    MIN_MASS,
    PARAM_BITS,
    PARENT_BINS,
    ConfigError,
    fit_string,
    root_range,
)

_INF = float("inf")


@dataclass(frozen=True)
class StructureSearchConfig:
    """Knobs for the structure search.

    ``sample_rows`` caps how many rows the objective sees; the head of
    the dataset by default, a uniform subsample when ``seed`` is set.
    """

    sample_rows: int = 2000
    max_parents: int = 4
    seed: int | None = None

    def __post_init__(self) -> None:
        if self.sample_rows < 1:
            raise ConfigError("sample_rows must be positive")
        if self.max_parents < 0:
            raise ConfigError("max_parents cannot be negative")


@dataclass(frozen=True)
class BayesNetStructure:
    """Parent sets per column plus the topological column order."""

    parents: tuple[tuple[int, ...], ...]
    order: tuple[int, ...]

    def __post_init__(self) -> None:
        m = len(self.parents)
        if sorted(self.order) != list(range(m)):
            raise ConfigError("order must list every column exactly once")
        position = {c: i for i, c in enumerate(self.order)}
        for c, ps in enumerate(self.parents):
            if len(set(ps)) != len(ps):
                raise ConfigError(f"column {c} has duplicate parents")
            for p in ps:
                if not 0 <= p < m or p == c:
                    raise ConfigError(f"column {c} has invalid parent {p}")
                if position[p] >= position[c]:
                    raise ConfigError(
                        f"column {c} depends on column {p}, which does not precede it"
                    )

    def render(self, schema: Schema) -> str:
        """One line per column in topological order: ``child: parents``."""
        lines = []
        for c in self.order:
            names = " ".join(schema.columns[p].name for p in self.parents[c])
            lines.append(f"{schema.columns[c].name}:" + (f" {names}" if names else ""))
        return "\n".join(lines) + "\n"

    @classmethod
    def parse(cls, text: str, schema: Schema) -> "BayesNetStructure":
        """Inverse of ``render``; line order is the topological order."""
        order: list[int] = []
        parents: dict[int, tuple[int, ...]] = {}
        for raw in text.splitlines():
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if ":" not in line:
                raise ConfigError(f"expected 'child: parents', got {raw!r}")
            child_name, _, rest = line.partition(":")
            c = schema.index_of(child_name.strip())
            if c in parents:
                raise ConfigError(f"column {child_name.strip()!r} listed twice")
            parents[c] = tuple(schema.index_of(n) for n in rest.split())
            order.append(c)
        if len(order) != len(schema):
            raise ConfigError("structure must mention every column exactly once")
        return cls(tuple(parents[i] for i in range(len(schema))), tuple(order))


@dataclass(frozen=True)
class SearchReport:
    """What the search did: evaluation count, its bound, final scores."""

    evaluations: int
    bound: int
    objectives: tuple[float, ...]


def _np_normal_cdf(z: np.ndarray) -> np.ndarray:
    z = np.clip(z, -38.0, 38.0)
    az = np.abs(z)
    t = 1.0 / (1.0 + 0.2316419 * az)
    poly = t * (
        0.319381530
        + t * (-0.356563782 + t * (1.781477937 + t * (-1.821255978 + t * 1.330274429)))
    )
    tail = np.exp(-0.5 * az * az) * 0.3989422804014327 * poly
    return np.where(z >= 0.0, 1.0 - tail, tail)


def _np_laplace_cdf(mu: np.ndarray, b: np.ndarray, x: np.ndarray) -> np.ndarray:
    t = np.clip((x - mu) / b, -700.0, 700.0)
    return np.where(t < 0.0, 0.5 * np.exp(t), 1.0 - 0.5 * np.exp(-t))


def _ratio_bits_array(mass: np.ndarray, root: np.ndarray) -> float:
    ratio = np.clip(mass / np.maximum(root, MIN_MASS), MIN_MASS, 1.0)
    return float(-np.log2(ratio).sum())


class _Objective:
    """Column cost evaluator over the sampled rows."""

    def __init__(self, dataset: Dataset, sample: list[int]):
        schema = dataset.schema
        self._schema = schema
        self._n = len(sample)
        self._codes: list[np.ndarray] = []
        self._arity: list[int] = []
        self._child: list[dict] = []
        for c, column in enumerate(schema.columns):
            raw = [dataset.rows[i][c] for i in sample]
            kind = column.kind
            if isinstance(kind, Categorical):
                vals = np.asarray(raw, dtype=np.int64)
                self._codes.append(vals)
                self._arity.append(kind.size)
                self._child.append({"kind": "cat", "values": vals, "size": kind.size})
            elif isinstance(kind, Numerical):
                vals = np.asarray(raw, dtype=np.float64)
                tol = column.tolerance
                lo, hi = root_range(kind.integer, tol, raw, kind.lo, kind.hi)
                edges = np.linspace(lo, hi, PARENT_BINS + 1)
                self._codes.append(np.searchsorted(edges, vals, side="left"))
                self._arity.append(PARENT_BINS + 2)
                if kind.integer and tol == 0.0:
                    wa, wb = vals - 1.0, vals
                else:
                    wa, wb = vals - tol, vals + tol
                self._child.append(
                    {
                        "kind": "num",
                        "values": vals,
                        "wa": wa,
                        "wb": wb,
                        "lo": lo,
                        "hi": hi,
                        "floor": max(tol / 4.0, 1e-9),
                    }
                )
            else:
                lengths = np.asarray([len(v) for v in raw], dtype=np.int64)
                self._codes.append(lengths)
                self._arity.append(int(lengths.max()) + 1 if self._n else 1)
                self._child.append({"kind": "text", "raw": raw})

    def contexts(self, parents: tuple[int, ...]) -> tuple[np.ndarray, int]:
        """Compact context ids over the sample and their count."""
        if not parents:
            return np.zeros(self._n, dtype=np.int64), 1
        code = self._codes[parents[0]].copy()
        for p in parents[1:]:
            code = code * self._arity[p] + self._codes[p]
        uniq, inv = np.unique(code, return_inverse=True)
        return inv, len(uniq)

    def cost(self, c: int, parents: tuple[int, ...]) -> float:
        child = self._child[c]
        if child["kind"] == "text":
            if parents:
                return _INF
            if "cached" not in child:
                _, mc = fit_string(child["raw"])
                child["cached"] = mc.total
            return child["cached"]
        inv, n_ctx = self.contexts(parents)
        if n_ctx > CONTEXT_CAP:
            return _INF
        if child["kind"] == "cat":
            k = child["size"]
            joint = inv * k + child["values"]
            counts = np.bincount(joint, minlength=n_ctx * k).reshape(n_ctx, k)
            totals = counts.sum(axis=1, keepdims=True)
            probs = (counts + 1.0) / (totals + k)
            data_bits = float(-(counts * np.log2(probs)).sum())
            return PARAM_BITS * (k - 1) * n_ctx + data_bits
        vals = child["values"]
        lo, hi, floor = child["lo"], child["hi"], child["floor"]
        wa, wb = child["wa"], child["wb"]
        span = hi - lo
        width = np.minimum(wb, hi) - np.maximum(wa, lo)
        bits_u = _ratio_bits_array(np.maximum(width, 0.0), np.full(1, span))
        n_per = np.bincount(inv, minlength=n_ctx).astype(np.float64)
        sums = np.bincount(inv, weights=vals, minlength=n_ctx)
        sqs = np.bincount(inv, weights=vals * vals, minlength=n_ctx)
        mu = sums / n_per
        var = np.maximum(sqs / n_per - mu * mu, 0.0)
        sigma = np.maximum(np.sqrt(var), floor)
        b = np.maximum(np.sqrt(var / 2.0), floor)
        mu_v, s_v, b_v = mu[inv], sigma[inv], b[inv]
        mass_g = _np_normal_cdf((wb - mu_v) / s_v) - _np_normal_cdf((wa - mu_v) / s_v)
        root_g = _np_normal_cdf((hi - mu) / sigma) - _np_normal_cdf((lo - mu) / sigma)
        bits_g = _ratio_bits_array(mass_g, root_g[inv])
        mass_l = _np_laplace_cdf(mu_v, b_v, wb) - _np_laplace_cdf(mu_v, b_v, wa)
        root_l = _np_laplace_cdf(mu, b, np.full(n_ctx, hi)) - _np_laplace_cdf(
            mu, b, np.full(n_ctx, lo)
        )
        bits_l = _ratio_bits_array(mass_l, root_l[inv])
        per_ctx = float(PARAM_BITS * 2 * n_ctx)
        return min(bits_u, per_ctx + bits_g, per_ctx + bits_l)


def learn_structure(
    dataset: Dataset, config: StructureSearchConfig = StructureSearchConfig()
) -> tuple[BayesNetStructure, SearchReport]:
    """Greedy round-based structure search (see the module docstring).

    Ties in both the per-column candidate choice and the per-round
    seeding go to the smaller column index, so results are reproducible
    for a fixed sample.
    """
    schema = dataset.schema
    m = len(schema)
    if m == 0:
        raise ConfigError("cannot learn a structure over zero columns")
    n = len(dataset.rows)
    if n == 0:
        raise ConfigError("cannot learn a structure from zero rows")
    if n <= config.sample_rows:
        sample = list(range(n))
    elif config.seed is None:
        sample = list(range(config.sample_rows))
    else:
        rng = random.Random(config.seed)
        sample = sorted(rng.sample(range(n), config.sample_rows))
    objective = _Objective(dataset, sample)
    bound = m**3 * max(config.max_parents, 1) + m
    evals = 0
    base_cost: dict[int, float] = {}

    def cost(c: int, parents: tuple[int, ...]) -> float:
        nonlocal evals
        if not parents and c in base_cost:
            return base_cost[c]
        evals += 1
        if evals > bound:
            raise ConfigError("structure search exceeded its evaluation bound")
        v = objective.cost(c, parents)
        if not parents:
            base_cost[c] = v
        return v

    seeded: list[int] = []
    chosen: dict[int, tuple[int, ...]] = {}
    scores: dict[int, float] = {}
    unseeded = list(range(m))
    for _ in range(m):
        best: tuple[float, int, tuple[int, ...]] | None = None
        for c in unseeded:
            cur_parents: tuple[int, ...] = ()
            cur = cost(c, ())
            while len(cur_parents) < config.max_parents:
                step: tuple[float, int, tuple[int, ...]] | None = None
                for p in seeded:
                    if p in cur_parents:
                        continue
                    cand = tuple(sorted(cur_parents + (p,)))
                    v = cost(c, cand)
                    if step is None or (v, p) < (step[0], step[1]):
                        step = (v, p, cand)
                if step is None or step[0] >= cur:
                    break
                cur, cur_parents = step[0], step[2]
            if best is None or (cur, c) < (best[0], best[1]):
                best = (cur, c, cur_parents)
        score, c, ps = best
        seeded.append(c)
        unseeded.remove(c)
        chosen[c] = ps
        scores[c] = score
    structure = BayesNetStructure(
        tuple(chosen[i] for i in range(m)), tuple(seeded)
    )
    report = SearchReport(
        evaluations=evals,
        bound=bound,
        objectives=tuple(scores[i] for i in range(m)),
    )
    return structure, report
