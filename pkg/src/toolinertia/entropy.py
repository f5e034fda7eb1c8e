"""Markov statistics over tool sequences: conditional entropy, G² tests, successor skew."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

from . import kernels
from .errors import ArgumentError, NotFoundError
from .trajectory import Trajectory, TrajectoryLog


@dataclass(frozen=True)
class TransitionModel:
    """Counts ``counts[context][successor]`` for contexts of length ``order``.

    ``skip`` is how many leading positions of each sequence were ignored; models
    fitted with the same ``skip`` on the same sequences share one event set.
    """

    order: int
    counts: dict
    N: int
    alphabet: frozenset
    skip: int = 0

    @property
    def contexts(self) -> list[tuple]:
        return sorted(self.counts)


@dataclass(frozen=True)
class EntropyReport:
    order: int
    entropy_bits: float
    max_entropy_bits: float
    reduction_percent: float
    events: int = 0

    def to_dict(self) -> dict:
        return {"order": self.order, "entropy_bits": self.entropy_bits,
                "max_entropy_bits": self.max_entropy_bits,
                "reduction_percent": self.reduction_percent, "events": self.events}


@dataclass(frozen=True)
class G2Report:
    statistic: float
    degrees_of_freedom: int
    p_value: float

    def to_dict(self) -> dict:
        return {"statistic": self.statistic, "degrees_of_freedom": self.degrees_of_freedom,
                "p_value": self.p_value}


def _sequences(data) -> list[list[str]]:
    if isinstance(data, TrajectoryLog):
        return [t.tools for t in data]
    out = []
    for item in data:
        out.append(item.tools if isinstance(item, Trajectory) else list(item))
    return out


def preprocess(log, drop_self_transitions: bool = True, min_length: int = 2) -> list[list[str]]:
    """Collapse immediate repeats (A, A, B -> A, B) and drop sequences shorter than ``min_length``."""
    out = []
    for seq in _sequences(log):
        if drop_self_transitions:
            seq = [tool for i, tool in enumerate(seq) if i == 0 or seq[i - 1] != tool]
        if len(seq) >= min_length:
            out.append(seq)
    return out


def fit_markov(sequences, order: int, skip: int | None = None) -> TransitionModel:
    if order < 0:
        raise ArgumentError("order must be >= 0")
    skip = order if skip is None else skip
    if skip < order:
        raise ArgumentError("skip must be >= order")
    seqs = _sequences(sequences)
    alphabet = sorted({tool for seq in seqs for tool in seq})
    code = {tool: i for i, tool in enumerate(alphabet)}
    encoded = [kernels.encode([code[t] for t in seq]) for seq in seqs]
    raw = kernels.ngram_counts(encoded, order, skip)
    counts: dict[tuple, dict[str, int]] = {}
    for key in sorted(raw):
        ctx = tuple(alphabet[i] for i in key[:-1])
        counts.setdefault(ctx, {})[alphabet[key[-1]]] = raw[key]
    N = sum(raw.values())
    if N == 0:
        raise ArgumentError("no usable events for a model of this order")
    return TransitionModel(order, counts, N, frozenset(alphabet), skip)


def conditional_entropy(model: TransitionModel) -> EntropyReport:
    h = 0.0
    for ctx in model.contexts:
        successors = model.counts[ctx]
        n_ctx = sum(successors.values())
        for tool in sorted(successors):
            c = successors[tool]
            if c:
                h -= (c / model.N) * math.log2(c / n_ctx)
    h = max(h, 0.0)
    h_max = math.log2(len(model.alphabet)) if model.alphabet else 0.0
    reduction = 100.0 if h_max == 0 else (1.0 - h / h_max) * 100.0
    return EntropyReport(model.order, h, h_max, reduction, model.N)


def entropy_profile(sequences, orders: Iterable[int]) -> list[EntropyReport]:
    """Entropy at each order, all fitted on the same events (positions >= max order)."""
    orders = sorted(set(orders))
    if not orders:
        raise ArgumentError("at least one order is required")
    seqs = _sequences(sequences)
    skip = orders[-1]
    return [conditional_entropy(fit_markov(seqs, k, skip)) for k in orders]


# -- chi-square tail ------------------------------------------------------

_TINY = 1e-300


def gammaincc(a: float, x: float) -> float:
    """Regularized upper incomplete gamma function Q(a, x)."""
    if a <= 0:
        raise ArgumentError("a must be positive")
    if x < 0:
        raise ArgumentError("x must be non-negative")
    if x == 0:
        return 1.0
    log_prefactor = -x + a * math.log(x) - math.lgamma(a)
    if x < a + 1:
        term = total = 1.0 / a
        ap = a
        for _ in range(100000):
            ap += 1
            term *= x / ap
            total += term
            if abs(term) < abs(total) * 1e-17:
                break
        return max(0.0, 1.0 - total * math.exp(log_prefactor))
    # modified Lentz evaluation of the continued fraction
    b = x + 1 - a
    c = 1 / _TINY
    d = 1 / b
    h = d
    for i in range(1, 100000):
        an = -i * (i - a)
        b += 2
        d = an * d + b
        if abs(d) < _TINY:
            d = _TINY
        c = b + an / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1 / d
        delta = d * c
        h *= delta
        if abs(delta - 1) < 1e-16:
            break
    return math.exp(log_prefactor) * h


def chi2_sf(statistic: float, df: int) -> float:
    if df <= 0:
        raise ArgumentError("degrees of freedom must be positive")
    return gammaincc(df / 2.0, max(statistic, 0.0) / 2.0)


def g2_test(restricted: TransitionModel, full: TransitionModel) -> G2Report:
    """Likelihood-ratio test of an order-k model against order k+1 on one event set.

    Degrees of freedom are ``(observed full contexts - observed restricted
    contexts) * (alphabet size - 1)``.
    """
    if full.order != restricted.order + 1:
        raise ArgumentError("full model must have order restricted.order + 1")
    if full.N != restricted.N:
        raise ArgumentError("models were fitted on different event sets (N differs)")
    marginal: dict[tuple, dict[str, int]] = {}
    for ctx, succ in full.counts.items():
        row = marginal.setdefault(ctx[1:], {})
        for tool, c in succ.items():
            row[tool] = row.get(tool, 0) + c
    if marginal != restricted.counts:
        raise ArgumentError("models were fitted on different event sets")

    totals = {ctx: sum(s.values()) for ctx, s in restricted.counts.items()}
    stat = 0.0
    for ctx in full.contexts:
        succ = full.counts[ctx]
        n_ctx = sum(succ.values())
        base = restricted.counts[ctx[1:]]
        n_base = totals[ctx[1:]]
        for tool in sorted(succ):
            observed = succ[tool]
            expected = n_ctx * base[tool] / n_base
            stat += observed * math.log(observed / expected)
    stat = max(0.0, 2.0 * stat)
    alphabet = len(full.alphabet | restricted.alphabet)
    df = (len(full.counts) - len(restricted.counts)) * (alphabet - 1)
    if df <= 0:
        raise ArgumentError("test has no degrees of freedom")
    return G2Report(stat, df, chi2_sf(stat, df))


def successor_distribution(model: TransitionModel, context) -> list[tuple[str, float]]:
    if isinstance(context, str):
        context = (context,)
    context = tuple(context)
    if context not in model.counts:
        raise NotFoundError(f"context {context!r} not observed")
    succ = model.counts[context]
    total = sum(succ.values())
    return sorted(((t, c / total) for t, c in succ.items()), key=lambda tc: (-tc[1], tc[0]))


def top_k_mass(model: TransitionModel, k: int) -> float:
    """Average over observed contexts of the probability mass held by the top-k successors."""
    if k < 1:
        raise ArgumentError("k must be >= 1")
    if not model.counts:
        raise ArgumentError("model has no contexts")
    masses = []
    for ctx in model.contexts:
        counts = sorted(model.counts[ctx].values(), reverse=True)
        masses.append(sum(counts[:k]) / sum(counts))
    return sum(masses) / len(masses)


def analyze(sequences, orders: Sequence[int] = (0, 1, 2), max_k: int = 5) -> dict:
    """Everything the ``analyze`` command reports, as a JSON-ready dict."""
    orders = sorted(set(orders))
    if not orders:
        raise ArgumentError("at least one order is required")
    seqs = _sequences(sequences)
    skip = orders[-1]
    models = {k: fit_markov(seqs, k, skip) for k in orders}
    report = {
        "orders": orders,
        "events": models[orders[0]].N,
        "sequences": len(seqs),
        "alphabet_size": len(models[orders[0]].alphabet),
        "entropy": [conditional_entropy(models[k]).to_dict() for k in orders],
        "g2_tests": [],
    }
    for k in orders:
        if k + 1 in models:
            try:
                g2 = g2_test(models[k], models[k + 1]).to_dict()
            except ArgumentError as exc:
                g2 = {"statistic": None, "degrees_of_freedom": None, "p_value": None, "note": str(exc)}
            report["g2_tests"].append({"restricted_order": k, "full_order": k + 1, **g2})
    try:
        first = fit_markov(seqs, 1)
    except ArgumentError:
        first = None
    if first is not None:
        report["top_k_mass"] = [{"k": k, "mass": top_k_mass(first, k)} for k in range(1, max_k + 1)]
        report["successors"] = {
            " > ".join(ctx): [[t, p] for t, p in successor_distribution(first, ctx)]
            for ctx in first.contexts
        }
    return report
