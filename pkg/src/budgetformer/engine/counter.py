"""Instrumented naive-loop implementation of the classifier.

Every multiply-add in the triple loops below increments a FLOP bucket by 2
and every nonlinearity output increments ``other`` by 1, so the buckets are
counted while the values are computed. The analytic cost model must agree
with these counts exactly, and the computed values double as a brute-force
reference for the vectorized forward pass.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Literal

import numpy as np
from numpy.typing import ArrayLike

from budgetformer.engine.attention import AttentionParams, BudgetNets
from budgetformer.engine.encoder import EncoderClassifier
from budgetformer.engine.layers import FeedForward, LayerNorm, Linear
from budgetformer.engine.schedules import temperature
from budgetformer.errors import ParameterError
from budgetformer.models.config import ScheduleConfig
from budgetformer.models.reports import CostMode

Matrix = list[list[float]]
Bucket = Literal["projection", "attention", "budget_nets", "feedforward", "classifier"]

_GELU_C = math.sqrt(2.0 / math.pi)


@dataclass
class InstrumentedCounter:
    projection: int = 0
    attention: int = 0
    budget_nets: int = 0
    feedforward: int = 0
    classifier: int = 0
    other: int = 0
    memory_attention: int = 0

    @property
    def total(self) -> int:
        return sum(
            (self.projection, self.attention, self.budget_nets, self.feedforward, self.classifier)
        )

    def matmul(self, a: Matrix, b: Matrix, bucket: Bucket) -> Matrix:
        inner = len(b)
        cols = len(b[0])
        out: Matrix = []
        flops = 0
        for row in a:
            if len(row) != inner:
                raise ParameterError(f"naive matmul: {len(row)} columns against {inner} rows")
            out_row = []
            for j in range(cols):
                acc = 0.0
                for t in range(inner):
                    acc += row[t] * b[t][j]
                    flops += 2
                out_row.append(acc)
            out.append(out_row)
        setattr(self, bucket, getattr(self, bucket) + flops)
        return out

    def softmax(self, row: list[float], temp: float = 1.0) -> list[float]:
        top = max(row)
        weights = [math.exp((v - top) / temp) for v in row]
        norm = sum(weights)
        self.other += len(row)
        return [w / norm for w in weights]


def _as_matrix(array: np.ndarray) -> Matrix:
    return [[float(v) for v in row] for row in np.atleast_2d(array)]


def _linear(counter: InstrumentedCounter, x: Matrix, layer: Linear, bucket: Bucket) -> Matrix:
    out = counter.matmul(x, _as_matrix(layer.weight.data), bucket)
    if layer.bias is not None:
        bias = layer.bias.data
        out = [[v + float(bias[j]) for j, v in enumerate(row)] for row in out]
    return out


def naive_layer_norm(counter: InstrumentedCounter, x: Matrix, norm: LayerNorm) -> Matrix:
    out: Matrix = []
    for row in x:
        mu = sum(row) / len(row)
        var = sum((v - mu) ** 2 for v in row) / len(row)
        inv = 1.0 / math.sqrt(var + norm.eps)
        gain, bias = norm.gain.data, norm.bias.data
        out.append([(v - mu) * inv * float(gain[j]) + float(bias[j]) for j, v in enumerate(row)])
        counter.other += len(row)
    return out


def naive_attention(
    counter: InstrumentedCounter,
    x: Matrix,
    params: AttentionParams,
    active: list[int] | None = None,
    weights: list[float] | None = None,
) -> Matrix:
    """Attention for one unpadded example; only ``active`` heads are evaluated."""
    n_heads, d_h = params.n_heads, params.head_dim
    heads = list(range(n_heads)) if active is None else sorted(active)
    scale = [1.0] * n_heads if weights is None else weights
    q = counter.matmul(x, _as_matrix(params.w_q.data), "projection")
    k = counter.matmul(x, _as_matrix(params.w_k.data), "projection")
    v = counter.matmul(x, _as_matrix(params.w_v.data), "projection")
    n = len(x)
    concat: Matrix = [[0.0] * (n_heads * d_h) for _ in range(n)]
    for head in heads:
        cols = range(head * d_h, (head + 1) * d_h)
        q_h = [[row[c] for c in cols] for row in q]
        k_t = [[k[j][c] for j in range(n)] for c in cols]
        v_h = [[row[c] for c in cols] for row in v]
        scores = counter.matmul(q_h, k_t, "attention")
        probs = [counter.softmax([s / math.sqrt(d_h) for s in row]) for row in scores]
        counter.memory_attention += n * n
        context = counter.matmul(probs, v_h, "attention")
        for i in range(n):
            for j, c in enumerate(cols):
                concat[i][c] = context[i][j] * scale[head]
    return counter.matmul(concat, _as_matrix(params.w_o.data), "projection")


@dataclass
class NaiveGate:
    s: float
    z: list[float]
    p: list[float]


def naive_budget_nets(
    counter: InstrumentedCounter,
    h: list[float],
    nets: BudgetNets,
    temp: float,
) -> NaiveGate:
    """s = sigmoid(f_theta(h)), z = g_phi(h), p = softmax(z / temp) without noise."""
    hidden = _linear(counter, [h], nets.budget_hidden, "budget_nets")[0]
    hidden = [max(0.0, v) for v in hidden]
    counter.other += len(hidden)
    logit = _linear(counter, [hidden], nets.budget_out, "budget_nets")[0][0]
    s = 1.0 / (1.0 + math.exp(-logit))
    counter.other += 1
    z = _linear(counter, [h], nets.gate, "budget_nets")[0]
    return NaiveGate(s=s, z=z, p=counter.softmax(z, temp))


def naive_feed_forward(counter: InstrumentedCounter, x: Matrix, ffn: FeedForward) -> Matrix:
    hidden = _linear(counter, x, ffn.expand, "feedforward")
    activated = [
        [0.5 * v * (1.0 + math.tanh(_GELU_C * (v + 0.044715 * v**3))) for v in row]
        for row in hidden
    ]
    counter.other += sum(len(row) for row in hidden)
    return _linear(counter, activated, ffn.project, "feedforward")


def _mean_rows(x: Matrix) -> list[float]:
    return [sum(col) / len(x) for col in zip(*x, strict=True)]


def _top_k(p: list[float], s: float, force_k: int | None) -> list[int]:
    k = max(1, math.floor(s * len(p))) if force_k is None else force_k
    order = sorted(range(len(p)), key=lambda i: (-p[i], i))
    return sorted(order[:k])


@dataclass
class InstrumentedRun:
    """Counts and values from a naive pass over a batch."""

    counter: InstrumentedCounter
    logits: Matrix = field(default_factory=list)
    budgets: list[list[float]] = field(default_factory=list)
    active_heads: list[list[list[int]]] = field(default_factory=list)


def count_model(
    model: EncoderClassifier,
    token_ids: ArrayLike,
    pad_mask: ArrayLike,
    mode: CostMode = CostMode.INFERENCE,
    force_k: int | None = None,
    schedule: ScheduleConfig | None = None,
    t: int | None = None,
) -> InstrumentedRun:
    """Run the classifier example by example with naive loops, counting FLOPs.

    Training mode evaluates every head; inference keeps the top-k heads of the
    noise-free gating distribution. ``budgets`` and ``active_heads`` are
    indexed [layer][example].
    """
    ids = np.asarray(token_ids, dtype=np.int64)
    mask = np.asarray(pad_mask, dtype=bool)
    temp = temperature(model.step if t is None else t, schedule or model.schedule)
    counter = InstrumentedCounter()
    run = InstrumentedRun(counter=counter)
    n_layers = len(model.blocks)
    run.budgets = [[] for _ in range(n_layers)]
    run.active_heads = [[] for _ in range(n_layers)]

    for b in range(ids.shape[0]):
        positions = np.flatnonzero(mask[b])
        tokens = model.token_embedding.weight.data[ids[b, positions]]
        x = _as_matrix(tokens + model.position_embedding.weight.data[positions])
        for layer, block in enumerate(model.blocks):
            normed = naive_layer_norm(counter, x, block.attention_norm)
            active: list[int] | None = None
            weights: list[float] | None = None
            if block.budget_nets is not None:
                gate = naive_budget_nets(counter, _mean_rows(x), block.budget_nets, temp)
                n_heads = len(gate.p)
                weights = [gate.s * n_heads * p for p in gate.p]
                if mode == CostMode.INFERENCE:
                    active = _top_k(gate.p, gate.s, force_k)
                else:
                    active = list(range(n_heads))
                run.budgets[layer].append(gate.s)
                run.active_heads[layer].append(active)
            x = _residual(x, naive_attention(counter, normed, block.attention, active, weights))
            normed = naive_layer_norm(counter, x, block.ffn_norm)
            x = _residual(x, naive_feed_forward(counter, normed, block.feed_forward))
        run.logits.append(_linear(counter, [_mean_rows(x)], model.classifier, "classifier")[0])
    return run


def _residual(x: Matrix, update: Matrix) -> Matrix:
    return [
        [a + c for a, c in zip(row, out, strict=True)]
        for row, out in zip(x, update, strict=True)
    ]
