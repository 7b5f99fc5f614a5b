"""Tests for standard and budgeted multi-head attention."""

import math

import numpy as np
import pytest

from budgetformer.autograd import Tensor
from budgetformer.autograd.gradcheck import check_gradients
from budgetformer.engine.attention import (
    AttentionParams,
    BudgetNets,
    GatingOverride,
    HeadSelection,
    Mode,
    active_head_count,
    budgeted_attention,
    compute_budget,
    head_probs,
    head_scores,
    head_weights,
    select_top_k,
    standard_mha,
)
from budgetformer.errors import ContractError, DimensionError, ParameterError
from budgetformer.models.config import ScheduleConfig

# ── Helpers ──────────────────────────────────────────────────────────


def _layer(seed: int, d_model: int, n_heads: int) -> tuple[AttentionParams, BudgetNets]:
    rng = np.random.default_rng(seed)
    return AttentionParams(d_model, n_heads, rng), BudgetNets(d_model, n_heads, rng)


def _inputs(
    rng: np.random.Generator, batch: int, n_tokens: int, d_model: int
) -> tuple[Tensor, np.ndarray]:
    x = Tensor(rng.normal(size=(batch, n_tokens, d_model)))
    lengths = rng.integers(1, n_tokens + 1, size=batch)
    mask = np.arange(n_tokens)[None, :] < lengths[:, None]
    return x, mask


def _naive_attention(x: np.ndarray, params: AttentionParams) -> np.ndarray:
    """Loop-by-loop reference for one unpadded example of shape (N, D)."""
    n_tokens, d_model = x.shape
    d_h = params.head_dim
    q, k, v = x @ params.w_q.data, x @ params.w_k.data, x @ params.w_v.data
    concat = np.zeros((n_tokens, d_model))
    for head in range(params.n_heads):
        cols = slice(head * d_h, (head + 1) * d_h)
        for i in range(n_tokens):
            scores = [float(q[i, cols] @ k[j, cols]) / math.sqrt(d_h) for j in range(n_tokens)]
            top = max(scores)
            weights = [math.exp(score - top) for score in scores]
            total = sum(weights)
            for j in range(n_tokens):
                concat[i, cols] += weights[j] / total * v[j, cols]
    return concat @ params.w_o.data


def _check_selection(sel: HeadSelection) -> None:
    assert abs(sel.p.sum() - 1.0) <= 1e-12
    assert abs(sel.w.sum() - sel.s * sel.n_heads) <= 1e-9
    assert sel.k == max(1, math.floor(sel.s * sel.n_heads))
    assert int(sel.mask.sum()) == sel.k


# ══════════════════════════════════════════════════════════════════════
#  STANDARD ATTENTION
# ══════════════════════════════════════════════════════════════════════


class TestStandardAttention:
    """Scaled dot-product attention over all heads."""

    def test_matches_loop_oracle(self, rng):
        params, _ = _layer(5, 4, 2)
        x = rng.normal(size=(1, 3, 4))
        out = standard_mha(Tensor(x), params, np.ones((1, 3))).output.data
        assert np.allclose(out[0], _naive_attention(x[0], params), atol=1e-12, rtol=0)

    def test_single_token_passes_values_through(self, rng):
        params, _ = _layer(5, 8, 4)
        x = rng.normal(size=(1, 1, 8))
        result = standard_mha(Tensor(x), params, np.ones((1, 1)), return_attention=True)
        assert result.attention is not None
        assert np.all(result.attention == 1.0)
        expected = x @ params.w_v.data @ params.w_o.data
        assert np.allclose(result.output.data, expected, atol=1e-12, rtol=0)

    def test_permutation_equivariance(self, rng):
        params, _ = _layer(6, 8, 2)
        x = rng.normal(size=(1, 5, 8))
        order = np.array([3, 0, 4, 1, 2])
        plain = standard_mha(Tensor(x), params, np.ones((1, 5))).output.data
        permuted = standard_mha(Tensor(x[:, order]), params, np.ones((1, 5))).output.data
        assert np.allclose(permuted, plain[:, order], atol=1e-12)

    def test_padded_keys_ignored(self, rng):
        params, _ = _layer(7, 8, 2)
        x = rng.normal(size=(1, 4, 8))
        mask = np.array([[True, True, False, False]])
        full = standard_mha(Tensor(x), params, mask).output.data
        x[0, 2:] = rng.normal(size=(2, 8)) * 50
        changed = standard_mha(Tensor(x), params, mask).output.data
        assert np.allclose(full[0, :2], changed[0, :2], atol=1e-12)

    def test_indivisible_heads(self, rng):
        with pytest.raises(ParameterError):
            AttentionParams(10, 4, rng)

    def test_wrong_width(self, rng):
        params, _ = _layer(1, 8, 2)
        with pytest.raises(DimensionError):
            standard_mha(Tensor(np.ones((1, 3, 6))), params, np.ones((1, 3)))

    def test_empty_example(self, rng):
        params, _ = _layer(1, 8, 2)
        with pytest.raises(ContractError):
            standard_mha(Tensor(np.ones((2, 3, 8))), params, [[1, 1, 0], [0, 0, 0]])


# ══════════════════════════════════════════════════════════════════════
#  GATING PRIMITIVES
# ══════════════════════════════════════════════════════════════════════


class TestComputeBudget:
    def test_zero_network_gives_half(self, rng):
        _, nets = _layer(2, 8, 4)
        for p in nets.parameters():
            p.data[...] = 0.0
        assert compute_budget(Tensor(rng.normal(size=(3, 8))), nets).data.tolist() == [0.5] * 3

    def test_increasing_in_output_bias(self, rng):
        _, nets = _layer(2, 8, 4)
        h = Tensor(rng.normal(size=8))
        values = []
        for bias in (-1.0, 0.0, 1.0, 2.0):
            assert nets.budget_out.bias is not None
            nets.budget_out.bias.data[...] = bias
            values.append(compute_budget(h, nets).item())
        assert values == sorted(values)
        assert len(set(values)) == 4

    def test_gradient_matches_finite_differences(self, rng):
        _, nets = _layer(2, 8, 4)
        h = Tensor(rng.normal(size=(2, 8)))

        def fn() -> Tensor:
            return (compute_budget(h, nets) * np.array([1.0, -0.5])).sum()

        params = [nets.budget_hidden.weight, nets.budget_out.weight]
        assert check_gradients(fn, params) <= 1e-5


class TestHeadScores:
    def test_inference_is_deterministic(self, rng, schedule):
        _, nets = _layer(3, 8, 4)
        h = Tensor(rng.normal(size=(2, 8)))
        a = head_scores(h, nets, 0, schedule, rng, Mode.INFERENCE).data
        b = head_scores(h, nets, 0, schedule, rng, Mode.INFERENCE).data
        assert np.array_equal(a, b)
        assert np.array_equal(a, nets.gate(h).data)

    def test_no_noise_at_horizon(self, rng, schedule):
        _, nets = _layer(3, 8, 4)
        h = Tensor(rng.normal(size=(2, 8)))
        z = head_scores(h, nets, 100, schedule, rng, Mode.TRAIN).data
        assert np.array_equal(z, nets.gate(h).data)

    def test_initial_noise_std(self, schedule):
        _, nets = _layer(3, 8, 4)
        h = Tensor(np.tile(np.linspace(-1, 1, 8), (10_000, 1)))
        z = head_scores(h, nets, 0, schedule, np.random.default_rng(11), Mode.TRAIN).data
        spread = (z - nets.gate(h).data).std(axis=0)
        assert np.all((spread >= 0.48) & (spread <= 0.52))

    def test_train_needs_generator(self, rng, schedule):
        _, nets = _layer(3, 8, 4)
        with pytest.raises(ContractError):
            head_scores(Tensor(rng.normal(size=8)), nets, 0, schedule, None, Mode.TRAIN)


class TestHeadProbsAndWeights:
    def test_equal_scores_are_uniform(self, schedule):
        p = head_probs(Tensor(np.full(8, 0.3)), 10, schedule).data
        assert np.allclose(p, 1 / 8, atol=1e-15)

    def test_known_temperature_two(self, schedule):
        p = head_probs(Tensor([1.0, 0.0, 0.0, 0.0]), 0, schedule).data
        total = np.exp(0.5) + 3.0
        assert p[0] == pytest.approx(np.exp(0.5) / total, abs=1e-12)
        assert p[1:] == pytest.approx([1.0 / total] * 3, abs=1e-12)

    def test_sharpens_as_temperature_falls(self, schedule):
        z = Tensor([0.4, -0.2, 1.1, 0.0])
        peaks = [head_probs(z, t, schedule).data.max() for t in range(0, 101, 10)]
        assert all(a <= b for a, b in zip(peaks, peaks[1:], strict=False))

    def test_uniform_weights_equal_budget(self):
        w = head_weights(0.3, Tensor(np.full(4, 0.25))).data
        assert np.allclose(w, 0.3, atol=1e-15)

    def test_one_hot_weight(self):
        p = np.zeros(8)
        p[2] = 1.0
        w = head_weights(0.5, Tensor(p)).data
        assert w[2] == 4.0
        assert np.count_nonzero(w) == 1

    def test_batched_weights_sum_to_sh(self, rng):
        s = Tensor(rng.uniform(0.05, 0.95, size=3))
        p = Tensor(rng.dirichlet(np.ones(6), size=3))
        w = head_weights(s, p).data
        assert np.allclose(w.sum(axis=-1), s.data * 6, atol=1e-12)


class TestSelectTopK:
    @pytest.mark.parametrize(("s", "expected"), [(0.9, 7), (0.05, 1), (0.364, 2), (1.0, 8)])
    def test_head_count(self, s, expected):
        assert active_head_count(s, 8) == expected
        k, mask = select_top_k(np.full(8, 1 / 8), s)
        assert k == expected
        assert int(mask.sum()) == expected

    def test_picks_largest(self):
        _, mask = select_top_k([0.1, 0.4, 0.2, 0.3], 0.5)
        assert mask.tolist() == [False, True, False, True]

    def test_ties_go_to_lower_index(self):
        _, mask = select_top_k([0.25, 0.25, 0.25, 0.25], 0.5)
        assert mask.tolist() == [True, True, False, False]

    def test_forced_count(self):
        k, mask = select_top_k([0.1, 0.4, 0.2, 0.3], 0.1, k=3)
        assert k == 3
        assert mask.tolist() == [False, True, True, True]

    @pytest.mark.parametrize("s", [0.0, 1.5])
    def test_budget_out_of_range(self, s):
        with pytest.raises(ParameterError):
            select_top_k([0.5, 0.5], s)

    def test_forced_count_out_of_range(self):
        with pytest.raises(ParameterError):
            select_top_k([0.5, 0.5], 0.5, k=3)


# ══════════════════════════════════════════════════════════════════════
#  BUDGETED ATTENTION
# ══════════════════════════════════════════════════════════════════════


class TestBudgetedAttention:
    """Full budgeted sublayer in train and inference modes."""

    def test_selection_invariants(self, schedule):
        rng = np.random.default_rng(21)
        checked = 0
        for case in range(250):
            n_heads = (2, 4, 8)[case % 3]
            params, nets = _layer(case, 2 * n_heads, n_heads)
            x, mask = _inputs(rng, 4, 5, 2 * n_heads)
            mode = Mode.TRAIN if case % 2 else Mode.INFERENCE
            t = int(rng.integers(0, 101))
            result = budgeted_attention(x, params, nets, mask, t, schedule, rng, mode)
            for sel in result.selections:
                _check_selection(sel)
                checked += 1
        assert checked == 1000

    def test_skip_path_matches_mask_path(self, schedule):
        rng = np.random.default_rng(22)
        for case in range(100):
            n_heads = (2, 4, 8)[case % 3]
            d_model = n_heads * int(rng.integers(1, 5))
            params, nets = _layer(1000 + case, d_model, n_heads)
            x, mask = _inputs(rng, 1, int(rng.integers(1, 17)), d_model)
            t = int(rng.integers(0, 101))
            args = (x, params, nets, mask, t, schedule, None, Mode.INFERENCE)
            skip = budgeted_attention(*args, path="skip")
            masked = budgeted_attention(*args, path="mask")
            assert np.allclose(skip.output.data, masked.output.data, atol=1e-12, rtol=0)
            assert skip.selections[0].k == masked.selections[0].k

    def test_all_heads_inference_matches_train_at_horizon(self, rng, schedule):
        params, nets = _layer(4, 8, 4)
        x, mask = _inputs(rng, 2, 6, 8)
        train = budgeted_attention(x, params, nets, mask, 100, schedule, rng, Mode.TRAIN)
        args = (x, params, nets, mask, 100, schedule, None, Mode.INFERENCE)
        forced = budgeted_attention(*args, override=GatingOverride(force_k=4))
        assert np.allclose(train.output.data, forced.output.data, atol=1e-12, rtol=0)
        assert all(sel.k == 4 for sel in forced.selections)

    def test_single_head_scales_standard_output(self, rng, schedule):
        params, nets = _layer(8, 6, 1)
        x, mask = _inputs(rng, 1, 4, 6)
        result = budgeted_attention(x, params, nets, mask, 0, schedule, rng, Mode.TRAIN)
        sel = result.selections[0]
        assert sel.p.tolist() == [1.0]
        assert sel.w.tolist() == pytest.approx([sel.s], abs=1e-15)
        plain = standard_mha(x, params, mask).output.data
        assert np.allclose(result.output.data, sel.s * plain, atol=1e-12)

    def test_inference_is_deterministic(self, rng, schedule):
        params, nets = _layer(9, 8, 4)
        x, mask = _inputs(rng, 3, 5, 8)
        a = budgeted_attention(x, params, nets, mask, 30, schedule, None, Mode.INFERENCE)
        b = budgeted_attention(x, params, nets, mask, 30, schedule, None, Mode.INFERENCE)
        assert np.array_equal(a.output.data, b.output.data)
        assert [s.to_dict() for s in a.selections] == [s.to_dict() for s in b.selections]

    def test_inactive_heads_have_zero_attention(self, rng, schedule):
        params, nets = _layer(10, 8, 4)
        x, mask = _inputs(rng, 2, 5, 8)
        args = (x, params, nets, mask, 100, schedule, None, Mode.INFERENCE)
        override = GatingOverride(budget=0.25)
        result = budgeted_attention(*args, override=override, return_attention=True)
        assert result.attention is not None
        for b, sel in enumerate(result.selections):
            assert sel.k == 1
            inactive = ~sel.mask
            assert np.all(result.attention[b][inactive] == 0.0)

    def test_fixed_budget_override(self, rng, schedule):
        params, nets = _layer(11, 8, 4)
        x, mask = _inputs(rng, 3, 5, 8)
        override = GatingOverride(budget=np.array([0.2, 0.5, 1.0]))
        result = budgeted_attention(x, params, nets, mask, 0, schedule, rng, Mode.TRAIN, override)
        assert [sel.s for sel in result.selections] == [0.2, 0.5, 1.0]
        assert [sel.k for sel in result.selections] == [1, 2, 4]

    def test_random_gating_ignores_gate_network(self, rng, schedule):
        params, nets = _layer(12, 8, 4)
        x, mask = _inputs(rng, 2, 5, 8)
        override = GatingOverride(random_gating=True)
        args = (x, params, nets, mask, 100, schedule)
        a = budgeted_attention(*args, np.random.default_rng(1), Mode.TRAIN, override)
        nets.gate.weight.data *= 10.0
        b = budgeted_attention(*args, np.random.default_rng(1), Mode.TRAIN, override)
        assert [s.z.tolist() for s in a.selections] == [s.z.tolist() for s in b.selections]

    def test_force_k_ignored_in_training(self, rng, schedule):
        params, nets = _layer(13, 8, 4)
        x, mask = _inputs(rng, 2, 5, 8)
        override = GatingOverride(budget=0.5, force_k=4)
        result = budgeted_attention(x, params, nets, mask, 0, schedule, rng, Mode.TRAIN, override)
        assert all(sel.k == 2 for sel in result.selections)

    def test_gate_gradients(self, rng):
        schedule = ScheduleConfig(total_steps=10)
        params, nets = _layer(14, 8, 4)
        x, mask = _inputs(rng, 2, 4, 8)
        weights = np.random.default_rng(5).normal(size=(2, 4, 8))

        def fn() -> Tensor:
            noise = np.random.default_rng(6)
            out = budgeted_attention(x, params, nets, mask, 3, schedule, noise, Mode.TRAIN)
            return (out.output * weights).sum()

        inputs = [nets.budget_out.weight, nets.gate.weight, nets.gate.bias, params.w_v]
        assert check_gradients(fn, [t for t in inputs if t is not None]) <= 1e-5
        for tensor in (nets.budget_out.weight, nets.gate.weight):
            assert tensor.grad is not None
            assert np.any(tensor.grad != 0.0)

    def test_mismatched_gate_width(self, rng, schedule):
        params, _ = _layer(15, 8, 4)
        _, nets = _layer(15, 8, 2)
        x, mask = _inputs(rng, 1, 3, 8)
        with pytest.raises(DimensionError):
            budgeted_attention(x, params, nets, mask, 0, schedule, None, Mode.INFERENCE)

    def test_skip_path_requires_single_example(self, rng, schedule):
        params, nets = _layer(16, 8, 4)
        x, mask = _inputs(rng, 2, 3, 8)
        args = (x, params, nets, mask, 0, schedule, None, Mode.INFERENCE)
        with pytest.raises(ContractError):
            budgeted_attention(*args, path="skip")

    def test_head_order_and_export(self):
        sel = HeadSelection(
            s=0.5,
            z=np.zeros(4),
            p=np.array([0.1, 0.3, 0.3, 0.3]),
            w=np.array([0.2, 0.6, 0.6, 0.6]),
            mask=np.array([False, True, True, False]),
            k=2,
        )
        assert sel.head_order() == [1, 2, 3, 0]
        assert sel.to_dict()["mask"] == [0, 1, 1, 0]
        assert sel.entropy_term < 0
