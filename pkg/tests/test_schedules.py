"""Tests for the noise, temperature and entropy-coefficient schedules."""

import logging
import math

import pytest

from budgetformer.engine.schedules import (
    entropy_coefficient,
    noise_scale,
    temperature,
    training_progress,
)
from budgetformer.errors import ParameterError
from budgetformer.models.config import ScheduleConfig


class TestNoiseScale:
    def test_starts_at_sigma_max(self, schedule):
        assert noise_scale(0, schedule) == 0.5

    def test_midpoint(self, schedule):
        assert noise_scale(50, schedule) == 0.25

    def test_vanishes_at_horizon(self, schedule):
        assert noise_scale(100, schedule) == 0.0


class TestTemperature:
    def test_starts_at_tau_max(self, schedule):
        assert temperature(0, schedule) == 2.0

    def test_end_value(self, schedule):
        assert temperature(100, schedule) == pytest.approx(0.1 + 1.9 * math.exp(-5), abs=1e-12)
        assert temperature(100, schedule) == pytest.approx(0.11280, abs=1e-5)

    def test_zero_decay_is_constant(self):
        cfg = ScheduleConfig(gamma=0.0, total_steps=10)
        assert {temperature(t, cfg) for t in range(11)} == {2.0}

    def test_monotone_decreasing(self, schedule):
        values = [temperature(t, schedule) for t in range(101)]
        assert all(a > b for a, b in zip(values, values[1:], strict=False))


class TestEntropyCoefficient:
    @pytest.mark.parametrize(("t", "expected"), [(0, -0.05), (50, 0.0), (100, 0.05)])
    def test_sign_flip(self, schedule, t, expected):
        assert entropy_coefficient(t, schedule) == pytest.approx(expected, abs=1e-15)


class TestHorizon:
    """Steps past T clamp to the final values and log a warning."""

    def test_clamped_values(self, schedule):
        assert noise_scale(150, schedule) == 0.0
        assert temperature(150, schedule) == temperature(100, schedule)
        assert entropy_coefficient(150, schedule) == entropy_coefficient(100, schedule)

    def test_warning_emitted(self, schedule, caplog):
        with caplog.at_level(logging.WARNING, logger="budgetformer.engine.schedules"):
            assert training_progress(101, schedule) == 1.0
        assert "past the horizon" in caplog.text

    def test_negative_step(self, schedule):
        with pytest.raises(ParameterError):
            training_progress(-1, schedule)

    def test_temperatures_must_be_ordered(self):
        with pytest.raises(ValueError, match="tau_max"):
            ScheduleConfig(tau_min=2.0, tau_max=1.0)
