"""Tests for InduForm."""
