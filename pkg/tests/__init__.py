"""Tests for the ROMER simulator."""
