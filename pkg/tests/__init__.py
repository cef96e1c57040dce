"""Tests for pricemix."""
