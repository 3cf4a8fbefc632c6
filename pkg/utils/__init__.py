"""Utility functions package."""

