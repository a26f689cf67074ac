"""Unit tests module."""
