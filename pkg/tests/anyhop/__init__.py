"""Unit tests for anyhop package."""
