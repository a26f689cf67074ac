"""Unit tests for the anyhop client."""
