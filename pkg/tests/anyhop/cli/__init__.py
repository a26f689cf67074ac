"""Unit tests for the anyhop CLI."""
