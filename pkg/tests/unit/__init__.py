"""Unit tests for mvmilstein."""
