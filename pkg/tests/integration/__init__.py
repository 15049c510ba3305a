"""Desk-scale acceptance runs for mvmilstein."""
