"""mvmilstein test suite."""
