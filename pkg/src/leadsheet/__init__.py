"""Lead-sheet tokens."""
