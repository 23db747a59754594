"""Operator-facing command line: dataset prep, training, restoration, benches."""
