"""Desk-scale evaluation harness: synthetic datasets, accuracy sweeps, benches."""
