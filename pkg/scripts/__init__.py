"""Command-line scripts for progressive LBM benchmarks."""
