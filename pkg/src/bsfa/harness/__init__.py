"""Configuration, training, ablations, visualization and the CLI."""
