#!/usr/bin/env python3
"""
Shape complexity toolkit entry point.

    python main.py generate data/desk --count 200 --seed 0
    python main.py train data/desk models/vae16.scvx --latent 16
    python main.py score data/desk scores.csv --vae16 models/vae16.scvx --vae64 models/vae64.scvx
"""

from controllers.cli_controller import cli

if __name__ == "__main__":
    cli(prog_name="shapecx")
