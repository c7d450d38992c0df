"""
Entry point for running experiments from a source checkout:

    python main.py sweep --config configs/quadratic_standard_apriori.json

Configuration defaults (log level, output directory, thread count, solver
caps) come from environment variables, optionally loaded from a .env file.
"""

from absl import app

from alm_rates.cli import main

if __name__ == "__main__":
    app.run(main)
