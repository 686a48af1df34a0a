"""
PROXAL HARNESS - Proximal Augmented Lagrangian
==============================================

Command-line entry point for the solver, the certifier, the Phase-I
feasibility solve, the audits and the complexity scaling study.

Usage:
    python proxal_harness.py solve --config run.json --out runs/demo
    python proxal_harness.py check --point kkt.json
"""

import sys

from proxal.cli import main as cli_main


def main():
    """Main entry point for the proxal harness."""
    return cli_main(sys.argv[1:])


if __name__ == "__main__":
    sys.exit(main())
