"""Command-line entrypoint: python app.py {simulate,estimate,asymptotics,mc} ..."""

import sys

from src.cli import main

if __name__ == "__main__":
    sys.exit(main())
