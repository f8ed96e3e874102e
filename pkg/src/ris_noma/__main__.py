"""Entry point for ris-noma package when run as python -m ris_noma."""

import sys

from ris_noma.cli import main

if __name__ == "__main__":
    sys.exit(main())
