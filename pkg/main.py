import sys

from src.ccdlab.cli import main

if __name__ == "__main__":
    sys.exit(main())
