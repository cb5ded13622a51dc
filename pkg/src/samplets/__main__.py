"""Entry point so ``python3 -m samplets`` matches the ``samplets`` script."""

import sys

from samplets.cli import main

if __name__ == "__main__":
    sys.exit(main())
