"""
Entry point for bntlgraph.
Allows running the command-line tool with: python -m bntlgraph <command>
"""

import sys

from bntlgraph.main import main

if __name__ == "__main__":
    sys.exit(main())
