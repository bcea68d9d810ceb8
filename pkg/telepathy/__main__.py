"""
Main entry point for Telepathy.
"""

import sys

from telepathy.cli import cli_dispatch

if __name__ == "__main__":
    try:
        sys.exit(cli_dispatch(sys.argv[1:]))
    except KeyboardInterrupt:
        print("\nShutting down Telepathy", file=sys.stderr)
        sys.exit(130)
