"""
Run the polypack command line

This script runs the packing solver and analysis commands.
"""

from polypack.cli import main

if __name__ == '__main__':
    exit(main())
