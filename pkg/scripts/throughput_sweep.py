"""Throughput over payload sizes at 100 MHz with the SMMU on and off."""

import sys

from smmusim.cli import main

if __name__ == "__main__":
    sys.exit(main(["throughput", "--freq", "100", *sys.argv[1:]]))
