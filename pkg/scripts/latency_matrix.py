"""Full latency matrix (3 scenarios x SMMU on/off x 3 frequencies) into results/latency.csv."""

import sys

from smmusim.cli import main

if __name__ == "__main__":
    sys.exit(main(["latency", *sys.argv[1:]]))
