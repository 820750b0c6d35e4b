"""Probe the micro-TLB depth for a range of configured depths and save each curve."""

import argparse
from pathlib import Path

from smmusim.experiments import probe_micro_tlb_depth
from smmusim.report import format_probe, write_text
from smmusim.smmu import SmmuConfig


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--depths", default="2,8,16,32,63,64,65,128")
    ap.add_argument("--out", default="results/probe")
    args = ap.parse_args()
    for depth in (int(d) for d in args.depths.split(",")):
        result = probe_micro_tlb_depth(SmmuConfig().with_micro_depth(depth), n_max=depth + 16, full_curve=True)
        write_text(Path(args.out) / f"probe_depth{depth}.csv", format_probe(result.rows))
        print(f"configured {depth:>4}  inferred {result.depth}")


if __name__ == "__main__":
    main()
