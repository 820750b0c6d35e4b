"""Latency added per transaction when every source page needs a full table walk."""

import argparse
from dataclasses import replace

from smmusim.experiments import ExperimentKind, ExperimentSpec, translation_overhead_ns


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--freq", type=float, default=100)
    ap.add_argument("--iterations", type=int, default=4000)
    args = ap.parse_args()
    spec = ExperimentSpec(ExperimentKind.LATENCY, fpga_freq_mhz=args.freq, iterations=args.iterations)
    print(f"{'payload(B)':>10}  {'added ns':>9}")
    for payload in (16, 32, 64, 128, 256, 512, 1024, 2048, 4096):
        print(f"{payload:>10}  {translation_overhead_ns(replace(spec, payload_bytes=payload)):>9.2f}")


if __name__ == "__main__":
    main()
