"""Print the closed-form peak model next to the published round numbers."""
import argparse
import dataclasses

from phalanx import SystemConfig, analytic_peaks

PUBLISHED = {"peak_mips": 100_000, "cram_gbps": 600, "bisection_gbps": 700,
             "kernel_load_cycles": 1024}


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--fclk", type=float, default=250e6)
    args = ap.parse_args()
    model = dataclasses.asdict(analytic_peaks(SystemConfig(fclk_hz=args.fclk)))
    for key, pub in PUBLISHED.items():
        ours = model[key]
        print(f"{key:20s} model={ours:>10g} published~{pub:>8g} ratio={ours / pub:.3f}")
    print(f"{'derated_mips':20s} model={model['derated_mips']:>10g}")


if __name__ == "__main__":
    main()
