"""Measure CPI of the 70/15/15 ALU/load/taken-branch mix at 2 and 3 stages."""
import argparse

from phalanx import SystemConfig, build
from phalanx.kernels import cpi_mix_source
from phalanx.programkit import assemble


def measure(stages, iterations):
    system = build(SystemConfig(rows=1, cols=1, stages=stages))
    system.load_kernel(assemble(cpi_mix_source(iterations)), pes=[0])
    return system.run()


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--iterations", type=int, default=600)
    args = ap.parse_args()
    for stages in (2, 3):
        m = measure(stages, args.iterations)
        st = m["stalls"]
        print(f"stages={stages} retired={m['retired']} cpi={m['cpi']:.4f} "
              f"load_occupancy={st['load_occupancy']} branch_flush={st['branch_flush']}")


if __name__ == "__main__":
    main()
