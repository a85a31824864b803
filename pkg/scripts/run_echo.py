"""Run the echo benchmark on the full machine and print the headline numbers."""
import argparse
import time

from phalanx import SystemConfig, build
from phalanx.kernels import echo_source
from phalanx.programkit import assemble, multicast_load


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--rows", type=int, default=10)
    ap.add_argument("--cols", type=int, default=5)
    ap.add_argument("--rounds", type=int, default=1)
    ap.add_argument("--cycles", type=int, help="stop after this many cycles instead of at halt")
    ap.add_argument("--threads", type=int, default=1)
    ap.add_argument("--audit", action="store_true", help="check flit conservation every cycle")
    args = ap.parse_args()

    cfg = SystemConfig(rows=args.rows, cols=args.cols)
    system = build(cfg, threads=args.threads, audit=args.audit)
    src = echo_source(cfg.rows, cfg.cols, cfg.cluster.n_pes, args.rounds, cfg.cluster.cram_bytes)
    load = multicast_load(system, assemble(src))
    t0 = time.perf_counter()
    m = system.run(until=args.cycles)
    dt = time.perf_counter() - t0
    noc = m["noc"]
    print(f"kernel load: {load} cycles")
    print(f"cycles={m['cycles']} responses={m['echo_responses']} retired={m['retired']} cpi={m['cpi']}")
    print(f"flits delivered={noc['delivered']} deflections={noc['deflections']} "
          f"mean latency={noc['mean_latency']} max latency={noc['max_latency']}")
    print(f"wall {dt:.2f} s, {m['cycles'] / dt:,.0f} cycles/s")


if __name__ == "__main__":
    main()
