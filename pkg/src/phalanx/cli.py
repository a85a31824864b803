"""Command-line driver: ``phalanx run | asm | disasm | metrics``.

Every failure prints one line ``error: <Kind>: <message>`` on stderr and exits
nonzero (1 for input/config errors, 3 for a PE fault, 4 for the watchdog).
"""
import argparse
import dataclasses
import json
import sys
from pathlib import Path

from .config import SystemConfig, load_config
from .errors import FileNotFound, PhalanxError, UsageError, WatchdogExpired
from .programkit import KernelImage, assemble, listing, multicast_load, unicast_load
from .system import TRACE_KINDS, System, analytic_peaks

EXIT_ERROR, EXIT_FAULT, EXIT_WATCHDOG = 1, 3, 4


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        print(f"error: UsageError: {message}", file=sys.stderr)
        sys.exit(2)


def _read_kernel(path):
    p = Path(path)
    if not p.is_file():
        raise FileNotFound(f"file not found: {path}")
    if p.suffix in (".s", ".S", ".asm"):
        try:
            return assemble(p.read_text())
        except PhalanxError as e:
            e.args = (f"{path}: {e}",)
            raise
    return KernelImage.load(p)


def _config(args):
    if args.config:
        if not Path(args.config).is_file():
            raise FileNotFound(f"file not found: {args.config}")
        cfg = load_config(args.config)
    else:
        cfg = SystemConfig()
    overrides = {}
    if getattr(args, "fclk", None) is not None:
        overrides["fclk_hz"] = args.fclk
    if getattr(args, "stages", None) is not None:
        overrides["stages"] = args.stages
    if getattr(args, "max_cycles", None) is not None:
        overrides["max_cycles"] = args.max_cycles
    return dataclasses.replace(cfg, **overrides).validate()


def _per_cluster(text):
    try:
        x, y, path = text.split(",", 2)
        return int(x), int(y), path
    except ValueError:
        raise UsageError(f"--kernel-per-cluster expects x,y,path (got {text!r})") from None


def _trace_kinds(text):
    if text in (None, "", "all"):
        return TRACE_KINDS
    kinds = {k.strip() for k in text.split(",") if k.strip()}
    bad = sorted(kinds - TRACE_KINDS)
    if bad:
        raise UsageError(f"unknown trace kind(s) {', '.join(bad)}; choose from {', '.join(sorted(TRACE_KINDS))}")
    return kinds


def cmd_run(args, out):
    cfg = _config(args)
    if not args.kernel and not args.kernel_per_cluster:
        raise UsageError("run needs --kernel or --kernel-per-cluster")
    shared = _read_kernel(args.kernel) if args.kernel else None
    targets = [_per_cluster(s) for s in args.kernel_per_cluster]
    seen = set()
    images = []
    for x, y, path in targets:
        if (x, y) in seen:
            raise UsageError(f"more than one kernel for cluster ({x}, {y})")
        seen.add((x, y))
        images.append((x, y, _read_kernel(path)))

    trace = None
    kinds = None
    if args.trace is not None:
        kinds = _trace_kinds(args.trace)
        trace = lambda line: print(line, file=out)  # noqa: E731
    system = System(cfg, threads=args.threads, trace=trace, trace_kinds=kinds)

    P = cfg.cluster.n_pes
    release = set()
    entry = {}
    if shared is not None:
        multicast_load(system, shared, release=False)
        release.update(range(cfg.n_pes))
        entry.update({g: shared.entry for g in range(cfg.n_pes)})
    for x, y, img in images:
        unicast_load(system, img, x, y, release=False)
        c = system.topo.index(x, y)
        for g in range(c * P, c * P + P):
            release.add(g)
            entry[g] = img.entry
    for pc in sorted(set(entry.values())):
        system.release([g for g in sorted(release) if entry[g] == pc], pc=pc)

    status = 0
    try:
        system.run()
    except WatchdogExpired as e:
        status = EXIT_WATCHDOG
        err = f"error: WatchdogExpired: {e}"
    stats = system.stats()
    if status == 0 and system.faults:
        f = system.faults[0]
        status = EXIT_FAULT
        err = f"error: {f.error}: pe={f.pe} pc=0x{f.pc:08x} arg=0x{f.arg & 0xFFFFFFFF:08x}"
    text = json.dumps(stats, indent=2, sort_keys=True) + "\n"
    if args.stats:
        Path(args.stats).write_text(text)
    else:
        m = stats["measured"]
        print(f"cycles={m['cycles']} retired={m['retired']} cpi={m['cpi']} "
              f"responses={m['echo_responses']} faults={m['faults']}", file=out)
    if status:
        print(err, file=sys.stderr)
    return status


def cmd_asm(args, out):
    src = Path(args.source)
    if not src.is_file():
        raise FileNotFound(f"file not found: {args.source}")
    try:
        image = assemble(src.read_text())
    except PhalanxError as e:
        e.args = (f"{args.source}: {e}",)
        raise
    dest = Path(args.output) if args.output else src.with_suffix(".bin")
    image.save(dest)
    print(f"{dest}: {len(image)} bytes", file=out)
    return 0


def cmd_disasm(args, out):
    p = Path(args.image)
    if not p.is_file():
        raise FileNotFound(f"file not found: {args.image}")
    text = listing(KernelImage.load(p)) + "\n"
    if args.output:
        Path(args.output).write_text(text)
    else:
        out.write(text)
    return 0


def cmd_metrics(args, out):
    model = dataclasses.asdict(analytic_peaks(_config(args)))
    if args.json:
        out.write(json.dumps(model, indent=2, sort_keys=True) + "\n")
    else:
        for k, v in model.items():
            if isinstance(v, float) and v.is_integer():
                v = int(v)
            print(f"{k}={v}", file=out)
    return 0


def build_parser():
    ap = _Parser(prog="phalanx", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    run = sub.add_parser("run", help="load kernel(s), simulate to halt, report stats")
    run.add_argument("--config", help="JSON file with SystemConfig fields")
    run.add_argument("--kernel", help="assembly (.s) or flat binary image for every IRAM")
    run.add_argument("--kernel-per-cluster", action="append", default=[], metavar="X,Y,PATH",
                     help="kernel for one cluster's IRAMs (repeatable)")
    run.add_argument("--max-cycles", type=int, help="watchdog limit")
    run.add_argument("--trace", nargs="?", const="all", metavar="KINDS",
                     help="comma-separated event kinds to trace (default all)")
    run.add_argument("--stats", help="write the JSON stats report here")
    run.add_argument("--fclk", type=float, help="clock in Hz for rate metrics")
    run.add_argument("--stages", type=int, choices=(2, 3))
    run.add_argument("--threads", type=int, default=1, help="host threads for cluster evaluation")
    run.set_defaults(func=cmd_run)

    asm = sub.add_parser("asm", help="assemble to a flat little-endian image")
    asm.add_argument("source")
    asm.add_argument("-o", "--output")
    asm.set_defaults(func=cmd_asm)

    dis = sub.add_parser("disasm", help="print an address listing of an image")
    dis.add_argument("image")
    dis.add_argument("-o", "--output")
    dis.set_defaults(func=cmd_disasm)

    met = sub.add_parser("metrics", help="print the analytic peak model")
    met.add_argument("--config")
    met.add_argument("--fclk", type=float)
    met.add_argument("--stages", type=int, choices=(2, 3))
    met.add_argument("--json", action="store_true")
    met.set_defaults(func=cmd_metrics)
    return ap


def main(argv=None, out=None):
    out = out or sys.stdout
    args = build_parser().parse_args(argv)
    try:
        return args.func(args, out)
    except PhalanxError as e:
        print(f"error: {e.kind}: {e}", file=sys.stderr)
        return EXIT_ERROR
    except OSError as e:
        print(f"error: {type(e).__name__}: {e.strerror}: {e.filename}", file=sys.stderr)
        return EXIT_ERROR


def main_entry():
    sys.exit(main())


if __name__ == "__main__":
    main_entry()
