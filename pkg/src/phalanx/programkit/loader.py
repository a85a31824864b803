"""Kernel loading over the NOC.

The loader is an extra client sharing the injection port of router (0,0). It
only injects when cluster (0,0) has nothing of its own to send, so a load on a
quiescent machine sees the port to itself.
"""
import struct

from ..errors import InvalidDestination
from ..noc import PAYLOAD_BYTES, Flit
from .image import KernelImage

WORDS_PER_FLIT = PAYLOAD_BYTES // 4


def image_blocks(image):
    """Split an image into (block index, 32 B payload) pairs, zero padding the tail."""
    words = list(image.words)
    words += [0] * (-len(words) % WORDS_PER_FLIT)
    for b in range(len(words) // WORDS_PER_FLIT):
        chunk = words[b * WORDS_PER_FLIT:(b + 1) * WORDS_PER_FLIT]
        yield b, struct.pack(f"<{WORDS_PER_FLIT}I", *chunk)


def _drive(system, flits, max_cycles):
    cb = system.clusters
    writes_before = cb.iram_writes
    expected = writes_before + sum(system.topo.size if f.multicast else 1 for f in flits)
    system.loader.extend(flits)
    start = system.cycle
    limit = start + (max_cycles if max_cycles is not None else system.config.max_cycles)
    system.run(until=lambda s: cb.iram_writes >= expected and s.quiescent, max_cycles=limit)
    # flits are accepted the cycle they are offered on a quiet port, so the
    # first injection happens at ``start``; IRAM writes land one cycle after
    # the NOC delivers.
    return cb.last_iram_write - start if flits else 0


def multicast_load(system, image, release=True, max_cycles=None):
    """Broadcast ``image`` into every IRAM of every cluster.

    Returns the cycles from the first injection to the last IRAM write, then
    takes all PEs out of reset at the image entry point.
    """
    if not isinstance(image, KernelImage):
        image = KernelImage(list(image))
    image.check_fits(system.config.cluster.iram_bytes)
    flits = [Flit(dest_x=0, dest_y=0, payload=p, multicast=True, dest_block=b, to_iram=True)
             for b, p in image_blocks(image)]
    cycles = _drive(system, flits, max_cycles)
    if release:
        system.release(pc=image.entry)
    return cycles


def unicast_load(system, image, x, y, release=True, max_cycles=None):
    """Load ``image`` into the IRAMs of cluster (x, y) only (MIMD variant)."""
    if not isinstance(image, KernelImage):
        image = KernelImage(list(image))
    image.check_fits(system.config.cluster.iram_bytes)
    topo = system.topo
    if not (0 <= x < topo.cols and 0 <= y < topo.rows):
        raise InvalidDestination(f"cluster ({x}, {y}) outside {topo.cols}x{topo.rows} grid")
    flits = [Flit(dest_x=x, dest_y=y, payload=p, dest_block=b, to_iram=True)
             for b, p in image_blocks(image)]
    cycles = _drive(system, flits, max_cycles)
    if release:
        P = system.config.cluster.n_pes
        c = topo.index(x, y)
        system.release([c * P + p for p in range(P)], pc=image.entry)
    return cycles
