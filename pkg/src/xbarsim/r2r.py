"""Register-to-register tunneling between mesh-adjacent workers.

Each directed link is a depth-1 buffer with two bits of control state:
EMPTY/FULL plus a writer-pending flag. Reads observe the state the link had
at the start of the cycle; writes land for the next cycle. A write into a
FULL link stalls the writer unless the reader empties the link in the same
cycle, in which case the pending word lands at commit -- so an adjacent
producer/consumer pair sustains one word per cycle and destructive writes
and stale reads are impossible by construction.

Link semantics are identical whether or not the link crosses a tile
boundary.
"""

from .errors import BoundaryRead, BoundaryWrite
from .ops import DIRS, OPPOSITE
from .topology import r2r_neighbor


class Link:
    """One directed link: src worker --dir--> dst worker."""

    __slots__ = ("src", "dst", "direction", "full", "payload",
                 "write_attempt", "read_attempt", "transfers",
                 "stale_reads", "destructive_writes")

    def __init__(self, src, dst, direction):
        self.src = src
        self.dst = dst
        self.direction = direction
        self.full = False
        self.payload = 0
        self.write_attempt = None   # word pending this cycle, or None
        self.read_attempt = False
        self.transfers = 0
        self.stale_reads = 0        # integrity counters; must stay 0
        self.destructive_writes = 0


class R2rMesh:
    """All directed links of the chip plus per-cycle resolution."""

    def __init__(self, chip):
        self.chip = chip
        self.links = {}
        for cid in chip.workers:
            for d in DIRS:
                nb = r2r_neighbor(chip, cid, d)
                if nb is not None:
                    self.links[(cid, d)] = Link(cid, nb, d)
        self.active = set()  # links with an attempt registered this cycle

    def out_link(self, cid, direction):
        link = self.links.get((cid, direction))
        if link is None:
            raise BoundaryWrite(f"core {cid} has no {direction} neighbor")
        return link

    def in_link(self, cid, direction):
        # Reading from direction d consumes the neighbor's link pointing back.
        nb = r2r_neighbor(self.chip, cid, direction)
        if nb is None:
            raise BoundaryRead(f"core {cid} has no {direction} neighbor")
        return self.links[(nb, OPPOSITE[direction])]

    def attempt_write(self, link, word):
        if link.write_attempt is not None:
            link.destructive_writes += 1  # cannot happen: single writer
        link.write_attempt = word
        self.active.add(link)

    def attempt_read(self, link):
        link.read_attempt = True
        self.active.add(link)

    def commit(self):
        """Resolve all attempts against start-of-cycle state.

        Returns (delivered, write_done) as dicts/sets the engine uses to
        wake cores: delivered maps link -> word handed to the reader;
        write_done is the set of links whose writer completed this cycle.
        """
        delivered = {}
        write_done = set()
        for link in self.active:
            was_full = link.full
            consumed = False
            if link.read_attempt:
                if was_full:
                    delivered[link] = link.payload
                    consumed = True
                    link.transfers += 1
                else:
                    pass  # reader keeps waiting; stale reads impossible
            word = link.write_attempt
            if word is not None:
                if not was_full or consumed:
                    link.payload = word
                    link.full = True
                    write_done.add(link)
                    link.write_attempt = None
                # else: writer-pending, stays registered for next cycle
            if consumed and word is None:
                link.full = False
            link.read_attempt = False
        # Links with a still-pending write stay active; waiting readers
        # re-register their attempt each cycle.
        self.active = {l for l in self.active if l.write_attempt is not None}
        return delivered, write_done

    def stats(self):
        t = sum(l.transfers for l in self.links.values())
        return {
            "links": len(self.links),
            "transfers": t,
            "stale_reads": sum(l.stale_reads for l in self.links.values()),
            "destructive_writes": sum(l.destructive_writes for l in self.links.values()),
        }
