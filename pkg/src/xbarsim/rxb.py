"""Per-tile reconfigurable crossbar.

One bidirectional port per worker and per slice. Three modes:

* shared  -- all-to-all, least-recently-granted arbitration per slice,
             addresses interleaved across slices.
* private -- crosspoints locked worker i <-> slice i, arbitration skipped
             (one cycle cheaper), addresses slice-local.
* queue   -- crosspoints split between configured producer/consumer pairs so
             a push and a pop share one slice port in the same cycle;
             ordinary loads/stores are illegal.

The crossbar decides routing and grants; slices execute the access.
"""

from dataclasses import dataclass

from .errors import ModeViolation, OutOfRange

SHARED, PRIVATE, QUEUE = "shared", "private", "queue"


@dataclass(frozen=True)
class QueuePair:
    """A producer/consumer channel over one slice in queue mode."""

    producer: int  # worker cid
    consumer: int  # worker cid
    slice_index: int


@dataclass(frozen=True)
class RxbMode:
    """Crossbar mode; queue mode carries its channel pairs."""

    kind: str
    pairs: tuple = ()

    def validate(self, slices_per_tile, tile_of_worker=None):
        """Structural checks; tile_of_worker maps worker cid -> tile index
        and enables the pairs-stay-within-one-tile check."""
        if self.kind not in (SHARED, PRIVATE, QUEUE):
            raise ModeViolation(f"unknown crossbar mode {self.kind!r}")
        if self.kind != QUEUE:
            if self.pairs:
                raise ModeViolation("pairs are only legal in queue mode")
            return
        seen_cores = set()
        seen_slices = set()  # (tile, slice) once tiles are known
        for p in self.pairs:
            if not (0 <= p.slice_index < slices_per_tile):
                raise ModeViolation(f"queue pair {p} names a bad slice")
            for c in (p.producer, p.consumer):
                if c in seen_cores:
                    raise ModeViolation(f"core {c} appears in two queue pairs")
                seen_cores.add(c)
            if tile_of_worker is not None:
                tp = tile_of_worker.get(p.producer)
                tc = tile_of_worker.get(p.consumer)
                if tp is None or tc is None:
                    raise ModeViolation(f"queue pair {p} names a non-worker core")
                if tp != tc:
                    raise ModeViolation(
                        f"queue pair {p} spans tiles {tp} and {tc}; the "
                        f"crossbar is per-tile")
                key = (tp, p.slice_index)
                if key in seen_slices:
                    raise ModeViolation(
                        f"slice {p.slice_index} of tile {tp} appears in two pairs")
                seen_slices.add(key)


def shared():
    return RxbMode(SHARED)


def private():
    return RxbMode(PRIVATE)


def queue(pairs):
    return RxbMode(QUEUE, tuple(pairs))


class LrgState:
    """Least-recently-granted order over a fixed requester set.

    A permutation of requester ids, least-recently-granted first; the
    granted id moves to the back. Under saturation this rotates, so every
    requester is granted within len(order) consecutive grants.
    """

    __slots__ = ("order",)

    def __init__(self, requesters):
        self.order = list(requesters)

    def pick(self, requesting):
        """First requester in LRG order that is currently requesting."""
        for rid in self.order:
            if rid in requesting:
                return rid
        return None

    def on_grant(self, rid):
        self.order.remove(rid)
        self.order.append(rid)


def access_latency(geometry, *, shared_mode, outcome, line_words=None,
                   writeback_words=0):
    """Uncontended access latency in cycles, the issue cycle included.

    Scratchpad: 3 shared (arbitrate + traverse + array), 2 private
    (arbitration skipped). Cache adds one tag cycle to the base; a miss adds
    the next-level round trip plus line-fill transfer (and writeback
    transfer when evicting dirty). Contention adds arbitration wait on top
    of these, accounted by the engine.
    """
    base = 3 if shared_mode else 2
    if outcome == "spm":
        return base
    if outcome == "cache_hit":
        return base + 1
    if outcome == "cache_miss":
        g = geometry
        fill = -(-line_words // g.next_level_width)  # ceil
        wb = -(-writeback_words // g.next_level_width) if writeback_words else 0
        return base + 1 + wb + g.next_level_latency + fill
    raise ValueError(f"unknown outcome {outcome!r}")


class TileXbar:
    """Routing and arbitration state for one tile."""

    __slots__ = ("tile", "geometry", "mode", "lrg", "pending",
                 "worker_cids", "pair_of_core")

    def __init__(self, tile, geometry, mode: RxbMode, worker_cids):
        self.tile = tile
        self.geometry = geometry
        self.worker_cids = tuple(worker_cids)  # ascending; index == local
        self.pending = [[] for _ in range(geometry.slices_per_tile)]
        self.set_mode(mode)

    def set_mode(self, mode: RxbMode):
        self.mode = mode
        n = self.geometry.slices_per_tile
        self.lrg = [LrgState(range(len(self.worker_cids))) for _ in range(n)]
        self.pair_of_core = {}
        mine = set(self.worker_cids)
        for p in mode.pairs:
            if p.producer in mine:  # pairs belonging to other tiles are ignored
                self.pair_of_core[p.producer] = ("producer", p)
                self.pair_of_core[p.consumer] = ("consumer", p)

    # Routing ---------------------------------------------------------

    def route_spm(self, rocm_offset, origin_local, address_map):
        """Slice index and slice-local offset for a scratchpad access."""
        if self.mode.kind == QUEUE:
            raise ModeViolation(
                "loads/stores to slice space are illegal in queue mode")
        if self.mode.kind == PRIVATE:
            if rocm_offset >= self.geometry.slice_words:
                raise OutOfRange(
                    f"private offset {rocm_offset} exceeds one slice "
                    f"({self.geometry.slice_words} words)")
            return origin_local, rocm_offset
        return address_map.shared_slice(rocm_offset)

    def route_cached(self, global_offset, origin_local, address_map, line_words):
        """Slice index and slice-view address for a cached global access."""
        if self.mode.kind == QUEUE:
            raise ModeViolation("cached access is illegal in queue mode")
        if self.mode.kind == PRIVATE:
            return origin_local, global_offset
        return address_map.cache_slice(global_offset, line_words)

    def pair_for(self, cid, role):
        """Queue pair for a core acting as producer/consumer of a channel."""
        if self.mode.kind != QUEUE:
            raise ModeViolation("fifo channel ops require queue mode")
        entry = self.pair_of_core.get(cid)
        if entry is None or entry[0] != role:
            raise ModeViolation(f"core {cid} is not a configured {role}")
        return entry[1]

    # Arbitration -------------------------------------------------------

    def submit(self, slice_idx, request):
        self.pending[slice_idx].append(request)

    def arbitrate_slice(self, slice_idx, accepting):
        """Resolve one slice's port for this cycle; returns the winner or None.

        The winner is removed from the pending list; losers stay queued and
        retry next cycle (counted as conflicts by the caller).
        """
        reqs = self.pending[slice_idx]
        if not reqs or not accepting:
            return None
        if self.mode.kind == PRIVATE:
            # Locked crosspoint: only the owner can be queued.
            winner = reqs.pop(0)
            return winner
        requesting = {r.origin_local: r for r in reqs}
        lrg = self.lrg[slice_idx]
        pick = lrg.pick(requesting)
        if pick is None:
            return None
        winner = requesting[pick]
        lrg.on_grant(pick)
        reqs.remove(winner)
        return winner
