"""Fixed-function scratchpads and the barriers built on them.

T-SPMs (one per tile) and the G-SPM hold synchronization state with
predictable latency: one atomic port operation at a time, concurrent
requesters serialized in least-recently-granted order, each transaction
occupying the port for the scratchpad's access latency.

Barriers are sense-reversing. The centralized flavor runs one counter and
one sense word in the G-SPM. The tree flavor counts arrivals per tile in
the T-SPM, escalates one representative per tile to the G-SPM, and releases
through per-tile sense words -- serialized sections are per-tile and
per-tile-count, never the full worker count.

Scratchpad word layout (reserved low words, the rest is free for software):
  word 0: barrier arrival counter
  word 1: barrier sense
  word 2: run completion counter (G-SPM, used by manager handshakes)
  word 4+: user data (locks, flags, staging)
"""

from .errors import OutOfRange, TargetMismatch
from .rxb import LrgState

BAR_COUNT = 0
BAR_SENSE = 1
DONE_COUNTER = 2
USER_BASE = 4

DEFAULT_TSPM_LATENCY = 2
DEFAULT_GSPM_LATENCY = 5


class SpmTxn:
    """One port transaction: read, write, or fetch_add."""

    __slots__ = ("requester", "kind", "addr", "value", "on_complete", "result")

    def __init__(self, requester, kind, addr, value, on_complete):
        self.requester = requester  # cid; at most one txn in flight per core
        self.kind = kind            # 'read' | 'write' | 'amo_add'
        self.addr = addr
        self.value = value
        self.on_complete = on_complete
        self.result = None


class Scratchpad:
    """One fixed-function scratchpad with a serialized atomic port.

    A transaction granted at cycle g occupies the port for cycles
    g .. g+latency-1 and its result is visible at the end of that window;
    the next grant happens the following cycle.
    """

    __slots__ = ("level", "tile", "latency", "words", "data", "lrg",
                 "waiting", "active", "active_done_at", "ops_served")

    def __init__(self, level, tile, capacity_words, latency, requester_ids):
        self.level = level  # 'tile' | 'global'
        self.tile = tile    # tile index, or None for the global pad
        self.latency = latency
        self.words = capacity_words
        self.data = [0] * capacity_words
        self.lrg = LrgState(requester_ids)
        self.waiting = {}   # cid -> SpmTxn
        self.active = None
        self.active_done_at = -1
        self.ops_served = 0

    def submit(self, txn: SpmTxn):
        if not (0 <= txn.addr < self.words):
            raise OutOfRange(
                f"{self.level} scratchpad offset {txn.addr} >= {self.words}")
        assert txn.requester not in self.waiting
        self.waiting[txn.requester] = txn

    def busy(self):
        return self.active is not None or bool(self.waiting)

    def step(self, cycle):
        """Advance the port one cycle; returns the completed txn list."""
        done = []
        if self.active is not None:
            if cycle >= self.active_done_at:
                txn = self.active
                txn.result = self._execute(txn)
                self.active = None
                done.append(txn)
            return done  # port occupied this cycle either way
        if self.waiting:
            pick = self.lrg.pick(self.waiting)
            if pick is not None:
                txn = self.waiting.pop(pick)
                self.lrg.on_grant(pick)
                self.ops_served += 1
                if self.latency <= 1:
                    txn.result = self._execute(txn)
                    done.append(txn)
                else:
                    self.active = txn
                    self.active_done_at = cycle + self.latency - 1
        return done

    def _execute(self, txn):
        old = self.data[txn.addr]
        if txn.kind == "read":
            return old
        if txn.kind == "write":
            self.data[txn.addr] = txn.value & 0xFFFFFFFF
            return old
        if txn.kind == "amo_add":
            self.data[txn.addr] = (old + txn.value) & 0xFFFFFFFF
            return old
        raise ValueError(f"unknown scratchpad op {txn.kind!r}")


# Barrier FSM states
(_ARRIVE, _TILE_RESET, _ESCALATE, _RESET, _FLIP, _SPIN,
 _TILE_FLIP, _TILE_SPIN, _DONE) = range(9)


class BarrierFsm:
    """Per-core barrier engine driving scratchpad transactions.

    The core shows a single stalled-on-barrier wait while the FSM issues
    the arrive / escalate / flip / spin transactions cycle-accurately
    against the scratchpad ports.
    """

    __slots__ = ("cid", "tile", "scope", "system", "state", "sense", "episode")

    def __init__(self, cid, tile, system):
        self.cid = cid
        self.tile = tile
        self.system = system
        self.scope = None
        self.state = _DONE
        self.sense = 0
        self.episode = 0

    def start(self, scope):
        self.scope = scope
        self.sense ^= 1
        self.state = _ARRIVE
        self.system.note_arrival(self)
        if scope == "tree":
            self._issue(self.system.tspm[self.tile], "amo_add", BAR_COUNT, 1)
        else:
            self._issue(self.system.gspm, "amo_add", BAR_COUNT, 1)

    def _issue(self, pad, kind, addr, value=0):
        pad.submit(SpmTxn(self.cid, kind, addr, value,
                          lambda txn, pad=pad: self.advance(txn, pad)))

    def advance(self, txn, pad):
        sysm = self.system
        st = self.state
        if st == _ARRIVE:
            if self.scope == "tree":
                if txn.result == sysm.tile_target(self.tile) - 1:
                    self.state = _TILE_RESET  # last in tile: reset, escalate
                    self._issue(pad, "write", BAR_COUNT, 0)
                else:
                    self.state = _TILE_SPIN
                    self._issue(pad, "read", BAR_SENSE)
            else:
                if txn.result == sysm.global_target() - 1:
                    self.state = _RESET
                    self._issue(pad, "write", BAR_COUNT, 0)
                else:
                    self.state = _SPIN
                    self._issue(pad, "read", BAR_SENSE)
        elif st == _TILE_RESET:
            if sysm.tree_tile_count() == 1:
                self._tile_release()  # single-tile tree: no global phase
            else:
                self.state = _ESCALATE
                self._issue(sysm.gspm, "amo_add", BAR_COUNT, 1)
        elif st == _ESCALATE:
            if txn.result == sysm.tree_tile_count() - 1:
                self.state = _RESET
                self._issue(sysm.gspm, "write", BAR_COUNT, 0)
            else:
                self.state = _SPIN
                self._issue(sysm.gspm, "read", BAR_SENSE)
        elif st == _RESET:
            self.state = _FLIP
            self._issue(sysm.gspm, "write", BAR_SENSE, self.sense)
        elif st == _FLIP:
            if self.scope == "tree":
                self._tile_release()
            else:
                self._release()
        elif st == _SPIN:
            if txn.result == self.sense:
                if self.scope == "tree":
                    self._tile_release()
                else:
                    self._release()
            else:
                self._issue(pad, "read", BAR_SENSE)
        elif st == _TILE_FLIP:
            self._release()
        elif st == _TILE_SPIN:
            if txn.result == self.sense:
                self._release()
            else:
                self._issue(pad, "read", BAR_SENSE)
        else:
            raise AssertionError(f"barrier fsm advanced while {st}")

    def _tile_release(self):
        # Tile representative propagates the release into its tile.
        self.state = _TILE_FLIP
        self._issue(self.system.tspm[self.tile], "write", BAR_SENSE, self.sense)

    def _release(self):
        self.state = _DONE
        self.episode += 1
        self.system.note_release(self)


class BarrierSystem:
    """Targets, episode bookkeeping, and release callbacks for barriers."""

    def __init__(self, chip, tspm, gspm, participants, on_release):
        self.chip = chip
        self.tspm = tspm
        self.gspm = gspm
        self.on_release = on_release
        self.participants = tuple(sorted(participants))
        tiles = {}
        for cid in self.participants:
            tiles.setdefault(chip.core(cid).ident.tile, []).append(cid)
        self._tile_targets = {t: len(cids) for t, cids in tiles.items()}
        self._tree_tiles = len(tiles)
        self.fsms = {cid: BarrierFsm(cid, chip.core(cid).ident.tile, self)
                     for cid in self.participants}
        self.episodes = {}  # (scope, index) -> dict
        self.current_cycle = 0

    def enter(self, cid, scope, cycle):
        if cid not in self.fsms:
            raise TargetMismatch(
                f"core {cid} is not a configured barrier participant")
        self.current_cycle = cycle
        self.fsms[cid].start(scope)

    def tile_target(self, tile):
        return self._tile_targets[tile]

    def global_target(self):
        return len(self.participants)

    def tree_tile_count(self):
        return self._tree_tiles

    def note_arrival(self, fsm):
        key = (fsm.scope, fsm.episode)
        ep = self.episodes.setdefault(
            key, {"scope": fsm.scope, "first_arrival": self.current_cycle,
                  "arrivals": 0, "releases": {}, "last_release": None})
        ep["arrivals"] += 1

    def note_release(self, fsm):
        key = (fsm.scope, fsm.episode - 1)
        ep = self.episodes[key]
        ep["releases"][fsm.cid] = self.current_cycle
        ep["last_release"] = self.current_cycle
        self.on_release(fsm.cid)

    def episode_stats(self):
        out = []
        for (scope, idx) in sorted(self.episodes):
            ep = self.episodes[(scope, idx)]
            complete = len(ep["releases"]) == len(self.participants)
            out.append({
                "scope": scope,
                "index": idx,
                "participants": len(self.participants),
                "first_arrival": ep["first_arrival"],
                "last_release": ep["last_release"],
                "latency": (ep["last_release"] - ep["first_arrival"])
                           if complete else None,
                "complete": complete,
            })
        return out

    def pending_episode(self):
        """Incomplete episode info for timeout diagnosis, or None."""
        for key in sorted(self.episodes):
            ep = self.episodes[key]
            if len(ep["releases"]) < len(self.participants):
                missing = [c for c in self.participants
                           if c not in ep["releases"]]
                return {"scope": key[0], "index": key[1],
                        "arrivals": ep["arrivals"], "missing": missing}
        return None
