"""In-order cores and the synchronous simulation engine.

Cores execute abstract op streams written as Python generators: a program
yields op tuples and receives each op's result back at the next resume.
Every cycle the engine steps cores in ascending core id, then resolves
crossbar arbitration, then scratchpad ports, then link and FIFO commits.
The whole simulation is single-threaded and bit-deterministic for fixed
inputs.

Cycle accounting: each core is busy, stalled (with exactly one reason), or
idle in every cycle, and busy + stalled + idle == total cycles.
"""

from dataclasses import dataclass, field

from . import rocm as rocm_mod
from .energy import EnergyCoefficients, EnergyLedger
from .errors import (CycleLimitExceeded, Deadlock, IllegalOp, ModeViolation,
                     OutOfRange, TargetMismatch)
from .modes import ModeConfig
from .r2r import R2rMesh
from .rxb import QUEUE, SHARED, TileXbar, access_latency
from .sync import (DEFAULT_GSPM_LATENCY, DEFAULT_TSPM_LATENCY, BarrierSystem,
                   Scratchpad, SpmTxn)
from .topology import MANAGER, WORKER, Chip

# Core states
(READY, COMPUTE, WAIT_TIMED, WAIT_GRANT, WAIT_RECONFIG, WAIT_PAD,
 WAIT_BARRIER, WAIT_R2R_READ, WAIT_R2R_WRITE, WAIT_FIFO_PUSH,
 WAIT_FIFO_POP, HALTED) = range(12)

_STALL_REASON = {
    WAIT_GRANT: "mem",
    WAIT_PAD: "mem",
    WAIT_RECONFIG: "reconfig",
    WAIT_BARRIER: "barrier",
    WAIT_R2R_READ: "r2r_read_empty",
    WAIT_R2R_WRITE: "r2r_write_full",
    WAIT_FIFO_PUSH: "fifo",
    WAIT_FIFO_POP: "fifo",
}

STALL_REASONS = ("mem", "r2r_read_empty", "r2r_write_full", "barrier",
                 "fifo", "reconfig")

_PASSIVE_WAITS = frozenset(
    (WAIT_R2R_READ, WAIT_R2R_WRITE, WAIT_FIFO_PUSH, WAIT_FIFO_POP))


@dataclass
class Workload:
    """Everything a run needs beyond the chip itself.

    programs maps core id -> factory; a factory takes a ProgramEnv and
    returns a fresh generator. Cores without programs halt immediately.
    """

    programs: dict
    mode: ModeConfig
    participants: tuple = ()
    memory_image: dict = field(default_factory=dict)  # global offset -> word
    meta: dict = field(default_factory=dict)


class ProgramEnv:
    """Per-core view handed to program factories."""

    __slots__ = ("engine", "cid", "info", "out")

    def __init__(self, engine, cid):
        self.engine = engine
        self.cid = cid
        self.info = engine.chip.core(cid)
        self.out = engine.out

    @property
    def cycle(self):
        return self.engine.cycle

    @property
    def chip(self):
        return self.engine.chip


class _Core:
    __slots__ = ("cid", "tile", "local", "role", "gen", "halted", "state",
                 "wake_at", "result", "pending_load", "cur_op", "wait_link",
                 "wait_pair", "reason", "busy", "idle", "stalls", "flops",
                 "halted_at", "r2r_enabled")

    def __init__(self, info, gen):
        self.cid = info.cid
        self.tile = info.ident.tile
        self.local = info.ident.local
        self.role = info.ident.role
        self.gen = gen
        self.halted = gen is None
        self.state = READY if gen is not None else HALTED
        self.wake_at = 0
        self.result = None
        self.pending_load = None  # global offset resolved at wake time
        self.cur_op = None
        self.wait_link = None
        self.wait_pair = None
        self.reason = "mem"
        self.busy = 0
        self.idle = 0
        self.stalls = dict.fromkeys(STALL_REASONS, 0)
        self.flops = 0
        self.halted_at = None
        self.r2r_enabled = False


class _MemReq:
    __slots__ = ("core", "kind", "slice_idx", "view_addr", "word",
                 "origin_local", "issue_cycle")

    def __init__(self, core, kind, slice_idx, view_addr, word, issue_cycle):
        self.core = core
        self.kind = kind  # spm_load | spm_store | cache_load | cache_store
        self.slice_idx = slice_idx
        self.view_addr = view_addr
        self.word = word
        self.origin_local = core.local
        self.issue_cycle = issue_cycle


class _Tile:
    __slots__ = ("index", "xbar", "slices", "mode", "reconfig_until",
                 "apply_at", "pending_mode")

    def __init__(self, index, xbar, slices, mode):
        self.index = index
        self.xbar = xbar
        self.slices = slices
        self.mode = mode
        self.reconfig_until = -1
        self.apply_at = -1
        self.pending_mode = None


@dataclass
class RunResult:
    """Raw simulation outcome; the cli module shapes it into a StatRecord."""

    cycles: int
    cores: dict
    slices: dict
    r2r: dict
    barriers: list
    energy: dict
    flops: int
    out: dict
    memory: dict
    meta: dict

    def read_global(self, offset, n):
        mem = self.memory
        return [mem.get(offset + i, 0) for i in range(n)]


class Engine:
    """One self-contained simulation instance."""

    def __init__(self, chip: Chip, workload: Workload,
                 coefficients: EnergyCoefficients = None,
                 limit: int = 2_000_000, strict_dirty: bool = True,
                 tspm_latency: int = DEFAULT_TSPM_LATENCY,
                 gspm_latency: int = DEFAULT_GSPM_LATENCY):
        g = chip.geometry
        workload.mode.validate(g, chip)
        self.chip = chip
        self.geometry = g
        self.amap = chip.address_map
        self.limit = limit
        self.strict_dirty = strict_dirty
        self.cycle = 0
        self.out = {}
        self.mem = dict(workload.memory_image)
        self.ledger = EnergyLedger(coefficients or EnergyCoefficients(),
                                   g.n_tiles)
        self.workload = workload

        self.cores = []
        for info in chip.cores:
            factory = workload.programs.get(info.cid)
            gen = factory(ProgramEnv(self, info.cid)) if factory else None
            self.cores.append(_Core(info, gen))

        self.tiles = []
        for t in range(g.n_tiles):
            xbar = TileXbar(t, g, workload.mode.rxb, chip.tile_workers(t))
            slices = [rocm_mod.Slice(t, i, g.slice_words,
                                     workload.mode.slice_modes[i])
                      for i in range(g.slices_per_tile)]
            self.tiles.append(_Tile(t, xbar, slices, workload.mode))
        if workload.mode.r2r_enabled:
            for cid in chip.workers:
                self.cores[cid].r2r_enabled = True

        all_cids = list(range(len(chip.cores)))
        self.tspm = [Scratchpad("tile", t, g.tspm_words, tspm_latency,
                                [c for c in all_cids
                                 if chip.core(c).ident.tile == t])
                     for t in range(g.n_tiles)]
        self.gspm = Scratchpad("global", None, g.gspm_words, gspm_latency,
                               all_cids)
        self.pads = list(self.tspm) + [self.gspm]

        self.mesh = R2rMesh(chip)
        participants = tuple(workload.participants)
        self.barriers = BarrierSystem(chip, self.tspm, self.gspm,
                                      participants or chip.workers,
                                      self._on_barrier_release)
        self.fifo_regs = {}  # (tile, slice_idx) -> {"push": (core, word), "pop": core}

    # ------------------------------------------------------------------
    # Run loop

    def run(self) -> RunResult:
        cores = self.cores
        cycle = 0
        while True:
            if cycle >= self.limit:
                self._limit_exceeded(cycle)
            self.cycle = cycle
            self.barriers.current_cycle = cycle
            self._apply_transitions(cycle)
            all_halted = True
            for core in cores:
                if core.halted:
                    core.idle += 1
                    continue
                self._step_core(core, cycle)
                if not core.halted:
                    all_halted = False
            self._arbitrate(cycle)
            for pad in self.pads:
                for txn in pad.step(cycle):
                    txn.on_complete(txn)
            if self.mesh.active:
                self._commit_r2r(cycle)
            if self.fifo_regs:
                self._commit_fifos(cycle)
            if all_halted:
                return self._finish(cycle + 1)
            self._check_deadlock(cycle)
            cycle += 1

    # ------------------------------------------------------------------
    # Core stepping

    def _step_core(self, core, cycle):
        st = core.state
        if st == READY:
            self._advance_program(core, cycle)
        elif st == COMPUTE:
            if cycle >= core.wake_at:
                core.state = READY
                self._advance_program(core, cycle)
            else:
                core.busy += 1
        elif st == WAIT_TIMED:
            if cycle >= core.wake_at:
                if core.pending_load is not None:
                    core.result = self.mem.get(core.pending_load, 0)
                    core.pending_load = None
                core.state = READY
                self._advance_program(core, cycle)
            else:
                core.stalls[core.reason] += 1
        elif st == WAIT_RECONFIG:
            if cycle >= core.wake_at:
                self._dispatch(core, core.cur_op, cycle)
            else:
                core.stalls["reconfig"] += 1
        elif st == WAIT_R2R_READ:
            core.stalls["r2r_read_empty"] += 1
            self.mesh.attempt_read(core.wait_link)
        elif st == WAIT_R2R_WRITE:
            core.stalls["r2r_write_full"] += 1
            # pending write stays registered in the link
        else:
            core.stalls[_STALL_REASON[st]] += 1

    def _advance_program(self, core, cycle):
        result, core.result = core.result, None
        try:
            op = core.gen.send(result)
        except StopIteration:
            self._halt(core, cycle)
            return
        self._dispatch(core, op, cycle)

    def _halt(self, core, cycle):
        core.halted = True
        core.state = HALTED
        core.halted_at = cycle
        core.idle += 1
        core.gen = None

    # ------------------------------------------------------------------
    # Dispatch

    def _dispatch(self, core, op, cycle):
        core.cur_op = op
        kind = op[0]
        handler = _DISPATCH.get(kind)
        if handler is None:
            raise IllegalOp(f"core {core.cid}: unknown op {kind!r}")
        handler(self, core, op, cycle)

    def _op_compute(self, core, op, cycle):
        _, cycles, flops = op
        if cycles < 1:
            raise IllegalOp("compute cycles must be >= 1")
        core.busy += 1
        if flops:
            core.flops += flops
            self.ledger.charge("flop", flops, core.tile)
        core.state = COMPUTE
        core.wake_at = cycle + cycles

    def _op_halt(self, core, op, cycle):
        self._halt(core, cycle)

    def _stall_for_reconfig(self, core, tile, cycle):
        core.state = WAIT_RECONFIG
        core.wake_at = tile.apply_at

    def _op_mem(self, core, op, cycle):
        kind = op[0]
        addr = op[1]
        region, offset = self.amap.classify(addr)
        core.busy += 1
        if region in ("tspm", "gspm"):
            self._pad_op(core, region, "read" if kind == "load" else "write",
                         offset, op[2] if kind == "store" else 0, cycle)
            return
        if region == "global":
            self._global_access(core, kind, offset,
                                op[2] if kind == "store" else 0, cycle)
            return
        # rocm region: through the crossbar to an spm-mode slice
        if core.role != WORKER:
            raise IllegalOp(
                f"core {core.cid}: managers have no crossbar data port")
        tile = self.tiles[core.tile]
        if tile.reconfig_until >= cycle:
            self._stall_for_reconfig(core, tile, cycle)
            core.busy -= 1  # issue cycle counted once, below at re-dispatch
            core.stalls["reconfig"] += 1
            return
        sl, local = tile.xbar.route_spm(offset, core.local, self.amap)
        if tile.slices[sl].mode.kind != rocm_mod.SPM:
            raise ModeViolation(
                f"core {core.cid}: slice {sl} of tile {core.tile} is in "
                f"{tile.slices[sl].mode.kind} mode; slice-space access "
                f"needs spm mode")
        req = _MemReq(core, "spm_load" if kind == "load" else "spm_store",
                      sl, local, op[2] if kind == "store" else 0, cycle)
        tile.xbar.submit(sl, req)
        core.state = WAIT_GRANT
        core.reason = "mem"

    def _global_access(self, core, kind, offset, word, cycle):
        """Global-region access: cached when the tile runs cache slices,
        otherwise a direct next-level transaction."""
        tile = self.tiles[core.tile]
        if core.role == WORKER and tile.mode.all_cache:
            if tile.reconfig_until >= cycle:
                core.busy -= 1
                core.stalls["reconfig"] += 1
                self._stall_for_reconfig(core, tile, cycle)
                return
            lw = tile.mode.slice_modes[0].line_words
            sl, view = tile.xbar.route_cached(offset, core.local, self.amap, lw)
            req = _MemReq(core, "cache_load" if kind == "load" else "cache_store",
                          sl, view, word, cycle)
            tile.xbar.submit(sl, req)
            core.state = WAIT_GRANT
            core.reason = "mem"
            return
        # Direct next-level path (scratchpad/fifo plans and managers).
        self.ledger.charge("nextlevel_word", 1, core.tile)
        if kind == "load":
            core.pending_load = offset
            core.state = WAIT_TIMED
            core.reason = "mem"
            core.wake_at = cycle + 1 + self.geometry.next_level_latency
        else:
            self.mem[offset] = word & 0xFFFFFFFF
            core.state = WAIT_TIMED
            core.wake_at = cycle + 1

    def _op_amo(self, core, op, cycle):
        _, addr, delta = op
        region, offset = self.amap.classify(addr)
        if region not in ("tspm", "gspm"):
            raise IllegalOp("fetch-add is only supported on scratchpads")
        core.busy += 1
        self._pad_op(core, region, "amo_add", offset, delta, cycle)

    def _pad_op(self, core, region, kind, offset, value, cycle):
        pad = self.gspm if region == "gspm" else self.tspm[core.tile]
        self.ledger.charge("spm_atomic", 1, core.tile)

        def complete(txn, core=core):
            core.result = txn.result
            core.state = WAIT_TIMED
            core.wake_at = self.cycle + 1

        pad.submit(SpmTxn(core.cid, kind, offset, value, complete))
        core.state = WAIT_PAD
        core.reason = "mem"

    def _op_r2r_write(self, core, op, cycle):
        _, direction, word = op
        self._require_r2r(core)
        link = self.mesh.out_link(core.cid, direction)
        core.busy += 1
        core.wait_link = link
        core.state = WAIT_R2R_WRITE
        self.mesh.attempt_write(link, word & 0xFFFFFFFF)

    def _op_r2r_read(self, core, op, cycle):
        _, direction = op
        self._require_r2r(core)
        link = self.mesh.in_link(core.cid, direction)
        core.busy += 1
        core.wait_link = link
        core.state = WAIT_R2R_READ
        self.mesh.attempt_read(link)

    def _require_r2r(self, core):
        if core.role != WORKER:
            raise IllegalOp(f"core {core.cid}: managers are off the link mesh")
        if not core.r2r_enabled:
            raise IllegalOp(
                f"core {core.cid}: register links are not enabled in this mode")

    def _op_barrier(self, core, op, cycle):
        scope = op[1]
        if scope not in ("tree", "centralized"):
            raise IllegalOp(f"unknown barrier scope {scope!r}")
        if core.role != WORKER:
            raise IllegalOp("managers do not join worker barriers")
        core.busy += 1
        core.state = WAIT_BARRIER
        self.barriers.enter(core.cid, scope, cycle)

    def _on_barrier_release(self, cid):
        core = self.cores[cid]
        core.state = WAIT_TIMED
        core.reason = "barrier"
        core.wake_at = self.cycle + 1

    def _op_fifo(self, core, op, cycle):
        kind = op[0]
        chan = op[1]
        tile = self.tiles[core.tile]
        if tile.reconfig_until >= cycle:
            self._stall_for_reconfig(core, tile, cycle)
            core.stalls["reconfig"] += 1
            return
        role = "producer" if kind == "fifo_push" else "consumer"
        pair = tile.xbar.pair_for(core.cid, role)
        if pair.slice_index != chan:
            raise ModeViolation(
                f"core {core.cid}: channel {chan} does not match configured "
                f"pair slice {pair.slice_index}")
        core.busy += 1
        core.wait_pair = (core.tile, pair.slice_index)
        reg = self.fifo_regs.setdefault(core.wait_pair,
                                        {"push": None, "pop": None})
        if kind == "fifo_push":
            reg["push"] = (core, op[2] & 0xFFFFFFFF)
            core.state = WAIT_FIFO_PUSH
        else:
            reg["pop"] = core
            core.state = WAIT_FIFO_POP

    def _op_copy(self, core, op, cycle):
        kind = op[0]
        if core.role != WORKER:
            raise IllegalOp("burst copies use the worker data path")
        tile = self.tiles[core.tile]
        if tile.reconfig_until >= cycle:
            self._stall_for_reconfig(core, tile, cycle)
            core.stalls["reconfig"] += 1
            return
        if kind == "mem_copy_in":
            _, local_addr, global_addr, n = op
        else:
            _, global_addr, local_addr, n = op
        if n < 1:
            raise IllegalOp("copy length must be >= 1")
        lregion, loff = self.amap.classify(local_addr)
        gregion, goff = self.amap.classify(global_addr)
        if lregion != "rocm" or gregion != "global":
            raise IllegalOp("burst copies move words between slice space "
                            "and global memory")
        core.busy += 1
        # Functional transfer now; timing below. The copy window is modeled
        # uncontended at the slice ports.
        for i in range(n):
            sl, local = tile.xbar.route_spm(loff + i, core.local, self.amap)
            slc = tile.slices[sl]
            if kind == "mem_copy_in":
                slc.spm_write(local, self.mem.get(goff + i, 0))
            else:
                self.mem[goff + i] = slc.spm_read(local)
        g = self.geometry
        self.ledger.charge("subbank_access", n, core.tile)
        self.ledger.charge("xbar_traversal", n, core.tile)
        self.ledger.charge("nextlevel_word", n, core.tile)
        core.state = WAIT_TIMED
        core.reason = "mem"
        core.wake_at = cycle + g.next_level_latency + -(-n // g.next_level_width)

    def _op_set_mode(self, core, op, cycle):
        if core.role != MANAGER:
            raise IllegalOp(
                f"core {core.cid}: mode control is memory-mapped to the "
                f"manager core")
        cfg = op[1]
        if not isinstance(cfg, ModeConfig):
            raise IllegalOp("set_mode takes a ModeConfig")
        tile = self.tiles[core.tile]
        cfg.validate(self.geometry, self.chip)
        for slc in tile.slices:
            slc.check_transition(self.strict_dirty, cycle)
            if not self.strict_dirty and slc.mode.kind == rocm_mod.CACHE:
                for i in range(slc.n_lines):
                    slc.dirty[i] = 0  # permissive: dirtiness dropped silently
        core.busy += 1
        tile.pending_mode = cfg
        tile.reconfig_until = cycle + 1  # ports blocked cycles c and c+1
        tile.apply_at = cycle + 2
        self._rehome_pending(tile)
        core.state = WAIT_TIMED
        core.wake_at = cycle + 1

    def _rehome_pending(self, tile):
        """A transition invalidates routing; pending requests re-dispatch
        under the new mode once it applies."""
        for reqs in tile.xbar.pending:
            for req in reqs:
                c = req.core
                c.state = WAIT_RECONFIG
                c.wake_at = tile.apply_at
            reqs.clear()

    def _apply_transitions(self, cycle):
        for tile in self.tiles:
            if tile.pending_mode is not None and cycle >= tile.apply_at:
                cfg = tile.pending_mode
                tile.mode = cfg
                tile.pending_mode = None
                tile.xbar.set_mode(cfg.rxb)
                for i, slc in enumerate(tile.slices):
                    slc.transition(cfg.slice_modes[i])
                for cid in self.chip.tile_workers(tile.index):
                    self.cores[cid].r2r_enabled = cfg.r2r_enabled

    def _op_flush_line(self, core, op, cycle):
        _, slice_idx, line_idx = op
        self._flush(core, slice_idx, cycle, lines=(line_idx,))

    def _op_flush_slice(self, core, op, cycle):
        _, slice_idx = op
        self._flush(core, slice_idx, cycle, lines=None)

    def _flush(self, core, slice_idx, cycle, lines):
        if core.role != MANAGER:
            raise IllegalOp("flush is a manager supervision op")
        tile = self.tiles[core.tile]
        if tile.reconfig_until >= cycle:
            self._stall_for_reconfig(core, tile, cycle)
            core.stalls["reconfig"] += 1
            return
        slc = tile.slices[slice_idx]
        shared = tile.mode.shared
        lw = slc.mode.line_words
        base_of = lambda line: self.amap.cache_line_base(slice_idx, line, lw, shared)
        if lines is None:
            lines = slc.dirty_lines()
        wb_words = 0
        for line in lines:
            wb_words += slc.flush_one(line, base_of, self.mem)
        core.busy += 1
        if wb_words:
            g = self.geometry
            self.ledger.charge("subbank_access", wb_words, core.tile)
            self.ledger.charge("nextlevel_word", wb_words, core.tile)
            wake = cycle + 1 + -(-wb_words // g.next_level_width)
            slc.busy_until = max(slc.busy_until, wake - 1)
        else:
            wake = cycle + 1
        core.state = WAIT_TIMED
        core.reason = "mem"
        core.wake_at = wake

    # ------------------------------------------------------------------
    # Crossbar arbitration and slice access

    def _arbitrate(self, cycle):
        for tile in self.tiles:
            xbar = tile.xbar
            transitioning = tile.reconfig_until >= cycle
            for sl_idx, pending in enumerate(xbar.pending):
                if not pending:
                    continue
                slc = tile.slices[sl_idx]
                accepting = not transitioning and slc.busy_until < cycle
                winner = xbar.arbitrate_slice(sl_idx, accepting)
                if winner is not None:
                    self._serve(tile, slc, winner, cycle)
                if pending:
                    slc.arb_conflicts += len(pending)

    def _serve(self, tile, slc, req, cycle):
        core = req.core
        shared = tile.mode.shared
        g = self.geometry
        self.ledger.charge("xbar_traversal", 1, tile.index)
        if req.kind == "spm_load":
            self.ledger.charge_subbank(1, tile.index)
            core.result = slc.spm_read(req.view_addr)
            core.state = WAIT_TIMED
            core.reason = "mem"
            core.wake_at = cycle + access_latency(g, shared_mode=shared,
                                                  outcome="spm")
        elif req.kind == "spm_store":
            self.ledger.charge_subbank(1, tile.index)
            slc.spm_write(req.view_addr, req.word)
            core.state = WAIT_TIMED
            core.reason = "mem"
            core.wake_at = cycle + 1  # posted: core moves on once accepted
        else:
            lw = slc.mode.line_words
            base_of = lambda line: self.amap.cache_line_base(
                slc.index, line, lw, shared)
            self.ledger.charge("tag_check", 1, tile.index)
            self.ledger.charge_subbank(1, tile.index)
            if req.kind == "cache_load":
                info = slc.cache_load(req.view_addr, base_of, self.mem)
            else:
                info = slc.cache_store(req.view_addr, req.word, base_of, self.mem)
            outcome = "cache_hit" if info["hit"] else "cache_miss"
            lat = access_latency(g, shared_mode=shared, outcome=outcome,
                                 line_words=lw,
                                 writeback_words=info["writeback_words"])
            if info["fill_words"]:
                self.ledger.charge("subbank_access", info["fill_words"], tile.index)
                self.ledger.charge("nextlevel_word", info["fill_words"], tile.index)
            if info["writeback_words"]:
                self.ledger.charge("subbank_access", info["writeback_words"], tile.index)
                self.ledger.charge("nextlevel_word", info["writeback_words"], tile.index)
            if not info["hit"]:
                # Blocking miss: one outstanding miss per slice.
                slc.busy_until = cycle + lat - 1
            core.state = WAIT_TIMED
            core.reason = "mem"
            if req.kind == "cache_load":
                core.result = info["word"]
                core.wake_at = cycle + lat
            else:
                core.wake_at = cycle + 1  # posted store
        # grant bookkeeping
        slc.granted_at = cycle

    # ------------------------------------------------------------------
    # Link and FIFO commits

    def _commit_r2r(self, cycle):
        delivered, write_done = self.mesh.commit()
        for link, word in delivered.items():
            core = self.cores[link.dst]
            core.result = word
            core.state = WAIT_TIMED
            core.reason = "r2r_read_empty"
            core.wake_at = cycle + 1
            core.wait_link = None
            self.ledger.charge("r2r_transfer", 1, core.tile)
        for link in write_done:
            core = self.cores[link.src]
            if core.state == WAIT_R2R_WRITE and core.wait_link is link:
                core.state = WAIT_TIMED
                core.reason = "r2r_write_full"
                core.wake_at = cycle + 1
                core.wait_link = None

    def _commit_fifos(self, cycle):
        done = []
        for key in sorted(self.fifo_regs):
            reg = self.fifo_regs[key]
            tile_idx, sl_idx = key
            slc = self.tiles[tile_idx].slices[sl_idx]
            fill0 = slc.fill
            cap = slc.fifo_cap
            popped = False
            if reg["pop"] is not None and fill0 > 0:
                core = reg["pop"]
                word = slc.fifo_pop_commit()
                core.result = word
                core.state = WAIT_TIMED
                core.reason = "fifo"
                core.wake_at = cycle + 1
                reg["pop"] = None
                popped = True
                self.ledger.charge_subbank(1, tile_idx)
                self.ledger.charge("xbar_traversal", 1, tile_idx)
            if reg["push"] is not None and (fill0 < cap or popped):
                core, word = reg["push"]
                slc.fifo_push_commit(word)
                core.state = WAIT_TIMED
                core.reason = "fifo"
                core.wake_at = cycle + 1
                reg["push"] = None
                self.ledger.charge_subbank(1, tile_idx)
                self.ledger.charge("xbar_traversal", 1, tile_idx)
            if reg["push"] is None and reg["pop"] is None:
                done.append(key)
        for key in done:
            del self.fifo_regs[key]

    # ------------------------------------------------------------------
    # Termination, deadlock, stats

    def _check_deadlock(self, cycle):
        live = [c for c in self.cores if not c.halted]
        if not live:
            return
        for c in live:
            if c.state not in _PASSIVE_WAITS:
                return
        graph = self._wait_graph(live)
        cyc = self._find_cycle(graph)
        names = ", ".join(f"core {c}" for c in cyc) if cyc else "none closed"
        raise Deadlock(
            f"cycle {cycle}: all {len(live)} live cores stalled on link/fifo "
            f"waits; cyclic wait: [{names}]",
            cycle_cores=cyc, wait_graph=graph)

    def _wait_graph(self, live):
        graph = {}
        for c in live:
            if c.state == WAIT_R2R_READ:
                graph[c.cid] = [c.wait_link.src]
            elif c.state == WAIT_R2R_WRITE:
                graph[c.cid] = [c.wait_link.dst]
            elif c.state in (WAIT_FIFO_PUSH, WAIT_FIFO_POP):
                tile_idx, sl_idx = c.wait_pair
                pair = next(p for p in self.tiles[tile_idx].mode.rxb.pairs
                            if p.slice_index == sl_idx)
                graph[c.cid] = [pair.consumer if c.state == WAIT_FIFO_PUSH
                                else pair.producer]
        return graph

    @staticmethod
    def _find_cycle(graph):
        for start in sorted(graph):
            seen = []
            node = start
            while node in graph and node not in seen:
                seen.append(node)
                node = graph[node][0]
            if node in seen:
                return seen[seen.index(node):]
        return []

    def _limit_exceeded(self, cycle):
        pend = self.barriers.pending_episode()
        if pend is not None:
            halted_missing = [c for c in pend["missing"]
                              if self.cores[c].halted]
            if halted_missing:
                raise TargetMismatch(
                    f"barrier ({pend['scope']}, episode {pend['index']}): "
                    f"{pend['arrivals']} arrivals, cores {halted_missing} "
                    f"halted without arriving")
        graph = {}
        for c in self.cores:
            if c.halted:
                continue
            graph[c.cid] = {
                "state": c.state,
                "reason": _STALL_REASON.get(c.state, "none"),
                "op": c.cur_op[0] if c.cur_op else None,
            }
        raise CycleLimitExceeded(
            f"cycle limit {self.limit} reached with {len(graph)} live cores",
            stall_graph=graph)

    def _finish(self, cycles) -> RunResult:
        total_busy = sum(c.busy for c in self.cores)
        total_nonbusy = sum(c.idle + sum(c.stalls.values()) for c in self.cores)
        self.ledger.charge("core_active_cycle", total_busy)
        self.ledger.charge("idle_cycle", total_nonbusy)
        for c in self.cores:
            self.ledger.tile_counts[c.tile]["core_active_cycle"] += c.busy
            self.ledger.tile_counts[c.tile]["idle_cycle"] += (
                c.idle + sum(c.stalls.values()))
        cores = {
            c.cid: {
                "role": c.role,
                "tile": c.tile,
                "busy": c.busy,
                "stalls": dict(c.stalls),
                "idle": c.idle,
                "flops": c.flops,
                "halted_at": c.halted_at,
            }
            for c in self.cores
        }
        slices = {
            f"t{t.index}.s{i}": s.stats()
            for t in self.tiles for i, s in enumerate(t.slices)
        }
        return RunResult(
            cycles=cycles,
            cores=cores,
            slices=slices,
            r2r=self.mesh.stats(),
            barriers=self.barriers.episode_stats(),
            energy=self.ledger.snapshot(),
            flops=sum(c.flops for c in self.cores),
            out=self.out,
            memory=self.mem,
            meta=dict(self.workload.meta),
        )


_DISPATCH = {
    "compute": Engine._op_compute,
    "load": Engine._op_mem,
    "store": Engine._op_mem,
    "amo_add": Engine._op_amo,
    "r2r_write": Engine._op_r2r_write,
    "r2r_read": Engine._op_r2r_read,
    "barrier": Engine._op_barrier,
    "fifo_push": Engine._op_fifo,
    "fifo_pop": Engine._op_fifo,
    "mem_copy_in": Engine._op_copy,
    "mem_copy_out": Engine._op_copy,
    "set_mode": Engine._op_set_mode,
    "flush_line": Engine._op_flush_line,
    "flush_slice": Engine._op_flush_slice,
    "halt": Engine._op_halt,
}


def run_until_halt(chip, workload, limit=2_000_000, *, coefficients=None,
                   strict_dirty=True, tspm_latency=DEFAULT_TSPM_LATENCY,
                   gspm_latency=DEFAULT_GSPM_LATENCY) -> RunResult:
    """Simulate until every core halts; deterministic for fixed inputs."""
    return Engine(chip, workload, coefficients=coefficients, limit=limit,
                  strict_dirty=strict_dirty, tspm_latency=tspm_latency,
                  gspm_latency=gspm_latency).run()
