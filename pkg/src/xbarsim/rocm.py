"""Reconfigurable L1 memory slices.

Each slice is one SRAM array that operates as a direct-mapped write-back
write-allocate cache, a scratchpad, or a FIFO. The SRAM words persist across
mode changes; cache tags, FIFO registers, and the single miss-status
register are the mode-specific state.

The slice provides functional behavior and bookkeeping; the engine owns all
timing (latencies, port grants, busy windows).
"""

from dataclasses import dataclass

from .errors import DirtyDrop, ModeViolation, OutOfRange, TransitionBusy

CACHE, SPM, FIFO = "cache", "spm", "fifo"
DEFAULT_LINE_WORDS = 8


@dataclass(frozen=True)
class SliceMode:
    """Operating mode of one slice: cache(line_words), spm, or fifo(capacity)."""

    kind: str
    line_words: int = DEFAULT_LINE_WORDS   # cache mode
    capacity_words: int | None = None      # fifo mode; None = whole slice

    def validate(self, slice_words):
        if self.kind not in (CACHE, SPM, FIFO):
            raise ModeViolation(f"unknown slice mode {self.kind!r}")
        if self.kind == CACHE:
            lw = self.line_words
            if lw < 1 or lw & (lw - 1) or lw > slice_words:
                raise ModeViolation(f"line_words {lw} must be a power of two <= slice")
        if self.kind == FIFO:
            cap = self.capacity_words or slice_words
            if not (1 <= cap <= slice_words):
                raise ModeViolation(f"fifo capacity {cap} exceeds slice capacity")

    def fifo_capacity(self, slice_words):
        return self.capacity_words or slice_words


def spm_mode():
    return SliceMode(SPM)


def cache_mode(line_words=DEFAULT_LINE_WORDS):
    return SliceMode(CACHE, line_words=line_words)


def fifo_mode(capacity_words=None):
    return SliceMode(FIFO, capacity_words=capacity_words)


class Slice:
    """One L1 slice: SRAM plus mode-specific metadata and statistics."""

    __slots__ = (
        "tile", "index", "words", "data", "mode",
        "tags", "valid", "dirty", "n_lines",
        "head", "tail", "fill", "fifo_cap",
        "busy_until", "granted_at",
        "hits", "misses", "evictions", "writebacks",
        "reads", "writes", "fifo_pushes", "fifo_pops",
        "arb_conflicts", "max_fill",
    )

    def __init__(self, tile, index, slice_words, mode: SliceMode):
        self.tile = tile
        self.index = index
        self.words = slice_words
        self.data = [0] * slice_words
        self.busy_until = -1      # port blocked through this cycle (miss/flush)
        self.granted_at = -1      # last cycle a port grant was issued
        self.hits = self.misses = self.evictions = self.writebacks = 0
        self.reads = self.writes = 0
        self.fifo_pushes = self.fifo_pops = 0
        self.arb_conflicts = 0
        self.max_fill = 0
        self.mode = None
        self._apply_mode(mode)

    # Mode management -------------------------------------------------

    def _apply_mode(self, mode: SliceMode):
        mode.validate(self.words)
        self.mode = mode
        if mode.kind == CACHE:
            self.n_lines = self.words // mode.line_words
            self.tags = [0] * self.n_lines
            self.valid = bytearray(self.n_lines)
            self.dirty = bytearray(self.n_lines)
        else:
            self.n_lines = 0
            self.tags = self.valid = self.dirty = None
        if mode.kind == FIFO:
            self.fifo_cap = mode.fifo_capacity(self.words)
            self.head = self.tail = self.fill = 0
        else:
            self.fifo_cap = 0
            self.head = self.tail = self.fill = 0

    def check_transition(self, strict, cycle):
        """Raise if this slice cannot leave its current mode right now."""
        if self.busy_until >= cycle:
            raise TransitionBusy(
                f"tile {self.tile} slice {self.index} has an outstanding "
                f"miss or writeback in flight")
        if strict and self.mode.kind == CACHE and any(self.dirty):
            raise DirtyDrop(
                f"tile {self.tile} slice {self.index} holds dirty lines; "
                f"flush before reconfiguring (strict mode)")

    def transition(self, mode: SliceMode):
        """Switch modes. SRAM words persist; mode registers reset."""
        self._apply_mode(mode)

    # Scratchpad mode ---------------------------------------------------

    def _require(self, kind):
        if self.mode.kind != kind:
            raise ModeViolation(
                f"tile {self.tile} slice {self.index} is in {self.mode.kind} "
                f"mode, not {kind}")

    def spm_read(self, local_addr):
        self._require(SPM)
        if not (0 <= local_addr < self.words):
            raise OutOfRange(f"spm offset {local_addr} >= {self.words}")
        self.reads += 1
        return self.data[local_addr]

    def spm_write(self, local_addr, word):
        self._require(SPM)
        if not (0 <= local_addr < self.words):
            raise OutOfRange(f"spm offset {local_addr} >= {self.words}")
        self.writes += 1
        self.data[local_addr] = word & 0xFFFFFFFF

    # Cache mode --------------------------------------------------------

    def cache_lookup(self, view_addr):
        """(line_index, tag, word_offset, hit) for a slice-view address."""
        lw = self.mode.line_words
        line = view_addr // lw
        idx = line % self.n_lines
        tag = line // self.n_lines
        hit = bool(self.valid[idx]) and self.tags[idx] == tag
        return idx, tag, view_addr % lw, hit

    def cache_access(self, op, view_addr, line_base_of, mem):
        """Serve one cached access against next-level memory `mem`.

        `line_base_of(line_addr)` maps a slice-view line number back to the
        global word offset of its first word. Returns an info dict the
        engine uses for timing and energy: hit flag, eviction/writeback
        word counts, and the loaded word for reads.
        """
        self._require(CACHE)
        lw = self.mode.line_words
        idx, tag, off, hit = self.cache_lookup(view_addr)
        base = idx * lw
        info = {"hit": hit, "writeback_words": 0, "fill_words": 0}
        if hit:
            self.hits += 1
        else:
            self.misses += 1
            if self.valid[idx]:
                self.evictions += 1
                if self.dirty[idx]:
                    self.writebacks += 1
                    old_line = self.tags[idx] * self.n_lines + idx
                    old_base = line_base_of(old_line)
                    for i in range(lw):
                        mem[old_base + i] = self.data[base + i]
                    info["writeback_words"] = lw
            new_base = line_base_of(tag * self.n_lines + idx)
            for i in range(lw):
                self.data[base + i] = mem.get(new_base + i, 0)
            self.tags[idx] = tag
            self.valid[idx] = 1
            self.dirty[idx] = 0
            info["fill_words"] = lw
        if op == "load":
            self.reads += 1
            info["word"] = self.data[base + off]
        else:
            self.writes += 1
            self.data[base + off] = info["store_word"] = op[1] & 0xFFFFFFFF
            self.dirty[idx] = 1
        return info

    def cache_store(self, view_addr, word, line_base_of, mem):
        return self.cache_access(("store", word), view_addr, line_base_of, mem)

    def cache_load(self, view_addr, line_base_of, mem):
        return self.cache_access("load", view_addr, line_base_of, mem)

    def flush_one(self, line_idx, line_base_of, mem):
        """Write back line `line_idx` if dirty. Returns words written back."""
        self._require(CACHE)
        if not (0 <= line_idx < self.n_lines):
            raise OutOfRange(f"line {line_idx} >= {self.n_lines}")
        if not (self.valid[line_idx] and self.dirty[line_idx]):
            return 0
        lw = self.mode.line_words
        base = line_idx * lw
        gbase = line_base_of(self.tags[line_idx] * self.n_lines + line_idx)
        for i in range(lw):
            mem[gbase + i] = self.data[base + i]
        self.dirty[line_idx] = 0
        self.writebacks += 1
        return lw

    def dirty_lines(self):
        if self.mode.kind != CACHE:
            return []
        return [i for i in range(self.n_lines) if self.valid[i] and self.dirty[i]]

    # FIFO mode -----------------------------------------------------------

    def fifo_peek(self):
        self._require(FIFO)
        if self.fill == 0:
            return None
        return self.data[self.head]

    def fifo_pop_commit(self):
        self._require(FIFO)
        word = self.data[self.head]
        self.head = (self.head + 1) % self.fifo_cap
        self.fill -= 1
        self.fifo_pops += 1
        return word

    def fifo_push_commit(self, word):
        self._require(FIFO)
        self.data[self.tail] = word & 0xFFFFFFFF
        self.tail = (self.tail + 1) % self.fifo_cap
        self.fill += 1
        self.fifo_pushes += 1
        if self.fill > self.max_fill:
            self.max_fill = self.fill

    # Stats ----------------------------------------------------------------

    def stats(self):
        return {
            "mode": self.mode.kind,
            "hits": self.hits,
            "misses": self.misses,
            "evictions": self.evictions,
            "writebacks": self.writebacks,
            "reads": self.reads,
            "writes": self.writes,
            "fifo_pushes": self.fifo_pushes,
            "fifo_pops": self.fifo_pops,
            "arb_conflicts": self.arb_conflicts,
            "max_fill": self.max_fill,
        }
