"""Shared plumbing for kernel program generators.

Word packing, global-memory layout allocation, work partitioning, and the
worker/manager handshake that ends every kernel run: workers bump a
completion counter in the global scratchpad; each tile's manager waits for
it, drains its caches if the plan has any, and halts.
"""

import struct

import numpy as np

from .. import ops
from ..sync import DONE_COUNTER
from ..topology import GLOBAL_BASE, GSPM_BASE

F32 = "f32"
I32 = "i32"


def f32_to_word(x):
    return struct.unpack("<I", struct.pack("<f", np.float32(x)))[0]


def word_to_f32(w):
    return np.float32(struct.unpack("<f", struct.pack("<I", w & 0xFFFFFFFF))[0])


def i32_to_word(x):
    return int(x) & 0xFFFFFFFF


def word_to_i32(w):
    w &= 0xFFFFFFFF
    return w - (1 << 32) if w >= (1 << 31) else w


def pack_array(values, dtype):
    if dtype == F32:
        return [f32_to_word(v) for v in values]
    return [i32_to_word(v) for v in values]


def unpack_array(words, dtype):
    if dtype == F32:
        return np.array([word_to_f32(w) for w in words], dtype=np.float32)
    return np.array([word_to_i32(w) for w in words], dtype=np.int64)


class Layout:
    """Bump allocator for global-memory word offsets."""

    def __init__(self):
        self.cursor = 0
        self.arrays = {}

    def alloc(self, name, n_words):
        base = self.cursor
        self.arrays[name] = (base, n_words)
        self.cursor += n_words
        return base

    def place(self, image, name, words):
        base, n = self.arrays[name]
        assert len(words) <= n
        for i, w in enumerate(words):
            image[base + i] = w & 0xFFFFFFFF
        return base


def gaddr(offset):
    return GLOBAL_BASE + offset


def partition(n_items, n_parts):
    """Contiguous [start, end) ranges, remainder spread over the first parts."""
    q, r = divmod(n_items, n_parts)
    out = []
    start = 0
    for p in range(n_parts):
        size = q + (1 if p < r else 0)
        out.append((start, start + size))
        start += size
    return out


# Managers issue the plan's set_mode at cycle 0 and the transition applies
# two cycles later; workers sit out the window before touching memory.
MODE_SETTLE_CYCLES = 4


def mode_settle():
    return ops.compute(MODE_SETTLE_CYCLES)


def worker_done(env):
    """Final op of every worker program: bump the completion counter."""
    yield ops.amo_add(GSPM_BASE + DONE_COUNTER, 1)


def manager_program(env, target_mode, n_workers, *, flush=False,
                    slices_per_tile=0):
    """Apply the plan, wait for all workers, optionally drain caches."""
    yield ops.set_mode(target_mode)
    while (yield ops.load(GSPM_BASE + DONE_COUNTER)) < n_workers:
        pass
    if flush:
        for s in range(slices_per_tile):
            yield ops.flush_slice(s)


def make_manager_factories(chip, target_mode, n_workers, *, flush):
    g = chip.geometry
    factories = {}
    for mgr in chip.managers:
        def factory(env, _m=target_mode):
            return manager_program(env, _m, n_workers, flush=flush,
                                   slices_per_tile=g.slices_per_tile)
        factories[mgr] = factory
    return factories
