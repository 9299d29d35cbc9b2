"""Microbenchmark program builders.

Small synthetic workloads that probe one mechanism each: load-loop latency,
streaming-store bandwidth, queue vs ping-pong transfer, barrier episodes,
link relay chains, and reconfiguration timing. The validation suite and the
acceptance tests run these.
"""

import random

from . import ops
from .core import Workload
from .modes import preset
from .rxb import QueuePair
from .sync import USER_BASE
from .topology import GLOBAL_BASE, ROCM_BASE, TSPM_BASE


def _halt_everyone_else(chip, programs):
    return programs  # cores without programs halt at cycle 0


def load_loop(chip, mode_name, n_loads):
    """Single worker issuing back-to-back slice loads; measures cycles/access."""
    mode = preset(mode_name, chip.geometry)
    w0 = chip.workers[0]

    def prog(env):
        def gen():
            for i in range(n_loads):
                yield ops.load(ROCM_BASE + (i % 64))
        return gen()

    return Workload(programs={w0: prog}, mode=mode,
                    participants=(w0,), meta={"n_loads": n_loads})


def store_stream(chip, *, private, n_stores, all_to_one_slice=False):
    """Every worker of tile 0 streams posted stores.

    private: each worker hits its own slice. shared + all_to_one_slice:
    every address maps to slice 0 (stride = slices_per_tile), the false
    bank-contention case.
    """
    g = chip.geometry
    mode = preset("private_spm" if private else "shared_spm", g)
    tile_workers = chip.tile_workers(0)
    programs = {}
    for k, cid in enumerate(tile_workers):
        def prog(env, k=k):
            def gen():
                if private:
                    for i in range(n_stores):
                        yield ops.store(ROCM_BASE + (i % g.slice_words), i)
                elif all_to_one_slice:
                    # stride by the slice count: every address lands on slice 0
                    for i in range(n_stores):
                        off = (k * n_stores + i) % g.slice_words
                        yield ops.store(ROCM_BASE + off * g.slices_per_tile, i)
                else:
                    for i in range(n_stores):
                        yield ops.store(ROCM_BASE + (k * n_stores + i) % 4096, i)
            return gen()
        programs[cid] = prog
    return Workload(programs=programs, mode=mode,
                    participants=tuple(tile_workers),
                    meta={"n_stores": n_stores, "workers": len(tile_workers)})


def queue_stream(chip, n_words, fifo_capacity=64):
    """Producer/consumer pair streaming through a split-crosspoint FIFO."""
    w0, w1 = chip.tile_workers(0)[0], chip.tile_workers(0)[1]
    pair = QueuePair(producer=w0, consumer=w1, slice_index=0)
    mode = preset("queue_fifo", chip.geometry, queue_pairs=(pair,),
                  fifo_capacity=fifo_capacity)

    def producer(env):
        def gen():
            for i in range(n_words):
                yield ops.fifo_push(0, i & 0xFFFFFFFF)
        return gen()

    def consumer(env):
        def gen():
            got = []
            for _ in range(n_words):
                got.append((yield ops.fifo_pop(0)))
            env.out["queue_received"] = got
        return gen()

    return Workload(programs={w0: producer, w1: consumer}, mode=mode,
                    participants=(w0, w1), meta={"n_words": n_words})


def pingpong_stream(chip, n_words, block=64):
    """The same transfer through shared slice space with flag handshakes.

    Double-buffered: the producer fills one buffer while the consumer drains
    the other; full/empty flags live in the tile scratchpad.
    """
    assert n_words % block == 0
    g = chip.geometry
    mode = preset("shared_spm", g)
    w0, w1 = chip.tile_workers(0)[0], chip.tile_workers(0)[1]
    bufs = (ROCM_BASE, ROCM_BASE + block)
    flags = (TSPM_BASE + USER_BASE, TSPM_BASE + USER_BASE + 1)
    n_blocks = n_words // block

    def producer(env):
        def gen():
            seq = 0
            for b in range(n_blocks):
                side = b % 2
                while (yield ops.load(flags[side])):
                    pass  # wait for the consumer to drain this buffer
                for i in range(block):
                    yield ops.store(bufs[side] + i, seq & 0xFFFFFFFF)
                    seq += 1
                yield ops.store(flags[side], 1)
        return gen()

    def consumer(env):
        def gen():
            got = []
            for b in range(n_blocks):
                side = b % 2
                while not (yield ops.load(flags[side])):
                    pass  # wait for the producer to fill this buffer
                for i in range(block):
                    got.append((yield ops.load(bufs[side] + i)))
                yield ops.store(flags[side], 0)
            env.out["pingpong_received"] = got
        return gen()

    return Workload(programs={w0: producer, w1: consumer}, mode=mode,
                    participants=(w0, w1), meta={"n_words": n_words})


def barrier_episodes(chip, scope, n_workers, episodes=3, spacing=0):
    """n_workers join `episodes` consecutive barriers; returns episode stats."""
    mode = preset("shared_spm", chip.geometry)
    cids = list(chip.workers[:n_workers])
    programs = {}
    for cid in cids:
        def prog(env):
            def gen():
                for _ in range(episodes):
                    if spacing:
                        yield ops.compute(spacing)
                    yield ops.barrier(scope)
            return gen()
        programs[cid] = prog
    return Workload(programs=programs, mode=mode, participants=tuple(cids),
                    meta={"scope": scope, "n": n_workers})


def r2r_pair(chip, n_words, *, cross_tile=False, writer_gaps=None,
             reader_gaps=None, seed=None):
    """Adjacent writer/reader pair, optionally across a tile boundary.

    Gap sequences insert compute cycles between ops to randomize schedules;
    with seed set, gaps are drawn uniformly from 0..3.
    """
    g = chip.geometry
    mode = preset("private_spm_r2r", g)
    cols = g.mesh_shape[1]
    if cross_tile:
        wc = g.worker_grid_per_tile[1]
        if cols <= wc:
            raise ValueError("geometry has no cross-tile east link")
        col = wc - 1  # last column of tile (0,0); east neighbor is tile (0,1)
    else:
        col = 0
    src = chip.mesh_to_cid[(0, col)]
    dst = chip.mesh_to_cid[(0, col + 1)]
    if seed is not None:
        rng = random.Random(seed)
        writer_gaps = [rng.randrange(4) for _ in range(n_words)]
        rng2 = random.Random(seed + 1)
        reader_gaps = [rng2.randrange(4) for _ in range(n_words)]

    def writer(env):
        def gen():
            for i in range(n_words):
                if writer_gaps and writer_gaps[i]:
                    yield ops.compute(writer_gaps[i])
                yield ops.r2r_write(ops.E, i & 0xFFFFFFFF)
        return gen()

    def reader(env):
        def gen():
            got = []
            for i in range(n_words):
                if reader_gaps and reader_gaps[i]:
                    yield ops.compute(reader_gaps[i])
                got.append((yield ops.r2r_read(ops.W)))
            env.out["r2r_received"] = got
        return gen()

    return Workload(programs={src: writer, dst: reader}, mode=mode,
                    participants=(src, dst),
                    meta={"src": src, "dst": dst, "cross_tile": cross_tile})


def r2r_relay(chip, n_words, chain_len):
    """Chain of workers forwarding a stream west-to-east along mesh row 0."""
    g = chip.geometry
    if chain_len > g.mesh_shape[1]:
        raise ValueError("chain longer than a mesh row")
    mode = preset("private_spm_r2r", g)
    cids = [chip.mesh_to_cid[(0, c)] for c in range(chain_len)]
    programs = {}

    def head(env):
        def gen():
            for i in range(n_words):
                yield ops.r2r_write(ops.E, i & 0xFFFFFFFF)
        return gen()

    def middle(env):
        def gen():
            for _ in range(n_words):
                w = yield ops.r2r_read(ops.W)
                yield ops.r2r_write(ops.E, w)
        return gen()

    def tail(env):
        def gen():
            got = []
            for _ in range(n_words):
                got.append((yield ops.r2r_read(ops.W)))
            env.out["relay_received"] = got
        return gen()

    programs[cids[0]] = head
    for cid in cids[1:-1]:
        programs[cid] = middle
    programs[cids[-1]] = tail
    return Workload(programs=programs, mode=mode, participants=tuple(cids),
                    meta={"chain": cids})


def r2r_deadlock_pair(chip):
    """Two adjacent workers that read from each other before writing."""
    mode = preset("private_spm_r2r", chip.geometry)
    a = chip.mesh_to_cid[(0, 0)]
    b = chip.mesh_to_cid[(0, 1)]

    def prog_a(env):
        def gen():
            yield ops.r2r_read(ops.E)
            yield ops.r2r_write(ops.E, 1)
        return gen()

    def prog_b(env):
        def gen():
            yield ops.r2r_read(ops.W)
            yield ops.r2r_write(ops.W, 2)
        return gen()

    return Workload(programs={a: prog_a, b: prog_b}, mode=mode,
                    participants=(a, b), meta={"pair": (a, b)})


def reconfig_probe(chip, target_preset, set_at_cycle, probe_stride=1):
    """Manager reconfigures mid-run while a worker hammers its slice.

    The worker records the completion cycle of every load in env.out so
    tests can pin the exact blocked window. Boots in private_spm.
    """
    g = chip.geometry
    boot = preset("private_spm", g)
    target = preset(target_preset, g)
    w0 = chip.tile_workers(0)[0]
    mgr = chip.managers[0]

    def worker(env):
        def gen():
            done = []
            for i in range(set_at_cycle + 16):
                yield ops.load(ROCM_BASE + (i % 8) * probe_stride)
                done.append(env.cycle)
            env.out["load_done_cycles"] = done
        return gen()

    def manager(env):
        def gen():
            yield ops.compute(set_at_cycle)
            yield ops.set_mode(target)
            env.out["set_mode_issued_at"] = env.cycle
        return gen()

    return Workload(programs={w0: worker, mgr: manager}, mode=boot,
                    participants=(w0,), meta={"set_at": set_at_cycle})


def spm_roundtrip(chip, pattern_seed=7):
    """Write a pattern to slice space, reconfigure spm->cache->spm, read back.

    Exercises SRAM persistence across transitions; results in env.out.
    """
    g = chip.geometry
    boot = preset("private_spm", g)
    to_cache = preset("private_cache", g)
    back = preset("private_spm", g)
    w0 = chip.tile_workers(0)[0]
    mgr = chip.managers[0]
    rng = random.Random(pattern_seed)
    pattern = [rng.randrange(1 << 32) for _ in range(32)]
    flag = TSPM_BASE + USER_BASE

    def worker(env):
        def gen():
            for i, w in enumerate(pattern):
                yield ops.store(ROCM_BASE + i, w)
            yield ops.store(flag, 1)
            while (yield ops.load(flag)) != 2:
                pass
            got = []
            for i in range(len(pattern)):
                got.append((yield ops.load(ROCM_BASE + i)))
            env.out["readback"] = got
            env.out["pattern"] = pattern
        return gen()

    def manager(env):
        def gen():
            while (yield ops.load(flag)) != 1:
                pass
            yield ops.set_mode(to_cache)
            yield ops.compute(4)
            yield ops.set_mode(back)
            yield ops.compute(4)
            yield ops.store(flag, 2)
        return gen()

    return Workload(programs={w0: worker, mgr: manager}, mode=boot,
                    participants=(w0,), meta={"pattern_len": len(pattern)})


def global_touch(chip, n_words):
    """One worker reads n words of global memory directly (no caches)."""
    mode = preset("shared_spm", chip.geometry)
    w0 = chip.workers[0]
    image = {i: (i * 2654435761) & 0xFFFFFFFF for i in range(n_words)}

    def prog(env):
        def gen():
            acc = 0
            for i in range(n_words):
                acc ^= yield ops.load(GLOBAL_BASE + i)
            env.out["xor"] = acc
        return gen()

    return Workload(programs={w0: prog}, mode=mode, participants=(w0,),
                    memory_image=image, meta={"n": n_words})
