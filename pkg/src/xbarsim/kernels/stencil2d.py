"""3x3 weighted-window stencil over a 2D grid (f32).

out[r][c] = sum over (dr, dc) in 3x3 of w[dr][dc] * grid[r+dr][c+dc],
producing an (R-2) x (C-2) output. Tap order is fixed (dr-major), so all
plans match the direct reference bitwise.

The register-link plan partitions output rows across the worker chain;
each worker stages only its own center rows and receives the two overlap
rows from its chain neighbors instead of re-reading them from memory.
"""

import numpy as np

from .. import ops
from ..core import Workload
from ..errors import PlanUnsupported
from ..modes import preset
from ..topology import ROCM_BASE, snake_order
from .common import (F32, Layout, f32_to_word, gaddr, make_manager_factories,
                     mode_settle, pack_array, partition, unpack_array,
                     word_to_f32, worker_done)

LINE = 8


def _inputs(spec):
    rng = np.random.default_rng(spec.seed)
    grid = rng.standard_normal((spec.rows, spec.cols), dtype=np.float32)
    weights = rng.standard_normal((3, 3), dtype=np.float32)
    return grid, weights


def oracle(spec):
    grid, w = _inputs(spec)
    orows, ocols = spec.rows - 2, spec.cols - 2
    out = np.zeros((orows, ocols), dtype=np.float32)
    for r in range(orows):
        for c in range(ocols):
            acc = np.float32(0.0)
            for dr in range(3):
                for dc in range(3):
                    acc = np.float32(acc + w[dr, dc] * grid[r + dr, c + dc])
            out[r, c] = acc
    return {"out": out, "_flops": 18 * orows * ocols}


def _layout(spec):
    orows, ocols = spec.rows - 2, spec.cols - 2
    stride = -(-ocols // LINE) * LINE
    lay = Layout()
    lay.alloc("grid", spec.rows * spec.cols)
    lay.alloc("w", 9)
    lay.alloc("out", orows * stride)
    return lay, stride


def build(spec, plan_name, chip):
    from . import KernelBuild, check_supported
    check_supported(spec, plan_name)
    g = chip.geometry
    grid, w = _inputs(spec)
    lay, stride = _layout(spec)
    image = {}
    lay.place(image, "grid", pack_array(grid.ravel(), F32))
    lay.place(image, "w", pack_array(w.ravel(), F32))
    exp = oracle(spec)
    mode = preset(plan_name, g)
    grid_base, w_base, out_base = (lay.arrays[x][0]
                                   for x in ("grid", "w", "out"))
    R, C = spec.rows, spec.cols
    orows = R - 2
    ocols = C - 2
    cache_plan = plan_name.endswith("cache")
    programs = {}

    def load_weights():
        ww = []
        for t in range(9):
            ww.append(word_to_f32((yield ops.load(gaddr(w_base + t)))))
        return ww

    def point_math(ww, window):
        acc = np.float32(0.0)
        for t in range(9):
            acc = np.float32(acc + ww[t] * window[t])
        return acc

    if cache_plan:
        parts = partition(orows, len(chip.workers))
        for widx, cid in enumerate(chip.workers):
            o0, o1 = parts[widx]
            if o0 == o1:
                continue
            def prog(env, o0=o0, o1=o1):
                def gen():
                    yield mode_settle()
                    ww = yield from load_weights()
                    for r in range(o0, o1):
                        for c in range(ocols):
                            window = []
                            for dr in range(3):
                                for dc in range(3):
                                    word = yield ops.load(gaddr(
                                        grid_base + (r + dr) * C + (c + dc)))
                                    window.append(word_to_f32(word))
                            acc = point_math(ww, window)
                            yield ops.compute(9, 18)
                            yield ops.store(gaddr(out_base + r * stride + c),
                                            f32_to_word(acc))
                    yield from worker_done(env)
                return gen()
            programs[cid] = prog

    else:  # private_spm_r2r
        chain = snake_order(chip)
        active = min(orows, len(chain))
        parts = partition(orows, active)
        band_rows_max = max(r1 - r0 for r0, r1 in parts) + 2
        if band_rows_max * C > g.slice_words:
            raise PlanUnsupported(
                f"stencil2d private_spm_r2r: band of {band_rows_max} rows x "
                f"{C} cols exceeds a {g.slice_words}-word slice")
        for p in range(active):
            cid, fwd = chain[p]
            recv = None if p == 0 else ops.OPPOSITE[chain[p - 1][1]]
            o0, o1 = parts[p]
            has_prev = p > 0
            has_next = p + 1 < active
            def prog(env, o0=o0, o1=o1, recv=recv, fwd=fwd,
                     has_prev=has_prev, has_next=has_next):
                def gen():
                    yield mode_settle()
                    ww = yield from load_weights()
                    # Band in slice space: input rows [o0, o1+2), local row
                    # index = input_row - o0.
                    centers = (o0 + 1, o1 + 1)  # input rows staged locally
                    yield ops.mem_copy_in(ROCM_BASE + C,
                                          gaddr(grid_base + centers[0] * C),
                                          (centers[1] - centers[0]) * C)
                    if not has_prev:  # top edge row comes straight from memory
                        yield ops.mem_copy_in(ROCM_BASE, gaddr(grid_base + o0 * C), C)
                    if not has_next:  # bottom edge row likewise
                        yield ops.mem_copy_in(
                            ROCM_BASE + (o1 + 1 - o0) * C,
                            gaddr(grid_base + (o1 + 1) * C), C)
                    # Overlap exchange, forward then backward along the chain.
                    last_center_local = (o1 - o0) * C
                    for j in range(C):
                        if has_next:
                            word = yield ops.load(ROCM_BASE + last_center_local + j)
                            yield ops.r2r_write(fwd, word)
                        if has_prev:
                            word = yield ops.r2r_read(recv)
                            yield ops.store(ROCM_BASE + j, word)
                    first_center_local = C
                    bottom_local = (o1 + 1 - o0) * C
                    for j in range(C):
                        if has_prev:
                            word = yield ops.load(ROCM_BASE + first_center_local + j)
                            yield ops.r2r_write(recv, word)
                        if has_next:
                            word = yield ops.r2r_read(fwd)
                            yield ops.store(ROCM_BASE + bottom_local + j, word)
                    for r in range(o0, o1):
                        for c in range(ocols):
                            window = []
                            for dr in range(3):
                                base = (r + dr - o0) * C + c
                                for dc in range(3):
                                    word = yield ops.load(ROCM_BASE + base + dc)
                                    window.append(word_to_f32(word))
                            acc = point_math(ww, window)
                            yield ops.compute(9, 18)
                            yield ops.store(gaddr(out_base + r * stride + c),
                                            f32_to_word(acc))
                    yield from worker_done(env)
                return gen()
            programs[cid] = prog

    n_workers = len(programs)
    programs.update(make_manager_factories(chip, mode, n_workers,
                                           flush=cache_plan))

    def extract(result):
        rows = []
        for r in range(orows):
            words = result.read_global(out_base + r * stride, ocols)
            rows.append(unpack_array(words, F32))
        return {"out": np.vstack(rows)}

    workload = Workload(
        programs=programs,
        mode=preset("shared_spm", g),
        participants=tuple(c for c in chip.workers if c in programs),
        memory_image=image,
        meta={"kernel": "stencil2d", "plan": plan_name,
              "size": spec.size_scalar},
    )
    return KernelBuild(
        workload=workload,
        expected={"out": exp["out"]},
        extract=extract,
        analytic_flops=exp["_flops"],
        meta={"stride": stride},
    )
