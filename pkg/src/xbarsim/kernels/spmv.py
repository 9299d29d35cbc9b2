"""Sparse matrix-vector multiply y = A @ x with A in CSR form (f32).

Random sparsity pattern from the spec seed: every row holds nnz_per_row
distinct columns in ascending order, so accumulation order is fixed and
results match the reference bitwise. Row ranges are chunked to cache-line
multiples so worker-owned y segments never share a line.
"""

import numpy as np

from .. import ops
from ..core import Workload
from ..modes import preset
from .common import (F32, I32, Layout, f32_to_word, gaddr,
                     make_manager_factories, mode_settle, pack_array,
                     unpack_array, word_to_f32, word_to_i32, worker_done)

LINE = 8


def _inputs(spec):
    rng = np.random.default_rng(spec.seed)
    n = spec.n
    nnz = spec.nnz_per_row
    cols = np.empty((n, nnz), dtype=np.int64)
    for i in range(n):
        cols[i] = np.sort(rng.choice(n, size=nnz, replace=False))
    vals = rng.standard_normal((n, nnz), dtype=np.float32)
    x = rng.standard_normal(n, dtype=np.float32)
    row_ptr = np.arange(0, (n + 1) * nnz, nnz, dtype=np.int64)
    return row_ptr, cols.ravel(), vals.ravel(), x


def oracle(spec):
    row_ptr, col_idx, vals, x = _inputs(spec)
    n = spec.n
    y = np.zeros(n, dtype=np.float32)
    for i in range(n):
        acc = np.float32(0.0)
        for e in range(row_ptr[i], row_ptr[i + 1]):
            acc = np.float32(acc + vals[e] * x[col_idx[e]])
        y[i] = acc
    return {"y": y, "_flops": 2 * spec.n * spec.nnz_per_row}


def _line_parts(n_rows, n_parts):
    """Contiguous row ranges with boundaries on LINE multiples."""
    chunks = -(-n_rows // LINE)
    per = -(-chunks // n_parts)
    parts = []
    start_chunk = 0
    for _ in range(n_parts):
        end_chunk = min(start_chunk + per, chunks)
        r0 = min(start_chunk * LINE, n_rows)
        r1 = min(end_chunk * LINE, n_rows)
        parts.append((r0, r1))
        start_chunk = end_chunk
    return parts


def build(spec, plan_name, chip):
    from . import KernelBuild, check_supported
    check_supported(spec, plan_name)
    g = chip.geometry
    row_ptr, col_idx, vals, x = _inputs(spec)
    n = spec.n
    lay = Layout()
    lay.alloc("row_ptr", n + 1)
    lay.alloc("col_idx", len(col_idx))
    lay.alloc("vals", len(vals))
    lay.alloc("x", n)
    lay.alloc("y", -(-n // LINE) * LINE)
    image = {}
    lay.place(image, "row_ptr", pack_array(row_ptr, I32))
    lay.place(image, "col_idx", pack_array(col_idx, I32))
    lay.place(image, "vals", pack_array(vals, F32))
    lay.place(image, "x", pack_array(x, F32))
    exp = oracle(spec)
    mode = preset(plan_name, g)
    rp_base, ci_base, va_base, x_base, y_base = (
        lay.arrays[k][0] for k in ("row_ptr", "col_idx", "vals", "x", "y"))

    parts = _line_parts(n, len(chip.workers))
    programs = {}
    for widx, cid in enumerate(chip.workers):
        r0, r1 = parts[widx]
        if r0 == r1:
            continue
        def prog(env, r0=r0, r1=r1):
            def gen():
                yield mode_settle()
                p0 = word_to_i32((yield ops.load(gaddr(rp_base + r0))))
                for i in range(r0, r1):
                    p1 = word_to_i32((yield ops.load(gaddr(rp_base + i + 1))))
                    acc = np.float32(0.0)
                    for e in range(p0, p1):
                        c = word_to_i32((yield ops.load(gaddr(ci_base + e))))
                        v = word_to_f32((yield ops.load(gaddr(va_base + e))))
                        xv = word_to_f32((yield ops.load(gaddr(x_base + c))))
                        acc = np.float32(acc + v * xv)
                    if p1 > p0:
                        yield ops.compute(p1 - p0, 2 * (p1 - p0))
                    yield ops.store(gaddr(y_base + i), f32_to_word(acc))
                    p0 = p1
                yield from worker_done(env)
            return gen()
        programs[cid] = prog

    n_workers = len(programs)
    programs.update(make_manager_factories(chip, mode, n_workers, flush=True))

    def extract(result):
        return {"y": unpack_array(result.read_global(y_base, n), F32)}

    workload = Workload(
        programs=programs,
        mode=preset("shared_spm", g),
        participants=tuple(c for c in chip.workers if c in programs),
        memory_image=image,
        meta={"kernel": "spmv", "plan": plan_name, "size": spec.size_scalar},
    )
    return KernelBuild(
        workload=workload,
        expected={"y": exp["y"]},
        extract=extract,
        analytic_flops=exp["_flops"],
    )
