"""Dense matrix multiply C = A x B (f32).

All plans accumulate each C element in ascending-k order, so results are
bit-identical to the triple-loop reference and to each other.

Plans: shared_cache / private_cache stream A and B through the caches;
shared_spm stages both operands per tile; private_spm duplicates B per
worker; private_spm_r2r stages A rows per worker and pipelines B through
the worker chain over the register links (one worker row per worker).
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

LINE = 8  # output rows padded to cache-line multiples


def _inputs(spec):
    rng = np.random.default_rng(spec.seed)
    a = rng.standard_normal((spec.m, spec.k), dtype=np.float32)
    b = rng.standard_normal((spec.k, spec.n), dtype=np.float32)
    return a, b


def oracle(spec):
    a, b = _inputs(spec)
    m, n, k = spec.m, spec.n, spec.k
    c = np.zeros((m, n), dtype=np.float32)
    for i in range(m):
        for j in range(n):
            acc = np.float32(0.0)
            for kk in range(k):
                acc = np.float32(acc + a[i, kk] * b[kk, j])
            c[i, j] = acc
    return {"c": c, "_flops": 2 * m * n * k}


def _layout(spec):
    m, n, k = spec.m, spec.n, spec.k
    stride = -(-n // LINE) * LINE
    lay = Layout()
    lay.alloc("a", m * k)
    lay.alloc("b", k * n)
    lay.alloc("c", m * stride)
    return lay, stride


def _image(spec, lay):
    a, b = _inputs(spec)
    image = {}
    lay.place(image, "a", pack_array(a.ravel(), F32))
    lay.place(image, "b", pack_array(b.ravel(), F32))
    return image


def _extract(lay, spec, stride):
    m, n = spec.m, spec.n
    c_base = lay.arrays["c"][0]

    def extract(result):
        rows = []
        for i in range(m):
            words = result.read_global(c_base + i * stride, n)
            rows.append(unpack_array(words, F32))
        return {"c": np.vstack(rows)}

    return extract


def build(spec, plan_name, chip):
    from . import KernelBuild, check_supported
    check_supported(spec, plan_name)
    g = chip.geometry
    lay, stride = _layout(spec)
    image = _image(spec, lay)
    exp = oracle(spec)
    mode = preset(plan_name, g)
    a_base, b_base, c_base = (lay.arrays[x][0] for x in ("a", "b", "c"))
    m, n, k = spec.m, spec.n, spec.k
    cache_plan = plan_name.endswith("cache")

    if cache_plan and n % LINE:
        raise PlanUnsupported(
            f"gemm cache plans need n % {LINE} == 0 (got n={n}) so worker "
            f"output rows stay line-disjoint")

    workers = list(chip.workers)
    programs = {}

    if plan_name in ("shared_cache", "private_cache"):
        parts = partition(m, len(workers))
        for widx, cid in enumerate(workers):
            r0, r1 = parts[widx]
            if r0 == r1:
                continue
            def prog(env, r0=r0, r1=r1):
                def gen():
                    yield mode_settle()
                    for i in range(r0, r1):
                        arow = []
                        for kk in range(k):
                            arow.append(word_to_f32(
                                (yield ops.load(gaddr(a_base + i * k + kk)))))
                        for j in range(n):
                            acc = np.float32(0.0)
                            for kk in range(k):
                                bw = yield ops.load(gaddr(b_base + kk * n + j))
                                acc = np.float32(acc + arow[kk] * word_to_f32(bw))
                            yield ops.compute(k, 2 * k)
                            yield ops.store(gaddr(c_base + i * stride + j),
                                            f32_to_word(acc))
                    yield from worker_done(env)
                return gen()
            programs[cid] = prog

    elif plan_name == "shared_spm":
        # Per tile: worker local 0 stages A and B into the tile's shared
        # slice space, everyone barriers, then computes its global rows.
        if m * k + k * n > g.slices_per_tile * g.slice_words:
            raise PlanUnsupported("gemm shared_spm: operands exceed tile L1")
        a_spm, b_spm = 0, m * k
        parts = partition(m, len(workers))
        for widx, cid in enumerate(workers):
            r0, r1 = parts[widx]
            is_stager = chip.core(cid).ident.local == 0
            def prog(env, r0=r0, r1=r1, stage=is_stager):
                def gen():
                    yield mode_settle()
                    if stage:
                        yield ops.mem_copy_in(ROCM_BASE + a_spm,
                                              gaddr(a_base), m * k)
                        yield ops.mem_copy_in(ROCM_BASE + b_spm,
                                              gaddr(b_base), k * n)
                    yield ops.barrier("tree")
                    for i in range(r0, r1):
                        arow = []
                        for kk in range(k):
                            arow.append(word_to_f32(
                                (yield ops.load(ROCM_BASE + a_spm + i * k + kk))))
                        for j in range(n):
                            acc = np.float32(0.0)
                            for kk in range(k):
                                bw = yield ops.load(ROCM_BASE + b_spm + kk * n + j)
                                acc = np.float32(acc + arow[kk] * word_to_f32(bw))
                            yield ops.compute(k, 2 * k)
                            yield ops.store(gaddr(c_base + i * stride + j),
                                            f32_to_word(acc))
                    yield from worker_done(env)
                return gen()
            programs[cid] = prog

    elif plan_name == "private_spm":
        # Each worker holds a private copy of B plus its own A rows.
        parts = partition(m, len(workers))
        rows_max = max(r1 - r0 for r0, r1 in parts)
        if k * n + rows_max * k > g.slice_words:
            raise PlanUnsupported("gemm private_spm: B + A rows exceed a slice")
        for widx, cid in enumerate(workers):
            r0, r1 = parts[widx]
            if r0 == r1:
                continue
            def prog(env, r0=r0, r1=r1):
                def gen():
                    yield mode_settle()
                    b_spm, a_spm = 0, k * n
                    yield ops.mem_copy_in(ROCM_BASE + b_spm, gaddr(b_base), k * n)
                    yield ops.mem_copy_in(ROCM_BASE + a_spm,
                                          gaddr(a_base + r0 * k), (r1 - r0) * k)
                    for i in range(r0, r1):
                        arow = []
                        for kk in range(k):
                            arow.append(word_to_f32((yield ops.load(
                                ROCM_BASE + a_spm + (i - r0) * k + kk))))
                        for j in range(n):
                            acc = np.float32(0.0)
                            for kk in range(k):
                                bw = yield ops.load(ROCM_BASE + b_spm + kk * n + j)
                                acc = np.float32(acc + arow[kk] * word_to_f32(bw))
                            yield ops.compute(k, 2 * k)
                            yield ops.store(gaddr(c_base + i * stride + j),
                                            f32_to_word(acc))
                    yield from worker_done(env)
                return gen()
            programs[cid] = prog

    else:  # private_spm_r2r
        chain = snake_order(chip)
        if m > len(chain):
            raise PlanUnsupported(
                "gemm private_spm_r2r keeps one C row per worker; "
                f"m={m} exceeds {len(chain)} workers")
        if k * n + k > g.slice_words:
            raise PlanUnsupported("gemm private_spm_r2r: B exceeds head slice")
        # Chain position p owns C row p (p < m). The head stages B and
        # streams it k-major east along the snake; everyone forwards.
        for p, (cid, fwd) in enumerate(chain):
            recv = None if p == 0 else ops.OPPOSITE[chain[p - 1][1]]
            is_head = p == 0
            is_tail = fwd is None
            row = p if p < m else None
            def prog(env, row=row, recv=recv, fwd=fwd, head=is_head,
                     tail=is_tail):
                def gen():
                    yield mode_settle()
                    arow = []
                    if row is not None:
                        yield ops.mem_copy_in(ROCM_BASE, gaddr(a_base + row * k), k)
                        for kk in range(k):
                            arow.append(word_to_f32(
                                (yield ops.load(ROCM_BASE + kk))))
                    if head:
                        yield ops.mem_copy_in(ROCM_BASE + k, gaddr(b_base), k * n)
                    acc = [np.float32(0.0)] * n if row is not None else None
                    for kk in range(k):
                        for j in range(n):
                            if head:
                                bw = yield ops.load(ROCM_BASE + k + kk * n + j)
                            else:
                                bw = yield ops.r2r_read(recv)
                            if row is not None:
                                acc[j] = np.float32(
                                    acc[j] + arow[kk] * word_to_f32(bw))
                                yield ops.compute(1, 2)
                            if not tail:
                                yield ops.r2r_write(fwd, bw)
                    if row is not None:
                        for j in range(n):
                            yield ops.store(gaddr(c_base + row * stride + j),
                                            f32_to_word(acc[j]))
                    yield from worker_done(env)
                return gen()
            programs[cid] = prog

    n_workers = len(programs)
    programs.update(make_manager_factories(chip, mode, n_workers,
                                           flush=cache_plan))
    workload = Workload(
        programs=programs,
        mode=preset("shared_spm", g),  # boot mode; managers apply the plan
        participants=tuple(c for c in workers if c in programs),
        memory_image=image,
        meta={"kernel": "gemm", "plan": plan_name,
              "size": spec.size_scalar},
    )
    from . import KernelBuild
    return KernelBuild(
        workload=workload,
        expected={"c": exp["c"]},
        extract=_extract(lay, spec, stride),
        analytic_flops=exp["_flops"],
        meta={"stride": stride},
    )
