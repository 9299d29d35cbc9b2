"""Pattern search over an integer text with the classic failure-function
automaton (i32).

The text is split into per-worker windows with (pattern-1) overlap; a
worker reports matches starting inside its own chunk. Comparison counts are
charged cycle-for-cycle, and the reference replays the same windowed scan
so simulated op counts are checkable.
"""

import numpy as np

from .. import ops
from ..core import Workload
from ..modes import preset
from ..topology import ROCM_BASE
from .common import (I32, Layout, gaddr, make_manager_factories, mode_settle,
                     pack_array, partition, word_to_i32, worker_done)

LINE = 8
SPM_CHUNK = 1024  # words staged per burst in the scratchpad plan


def _inputs(spec):
    rng = np.random.default_rng(spec.seed)
    text = rng.integers(0, 3, size=spec.text_len, dtype=np.int64)
    pattern = rng.integers(0, 2, size=spec.pattern_len, dtype=np.int64)
    return text, pattern


def failure_function(pattern):
    m = len(pattern)
    fail = [0] * m
    k = 0
    for i in range(1, m):
        while k > 0 and pattern[i] != pattern[k]:
            k = fail[k - 1]
        if pattern[i] == pattern[k]:
            k += 1
        fail[i] = k
    return fail


def _scan(text, pattern, fail, start, end, report_end):
    """KMP scan of text[start:end]; returns (positions, comparisons).

    Reports matches with start position < report_end; comparisons counts
    every pattern-character test, mirroring the generated programs.
    """
    m = len(pattern)
    j = 0
    cmps = 0
    hits = []
    for i in range(start, end):
        c = text[i]
        while j > 0 and c != pattern[j]:
            cmps += 1
            j = fail[j - 1]
        cmps += 1
        if c == pattern[j]:
            j += 1
        if j == m:
            p = i - m + 1
            if p < report_end:
                hits.append(p)
            j = fail[m - 1]
    return hits, cmps


def _windows(spec, n_workers):
    parts = partition(spec.text_len, n_workers)
    m = spec.pattern_len
    wins = []
    for (s, e) in parts:
        if s == e:
            wins.append(None)
        else:
            wins.append((s, min(spec.text_len, e + m - 1), e))
    return wins


def oracle(spec, n_workers=None):
    """Match positions; with n_workers set, also the windowed comparison
    count the parallel version performs."""
    text, pattern = _inputs(spec)
    fail = failure_function(pattern)
    hits, cmps = _scan(text, pattern, fail, 0, spec.text_len, spec.text_len)
    out = {"positions": np.array(hits, dtype=np.int64), "_flops": cmps}
    if n_workers:
        total = 0
        allhits = []
        for win in _windows(spec, n_workers):
            if win is None:
                continue
            s, we, e = win
            h, c = _scan(text, pattern, fail, s, we, e)
            total += c
            allhits.extend(h)
        out["_windowed_flops"] = total
        out["_windowed_positions"] = np.array(sorted(allhits), dtype=np.int64)
    return out


def build(spec, plan_name, chip):
    from . import KernelBuild, check_supported
    check_supported(spec, plan_name)
    g = chip.geometry
    text, pattern = _inputs(spec)
    fail = failure_function(pattern)
    m = spec.pattern_len
    lay = Layout()
    lay.alloc("text", spec.text_len)
    lay.alloc("pattern", m)
    lay.alloc("fail", m)
    n_workers_all = len(chip.workers)
    cap = -(-(max(1, spec.text_len // n_workers_all) + 1) // LINE) * LINE
    lay.alloc("counts", n_workers_all * LINE)
    lay.alloc("hits", n_workers_all * cap)
    image = {}
    lay.place(image, "text", pack_array(text, I32))
    lay.place(image, "pattern", pack_array(pattern, I32))
    lay.place(image, "fail", pack_array(fail, I32))
    t_base, p_base, f_base, cnt_base, hit_base = (
        lay.arrays[k][0] for k in ("text", "pattern", "fail", "counts", "hits"))

    mode = preset(plan_name, g)
    cache_plan = plan_name.endswith("cache")
    spm_plan = plan_name == "private_spm"
    wins = _windows(spec, n_workers_all)
    exp = oracle(spec, n_workers_all)
    programs = {}

    for widx, cid in enumerate(chip.workers):
        win = wins[widx]
        if win is None:
            continue

        def prog(env, widx=widx, win=win):
            s, wend, rend = win

            pat = []

            def automaton(c, state):
                j = state
                cmps = 0
                while j > 0 and c != pat[j]:
                    cmps += 1
                    j = fail[j - 1]
                cmps += 1
                if c == pat[j]:
                    j += 1
                return j, cmps

            def gen():
                yield mode_settle()
                for t in range(m):
                    pat.append(word_to_i32((yield ops.load(gaddr(p_base + t)))))
                for t in range(m):
                    yield ops.load(gaddr(f_base + t))  # automaton table fetch
                j = 0
                hits = 0
                if spm_plan:
                    pos = s
                    while pos < wend:
                        chunk = min(SPM_CHUNK, wend - pos)
                        yield ops.mem_copy_in(ROCM_BASE, gaddr(t_base + pos), chunk)
                        for i in range(chunk):
                            c = word_to_i32((yield ops.load(ROCM_BASE + i)))
                            j, cmps = automaton(c, j)
                            yield ops.compute(cmps, cmps)
                            if j == m:
                                p = pos + i - m + 1
                                if p < rend:
                                    yield ops.store(
                                        gaddr(hit_base + widx * cap + hits), p)
                                    hits += 1
                                j = fail[m - 1]
                        pos += chunk
                else:
                    for i in range(s, wend):
                        c = word_to_i32((yield ops.load(gaddr(t_base + i))))
                        j, cmps = automaton(c, j)
                        yield ops.compute(cmps, cmps)
                        if j == m:
                            p = i - m + 1
                            if p < rend:
                                yield ops.store(
                                    gaddr(hit_base + widx * cap + hits), p)
                                hits += 1
                            j = fail[m - 1]
                yield ops.store(gaddr(cnt_base + widx * LINE), hits)
                yield from worker_done(env)
            return gen()
        programs[cid] = prog

    n_workers = len(programs)
    programs.update(make_manager_factories(chip, mode, n_workers,
                                           flush=cache_plan))

    def extract(result):
        allhits = []
        for widx in range(n_workers_all):
            if wins[widx] is None:
                continue
            cnt = result.read_global(cnt_base + widx * LINE, 1)[0]
            words = result.read_global(hit_base + widx * cap, cnt)
            allhits.extend(word_to_i32(w) for w in words)
        return {"positions": np.array(sorted(allhits), dtype=np.int64)}

    workload = Workload(
        programs=programs,
        mode=preset("shared_spm", g),
        participants=tuple(c for c in chip.workers if c in programs),
        memory_image=image,
        meta={"kernel": "kmp", "plan": plan_name, "size": spec.size_scalar},
    )
    return KernelBuild(
        workload=workload,
        expected={"positions": exp["_windowed_positions"]},
        extract=extract,
        analytic_flops=exp["_windowed_flops"],
        meta={"full_scan_positions": exp["positions"]},
    )
