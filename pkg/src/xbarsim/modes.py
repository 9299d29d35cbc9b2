"""Complete reconfiguration states: crossbar mode x slice modes x link enable.

A ModeConfig describes one tile's configuration; runs usually apply the
same config to every tile. Named presets cover the composite modes the
kernels use.
"""

from dataclasses import dataclass

from . import rocm, rxb
from .errors import ModeViolation


@dataclass(frozen=True)
class ModeConfig:
    """One tile's reconfigurable state."""

    rxb: rxb.RxbMode
    slice_modes: tuple  # SliceMode per slice
    r2r_enabled: bool = False

    def validate(self, geometry, chip=None):
        if len(self.slice_modes) != geometry.slices_per_tile:
            raise ModeViolation(
                f"expected {geometry.slices_per_tile} slice modes, "
                f"got {len(self.slice_modes)}")
        for m in self.slice_modes:
            m.validate(geometry.slice_words)
        tile_of_worker = None
        if chip is not None:
            tile_of_worker = {cid: chip.core(cid).ident.tile
                              for cid in chip.workers}
        self.rxb.validate(geometry.slices_per_tile, tile_of_worker)
        if self.rxb.kind == rxb.QUEUE:
            for p in self.rxb.pairs:
                if self.slice_modes[p.slice_index].kind != rocm.FIFO:
                    raise ModeViolation(
                        f"queue pair over slice {p.slice_index} requires "
                        f"that slice in fifo mode")

    @property
    def all_cache(self):
        return all(m.kind == rocm.CACHE for m in self.slice_modes)

    @property
    def shared(self):
        return self.rxb.kind == rxb.SHARED


def uniform(rxb_mode, slice_mode, n_slices, r2r_enabled=False):
    return ModeConfig(rxb_mode, tuple(slice_mode for _ in range(n_slices)),
                      r2r_enabled)


PRESET_NAMES = ("shared_cache", "shared_spm", "private_cache",
                "private_spm", "private_spm_r2r", "queue_fifo")


def preset(name, geometry, *, line_words=rocm.DEFAULT_LINE_WORDS,
           queue_pairs=(), fifo_capacity=None):
    """Build a named composite configuration for the given geometry."""
    ns = geometry.slices_per_tile
    if name == "shared_cache":
        return uniform(rxb.shared(), rocm.cache_mode(line_words), ns)
    if name == "shared_spm":
        return uniform(rxb.shared(), rocm.spm_mode(), ns)
    if name == "private_cache":
        return uniform(rxb.private(), rocm.cache_mode(line_words), ns)
    if name == "private_spm":
        return uniform(rxb.private(), rocm.spm_mode(), ns)
    if name == "private_spm_r2r":
        return uniform(rxb.private(), rocm.spm_mode(), ns, r2r_enabled=True)
    if name == "queue_fifo":
        if not queue_pairs:
            raise ModeViolation("queue_fifo preset needs queue_pairs")
        slice_modes = [rocm.spm_mode()] * ns
        for p in queue_pairs:
            slice_modes[p.slice_index] = rocm.fifo_mode(fifo_capacity)
        return ModeConfig(rxb.queue(queue_pairs), tuple(slice_modes))
    raise ModeViolation(f"unknown mode preset {name!r}")
