"""Chip geometry, core identifiers, the address map, and the worker mesh.

Everything here is immutable once built: the engine shares one Chip object
read-only across a run, and identical configs produce identical chips.
"""

from dataclasses import dataclass, field

from .errors import IllegalOp, InvalidGeometry, OutOfRange
from .ops import E, N, OPPOSITE, S, W

WORD_SIZE = 4  # bytes per word; fixed

# Word-address region bases. Regions are disjoint by construction and every
# legal address maps to exactly one of them.
ROCM_BASE = 0x0000_0000
TSPM_BASE = 0x0800_0000
GSPM_BASE = 0x0900_0000
GLOBAL_BASE = 0x1000_0000

WORKER = "worker"
MANAGER = "manager"


@dataclass(frozen=True)
class ChipGeometry:
    """Structural parameters of the chip.

    Defaults give 4 tiles x (8 workers + 1 manager) = 36 cores, 8 slices of
    16 KB per tile (512 KB of L1 total), and a flat next-level memory 20
    cycles away at 4 words/cycle.
    """

    n_tiles: int = 4
    workers_per_tile: int = 8
    tile_grid: tuple = (2, 2)            # (rows, cols) of tiles
    worker_grid_per_tile: tuple = (4, 2)  # (rows, cols) of workers in a tile
    slices_per_tile: int = 8
    slice_capacity: int = 16384          # bytes
    word_size: int = WORD_SIZE
    tspm_capacity: int = 4096            # bytes
    gspm_capacity: int = 4096            # bytes
    next_level_latency: int = 20         # cycles
    next_level_width: int = 4            # words per cycle
    global_capacity_words: int = 1 << 22
    interleave_granularity: int = 1      # words, shared-mode SPM interleave

    def validate(self):
        g = self
        if g.n_tiles < 1:
            raise InvalidGeometry("n_tiles must be >= 1")
        if g.tile_grid[0] * g.tile_grid[1] != g.n_tiles:
            raise InvalidGeometry(
                f"tile_grid {g.tile_grid} does not cover n_tiles={g.n_tiles}")
        if g.workers_per_tile != g.slices_per_tile:
            raise InvalidGeometry(
                f"workers_per_tile ({g.workers_per_tile}) != slices_per_tile "
                f"({g.slices_per_tile}): one crossbar port per worker and per slice")
        wr, wc = g.worker_grid_per_tile
        if wr * wc != g.workers_per_tile:
            raise InvalidGeometry(
                f"worker_grid_per_tile {g.worker_grid_per_tile} does not cover "
                f"workers_per_tile={g.workers_per_tile}")
        if g.word_size != WORD_SIZE:
            raise InvalidGeometry("word_size is fixed at 4 bytes")
        words = g.slice_capacity // g.word_size
        if g.slice_capacity % g.word_size or words & (words - 1):
            raise InvalidGeometry(
                f"slice_capacity ({g.slice_capacity}) must be a power-of-two "
                f"multiple of word_size")
        if g.tspm_capacity % g.word_size or g.gspm_capacity % g.word_size:
            raise InvalidGeometry("scratchpad capacities must be word multiples")
        if g.interleave_granularity < 1:
            raise InvalidGeometry("interleave_granularity must be >= 1")
        if g.next_level_latency < 1 or g.next_level_width < 1:
            raise InvalidGeometry("next-level latency/width must be >= 1")

    # Derived counts -------------------------------------------------

    @property
    def cores_per_tile(self):
        return self.workers_per_tile + 1  # workers + manager

    @property
    def total_cores(self):
        return self.n_tiles * self.cores_per_tile

    @property
    def n_workers(self):
        return self.n_tiles * self.workers_per_tile

    @property
    def slice_words(self):
        return self.slice_capacity // self.word_size

    @property
    def tspm_words(self):
        return self.tspm_capacity // self.word_size

    @property
    def gspm_words(self):
        return self.gspm_capacity // self.word_size

    @property
    def mesh_shape(self):
        """(rows, cols) of the chip-wide worker mesh."""
        return (self.tile_grid[0] * self.worker_grid_per_tile[0],
                self.tile_grid[1] * self.worker_grid_per_tile[1])


@dataclass(frozen=True)
class CoreId:
    """Logical identity of a core: tile index, role, local index."""

    tile: int
    role: str  # WORKER or MANAGER
    local: int


@dataclass(frozen=True)
class CoreInfo:
    """A placed core: CoreId plus flat id and mesh coordinates (workers)."""

    cid: int
    ident: CoreId
    mesh: tuple | None  # (row, col) in the chip-wide worker mesh, or None


class AddressMap:
    """Bijection between word addresses and (region, location) pairs.

    Regions: 'rocm' (L1 slice space, tile-local alias), 'tspm' (tile
    scratchpad, tile-local alias), 'gspm' (global scratchpad), 'global'
    (next-level memory). Shared-mode slice index for an rocm offset is
    (offset // interleave_granularity) mod slices_per_tile.
    """

    def __init__(self, geometry: ChipGeometry):
        self.geometry = geometry
        self.rocm_words = geometry.slices_per_tile * geometry.slice_words
        self.regions = {
            "rocm": (ROCM_BASE, self.rocm_words),
            "tspm": (TSPM_BASE, geometry.tspm_words),
            "gspm": (GSPM_BASE, geometry.gspm_words),
            "global": (GLOBAL_BASE, geometry.global_capacity_words),
        }

    def classify(self, addr):
        """Return (region, offset) for a word address; IllegalOp if unmapped."""
        for region, (base, size) in self.regions.items():
            if base <= addr < base + size:
                return region, addr - base
        raise IllegalOp(f"address {addr:#x} maps to no region")

    def shared_slice(self, rocm_offset):
        """(slice index, slice-local word offset) under shared interleave."""
        g = self.geometry
        gran = g.interleave_granularity
        ns = g.slices_per_tile
        blk = rocm_offset // gran
        sl = blk % ns
        local = (blk // ns) * gran + rocm_offset % gran
        if local >= g.slice_words:
            raise OutOfRange(f"rocm offset {rocm_offset} beyond shared extent")
        return sl, local

    def cache_slice(self, global_offset, line_words):
        """(slice index, slice-view address) for a shared-mode cached access.

        Interleaves the global space across slices at line granularity so a
        whole line lives in one slice.
        """
        ns = self.geometry.slices_per_tile
        line = global_offset // line_words
        sl = line % ns
        local = (line // ns) * line_words + global_offset % line_words
        return sl, local

    def cache_line_base(self, slice_idx, line_addr, line_words, shared):
        """Invert cache mapping: global word offset of a line's first word."""
        ns = self.geometry.slices_per_tile
        if shared:
            return (line_addr * ns + slice_idx) * line_words
        return line_addr * line_words

    # Convenience constructors for program generators ----------------

    @staticmethod
    def rocm_addr(offset):
        return ROCM_BASE + offset

    @staticmethod
    def tspm_addr(offset):
        return TSPM_BASE + offset

    @staticmethod
    def gspm_addr(offset):
        return GSPM_BASE + offset

    @staticmethod
    def global_addr(offset):
        return GLOBAL_BASE + offset


@dataclass(frozen=True)
class Chip:
    """Fully wired immutable geometry: cores, mesh, address map."""

    geometry: ChipGeometry
    address_map: AddressMap = field(compare=False)
    cores: tuple        # CoreInfo, indexed by cid
    workers: tuple      # cids of workers, ascending
    managers: tuple     # cids of managers, ascending
    mesh_to_cid: dict = field(compare=False)

    def core(self, cid) -> CoreInfo:
        return self.cores[cid]

    def worker_cid(self, tile, local):
        g = self.geometry
        if not (0 <= local < g.workers_per_tile):
            raise IllegalOp(f"worker local index {local} out of range")
        return tile * g.cores_per_tile + local

    def manager_cid(self, tile):
        g = self.geometry
        return tile * g.cores_per_tile + g.workers_per_tile

    def tile_workers(self, tile):
        g = self.geometry
        base = tile * g.cores_per_tile
        return tuple(range(base, base + g.workers_per_tile))


def _mesh_position(geometry, tile, local):
    tr, tc = divmod(tile, geometry.tile_grid[1])
    wr, wc = geometry.worker_grid_per_tile
    lr, lc = divmod(local, wc)
    return (tr * wr + lr, tc * wc + lc)


def build_geometry(geometry: ChipGeometry) -> Chip:
    """Wire up the chip. Pure: the same geometry yields an identical chip."""
    geometry.validate()
    cores = []
    workers = []
    managers = []
    mesh_to_cid = {}
    for tile in range(geometry.n_tiles):
        for local in range(geometry.workers_per_tile):
            cid = len(cores)
            mesh = _mesh_position(geometry, tile, local)
            cores.append(CoreInfo(cid, CoreId(tile, WORKER, local), mesh))
            workers.append(cid)
            mesh_to_cid[mesh] = cid
        cid = len(cores)
        cores.append(CoreInfo(cid, CoreId(tile, MANAGER, geometry.workers_per_tile), None))
        managers.append(cid)
    return Chip(
        geometry=geometry,
        address_map=AddressMap(geometry),
        cores=tuple(cores),
        workers=tuple(workers),
        managers=tuple(managers),
        mesh_to_cid=mesh_to_cid,
    )


_STEP = {W: (0, -1), E: (0, 1), N: (-1, 0), S: (1, 0)}


def r2r_neighbor(chip: Chip, cid, direction):
    """Adjacent worker in the chip-wide mesh, or None at a mesh boundary."""
    info = chip.core(cid)
    if info.ident.role != WORKER:
        raise IllegalOp("only workers sit on the register-link mesh")
    dr, dc = _STEP[direction]
    rows, cols = chip.geometry.mesh_shape
    r, c = info.mesh
    nr, nc = r + dr, c + dc
    if not (0 <= nr < rows and 0 <= nc < cols):
        return None
    return chip.mesh_to_cid[(nr, nc)]


def opposite(direction):
    return OPPOSITE[direction]


def snake_order(chip: Chip):
    """Workers in serpentine mesh order with the link direction to the next.

    Returns a list of (cid, forward_dir or None); forward_dir is the
    direction from this worker to the next one in the chain. Used by kernels
    that pipeline data through every worker.
    """
    rows, cols = chip.geometry.mesh_shape
    order = []
    for r in range(rows):
        cs = range(cols) if r % 2 == 0 else range(cols - 1, -1, -1)
        for c in cs:
            order.append(chip.mesh_to_cid[(r, c)])
    chain = []
    for i, cid in enumerate(order):
        if i + 1 == len(order):
            chain.append((cid, None))
            continue
        r, c = chip.core(cid).mesh
        nr, nc = chip.core(order[i + 1]).mesh
        if nr == r:
            chain.append((cid, E if nc > c else W))
        else:
            chain.append((cid, S))
    return chain
