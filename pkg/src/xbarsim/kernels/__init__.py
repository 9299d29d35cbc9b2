"""Evaluation kernels: generators, oracles, and the size sweep.

Five kernels with diverse access/control/synchronization behavior, each
paired with a straightforward sequential reference. ``generate`` emits
per-core programs for a (kernel, plan) combination; ``sweep`` runs a
kernel's two preset plans across sizes and tabulates efficiency.

Supported kernel x plan combinations (others raise PlanUnsupported):

  gemm       shared_cache, private_cache, shared_spm, private_spm,
             private_spm_r2r
  stencil2d  shared_cache, private_cache, private_spm_r2r
  spmv       shared_cache, private_cache
  kmp        shared_cache, private_cache, private_spm
  mergesort  shared_spm, shared_cache
"""

from dataclasses import dataclass, field, replace

from ..errors import ConfigError, PlanUnsupported
from .common import F32, I32

KERNEL_NAMES = ("gemm", "stencil2d", "spmv", "kmp", "mergesort")

# The two plans each kernel is swept with. Only the stencil pair is fixed
# by the measured-silicon methodology; the rest are implementer defaults
# and can be overridden per run.
PRESET_PAIRS = {
    "gemm": ("private_spm_r2r", "shared_cache"),
    "stencil2d": ("private_cache", "private_spm_r2r"),
    "spmv": ("shared_cache", "private_cache"),
    "kmp": ("shared_cache", "private_spm"),
    "mergesort": ("shared_spm", "shared_cache"),
}

SUPPORTED_PLANS = {
    "gemm": ("shared_cache", "private_cache", "shared_spm", "private_spm",
             "private_spm_r2r"),
    "stencil2d": ("shared_cache", "private_cache", "private_spm_r2r"),
    "spmv": ("shared_cache", "private_cache"),
    "kmp": ("shared_cache", "private_cache", "private_spm"),
    "mergesort": ("shared_spm", "shared_cache"),
}

DEFAULT_SWEEP_SIZES = {
    "gemm": (8, 16, 24, 32),
    "stencil2d": (8, 16, 32, 64),
    "spmv": (64, 128, 256),
    "kmp": (1024, 4096, 8192),
    "mergesort": (512, 1024, 2048),
}

MAX_FOOTPRINT_BYTES = 512 * 1024


@dataclass(frozen=True)
class KernelSpec:
    """Kernel selection plus its size parameters; unused fields stay 0."""

    name: str
    m: int = 0
    n: int = 0
    k: int = 0
    rows: int = 0
    cols: int = 0
    nnz_per_row: int = 0
    text_len: int = 0
    pattern_len: int = 0
    length: int = 0
    seed: int = 1
    dtype: str = F32

    def validate(self):
        if self.name not in KERNEL_NAMES:
            raise ConfigError(f"unknown kernel {self.name!r}")
        checks = {
            "gemm": self.m > 0 and self.n > 0 and self.k > 0,
            "stencil2d": self.rows > 2 and self.cols > 2,
            "spmv": self.n > 0 and self.nnz_per_row > 0,
            "kmp": self.text_len > 0 and 0 < self.pattern_len <= self.text_len,
            "mergesort": self.length > 1,
        }
        if not checks[self.name]:
            raise ConfigError(f"kernel {self.name}: missing or bad size params")
        fp = footprint_bytes(self)
        if fp > MAX_FOOTPRINT_BYTES:
            raise ConfigError(
                f"kernel {self.name}: footprint {fp} B exceeds the "
                f"{MAX_FOOTPRINT_BYTES} B sweep maximum")

    @property
    def size_scalar(self):
        return {
            "gemm": self.m,
            "stencil2d": self.rows,
            "spmv": self.n,
            "kmp": self.text_len,
            "mergesort": self.length,
        }[self.name]


def spec_from_scalar(name, size, seed=1):
    """One-scalar size constructor used by sweeps."""
    if name == "gemm":
        return KernelSpec("gemm", m=size, n=size, k=size, seed=seed)
    if name == "stencil2d":
        return KernelSpec("stencil2d", rows=size, cols=size, seed=seed)
    if name == "spmv":
        return KernelSpec("spmv", n=size, nnz_per_row=8, seed=seed)
    if name == "kmp":
        return KernelSpec("kmp", text_len=size, pattern_len=4, seed=seed,
                          dtype=I32)
    if name == "mergesort":
        return KernelSpec("mergesort", length=size, seed=seed, dtype=I32)
    raise ConfigError(f"unknown kernel {name!r}")


def footprint_bytes(spec):
    """Logical dataset footprint in bytes (inputs + outputs)."""
    w = 4
    if spec.name == "gemm":
        return (spec.m * spec.k + spec.k * spec.n + spec.m * spec.n) * w
    if spec.name == "stencil2d":
        return (spec.rows * spec.cols + (spec.rows - 2) * (spec.cols - 2) + 9) * w
    if spec.name == "spmv":
        nnz = spec.n * spec.nnz_per_row
        return (2 * nnz + (spec.n + 1) + 2 * spec.n) * w
    if spec.name == "kmp":
        return (spec.text_len + 2 * spec.pattern_len) * w
    if spec.name == "mergesort":
        return 2 * spec.length * w
    raise ConfigError(f"unknown kernel {spec.name!r}")


@dataclass
class KernelBuild:
    """A generated workload plus its oracle expectations."""

    workload: object
    expected: dict
    extract: object          # callable(RunResult) -> dict of arrays
    analytic_flops: int | None = None
    meta: dict = field(default_factory=dict)


def _module(name):
    from . import gemm, kmp, mergesort, spmv, stencil2d
    return {"gemm": gemm, "stencil2d": stencil2d, "spmv": spmv,
            "kmp": kmp, "mergesort": mergesort}[name]


def check_supported(spec, plan_name):
    if plan_name not in SUPPORTED_PLANS[spec.name]:
        raise PlanUnsupported(
            f"kernel {spec.name} supports plans "
            f"{SUPPORTED_PLANS[spec.name]}, not {plan_name!r}")


def oracle(spec):
    """Sequential reference outputs for a kernel spec."""
    spec.validate()
    return _module(spec.name).oracle(spec)


def generate(spec, plan_name, chip) -> KernelBuild:
    """Per-core programs plus expected outputs for one (kernel, plan)."""
    spec.validate()
    check_supported(spec, plan_name)
    return _module(spec.name).build(spec, plan_name, chip)


def outputs_match(expected, got, dtype):
    """Exact comparison; float kernels compare bitwise under fixed op order."""
    import numpy as np
    for key, exp in expected.items():
        if key.startswith("_"):
            continue
        g = got.get(key)
        if g is None:
            return False
        exp = np.asarray(exp)
        g = np.asarray(g)
        if exp.shape != g.shape:
            return False
        if dtype == F32:
            if not np.array_equal(exp.view(np.uint32), g.view(np.uint32)):
                return False
        else:
            if not np.array_equal(exp, g):
                return False
    return True
