"""Abstract scratchpad-accelerator model.

A controller core orchestrates a cluster of ``num_cores`` identical cores
sharing a banked L1 scratchpad; a larger on-chip L2 and an unbounded off-chip
L3 sit behind explicit DMA transfers. The cycle-cost parameters (per-MAC and
per-BOP cost, DMA bandwidths, serial fraction, LUT contention granularity)
form the calibration surface of the latency model; the defaults below are
placeholders meant to be fitted against measured traces, not ground truth.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace

from .errors import InvariantViolation, SchemaError


@dataclass(frozen=True)
class PlatformSpec:
    num_cores: int
    num_banks: int
    l1_bytes: int
    l2_bytes: int
    chunk_bytes: int = 4
    dma_l2_l1_bytes_per_cycle: float = 8.0
    dma_l3_l2_bytes_per_cycle: float = 4.0
    dma_setup_cycles: int = 10
    cycles_per_mac: float = 1.0
    cycles_per_bop: float = 0.02
    parallel_serial_fraction: float = 0.0
    lut_contention_granularity_bytes: int = 256

    def __post_init__(self):
        if min(self.num_cores, self.num_banks, self.l1_bytes, self.l2_bytes,
               self.chunk_bytes, self.lut_contention_granularity_bytes) < 1:
            raise InvariantViolation("core/bank/memory/chunk sizes must be positive")
        if self.l1_bytes > self.l2_bytes:
            raise InvariantViolation(
                f"L1 ({self.l1_bytes} B) must not exceed L2 ({self.l2_bytes} B)"
            )
        if self.l1_bytes % self.chunk_bytes or self.l2_bytes % self.chunk_bytes:
            raise InvariantViolation("L1 and L2 sizes must be chunk multiples")
        if self.l1_bytes % self.num_banks:
            raise InvariantViolation("L1 size must split evenly across banks")
        if min(self.dma_l2_l1_bytes_per_cycle, self.dma_l3_l2_bytes_per_cycle,
               self.cycles_per_mac, self.cycles_per_bop) <= 0:
            raise InvariantViolation("bandwidths and cycle costs must be positive")
        if self.dma_setup_cycles < 0:
            raise InvariantViolation("dma_setup_cycles must be non-negative")
        if not 0.0 <= self.parallel_serial_fraction < 1.0:
            raise InvariantViolation("parallel_serial_fraction must be in [0, 1)")

    def with_hardware(self, num_cores=None, l2_bytes=None) -> "PlatformSpec":
        """Copy with a different core count and/or L2 capacity (sweep axis)."""
        spec = self
        if num_cores is not None:
            spec = replace(spec, num_cores=num_cores)
        if l2_bytes is not None:
            spec = replace(spec, l2_bytes=l2_bytes)
        return spec


@dataclass(frozen=True)
class Deadline:
    cycles: int

    def __post_init__(self):
        if self.cycles < 1:
            raise InvariantViolation("deadline must be >= 1 cycle")


_SIZE_FIELDS = {"l1_bytes", "l2_bytes"}
_FIELDS = {
    "num_cores": int, "num_banks": int, "l1_bytes": int, "l2_bytes": int,
    "chunk_bytes": int, "dma_l2_l1_bytes_per_cycle": float,
    "dma_l3_l2_bytes_per_cycle": float, "dma_setup_cycles": int,
    "cycles_per_mac": float, "cycles_per_bop": float,
    "parallel_serial_fraction": float, "lut_contention_granularity_bytes": int,
}
_REQUIRED = {"num_cores", "num_banks", "l1_bytes", "l2_bytes"}


def _parse_size(value, key: str) -> int:
    """Byte size; strings may carry a kB suffix (x1024)."""
    if isinstance(value, str):
        text = value.strip()
        if text.lower().endswith("kb"):
            return int(float(text[:-2].strip()) * 1024)
        return int(text)
    if isinstance(value, (int, float)):
        return int(value)
    raise SchemaError(f"{key}: expected a byte size, got {value!r}")


def parse_platform(text: str) -> PlatformSpec:
    """Parse a platform JSON file with the PlatformSpec field names."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"invalid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise SchemaError("platform document must be an object")
    unknown = set(doc) - set(_FIELDS)
    if unknown:
        raise SchemaError(f"unknown platform keys {sorted(unknown)}")
    missing = _REQUIRED - set(doc)
    if missing:
        raise SchemaError(f"missing platform keys {sorted(missing)}")
    kwargs = {}
    for key, value in doc.items():
        if key in _SIZE_FIELDS:
            kwargs[key] = _parse_size(value, key)
        else:
            kwargs[key] = _FIELDS[key](value)
    return PlatformSpec(**kwargs)


def effective_parallelism(spec: PlatformSpec, work_kind: str,
                          lut_bytes: int | None = None) -> float:
    """Usable core parallelism for a unit of work.

    MAC/BOP work scales as ``M / (1 + f*(M-1))`` with f the serial fraction
    (f=0 gives ideal scaling). LUT accesses are additionally capped by how
    many granules the shared table spans: a small table serializes readers
    that contend for the same address space.
    """
    if work_kind not in ("mac", "bop", "lut_access"):
        raise ValueError(f"unknown work kind {work_kind!r}")
    if (lut_bytes is not None) != (work_kind == "lut_access"):
        raise ValueError("lut_bytes must be given exactly for lut_access work")
    m = spec.num_cores
    f = spec.parallel_serial_fraction
    p = m / (1.0 + f * (m - 1))
    if work_kind == "lut_access":
        granules = math.ceil(max(lut_bytes, 1) / spec.lut_contention_granularity_bytes)
        p = min(p, float(granules))
    return max(1.0, p)
