"""Dataset and data-structure verification.

`verify_dataset` checks an ingested dataset on disk; `verify_structures`
replays a randomized insert/evict workload and asserts every structural
invariant (page-table/cache bijection, mask OR-consistency, leaf ground
truth). Both collect human-readable findings; the CLI exits nonzero when
any check fails.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .engine import Engine, EngineConfig
from .lz4io import Lz4DecodeError
from .manifest import ManifestError
from .service import DatasetStore, TransportError


@dataclass
class VerifyReport:
    checks: list[tuple[str, bool, str]] = field(default_factory=list)

    def add(self, name: str, ok: bool, detail: str = ""):
        self.checks.append((name, ok, detail))

    @property
    def ok(self) -> bool:
        return all(ok for _, ok, _ in self.checks)

    def render(self) -> str:
        lines = []
        for name, ok, detail in self.checks:
            mark = "PASS" if ok else "FAIL"
            lines.append(f"[{mark}] {name}" + (f": {detail}" if detail else ""))
        return "\n".join(lines)


def verify_dataset(root: str, sample_bricks: int = 64, seed: int = 0
                   ) -> VerifyReport:
    report = VerifyReport()
    try:
        store = DatasetStore(root)
    except (TransportError, ManifestError) as exc:
        report.add("manifest", False, str(exc))
        return report
    report.add("manifest", True)

    man = store.manifest
    rng = np.random.default_rng(seed)
    bad = 0
    checked = 0
    for _ in range(sample_bricks):
        lev = int(rng.integers(len(man.levels)))
        c = int(rng.integers(man.channel_count))
        grid = man.levels[lev].brick_grid_dims
        coord = tuple(int(rng.integers(grid[a])) for a in range(3))
        try:
            payload = store.brick(c, lev, coord)
            assert payload.dtype == np.uint8
            checked += 1
        except (TransportError, Lz4DecodeError, AssertionError):
            bad += 1
    report.add("brick decode", bad == 0,
               f"{checked} bricks decoded, {bad} failures")

    # negative control: a truncated payload must be rejected, not mis-decoded
    raw = store.brick_bytes(0, 0, (0, 0, 0))
    try:
        from .ingest import decompress_brick
        decompress_brick(raw[: max(4, len(raw) // 2)], man.brick_size)
        report.add("corrupt brick rejected", False,
                   "truncated payload decoded without error")
    except Lz4DecodeError:
        report.add("corrupt brick rejected", True)

    # pyramid sanity: voxel counts strictly decrease
    counts = [math.prod(lvl.dims) for lvl in man.levels]
    report.add("pyramid strictly coarsens",
               all(a > b for a, b in zip(counts, counts[1:])),
               f"voxels per level: {counts}")
    return report


def verify_structures(root: str, steps: int = 2000, scan_every: int = 100,
                      seed: int = 0, octree_depth: int = 3) -> VerifyReport:
    """Randomized insert/evict/swap workload with periodic full scans."""
    report = VerifyReport()
    store = DatasetStore(root)
    man = store.manifest
    m = min(2, man.channel_count) if man.channel_count > 1 else 1
    engine = Engine(man, EngineConfig(octree_depth=octree_depth,
                                      cache_slots=(4, 4, 4),
                                      channel_slots=m))
    rng = np.random.default_rng(seed)
    k = len(man.levels)
    failures = 0
    detail = ""
    for i in range(steps):
        op = rng.random()
        slot = int(rng.integers(m))
        lev = int(rng.integers(k))
        grid = man.levels[lev].brick_grid_dims
        coord = tuple(int(rng.integers(grid[a])) for a in range(3))
        bid = engine.paging.encode(slot, lev, coord)
        try:
            if op < 0.75:
                channel = engine.paging.channel_mapping[slot]
                engine.apply_brick(bid, store.brick(channel, lev, coord))
            elif op < 0.9:
                resident = engine.paging.resident_brick_ids()
                if resident:
                    victim = int(resident[int(rng.integers(len(resident)))])
                    lin = engine.paging.resident_slot(victim)
                    s, l2, c2 = engine.paging.decode(victim)
                    idx = engine.paging._entry_index(s, l2, c2)
                    engine.paging.pt_status[idx] = 0
                    engine.paging.pt_slot[idx] = -1
                    engine.paging._release_slot(lin)
                    engine.octree.on_brick_evicted(victim)
            else:
                engine.swap_channel(slot, int(rng.integers(man.channel_count)))
            if (i + 1) % scan_every == 0:
                engine.paging.check_bijection()
                engine.octree.check_mask_consistency()
                engine.octree.check_leaf_ground_truth()
        except AssertionError as exc:
            failures += 1
            detail = f"step {i}: {exc}"
            break
    report.add("randomized structural invariants", failures == 0,
               detail or f"{steps} ops, scans every {scan_every}")
    return report
