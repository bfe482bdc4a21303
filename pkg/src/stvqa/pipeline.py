"""End-to-end feature extraction over frame groups."""

from __future__ import annotations

import logging
import time
from collections import defaultdict, deque
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import schema
from .bandpass import mscn, temporal_filter, temporal_kernel
from .config import PipelineConfig
from .errors import GeometryError, InputFormatError
from .features import SentinelLog, chip_row, moment_features, product_features
from .niqe import NiqeModel, frame_niqe
from .pixelmath import chroma_map, downscale2, gradient_magnitude
from .stchips import build_lut, extract_chips
from .video_io import FrameGroup, open_video

log = logging.getLogger(__name__)


@dataclass
class GroupResult:
    index: int
    spatial: np.ndarray  # (T', 56) per-frame rows
    niqe: np.ndarray  # 37
    chips: dict  # block -> (18 at s1, 18 at s2)
    sentinels: SentinelLog
    warnings: list
    timings: dict


@dataclass
class Extraction:
    vector: schema.FeatureVector
    timings: dict = field(default_factory=dict)
    n_groups: int = 0


class Extractor:
    """Holds the immutable per-run state (config, lut, kernel, NIQE model)."""

    def __init__(self, config: PipelineConfig | None = None, niqe_model: NiqeModel | None = None):
        self.config = config or PipelineConfig()
        self.niqe_model = niqe_model or NiqeModel.load(self.config.niqe_model_path)
        self.lut = build_lut(self.config.Q, self.config.R)
        self.kernel = temporal_kernel(self.config.a, self.config.T)

    def check_geometry(self, height, width):
        need = self.config.min_dimension
        if height < need or width < need:
            raise GeometryError(
                f"video is {width}x{height}; at least {need}x{need} (R*D) is required"
            )

    def _chips(self, bandpassed, group_index):
        return extract_chips(bandpassed, self.lut, self.config.D, group_index, self.config.selection)

    def process_group(self, group: FrameGroup, bit_depth=8) -> GroupResult:
        cfg = self.config
        K, C = cfg.K, cfg.C_stabilizer
        t = defaultdict(float)
        slog = SentinelLog()
        warnings = []

        t0 = time.perf_counter()
        y1 = group.luma_stack()
        y2 = downscale2(y1)
        c1 = np.stack([chroma_map(f, bit_depth) for f in group.frames])
        c2 = downscale2(c1)
        g1 = np.stack([gradient_magnitude(f) for f in y1])
        g2 = np.stack([gradient_magnitude(f) for f in y2])
        t["pixel"] += time.perf_counter() - t0

        t0 = time.perf_counter()
        my = [mscn(y1, K, C), mscn(y2, K, C)]
        mc = [mscn(c1, K, C), mscn(c2, K, C)]
        mg = [mscn(g1, K, C).mscn, mscn(g2, K, C).mscn]
        chroma_sigma = [mscn(m.sigma, K, C).mscn for m in mc]
        luma_sigma = [mscn(m.sigma, K, C).mscn for m in my]
        t["mscn"] += time.perf_counter() - t0

        t0 = time.perf_counter()
        rows = []
        for n in range(len(group)):
            row = []
            for s in (0, 1):
                row.extend(moment_features(mc[s].mscn[n], slog, "chroma"))
            for s in (0, 1):
                row.extend(moment_features(chroma_sigma[s][n], slog, "chroma_sigma"))
            for s in (0, 1):
                row.extend(product_features(mg[s][n], slog, "gradient"))
            for s in (0, 1):
                row.extend(moment_features(luma_sigma[s][n], slog, "luma_sigma"))
            rows.append(row)
        t["spatial_fits"] += time.perf_counter() - t0

        t0 = time.perf_counter()
        bp = {
            "stchip": [temporal_filter(my[s].mscn, self.kernel) for s in (0, 1)],
            "stgradchip": [temporal_filter(mg[s], self.kernel) for s in (0, 1)],
        }
        t["bandpass"] += time.perf_counter() - t0

        t0 = time.perf_counter()
        frames = {block: [self._chips(b, group.group_index) for b in stacks] for block, stacks in bp.items()}
        t["chips"] += time.perf_counter() - t0

        t0 = time.perf_counter()
        chips = {
            block: np.concatenate([chip_row(cf.values, slog, block) for cf in cfs])
            for block, cfs in frames.items()
        }
        t["chip_fits"] += time.perf_counter() - t0

        t0 = time.perf_counter()
        # one NIQE evaluation per group, on its last frame
        niqe = frame_niqe(y1[-1], self.niqe_model, K, C, slog, warnings)
        t["niqe"] += time.perf_counter() - t0

        return GroupResult(group.group_index, np.array(rows), niqe, chips, slog, warnings, dict(t))

    def reduce(self, results, video_id="") -> Extraction:
        if not results:
            raise InputFormatError(f"video has fewer than T'={self.config.T} frames; no complete group")
        results = sorted(results, key=lambda r: r.index)
        spatial = np.vstack([r.spatial for r in results])
        spatial_mean = spatial.mean(axis=0)
        pooled = np.mean([r.spatial.std(axis=0) for r in results], axis=0)
        blocks = {}
        start = 0
        for name, names in schema.SPATIAL_BLOCKS:
            stop = start + len(names)
            blocks[name] = spatial_mean[start:stop]
            blocks[f"std_{name}"] = pooled[start:stop]
            start = stop
        blocks["niqe"] = np.mean([r.niqe for r in results], axis=0)
        for block in ("stchip", "stgradchip"):
            blocks[block] = np.mean([r.chips[block] for r in results], axis=0)

        sentinels = SentinelLog()
        warnings = []
        timings = defaultdict(float)
        for r in results:
            sentinels.update(r.sentinels)
            for w in r.warnings:
                if w not in warnings:
                    warnings.append(w)
            for k, v in r.timings.items():
                timings[k] += v
        vec = schema.assemble(blocks, video_id, sentinels.messages() + warnings)
        return Extraction(vec, dict(timings), len(results))

    def extract_groups(self, groups, video_id="", bit_depth=8) -> Extraction:
        """Process an iterable of :class:`FrameGroup`; results are reduced in group order."""
        threads = self.config.thread_count
        results = []
        if threads == 1:
            for g in groups:
                self.check_geometry(*g.frames[0].shape)
                results.append(self.process_group(g, bit_depth))
        else:
            pending = deque()
            with ThreadPoolExecutor(max_workers=threads) as pool:
                for g in groups:
                    self.check_geometry(*g.frames[0].shape)
                    pending.append(pool.submit(self.process_group, g, bit_depth))
                    while len(pending) >= 2 * threads:
                        results.append(pending.popleft().result())
                results.extend(f.result() for f in pending)
        return self.reduce(results, video_id)

    def extract_path(self, path_or_stream, format_hint=None, video_id="") -> Extraction:
        t0 = time.perf_counter()
        with open_video(path_or_stream, format_hint) as reader:
            hdr = reader.header
            self.check_geometry(hdr.height, hdr.width)
            out = self.extract_groups(reader.groups(self.config.T), video_id, hdr.bit_depth)
        out.timings["total"] = time.perf_counter() - t0
        for stage, secs in sorted(out.timings.items()):
            log.info("stage %-12s %8.3f s", stage, secs)
        return out


def groups_from_arrays(lumas, cbs=None, crs=None, size=5):
    """Wrap in-memory normalized planes (frames first) as frame groups."""
    from .video_io import PlanarFrame

    lumas = np.asarray(lumas, dtype=np.float64)
    mid = 128.0 / 255.0
    frames = []
    for i, y in enumerate(lumas):
        cb = cbs[i] if cbs is not None else np.full_like(y, mid)
        cr = crs[i] if crs is not None else np.full_like(y, mid)
        frames.append(PlanarFrame(y, np.asarray(cb, float), np.asarray(cr, float), i))
    n = len(frames) // size
    return [FrameGroup(tuple(frames[k * size : (k + 1) * size]), k) for k in range(n)]


def extract_features(path_or_stream, config=None, format_hint=None, video_id="", niqe_model=None):
    return Extractor(config, niqe_model).extract_path(path_or_stream, format_hint, video_id)
