"""Speech segmentation: hysteresis detection over VAD frame tracks and
length-constrained chunk planning.

Overly long segments are split at their lowest-confidence frame; short ones
are greedily merged left-to-right with neighbors (across non-speech gaps) as
long as the merged span stays within the chunk-size cap.
"""

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from ._kernels import hysteresis_runs

_EPS = 1e-9


class EmptyTrackError(ValueError):
    """The frame track has no frames."""


class SegmentationError(ValueError):
    """Segments are inconsistent with their track or cannot be split."""


class ChunkPolicy(str, Enum):
    OFFLINE_25 = "offline25"
    IF_ASR_20 = "if_asr20"
    IF_ST_25 = "if_st25"
    IF_QA_60 = "if_qa60"
    FIXED_WINDOW = "fixed_window"


#: Maximum chunk duration implied by each named policy (seconds).
POLICY_MAX_S = {
    ChunkPolicy.OFFLINE_25: 25.0,
    ChunkPolicy.IF_ASR_20: 20.0,
    ChunkPolicy.IF_ST_25: 25.0,
    ChunkPolicy.IF_QA_60: 60.0,
}

LONG_AUDIO_WINDOW_S = 60.0
LONG_AUDIO_CAP_S = 1602.0


@dataclass
class SpeechFrameTrack:
    """Per-frame speech probabilities. Frame i spans [i/rate, (i+1)/rate)."""

    talk_id: str
    frame_rate_hz: float
    probs: np.ndarray

    def __post_init__(self):
        self.probs = np.asarray(self.probs, dtype=np.float64)
        if self.frame_rate_hz <= 0:
            raise ValueError("frame_rate_hz must be > 0")
        if self.probs.size and (self.probs.min() < 0.0 or self.probs.max() > 1.0):
            raise ValueError("frame probabilities must lie in [0, 1]")

    @property
    def duration_s(self) -> float:
        return self.probs.size / self.frame_rate_hz


@dataclass
class Segment:
    talk_id: str
    start_s: float
    end_s: float
    min_conf: float

    def __post_init__(self):
        if not (0.0 <= self.start_s < self.end_s):
            raise ValueError(f"bad segment bounds [{self.start_s}, {self.end_s}]")

    @property
    def duration_s(self) -> float:
        return self.end_s - self.start_s

    def to_dict(self) -> dict:
        return {
            "talk_id": self.talk_id,
            "start_s": self.start_s,
            "end_s": self.end_s,
            "min_conf": self.min_conf,
        }


@dataclass
class ChunkPlan:
    talk_id: str
    chunks: list[Segment]
    policy: ChunkPolicy
    truncated_at_s: float | None = None

    def validate(self) -> None:
        cap = POLICY_MAX_S.get(self.policy)
        prev_end = None
        for chunk in self.chunks:
            if cap is not None and chunk.duration_s > cap + _EPS:
                raise ValueError(
                    f"chunk [{chunk.start_s}, {chunk.end_s}] exceeds policy cap {cap}s"
                )
            if self.policy is not ChunkPolicy.FIXED_WINDOW:
                if prev_end is not None and chunk.start_s < prev_end - _EPS:
                    raise ValueError("chunks overlap or are unsorted")
                prev_end = chunk.end_s
            if self.truncated_at_s is not None and chunk.end_s > self.truncated_at_s + _EPS:
                raise ValueError("chunk extends past truncation point")


def _frame_range(start_s: float, end_s: float, rate: float) -> tuple[int, int]:
    """Frames i with start_s <= i/rate < end_s, as a [lo, hi) pair."""
    lo = int(math.ceil(start_s * rate - 1e-6))
    hi = int(math.ceil(end_s * rate - 1e-6))
    return lo, hi


def frames_to_segments(
    track: SpeechFrameTrack,
    on_threshold: float = 0.6,
    off_threshold: float = 0.4,
    min_speech_s: float = 0.25,
    min_gap_s: float = 0.1,
) -> list[Segment]:
    """Detect speech segments by hysteresis over the frame probabilities.

    A run opens when a frame reaches on_threshold and stays open while frames
    remain at or above off_threshold.  Runs shorter than min_speech_s are
    dropped, then gaps shorter than min_gap_s are bridged.
    """
    if not (0.0 <= off_threshold <= on_threshold <= 1.0):
        raise ValueError("need 0 <= off_threshold <= on_threshold <= 1")
    probs = track.probs
    if probs.size == 0:
        raise EmptyTrackError(f"track {track.talk_id!r} has no frames")
    rate = track.frame_rate_hz

    runs = hysteresis_runs(probs, float(on_threshold), float(off_threshold))
    kept = [(int(s), int(e)) for s, e in runs if (e - s) / rate >= min_speech_s - _EPS]

    bridged: list[list[int]] = []
    for s, e in kept:
        if bridged and (s - bridged[-1][1]) / rate < min_gap_s - _EPS:
            bridged[-1][1] = e
        else:
            bridged.append([s, e])

    return [
        Segment(
            talk_id=track.talk_id,
            start_s=s / rate,
            end_s=e / rate,
            min_conf=float(probs[s:e].min()),
        )
        for s, e in bridged
    ]


def constrain_segments(
    segments: list[Segment],
    track: SpeechFrameTrack,
    chunk_size_s: float,
    min_split_part_s: float = 1.0,
    policy: ChunkPolicy = ChunkPolicy.OFFLINE_25,
) -> ChunkPlan:
    """Split overlong segments at their lowest-probability frame and merge
    short neighbors greedily left-to-right under the chunk-size cap.

    Splitting is recursive: the cut frame is the admissible frame (leaving
    both parts >= min_split_part_s) with the globally minimum probability,
    ties broken toward the earliest frame.  Merging may bridge non-speech
    gaps as long as the merged span, gap included, fits the cap.
    """
    if chunk_size_s <= 2 * min_split_part_s:
        raise ValueError("chunk_size_s must exceed 2 * min_split_part_s")
    rate = track.frame_rate_hz
    probs = track.probs
    n = probs.size
    cap_frames = chunk_size_s * rate
    min_part_frames = min_split_part_s * rate

    parts: list[tuple[int, int, float]] = []  # (start_frame, end_frame, min_conf)
    for seg in segments:
        lo, hi = _frame_range(seg.start_s, seg.end_s, rate)
        if lo < 0 or hi > n or lo >= hi:
            raise SegmentationError(
                f"segment [{seg.start_s}, {seg.end_s}] outside track of {n / rate:.3f}s"
            )
        if hi - lo <= cap_frames + _EPS:
            parts.append((lo, hi, seg.min_conf))
            continue
        # Iterative split; recursion depth can reach the frame count when
        # probabilities are flat (ties resolve to the earliest frame).
        stack = [(lo, hi)]
        pieces: list[tuple[int, int]] = []
        while stack:
            a, b = stack.pop()
            if b - a <= cap_frames + _EPS:
                pieces.append((a, b))
                continue
            s_lo = int(math.ceil(a + min_part_frames - 1e-6))
            s_hi = int(math.floor(b - min_part_frames + 1e-6))
            if s_lo > s_hi:
                s_lo, s_hi = a + 1, b - 1  # no admissible frame at this rate
            if s_lo > s_hi:
                raise SegmentationError(
                    f"cannot split {b - a}-frame segment at rate {rate} Hz"
                )
            cut = s_lo + int(np.argmin(probs[s_lo : s_hi + 1]))
            stack.append((cut, b))
            stack.append((a, cut))
        pieces.sort()
        parts.extend((a, b, float(probs[a:b].min())) for a, b in pieces)

    merged: list[list] = []
    for a, b, conf in parts:
        if merged and b - merged[-1][0] <= cap_frames + _EPS:
            merged[-1][1] = b
            merged[-1][2] = min(merged[-1][2], conf)
        else:
            merged.append([a, b, conf])

    chunks = [
        Segment(talk_id=track.talk_id, start_s=a / rate, end_s=b / rate, min_conf=conf)
        for a, b, conf in merged
    ]
    return ChunkPlan(talk_id=track.talk_id, chunks=chunks, policy=policy)


def plan_fixed_windows(
    duration_s: float,
    window_s: float,
    overlap_s: float,
    talk_id: str = "",
) -> ChunkPlan:
    """Uniform sliding windows with a stride of window_s - overlap_s.

    The window that reaches the end of the audio is clipped and is the last
    one emitted.  Fixed-window plans intentionally overlap.
    """
    if duration_s <= 0:
        raise ValueError("duration_s must be > 0")
    if not (0 <= overlap_s < window_s):
        raise ValueError("need 0 <= overlap_s < window_s")
    stride = window_s - overlap_s
    chunks = []
    k = 0
    while True:
        start = k * stride
        end = start + window_s
        if end >= duration_s - _EPS:
            chunks.append(Segment(talk_id, start, duration_s, 1.0))
            break
        chunks.append(Segment(talk_id, start, end, 1.0))
        k += 1
    return ChunkPlan(talk_id=talk_id, chunks=chunks, policy=ChunkPolicy.FIXED_WINDOW)


def plan_long_audio_chunks(
    duration_s: float,
    window_s: float = LONG_AUDIO_WINDOW_S,
    cap_s: float = LONG_AUDIO_CAP_S,
    talk_id: str = "",
) -> ChunkPlan:
    """Consecutive non-overlapping windows; input capped at 26.7 minutes."""
    if duration_s <= 0:
        raise ValueError("duration_s must be > 0")
    truncated_at = cap_s if duration_s > cap_s + _EPS else None
    total = min(duration_s, cap_s)
    chunks = []
    start = 0.0
    while start < total - _EPS:
        end = min(start + window_s, total)
        chunks.append(Segment(talk_id, start, end, 1.0))
        start = end
    return ChunkPlan(
        talk_id=talk_id,
        chunks=chunks,
        policy=ChunkPolicy.IF_QA_60,
        truncated_at_s=truncated_at,
    )


def plan_to_records(plan: ChunkPlan) -> list[dict]:
    records = [dict(c.to_dict(), policy=plan.policy.value, truncated_at_s=plan.truncated_at_s)
               for c in plan.chunks]
    return records
