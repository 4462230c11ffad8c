"""Causal frame-by-frame streaming over an RVQ stack.

Encoding is stateless per frame, so codes are emitted as soon as a frame is
pushed. Decoding dequantizes each code frame and runs it through a short
causal FIR that only sees the current and previous dequantized frames. This
FIR is a placeholder for a learned causal decoder, and its length is a guess.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DimensionError, FormatError
from .rvq import DEFAULT_FRAME_RATE_HZ, RvqStack, decode, decode_frame, encode_frame

DEFAULT_TAPS = (0.4, 0.3, 0.2, 0.1)


@dataclass(frozen=True)
class FirFilter:
    taps: tuple[float, ...] = DEFAULT_TAPS

    def __post_init__(self) -> None:
        taps = tuple(float(t) for t in self.taps)
        object.__setattr__(self, "taps", taps)
        if not taps:
            raise ConfigError("FIR needs at least one tap")
        if taps[0] <= 0.0:
            raise ConfigError("FIR tap 0 must be positive")
        if abs(sum(taps) - 1.0) > 1e-9:
            raise ConfigError(f"FIR taps must sum to 1, got {sum(taps)!r}")

    @property
    def history_length(self) -> int:
        return len(self.taps) - 1

    def apply(self, frames: np.ndarray) -> np.ndarray:
        """Filter a whole (N, D) sequence offline.

        Per output element the products are accumulated in tap order, the
        same order :meth:`StreamCodec.push_decode` uses, so both paths agree
        bit for bit.
        """
        x = np.asarray(frames, dtype=np.float64)
        y = self.taps[0] * x
        for j in range(1, len(self.taps)):
            if j < x.shape[0]:
                y[j:] += self.taps[j] * x[:-j]
        return y


@dataclass
class StreamState:
    """Mutable per-session state.

    ``history`` holds the most recent dequantized frames, newest last, and
    never grows past the filter's history length.
    """

    frames_encoded: int = 0
    frames_decoded: int = 0
    history: list[np.ndarray] = field(default_factory=list)

    @property
    def frames_seen(self) -> int:
        return max(self.frames_encoded, self.frames_decoded)

    def to_dict(self) -> dict:
        return {
            "frames_encoded": self.frames_encoded,
            "frames_decoded": self.frames_decoded,
            "history": [h.tolist() for h in self.history],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "StreamState":
        return cls(
            frames_encoded=int(d["frames_encoded"]),
            frames_decoded=int(d["frames_decoded"]),
            history=[np.asarray(h, dtype=np.float64) for h in d["history"]],
        )

    def __eq__(self, other) -> bool:
        if not isinstance(other, StreamState):
            return NotImplemented
        return (
            self.frames_encoded == other.frames_encoded
            and self.frames_decoded == other.frames_decoded
            and len(self.history) == len(other.history)
            and all(np.array_equal(a, b) for a, b in zip(self.history, other.history))
        )


class StreamCodec:
    """Zero-lookahead streaming encoder/decoder bound to one trained stack.

    The codec itself is immutable; all per-stream data lives in
    :class:`StreamState`, one per session.
    """

    def __init__(self, stack: RvqStack, fir: FirFilter | None = None, depth: int | None = None,
                 frame_rate_hz: float | None = None):
        self.stack = stack
        self.fir = fir or FirFilter()
        self.depth = depth or stack.depth
        self.frame_rate_hz = frame_rate_hz or stack.frame_rate_hz or DEFAULT_FRAME_RATE_HZ

    @property
    def frame_ms(self) -> float:
        return 1000.0 / self.frame_rate_hz

    def new_state(self) -> StreamState:
        return StreamState()

    def reset(self, state: StreamState) -> None:
        state.frames_encoded = 0
        state.frames_decoded = 0
        state.history.clear()

    def push_encode(self, state: StreamState, frame) -> np.ndarray:
        frame = np.asarray(frame, dtype=np.float64)
        if frame.shape != (self.stack.dim,):
            raise DimensionError(f"expected a frame of dimension {self.stack.dim}, got shape {frame.shape}")
        codes, _ = encode_frame(frame, self.stack, self.depth)
        state.frames_encoded += 1
        return codes

    def push_decode(self, state: StreamState, codes) -> np.ndarray:
        x = decode_frame(codes, self.stack, self.depth)
        taps = self.fir.taps
        y = taps[0] * x
        # history is newest-last; tap j pairs with the frame j steps back
        for j in range(1, len(taps)):
            if j <= len(state.history):
                y += taps[j] * state.history[-j]
        t = self.fir.history_length
        if t:
            state.history.append(x)
            if len(state.history) > t:
                del state.history[0]
        state.frames_decoded += 1
        return y

    def decode_offline(self, codes) -> np.ndarray:
        return self.fir.apply(decode(codes, self.stack, self.depth))


# ---------------------------------------------------------------------------
# framed pipe format: u64 frame index then D little-endian f32 values

_FRAME_INDEX = struct.Struct("<Q")


def pack_frame(index: int, frame: np.ndarray) -> bytes:
    return _FRAME_INDEX.pack(index) + np.ascontiguousarray(frame, dtype="<f4").tobytes()


def read_frames(fh, dim: int):
    """Yield ``(index, frame)`` pairs from a framed pipe until EOF."""
    size = _FRAME_INDEX.size + 4 * dim
    while True:
        block = fh.read(size)
        if not block:
            return
        if len(block) != size:
            raise FormatError("framed stream ended mid-record")
        (index,) = _FRAME_INDEX.unpack_from(block)
        yield index, np.frombuffer(block, dtype="<f4", offset=_FRAME_INDEX.size).copy()

