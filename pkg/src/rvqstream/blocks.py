"""Sliding-window block attention and chunked detokenizer scheduling.

Tokens are grouped into fixed-size blocks. A query in block ``q`` may attend
to key blocks ``q - lookback .. q + lookahead`` (defaults 3 and 1), clamped
to the blocks that exist. That window spans five block indices even though
the receptive field is sometimes described as four blocks; the explicit
index list is what is implemented here.

A chunk (one block) can be decoded once every key block its window touches
has been generated, i.e. after ``(c + 1 + lookahead) * chunk_size`` tokens,
or after the last token once the stream is finished.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError

DEFAULT_CHUNK_SIZE = 8
DEFAULT_LOOKBACK = 3
DEFAULT_LOOKAHEAD = 1


@dataclass(frozen=True)
class BlockPartition:
    chunk_size: int = DEFAULT_CHUNK_SIZE
    num_tokens: int = 1
    lookback: int = DEFAULT_LOOKBACK
    lookahead: int = DEFAULT_LOOKAHEAD

    def __post_init__(self) -> None:
        if self.chunk_size < 1 or self.num_tokens < 1:
            raise ConfigError("chunk_size and num_tokens must both be at least 1")
        if self.lookback < 0 or self.lookahead < 0:
            raise ConfigError("lookback and lookahead must be non-negative")

    @property
    def blocks(self) -> int:
        return math.ceil(self.num_tokens / self.chunk_size)

    def block_of(self, token_index: int) -> int:
        return token_index // self.chunk_size

    def block_span(self, block: int) -> tuple[int, int]:
        """Half-open token range ``[start, stop)`` covered by ``block``."""
        start = block * self.chunk_size
        return start, min(start + self.chunk_size, self.num_tokens)


@dataclass(frozen=True)
class BlockMask:
    partition: BlockPartition
    blocks: np.ndarray  # (B, B) bool, [query block, key block]

    def allowed_keys(self, q_block: int) -> list[int]:
        return np.flatnonzero(self.blocks[q_block]).tolist()

    def token_mask(self) -> np.ndarray:
        """(T, T) boolean mask, the block mask expanded to token granularity."""
        b = np.arange(self.partition.num_tokens) // self.partition.chunk_size
        return self.blocks[b[:, None], b[None, :]]


def build_mask(partition: BlockPartition) -> BlockMask:
    b = np.arange(partition.blocks)
    q, k = b[:, None], b[None, :]
    allow = (k >= q - partition.lookback) & (k <= q + partition.lookahead)
    return BlockMask(partition, allow)


def first_decodable(partition: BlockPartition) -> int:
    """Tokens that must exist before chunk 0 can be decoded (unclamped)."""
    return partition.chunk_size * (1 + partition.lookahead)


def ready_at_token(partition: BlockPartition, chunk: int, finished: bool = True) -> int:
    """Token count at which ``chunk`` becomes decodable.

    With ``finished`` the stream length is known, so trailing chunks whose
    lookahead blocks will never arrive flush at ``num_tokens``.
    """
    need = (chunk + 1 + partition.lookahead) * partition.chunk_size
    return min(need, partition.num_tokens) if finished else need


@dataclass(frozen=True)
class ChunkInfo:
    chunk: int
    first_token: int
    tokens: int
    ready_at_token: int
    audio_ms: float
    lookahead_debt_ms: float


@dataclass(frozen=True)
class ChunkSchedule:
    chunks: tuple[ChunkInfo, ...]
    token_ms: float
    vocoder_lookahead_ms: float

    @property
    def total_audio_ms(self) -> float:
        return sum(c.audio_ms for c in self.chunks)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["chunk", "first_token", "ready_at_token", "audio_ms"])
        for c in self.chunks:
            w.writerow([c.chunk, c.first_token, c.ready_at_token, _fmt_ms(c.audio_ms)])
        return buf.getvalue()


def _fmt_ms(v: float) -> str:
    return str(int(v)) if float(v).is_integer() else repr(float(v))


def schedule_chunks(partition: BlockPartition, token_ms: float, vocoder_lookahead_ms: float) -> ChunkSchedule:
    """Per-chunk readiness and audio content for a finished token stream.

    The vocoder's right context is withheld once, from the first packet;
    every later chunk carries its full audio.
    """
    if token_ms <= 0:
        raise ConfigError("token_ms must be positive")
    if vocoder_lookahead_ms < 0:
        raise ConfigError("vocoder_lookahead_ms must be non-negative")
    chunk_audio = partition.chunk_size * token_ms
    if vocoder_lookahead_ms >= chunk_audio:
        raise ConfigError(
            f"vocoder lookahead {vocoder_lookahead_ms} ms leaves the first packet empty "
            f"(chunk audio {chunk_audio} ms)"
        )
    chunks = []
    for c in range(partition.blocks):
        start, stop = partition.block_span(c)
        audio = (stop - start) * token_ms
        debt = vocoder_lookahead_ms if c == 0 else 0.0
        if c == 0 and debt >= audio:
            raise ConfigError("vocoder lookahead exceeds the audio of a short first chunk")
        chunks.append(
            ChunkInfo(
                chunk=c,
                first_token=start,
                tokens=stop - start,
                ready_at_token=ready_at_token(partition, c),
                audio_ms=audio - debt,
                lookahead_debt_ms=debt,
            )
        )
    return ChunkSchedule(tuple(chunks), token_ms, vocoder_lookahead_ms)


def mask_to_pbm(mask: np.ndarray) -> str:
    """Plain (P1) portable bitmap; 1 (black) marks an allowed pair."""
    m = np.asarray(mask, dtype=bool)
    rows, cols = m.shape
    lines = ["P1", f"{cols} {rows}"]
    lines.extend(" ".join("1" if v else "0" for v in row) for row in m)
    return "\n".join(lines) + "\n"


def pbm_to_mask(text: str) -> np.ndarray:
    tokens = [t for line in text.splitlines() if not line.startswith("#") for t in line.split()]
    if not tokens or tokens[0] != "P1":
        raise ValueError("not a plain PBM file")
    cols, rows = int(tokens[1]), int(tokens[2])
    bits = np.array([t == "1" for t in tokens[3:]], dtype=bool)
    if bits.size != rows * cols:
        raise ValueError(f"PBM body has {bits.size} pixels, expected {rows * cols}")
    return bits.reshape(rows, cols)
