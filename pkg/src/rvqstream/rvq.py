"""Residual vector quantization: codebooks, greedy encode/decode, EMA k-means.

A stack holds up to 16 ordered codebooks. Layer 0 is the semantic layer and
quantizes the input frame; each later (acoustic) layer quantizes the residual
left by the layers before it. A code frame always carries 16 indices; layers
beyond the depth used for encoding are filled with index 0.

Acoustic layers reserve entry 0 as a fixed zero vector by default. Greedy
search then always has the "add nothing" option available, which makes the
residual energy non-increasing from layer 1 onward.
"""

from __future__ import annotations

import json
import os
import struct
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from ._io import atomic_write_bytes, atomic_write_text
from .errors import (
    CodeRangeError,
    ConfigError,
    DimensionError,
    FormatError,
    InsufficientDataError,
)

NUM_LAYERS = 16
DEFAULT_CODEBOOK_SIZE = 2048
DEFAULT_DIM = 64
DEFAULT_FRAME_RATE_HZ = 12.5

CODEBOOK_MAGIC = b"RVQ1"
TOKENS_MAGIC = b"RVQT"
SIDECAR_SCHEMA = "1.0"

# Keeps the (rows, K, D) difference tensor around 32 MB.
_DIST_BLOCK_ELEMS = 1 << 22


@dataclass
class Codebook:
    """One quantizer layer.

    ``entries`` is stored as float32 so that the on-disk container round-trips
    exactly; all arithmetic upcasts to float64.
    """

    layer_index: int
    entries: np.ndarray
    usage_counts: np.ndarray
    ema_sums: np.ndarray
    pinned_zero: bool = False

    def __post_init__(self) -> None:
        self.entries = np.asarray(self.entries, dtype=np.float32)
        if self.entries.ndim != 2 or self.entries.shape[0] < 1:
            raise DimensionError(f"codebook entries must be a non-empty K x D matrix, got {self.entries.shape}")
        k, d = self.entries.shape
        self.usage_counts = np.asarray(self.usage_counts, dtype=np.float64).reshape(k)
        self.ema_sums = np.asarray(self.ema_sums, dtype=np.float64).reshape(k, d)
        if not 0 <= self.layer_index < NUM_LAYERS:
            raise ConfigError(f"layer_index {self.layer_index} outside 0..{NUM_LAYERS - 1}")

    @classmethod
    def from_entries(cls, entries, layer_index: int = 0, pinned_zero: bool = False) -> "Codebook":
        entries = np.asarray(entries, dtype=np.float32)
        if entries.ndim != 2:
            raise DimensionError(f"expected a K x D matrix, got shape {entries.shape}")
        k = entries.shape[0]
        return cls(
            layer_index=layer_index,
            entries=entries,
            usage_counts=np.ones(k),
            ema_sums=entries.astype(np.float64),
            pinned_zero=pinned_zero,
        )

    @property
    def size(self) -> int:
        return self.entries.shape[0]

    @property
    def dim(self) -> int:
        return self.entries.shape[1]


@dataclass
class RvqStack:
    layers: list[Codebook]
    frame_rate_hz: float = DEFAULT_FRAME_RATE_HZ
    seed: int = 0
    distortions: list[float] = field(default_factory=list)
    distortion_history: list[list[float]] = field(default_factory=list)

    def __post_init__(self) -> None:
        if not 1 <= len(self.layers) <= NUM_LAYERS:
            raise ConfigError(f"a stack holds 1..{NUM_LAYERS} layers, got {len(self.layers)}")
        dims = {cb.dim for cb in self.layers}
        if len(dims) != 1:
            raise DimensionError(f"all layers must share one dimension, got {sorted(dims)}")
        for i, cb in enumerate(self.layers):
            if cb.layer_index != i:
                raise ConfigError(f"layer {i} carries layer_index {cb.layer_index}")

    @property
    def semantic(self) -> Codebook:
        return self.layers[0]

    @property
    def acoustic(self) -> list[Codebook]:
        return self.layers[1:]

    @property
    def depth(self) -> int:
        return len(self.layers)

    @property
    def dim(self) -> int:
        return self.layers[0].dim

    @property
    def codebook_size(self) -> int:
        return max(cb.size for cb in self.layers)


# ---------------------------------------------------------------------------
# distance kernels


def _sq_distances(x: np.ndarray, entries: np.ndarray) -> np.ndarray:
    """Exact squared Euclidean distances, shape (N, K).

    Computed from explicit differences rather than the ||x||^2 - 2x.e + ||e||^2
    expansion so that ties and zero distances are exact.
    """
    x = np.asarray(x, dtype=np.float64)
    e = np.asarray(entries, dtype=np.float64)
    n, (k, d) = x.shape[0], e.shape
    out = np.empty((n, k), dtype=np.float64)
    rows = max(1, _DIST_BLOCK_ELEMS // max(1, k * d))
    for start in range(0, n, rows):
        diff = x[start:start + rows, None, :] - e[None, :, :]
        out[start:start + rows] = np.sum(diff * diff, axis=-1)
    return out


def _nearest(x: np.ndarray, entries: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    dist = _sq_distances(x, entries)
    idx = np.argmin(dist, axis=1)  # first minimum wins ties
    return idx, dist[np.arange(dist.shape[0]), idx]


def _as_frames(frames, dim: int) -> np.ndarray:
    arr = np.asarray(frames, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr[None, :]
    if arr.ndim != 2 or arr.shape[1] != dim:
        raise DimensionError(f"expected frames of dimension {dim}, got shape {np.shape(frames)}")
    return arr


def _check_depth(depth: int | None, stack: RvqStack) -> int:
    if depth is None:
        return stack.depth
    if not 1 <= depth <= NUM_LAYERS:
        raise ConfigError(f"depth must be in 1..{NUM_LAYERS}, got {depth}")
    if depth > stack.depth:
        raise ConfigError(f"depth {depth} exceeds the stack's {stack.depth} trained layers")
    return depth


# ---------------------------------------------------------------------------
# quantization


def quantize_layer(vector, codebook: Codebook) -> tuple[int, np.ndarray]:
    """Nearest entry of ``codebook`` to ``vector`` and the leftover residual."""
    v = np.asarray(vector, dtype=np.float64)
    if v.ndim != 1 or v.shape[0] != codebook.dim:
        raise DimensionError(f"vector of shape {v.shape} does not match codebook dimension {codebook.dim}")
    idx, _ = _nearest(v[None, :], codebook.entries)
    i = int(idx[0])
    return i, v - codebook.entries[i].astype(np.float64)


def encode(frames, stack: RvqStack, depth: int | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Greedy residual encode of a batch of frames.

    Returns ``(codes, energies)``: ``codes`` is (N, 16) int64 with unused
    layers set to 0; ``energies[:, i]`` is the residual energy left after
    layer ``i`` for the first ``depth`` layers.
    """
    depth = _check_depth(depth, stack)
    residual = _as_frames(frames, stack.dim).copy()
    n = residual.shape[0]
    codes = np.zeros((n, NUM_LAYERS), dtype=np.int64)
    energies = np.empty((n, depth), dtype=np.float64)
    for i in range(depth):
        entries = stack.layers[i].entries
        idx, dmin = _nearest(residual, entries)
        codes[:, i] = idx
        energies[:, i] = dmin
        residual = residual - entries[idx].astype(np.float64)
    return codes, energies


def encode_frame(frame, stack: RvqStack, depth: int | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Encode a single frame; see :func:`encode`."""
    frame = np.asarray(frame, dtype=np.float64)
    if frame.ndim != 1:
        raise DimensionError(f"expected one frame, got shape {frame.shape}")
    codes, energies = encode(frame[None, :], stack, depth)
    return codes[0], energies[0]


def validate_codes(codes, stack: RvqStack, depth: int | None = None) -> np.ndarray:
    depth = _check_depth(depth, stack)
    arr = np.asarray(codes)
    if arr.ndim == 1:
        arr = arr[None, :]
    if arr.ndim != 2 or arr.shape[1] != NUM_LAYERS:
        raise DimensionError(f"code frames must hold {NUM_LAYERS} indices, got shape {np.shape(codes)}")
    if not np.issubdtype(arr.dtype, np.integer):
        raise CodeRangeError("code indices must be integers")
    for i in range(depth):
        col = arr[:, i]
        k = stack.layers[i].size
        if col.size and (col.min() < 0 or col.max() >= k):
            bad = col[(col < 0) | (col >= k)][0]
            raise CodeRangeError(f"layer {i} index {int(bad)} outside [0, {k})")
    return arr.astype(np.int64)


def decode(codes, stack: RvqStack, depth: int | None = None) -> np.ndarray:
    """Sum of the selected centroids of layers ``0..depth-1``, shape (N, D)."""
    depth = _check_depth(depth, stack)
    arr = validate_codes(codes, stack, depth)
    out = np.zeros((arr.shape[0], stack.dim), dtype=np.float64)
    for i in range(depth):
        out += stack.layers[i].entries[arr[:, i]].astype(np.float64)
    return out


def decode_frame(codes, stack: RvqStack, depth: int | None = None) -> np.ndarray:
    codes = np.asarray(codes)
    if codes.ndim != 1:
        raise DimensionError(f"expected one code frame, got shape {codes.shape}")
    return decode(codes[None, :], stack, depth)[0]


# ---------------------------------------------------------------------------
# training


@dataclass(frozen=True)
class TrainConfig:
    codebook_size: int = DEFAULT_CODEBOOK_SIZE
    dim: int = DEFAULT_DIM
    depth: int = NUM_LAYERS
    epochs: int = 20
    decay: float = 0.99
    dead_code_threshold: float = 1e-3
    seed: int = 0
    pin_zero_acoustic: bool = True
    frame_rate_hz: float = DEFAULT_FRAME_RATE_HZ
    shard_size: int = 4096
    workers: int = 1

    def validate(self) -> None:
        if self.codebook_size < 1 or self.dim < 1:
            raise ConfigError("codebook_size and dim must be positive")
        if not 1 <= self.depth <= NUM_LAYERS:
            raise ConfigError(f"depth must be in 1..{NUM_LAYERS}")
        if self.codebook_size > 65536:
            raise ConfigError("codebook_size above 65536 does not fit the u16 token format")
        if not 0.0 <= self.decay < 1.0:
            raise ConfigError("decay must lie in [0, 1)")
        if self.epochs < 0 or self.shard_size < 1 or self.workers < 1:
            raise ConfigError("epochs >= 0, shard_size >= 1 and workers >= 1 required")


def _kmeans_pp(data: np.ndarray, k: int, rng: np.random.Generator, pinned_zero: bool) -> np.ndarray:
    n, d = data.shape
    centers = np.empty((k, d), dtype=np.float64)
    if pinned_zero:
        centers[0] = 0.0
    else:
        centers[0] = data[int(rng.integers(n))]
    min_d = _sq_distances(data, centers[:1])[:, 0]
    for j in range(1, k):
        total = float(min_d.sum())
        if total > 0.0:
            cum = np.cumsum(min_d)
            pick = int(np.searchsorted(cum, rng.random() * cum[-1], side="right"))
            if pick >= n or min_d[pick] == 0.0:
                pick = int(np.flatnonzero(min_d > 0.0)[-1])
        else:
            pick = int(rng.integers(n))
        centers[j] = data[pick]
        min_d = np.minimum(min_d, _sq_distances(data, centers[j:j + 1])[:, 0])
    return centers


def _shard_stats(shard: np.ndarray, entries: np.ndarray, k: int):
    idx, dmin = _nearest(shard, entries)
    counts = np.bincount(idx, minlength=k).astype(np.float64)
    sums = np.empty((k, shard.shape[1]), dtype=np.float64)
    for j in range(shard.shape[1]):
        sums[:, j] = np.bincount(idx, weights=shard[:, j], minlength=k)
    return idx, dmin, counts, sums


def _assign_and_reduce(data, entries, k, shard_size, pool):
    """Assignment plus per-cluster statistics.

    Shard boundaries depend only on ``shard_size`` and partial sums are
    reduced in shard order, so the result is identical for any worker count.
    """
    shards = [data[s:s + shard_size] for s in range(0, data.shape[0], shard_size)]
    if pool is None:
        parts = [_shard_stats(s, entries, k) for s in shards]
    else:
        parts = list(pool.map(lambda s: _shard_stats(s, entries, k), shards))
    idx = np.concatenate([p[0] for p in parts])
    dmin = np.concatenate([p[1] for p in parts])
    counts = parts[0][2].copy()
    sums = parts[0][3].copy()
    for p in parts[1:]:
        counts += p[2]
        sums += p[3]
    return idx, dmin, counts, sums


def _train_layer(data, k, layer_index, pinned, cfg: TrainConfig, pool) -> tuple[Codebook, list[float]]:
    rng = np.random.default_rng([cfg.seed, layer_index])
    n = data.shape[0]
    entries = _kmeans_pp(data, k, rng, pinned)
    _, dmin, counts, _ = _assign_and_reduce(data, entries, k, cfg.shard_size, pool)
    usage = counts.copy()
    ema_sums = entries * usage[:, None]
    free = np.ones(k, dtype=bool)
    if pinned:
        free[0] = False
    threshold = cfg.dead_code_threshold * n / k
    history: list[float] = []

    for _ in range(cfg.epochs):
        _, dmin, counts, sums = _assign_and_reduce(data, entries, k, cfg.shard_size, pool)
        history.append(float(np.mean(dmin)))
        usage = cfg.decay * usage + (1.0 - cfg.decay) * counts
        ema_sums = cfg.decay * ema_sums + (1.0 - cfg.decay) * sums
        live = free & (usage > 0.0)
        entries[live] = ema_sums[live] / usage[live, None]

        dead = np.flatnonzero(free & (usage < threshold))
        if dead.size:
            # worst-quantized corpus vectors, ties to the lowest corpus index
            order = np.argsort(-dmin, kind="stable")[: dead.size]
            for code, src in zip(dead, order):
                entries[code] = data[src]
                usage[code] = n / k
                ema_sums[code] = entries[code] * usage[code]

    final = entries.astype(np.float32)
    if pinned:
        final[0] = 0.0
    _, dmin, _, _ = _assign_and_reduce(data, final, k, cfg.shard_size, pool)
    history.append(float(np.mean(dmin)))
    cb = Codebook(layer_index=layer_index, entries=final, usage_counts=usage, ema_sums=ema_sums, pinned_zero=pinned)
    return cb, history


def train_codebooks(corpus, config: TrainConfig) -> RvqStack:
    """Train ``config.depth`` layers greedily with EMA k-means.

    Layer ``i`` is trained on the residuals left by the already-trained
    layers ``0..i-1``. Bit-reproducible for a given corpus and config,
    independent of ``config.workers``.
    """
    config.validate()
    data = _as_frames(corpus, config.dim)
    if not np.all(np.isfinite(data)):
        raise ConfigError("corpus contains non-finite values")
    if data.shape[0] < config.codebook_size:
        raise InsufficientDataError(
            f"corpus has {data.shape[0]} frames, need at least codebook_size={config.codebook_size}"
        )
    layers: list[Codebook] = []
    history: list[list[float]] = []
    residual = data.copy()
    pool = ThreadPoolExecutor(config.workers) if config.workers > 1 else None
    try:
        for i in range(config.depth):
            pinned = config.pin_zero_acoustic and i > 0
            cb, hist = _train_layer(residual, config.codebook_size, i, pinned, config, pool)
            layers.append(cb)
            history.append(hist)
            idx, _ = _nearest(residual, cb.entries)
            residual = residual - cb.entries[idx].astype(np.float64)
    finally:
        if pool is not None:
            pool.shutdown()
    return RvqStack(
        layers=layers,
        frame_rate_hz=config.frame_rate_hz,
        seed=config.seed,
        distortions=[h[-1] for h in history],
        distortion_history=history,
    )


# ---------------------------------------------------------------------------
# teacher alignment


def teacher_projection(dim: int, teacher_dim: int, seed: int = 0) -> np.ndarray:
    """Fixed random projection of shape (teacher_dim, dim) with orthonormal rows or columns."""
    rng = np.random.default_rng([seed, 0x7EAC])
    g = rng.standard_normal((max(dim, teacher_dim), min(dim, teacher_dim)))
    q, r = np.linalg.qr(g)
    q = q * np.sign(np.diag(r))
    return q if teacher_dim >= dim else q.T


def semantic_alignment_loss(stack: RvqStack, frames, teacher, projection=None) -> float:
    """Mean ``1 - cos`` between projected layer-0 reconstructions and teacher frames.

    Frames where either vector has zero norm contribute 1.0 and are counted
    in a ``RuntimeWarning``.
    """
    x = _as_frames(frames, stack.dim)
    t = np.asarray(teacher, dtype=np.float64)
    if t.ndim == 1:
        t = t[None, :]
    if t.shape[0] != x.shape[0]:
        raise DimensionError(f"{x.shape[0]} frames but {t.shape[0]} teacher frames")
    if not np.all(np.isfinite(t)):
        raise ConfigError("teacher frames must be finite")
    if projection is None:
        projection = teacher_projection(stack.dim, t.shape[1], stack.seed)
    p = np.asarray(projection, dtype=np.float64)
    if p.shape != (t.shape[1], stack.dim):
        raise DimensionError(f"projection must be {(t.shape[1], stack.dim)}, got {p.shape}")
    if x.shape[0] == 0:
        return 0.0

    codes, _ = encode(x, stack, depth=1)
    recon = stack.semantic.entries[codes[:, 0]].astype(np.float64)
    proj = recon @ p.T
    dots = np.sum(proj * t, axis=1)
    norms = np.linalg.norm(proj, axis=1) * np.linalg.norm(t, axis=1)
    degenerate = norms == 0.0
    cos = np.zeros_like(dots)
    cos[~degenerate] = np.clip(dots[~degenerate] / norms[~degenerate], -1.0, 1.0)
    if degenerate.any():
        warnings.warn(
            f"{int(degenerate.sum())} zero-norm frame(s) scored as orthogonal",
            RuntimeWarning,
            stacklevel=2,
        )
    return float(np.mean(1.0 - cos))


# ---------------------------------------------------------------------------
# file formats

_CB_HEADER = struct.Struct("<4sIIIQ")
_TOK_HEADER = struct.Struct("<4sHdQ")


def stack_to_bytes(stack: RvqStack) -> bytes:
    sizes = {cb.size for cb in stack.layers}
    if len(sizes) != 1:
        raise FormatError("the codebook container requires a uniform codebook size")
    header = _CB_HEADER.pack(CODEBOOK_MAGIC, stack.codebook_size, stack.dim, stack.depth, stack.seed)
    body = b"".join(np.ascontiguousarray(cb.entries, dtype="<f4").tobytes() for cb in stack.layers)
    return header + body


def stack_from_bytes(data: bytes, sidecar: dict | None = None) -> RvqStack:
    if len(data) < _CB_HEADER.size:
        raise FormatError("codebook file truncated")
    magic, k, d, depth, seed = _CB_HEADER.unpack_from(data)
    if magic != CODEBOOK_MAGIC:
        raise FormatError(f"bad codebook magic {magic!r}")
    expected = _CB_HEADER.size + depth * k * d * 4
    if len(data) != expected:
        raise FormatError(f"codebook file is {len(data)} bytes, expected {expected}")
    sidecar = sidecar or {}
    pinned = sidecar.get("pinned_zero", [False] * depth)
    flat = np.frombuffer(data, dtype="<f4", offset=_CB_HEADER.size).reshape(depth, k, d)
    layers = [
        Codebook(
            layer_index=i,
            entries=flat[i].astype(np.float32),
            usage_counts=np.ones(k),
            ema_sums=flat[i].astype(np.float64),
            pinned_zero=bool(pinned[i]),
        )
        for i in range(depth)
    ]
    return RvqStack(
        layers=layers,
        frame_rate_hz=float(sidecar.get("frame_rate_hz", DEFAULT_FRAME_RATE_HZ)),
        seed=seed,
        distortions=list(sidecar.get("distortions", [])),
        distortion_history=list(sidecar.get("distortion_history", [])),
    )


def _sidecar_path(path) -> Path:
    return Path(str(path) + ".json")


def save_stack(path, stack: RvqStack, config: TrainConfig | None = None, extra: dict | None = None) -> None:
    """Write the binary container and its JSON sidecar."""
    meta = {
        "schema_version": SIDECAR_SCHEMA,
        "codebook_size": stack.codebook_size,
        "dim": stack.dim,
        "depth": stack.depth,
        "seed": stack.seed,
        "frame_rate_hz": stack.frame_rate_hz,
        "pinned_zero": [cb.pinned_zero for cb in stack.layers],
        "distortions": stack.distortions,
        "distortion_history": stack.distortion_history,
    }
    if config is not None:
        meta["train_config"] = asdict(config)
    if extra:
        meta.update(extra)
    atomic_write_bytes(path, stack_to_bytes(stack))
    atomic_write_text(_sidecar_path(path), json.dumps(meta, indent=2, sort_keys=True))


def load_stack(path) -> RvqStack:
    sidecar = None
    sp = _sidecar_path(path)
    if sp.exists():
        sidecar = json.loads(sp.read_text())
        major = str(sidecar.get("schema_version", "1.0")).split(".")[0]
        if major != SIDECAR_SCHEMA.split(".")[0]:
            raise FormatError(f"unsupported sidecar schema version {sidecar.get('schema_version')}")
    return stack_from_bytes(Path(path).read_bytes(), sidecar)


def tokens_to_bytes(codes, depth: int, frame_rate_hz: float = DEFAULT_FRAME_RATE_HZ) -> bytes:
    arr = np.asarray(codes)
    if arr.ndim != 2 or arr.shape[1] != NUM_LAYERS:
        raise DimensionError(f"token stream needs (N, {NUM_LAYERS}) codes, got {arr.shape}")
    if arr.size and (arr.min() < 0 or arr.max() > 0xFFFF):
        raise CodeRangeError("token indices must fit in u16")
    if not 1 <= depth <= NUM_LAYERS:
        raise ConfigError(f"depth must be in 1..{NUM_LAYERS}")
    header = _TOK_HEADER.pack(TOKENS_MAGIC, depth, float(frame_rate_hz), arr.shape[0])
    return header + np.ascontiguousarray(arr, dtype="<u2").tobytes()


def tokens_from_bytes(data: bytes) -> tuple[np.ndarray, int, float]:
    """Parse a token stream into ``(codes, depth, frame_rate_hz)``."""
    if len(data) < _TOK_HEADER.size:
        raise FormatError("token stream truncated")
    magic, depth, rate, count = _TOK_HEADER.unpack_from(data)
    if magic != TOKENS_MAGIC:
        raise FormatError(f"bad token stream magic {magic!r}")
    expected = _TOK_HEADER.size + count * NUM_LAYERS * 2
    if len(data) != expected:
        raise FormatError(f"token stream is {len(data)} bytes, expected {expected}")
    codes = np.frombuffer(data, dtype="<u2", offset=_TOK_HEADER.size).reshape(count, NUM_LAYERS)
    return codes.astype(np.int64), depth, rate


def read_token_header(fh) -> tuple[int, float, int]:
    """Read the token stream header from an open binary file: ``(depth, frame_rate_hz, frame_count)``."""
    head = fh.read(_TOK_HEADER.size)
    if len(head) != _TOK_HEADER.size:
        raise FormatError("token stream truncated")
    magic, depth, rate, count = _TOK_HEADER.unpack(head)
    if magic != TOKENS_MAGIC:
        raise FormatError(f"bad token stream magic {magic!r}")
    return depth, rate, count


def iter_token_blocks(fh, frame_count: int, read_frames: int = 64):
    """Yield (n, 16) code blocks from an open token stream positioned after its header."""
    frame_bytes = NUM_LAYERS * 2
    remaining = frame_count
    while remaining:
        n = min(read_frames, remaining)
        block = fh.read(n * frame_bytes)
        if len(block) != n * frame_bytes:
            raise FormatError("token stream ended early")
        remaining -= n
        yield np.frombuffer(block, dtype="<u2").reshape(n, NUM_LAYERS).astype(np.int64)


def save_tokens(path: str | os.PathLike, codes, depth: int, frame_rate_hz: float = DEFAULT_FRAME_RATE_HZ) -> None:
    atomic_write_bytes(path, tokens_to_bytes(codes, depth, frame_rate_hz))


def load_tokens(path: str | os.PathLike) -> tuple[np.ndarray, int, float]:
    return tokens_from_bytes(Path(path).read_bytes())


def perplexity(indices: Sequence[int] | np.ndarray, k: int) -> float:
    """exp(entropy) of the empirical code distribution; lies in [1, k]."""
    idx = np.asarray(indices, dtype=np.int64)
    if idx.size == 0:
        return 1.0
    counts = np.bincount(idx, minlength=k).astype(np.float64)
    p = counts[counts > 0] / idx.size
    return float(np.exp(-np.sum(p * np.log(p))))
