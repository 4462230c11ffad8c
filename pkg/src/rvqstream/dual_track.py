"""Dual-track session scheduling with per-frame hierarchical code generation.

Each autoregressive step pairs one text-channel symbol (a real token, or the
pad symbol once text runs out) with exactly one 16-code audio frame. The
backbone predicts code 0 from the step input; the MTP head then fills codes
1..15 conditioned on code 0 only. The step models here are deterministic
toys that exercise this contract without any neural inference.
"""

from __future__ import annotations

import json
import zlib
from dataclasses import dataclass, field
from typing import Protocol, Sequence

import numpy as np

from .errors import ConfigError, MaxStepsExceeded, ModelContractError
from .rvq import NUM_LAYERS

PAD = "<pad>"
DEFAULT_CONTEXT_FRAMES = 4


def tokenize(text: str, mode: str = "whitespace") -> list[str]:
    """Whitespace or byte-level symbols; a stand-in for a real subword tokenizer."""
    if mode == "whitespace":
        return text.split()
    if mode == "bytes":
        return [f"<0x{b:02x}>" for b in text.encode("utf-8")]
    raise ConfigError(f"unknown tokenizer mode {mode!r}")


def _stable_hash(token: str, salt: int = 0) -> int:
    return zlib.crc32(f"{salt}\x00{token}".encode("utf-8"))


@dataclass(frozen=True)
class StepInput:
    step: int
    text_token: str
    history: tuple[np.ndarray, ...] = ()
    speaker: tuple[float, ...] | None = None

    def context_summary(self) -> np.ndarray:
        """Mean code-index vector over the retained history frames."""
        if not self.history:
            return np.zeros(NUM_LAYERS)
        return np.mean(np.stack(self.history), axis=0)


class StepModel(Protocol):
    codebook_size: int

    def backbone(self, step_input: StepInput) -> int: ...

    def mtp(self, step_input: StepInput, zeroth: int) -> Sequence[int]: ...


@dataclass(frozen=True)
class ConstantModel:
    codes: tuple[int, ...]
    codebook_size: int = 2048

    def backbone(self, step_input: StepInput) -> int:
        return self.codes[0]

    def mtp(self, step_input: StepInput, zeroth: int) -> Sequence[int]:
        return self.codes[1:]


@dataclass(frozen=True)
class EchoModel:
    """Code 0 is a hash of the text token; residual codes are a fixed function of code 0."""

    codebook_size: int = 2048
    seed: int = 0

    def backbone(self, step_input: StepInput) -> int:
        return _stable_hash(step_input.text_token, self.seed) % self.codebook_size

    def mtp(self, step_input: StepInput, zeroth: int) -> Sequence[int]:
        k = self.codebook_size
        return [(zeroth * (2 * j + 3) + 7919 * (j + 1) + self.seed) % k for j in range(NUM_LAYERS - 1)]


class MarkovModel:
    """Seeded order-1 tables: (previous code 0, text bucket) -> code 0 -> residual codes."""

    def __init__(self, codebook_size: int = 2048, seed: int = 0, text_buckets: int = 64):
        self.codebook_size = codebook_size
        self.seed = seed
        self.text_buckets = text_buckets
        rng = np.random.default_rng([seed, 0x4D4B])
        # row ``codebook_size`` is the start state
        self._transition = rng.integers(0, codebook_size, size=(codebook_size + 1, text_buckets))
        self._residual = rng.integers(0, codebook_size, size=(codebook_size, NUM_LAYERS - 1))
        self._transition.flags.writeable = False
        self._residual.flags.writeable = False

    def backbone(self, step_input: StepInput) -> int:
        prev = int(step_input.history[-1][0]) if step_input.history else self.codebook_size
        bucket = _stable_hash(step_input.text_token, self.seed) % self.text_buckets
        return int(self._transition[prev, bucket])

    def mtp(self, step_input: StepInput, zeroth: int) -> Sequence[int]:
        return self._residual[zeroth].tolist()


def assemble_step(step: int, text: str | None, prev_frames: Sequence[np.ndarray],
                  context_frames: int = DEFAULT_CONTEXT_FRAMES,
                  speaker: Sequence[float] | None = None) -> StepInput:
    """Pair the incoming text symbol (or pad) with the recent frame history."""
    history = tuple(np.asarray(f) for f in prev_frames[-context_frames:]) if context_frames else ()
    return StepInput(
        step=step,
        text_token=PAD if text is None else text,
        history=history,
        speaker=None if speaker is None else tuple(float(v) for v in speaker),
    )


def generate_frame(model: StepModel, step_input: StepInput) -> np.ndarray:
    k = model.codebook_size
    zeroth = model.backbone(step_input)
    if not isinstance(zeroth, (int, np.integer)) or not 0 <= zeroth < k:
        raise ModelContractError(f"backbone emitted {zeroth!r}, outside [0, {k})")
    rest = list(model.mtp(step_input, int(zeroth)))
    if len(rest) != NUM_LAYERS - 1:
        raise ModelContractError(f"MTP emitted {len(rest)} residual codes, expected {NUM_LAYERS - 1}")
    for j, c in enumerate(rest, start=1):
        if not isinstance(c, (int, np.integer)) or not 0 <= c < k:
            raise ModelContractError(f"MTP code {j} is {c!r}, outside [0, {k})")
    return np.array([zeroth, *rest], dtype=np.int64)


@dataclass(frozen=True)
class StopRule:
    """When a session ends.

    ``max_steps`` and ``pad_steps`` (steps after text runs out) end the
    session cleanly; a backbone code equal to ``stop_code`` ends it without
    emitting that frame. Passing ``guard`` steps with no rule firing raises
    :class:`MaxStepsExceeded`.
    """

    max_steps: int | None = None
    pad_steps: int | None = None
    stop_code: int | None = None
    guard: int = 100_000


@dataclass
class Session:
    frames: np.ndarray
    records: list[dict]
    events: list[tuple[str, int, float]] = field(default_factory=list)

    def to_jsonl(self) -> str:
        return "".join(json.dumps(r, sort_keys=True) + "\n" for r in self.records)


def run_session(text: Sequence[str], model: StepModel, stop_rule: StopRule, *,
                context_frames: int = DEFAULT_CONTEXT_FRAMES, speaker: Sequence[float] | None = None,
                text_interval_ms: float = 0.0, step_ms: float = 1.0) -> Session:
    """Run the dual-track loop until ``stop_rule`` fires.

    Times are on a logical clock: real text token ``n`` arrives at
    ``n * text_interval_ms``, pads are available immediately, and each step
    emits its frame ``step_ms`` after both its text symbol and the previous
    frame are available.
    """
    text = list(text)
    frames: list[np.ndarray] = []
    records: list[dict] = []
    events: list[tuple[str, int, float]] = []
    last_out = 0.0
    step = 0
    while True:
        if stop_rule.max_steps is not None and step >= stop_rule.max_steps:
            break
        if stop_rule.pad_steps is not None and step >= len(text) + stop_rule.pad_steps:
            break
        if step >= stop_rule.guard:
            raise MaxStepsExceeded(f"no stop rule fired within {stop_rule.guard} steps")

        if step < len(text):
            token, t_in = text[step], step * text_interval_ms
        else:
            token, t_in = None, last_out
        events.append(("text_in", step, t_in))
        inp = assemble_step(step, token, frames, context_frames, speaker)
        frame = generate_frame(model, inp)
        if stop_rule.stop_code is not None and frame[0] == stop_rule.stop_code:
            events.append(("stop", step, t_in))
            break
        t_out = max(t_in, last_out) + step_ms
        events.append(("frame_out", step, t_out))
        frames.append(frame)
        rec = {
            "step": step,
            "text_token": inp.text_token,
            "codes": frame.tolist(),
            "t_text_in": t_in,
            "t_frame_out": t_out,
        }
        if step == 0 and speaker is not None:
            rec["speaker"] = list(inp.speaker)
        records.append(rec)
        last_out = t_out
        step += 1

    arr = np.stack(frames) if frames else np.zeros((0, NUM_LAYERS), dtype=np.int64)
    return Session(arr, records, events)


def read_transcript(text: str) -> list[dict]:
    records = [json.loads(line) for line in text.splitlines() if line.strip()]
    for i, r in enumerate(records):
        missing = {"step", "text_token", "codes", "t_text_in", "t_frame_out"} - r.keys()
        if missing:
            raise ValueError(f"transcript line {i} lacks {sorted(missing)}")
        if len(r["codes"]) != NUM_LAYERS:
            raise ValueError(f"transcript line {i} has {len(r['codes'])} codes")
    return records
