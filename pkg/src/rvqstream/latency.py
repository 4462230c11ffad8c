"""Discrete-event latency model of the streaming LM + tokenizer-decoder pipeline.

All times are kept as :class:`fractions.Fraction` milliseconds so that sums
such as TTFP + decode TPP are exact. Conversion to float happens only when
writing JSON or CSV.

Timing model
------------
* The LM delivers the first ``first_decodable_tokens`` tokens together at
  ``lm_ttfp_ms``; that cost is opaque (prefill plus first group).
* After that, each packet's worth of tokens costs ``lm_tpp_ms``, with token
  completions spaced uniformly inside the packet.
* Packet ``i`` covers tokens ``[i*P, (i+1)*P)`` and needs
  ``first_decodable_tokens + i*P`` tokens before its decode can start.
  Decode takes ``decode_tpp_ms``; audio is emitted when decode ends.
* The first packet loses ``vocoder_lookahead_ms`` of audio to right context.
* ``overlap=True`` runs the decoder alongside the LM; ``overlap=False``
  pauses the LM while a packet decodes. First-packet latency is the same
  either way.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from importlib import resources
from typing import Iterable, Sequence

from .errors import ConfigError, NoPacketError

REPORT_SCHEMA = "1.0"


def _q(value) -> Fraction:
    """Exact rational from an int, decimal string, float literal or Fraction."""
    if isinstance(value, Fraction):
        return value
    if isinstance(value, float):
        return Fraction(repr(value))
    return Fraction(value)


def _num(value: Fraction) -> int | float:
    return int(value) if value.denominator == 1 else float(value)


@dataclass(frozen=True)
class PipelineConfig:
    name: str
    token_rate_hz: Fraction
    packet_tokens: int
    vocoder_lookahead_ms: Fraction
    first_decodable_tokens: int
    lm_ttfp_ms: Fraction = Fraction(0)
    lm_tpp_ms: Fraction = Fraction(0)
    decode_tpp_ms: Fraction = Fraction(0)
    concurrency: int = 1
    reference_rtf: float | None = None
    reference_first_packet_ms: Fraction | None = None

    def __post_init__(self) -> None:
        for f in ("token_rate_hz", "vocoder_lookahead_ms", "lm_ttfp_ms", "lm_tpp_ms", "decode_tpp_ms"):
            object.__setattr__(self, f, _q(getattr(self, f)))
        if self.reference_first_packet_ms is not None:
            object.__setattr__(self, "reference_first_packet_ms", _q(self.reference_first_packet_ms))
        if self.token_rate_hz <= 0:
            raise ConfigError("token_rate_hz must be positive")
        if self.packet_tokens < 1:
            raise ConfigError("packet_tokens must be at least 1")
        if self.first_decodable_tokens < self.packet_tokens:
            raise ConfigError("first_decodable_tokens must be >= packet_tokens")
        if min(self.lm_ttfp_ms, self.lm_tpp_ms, self.decode_tpp_ms, self.vocoder_lookahead_ms) < 0:
            raise ConfigError("costs and lookahead must be non-negative")
        if self.vocoder_lookahead_ms >= self.packet_audio_ms:
            raise ConfigError("vocoder lookahead would leave the first packet empty")

    @property
    def token_ms(self) -> Fraction:
        return Fraction(1000) / self.token_rate_hz

    @property
    def packet_audio_ms(self) -> Fraction:
        return self.packet_tokens * self.token_ms

    @classmethod
    def preset(cls, pipeline: str, lm_ttfp_ms=0, lm_tpp_ms=0, decode_tpp_ms=0, **kw) -> "PipelineConfig":
        """Timing skeleton of the 25 Hz (chunked DiT + vocoder) or 12 Hz (causal codec) pipeline."""
        key = pipeline.lower().replace("-", "").replace("_", "")
        if key in ("25hz", "25"):
            base = dict(token_rate_hz=25, packet_tokens=8, vocoder_lookahead_ms=130, first_decodable_tokens=16)
        elif key in ("12hz", "12.5hz", "12", "12.5"):
            base = dict(token_rate_hz=Fraction(25, 2), packet_tokens=4, vocoder_lookahead_ms=0,
                        first_decodable_tokens=4)
        else:
            raise ConfigError(f"unknown pipeline {pipeline!r}; expected 25hz or 12hz")
        base.update(kw)
        base.setdefault("name", key)
        return cls(lm_ttfp_ms=lm_ttfp_ms, lm_tpp_ms=lm_tpp_ms, decode_tpp_ms=decode_tpp_ms, **base)

    @property
    def pipeline(self) -> str:
        return "25hz" if self.token_rate_hz == 25 else "12hz" if self.token_rate_hz == Fraction(25, 2) else "custom"


def first_packet_latency(config: PipelineConfig) -> Fraction:
    return config.lm_ttfp_ms + config.decode_tpp_ms


@dataclass(frozen=True)
class Event:
    t_ms: Fraction
    kind: str  # token_done | decode_start | decode_end | packet_emit
    index: int
    audio_ms: Fraction | None = None

    def to_dict(self) -> dict:
        d = {"t_ms": _num(self.t_ms), "event": self.kind, "index": self.index}
        if self.audio_ms is not None:
            d["audio_ms"] = _num(self.audio_ms)
        return d


@dataclass(frozen=True)
class LatencyReport:
    first_packet_latency_ms: Fraction
    first_packet_audio_ms: Fraction
    steady_packet_period_ms: Fraction
    total_compute_ms: Fraction
    audio_out_ms: Fraction
    rtf: Fraction
    packets: int
    tokens: int
    wall_ms: Fraction
    realtime_capable: bool
    packet_audio_ms: tuple[Fraction, ...] = field(default=(), repr=False)

    def to_dict(self) -> dict:
        d = {
            "schema_version": REPORT_SCHEMA,
            "first_packet_latency_ms": _num(self.first_packet_latency_ms),
            "first_packet_audio_ms": _num(self.first_packet_audio_ms),
            "steady_packet_period_ms": _num(self.steady_packet_period_ms),
            "total_compute_ms": _num(self.total_compute_ms),
            "audio_out_ms": _num(self.audio_out_ms),
            "rtf": float(self.rtf),
            "packets": self.packets,
            "tokens": self.tokens,
            "wall_ms": _num(self.wall_ms),
            "realtime_capable": self.realtime_capable,
        }
        return d


@dataclass(frozen=True)
class _Packet:
    index: int
    first_token: int
    tokens: int
    required: int
    flush: bool = False


def _plan_packets(config: PipelineConfig, total_tokens: int, flush: bool) -> list[_Packet]:
    f, p = config.first_decodable_tokens, config.packet_tokens
    if total_tokens < f:
        raise NoPacketError(f"{total_tokens} tokens never reach the {f} needed for a first packet")
    n_regular = 1 + (total_tokens - f) // p
    packets = [_Packet(i, i * p, p, f + i * p) for i in range(n_regular)]
    if flush:
        i = n_regular
        while i * p < total_tokens:
            packets.append(_Packet(i, i * p, min(p, total_tokens - i * p), total_tokens, flush=True))
            i += 1
    return packets


def _lm_token_times(config: PipelineConfig, total_tokens: int) -> list[Fraction]:
    f, p = config.first_decodable_tokens, config.packet_tokens
    step = config.lm_tpp_ms / p
    return [config.lm_ttfp_ms if j < f else config.lm_ttfp_ms + (j - f + 1) * step for j in range(total_tokens)]


def simulate(config: PipelineConfig, total_tokens: int, *, overlap: bool = True, flush: bool = False,
             token_times: Sequence | None = None) -> tuple[LatencyReport, list[Event]]:
    """Run the event model for a session of ``total_tokens`` LM tokens.

    ``token_times`` replaces the LM timing model with measured completion
    times (for replaying a session transcript); it implies ``overlap``.
    """
    packets = _plan_packets(config, total_tokens, flush)
    dec = config.decode_tpp_ms
    events: list[Event] = []
    emits: list[Fraction] = []
    audio: list[Fraction] = []

    def packet_audio(pk: _Packet) -> Fraction:
        a = pk.tokens * config.token_ms
        return a - config.vocoder_lookahead_ms if pk.index == 0 else a

    if token_times is not None or overlap:
        if token_times is not None:
            times = [_q(t) for t in token_times]
            if len(times) != total_tokens:
                raise ConfigError(f"{len(times)} token times for {total_tokens} tokens")
            if any(b < a for a, b in zip(times, times[1:])):
                raise ConfigError("token completion times must be non-decreasing")
        else:
            times = _lm_token_times(config, total_tokens)
        events.extend(Event(t, "token_done", j) for j, t in enumerate(times))
        free_at = Fraction(0)
        for pk in packets:
            start = max(times[pk.required - 1], free_at)
            end = start + dec
            free_at = end
            a = packet_audio(pk)
            events += [Event(start, "decode_start", pk.index), Event(end, "decode_end", pk.index),
                       Event(end, "packet_emit", pk.index, a)]
            emits.append(end)
            audio.append(a)
    else:
        # single shared resource: the LM is paused while a packet decodes
        step = config.lm_tpp_ms / config.packet_tokens
        f = config.first_decodable_tokens
        t = config.lm_ttfp_ms
        generated = min(f, total_tokens)
        events.extend(Event(t, "token_done", j) for j in range(generated))
        queue = list(packets)
        while queue or generated < total_tokens:
            while queue and queue[0].required <= generated:
                pk = queue.pop(0)
                a = packet_audio(pk)
                events += [Event(t, "decode_start", pk.index), Event(t + dec, "decode_end", pk.index),
                           Event(t + dec, "packet_emit", pk.index, a)]
                t += dec
                emits.append(t)
                audio.append(a)
            if generated < total_tokens:
                t += step
                events.append(Event(t, "token_done", generated))
                generated += 1

    order = {"token_done": 0, "decode_start": 1, "decode_end": 2, "packet_emit": 3}
    events.sort(key=lambda e: (e.t_ms, order[e.kind], e.index))

    lm_compute = (config.lm_ttfp_ms + (total_tokens - config.first_decodable_tokens)
                  * config.lm_tpp_ms / config.packet_tokens)
    total_compute = lm_compute + len(packets) * dec
    audio_out = sum(audio, Fraction(0))
    regular = [e for e, pk in zip(emits, packets) if not pk.flush]
    if len(regular) >= 2:
        period = regular[-1] - regular[-2]
    else:
        period = max(config.lm_tpp_ms, dec) if overlap else config.lm_tpp_ms + dec
    report = LatencyReport(
        first_packet_latency_ms=emits[0],
        first_packet_audio_ms=audio[0],
        steady_packet_period_ms=period,
        total_compute_ms=total_compute,
        audio_out_ms=audio_out,
        rtf=total_compute / audio_out,
        packets=len(packets),
        tokens=total_tokens,
        wall_ms=emits[-1],
        realtime_capable=period <= config.packet_audio_ms,
        packet_audio_ms=tuple(audio),
    )
    return report, events


def replay_transcript(records: Iterable[dict], config: PipelineConfig, flush: bool = False):
    """Simulate decoding using the frame emission times of a session transcript."""
    times = [r["t_frame_out"] for r in sorted(records, key=lambda r: r["step"])]
    return simulate(config, len(times), token_times=times, flush=flush)


def trace_to_jsonl(events: Iterable[Event]) -> str:
    return "".join(json.dumps(e.to_dict()) + "\n" for e in events)


# ---------------------------------------------------------------------------
# sweeps

SWEEP_INPUT_FIELDS = ("name", "pipeline", "concurrency", "lm_ttfp_ms", "decode_tpp_ms", "lm_tpp_ms",
                      "reference_first_packet_ms", "reference_rtf", "tokens")
SWEEP_OUTPUT_FIELDS = ("name", "pipeline", "concurrency", "tokens", "packets", "lm_ttfp_ms", "decode_tpp_ms",
                       "lm_tpp_ms", "first_packet_latency_ms", "reference_first_packet_ms",
                       "first_packet_audio_ms", "steady_packet_period_ms", "realtime_capable",
                       "total_compute_ms", "audio_out_ms", "rtf", "reference_rtf")
DEFAULT_SESSION_MS = 10_000


def default_tokens(config: PipelineConfig) -> int:
    """Tokens for a 10 s session, never fewer than one packet's requirement."""
    return max(config.first_decodable_tokens, math.ceil(DEFAULT_SESSION_MS / config.token_ms))


def read_sweep_csv(text: str) -> list[tuple[PipelineConfig, int | None]]:
    """Parse sweep rows; lines starting with ``#`` are comments."""
    lines = [ln for ln in text.splitlines() if ln.strip() and not ln.lstrip().startswith("#")]
    rows = []
    for raw in csv.DictReader(lines):
        row = {k.strip(): (v.strip() if v is not None else "") for k, v in raw.items()}
        missing = {"pipeline", "lm_ttfp_ms", "decode_tpp_ms", "lm_tpp_ms"} - {k for k, v in row.items() if v}
        if missing:
            raise ConfigError(f"sweep row lacks {sorted(missing)}: {raw}")
        cfg = PipelineConfig.preset(
            row["pipeline"],
            lm_ttfp_ms=_q(row["lm_ttfp_ms"]),
            lm_tpp_ms=_q(row["lm_tpp_ms"]),
            decode_tpp_ms=_q(row["decode_tpp_ms"]),
            name=row.get("name") or row["pipeline"],
            concurrency=int(row.get("concurrency") or 1),
            reference_rtf=float(row["reference_rtf"]) if row.get("reference_rtf") else None,
            reference_first_packet_ms=_q(row["reference_first_packet_ms"]) if row.get("reference_first_packet_ms") else None,
        )
        tokens = int(row["tokens"]) if row.get("tokens") else None
        rows.append((cfg, tokens))
    return rows


def sweep(configs: Sequence[PipelineConfig | tuple[PipelineConfig, int | None]], *,
          overlap: bool = True) -> list[dict]:
    if not configs:
        raise ConfigError("sweep needs at least one config")
    out = []
    for item in configs:
        cfg, tokens = item if isinstance(item, tuple) else (item, None)
        tokens = tokens or default_tokens(cfg)
        rep, _ = simulate(cfg, tokens, overlap=overlap)
        assert rep.first_packet_latency_ms == first_packet_latency(cfg)
        out.append({
            "name": cfg.name,
            "pipeline": cfg.pipeline,
            "concurrency": cfg.concurrency,
            "tokens": tokens,
            "packets": rep.packets,
            "lm_ttfp_ms": cfg.lm_ttfp_ms,
            "decode_tpp_ms": cfg.decode_tpp_ms,
            "lm_tpp_ms": cfg.lm_tpp_ms,
            "first_packet_latency_ms": rep.first_packet_latency_ms,
            "reference_first_packet_ms": cfg.reference_first_packet_ms,
            "first_packet_audio_ms": rep.first_packet_audio_ms,
            "steady_packet_period_ms": rep.steady_packet_period_ms,
            "realtime_capable": rep.realtime_capable,
            "total_compute_ms": rep.total_compute_ms,
            "audio_out_ms": rep.audio_out_ms,
            "rtf": rep.rtf,
            "reference_rtf": cfg.reference_rtf,
        })
    return out


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, Fraction):
        return str(v.numerator) if v.denominator == 1 else f"{float(v):.6g}"
    return str(v)


def sweep_to_csv(rows: Sequence[dict]) -> str:
    buf = io.StringIO()
    buf.write(f"# sweep report schema {REPORT_SCHEMA}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SWEEP_OUTPUT_FIELDS)
    for r in rows:
        w.writerow([_cell(r[f]) for f in SWEEP_OUTPUT_FIELDS])
    return buf.getvalue()


def bundled_configs() -> str:
    """The bundled twelve-row measured cost table."""
    return resources.files("rvqstream").joinpath("data/table5.csv").read_text()

