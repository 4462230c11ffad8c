"""Command-line front end.

Every subcommand accepts ``--seed`` and ``--config``. A config file (TOML or
JSON) may set any option either at top level or inside a table named after
the subcommand; explicit flags win over the file, and the file wins over
built-in defaults. Each run writes ``run-manifest.json`` with the argv,
seed, package versions and SHA-256 checksums of inputs and outputs.

Exit codes: 0 success, 1 runtime error, 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import platform
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import __version__
from ._io import atomic_write_bytes, atomic_write_text, sha256_file
from .bench import SyntheticCorpusSpec, eval_codec, gen_corpus
from .blocks import BlockPartition, build_mask, mask_to_pbm, schedule_chunks
from .dual_track import ConstantModel, EchoModel, MarkovModel, StopRule, read_transcript, run_session, tokenize
from .errors import RvqStreamError
from .latency import (
    PipelineConfig,
    bundled_configs,
    read_sweep_csv,
    replay_transcript,
    simulate,
    sweep,
    sweep_to_csv,
    trace_to_jsonl,
)
from .rvq import (
    TrainConfig,
    decode,
    encode,
    iter_token_blocks,
    load_stack,
    load_tokens,
    read_token_header,
    save_stack,
    save_tokens,
    semantic_alignment_loss,
    train_codebooks,
)
from .stream import FirFilter, StreamCodec, pack_frame

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib


class _Manifest:
    def __init__(self, command: str, argv: list[str], seed: int):
        self.command = command
        self.argv = argv
        self.seed = seed
        self.inputs: dict[str, str] = {}
        self.outputs: dict[str, str] = {}

    def input(self, path) -> Path:
        p = Path(path)
        self.inputs[str(p)] = sha256_file(p)
        return p

    def output(self, path) -> Path:
        p = Path(path)
        self.outputs[str(p)] = sha256_file(p)
        return p

    def write(self, path: Path) -> None:
        doc = {
            "schema_version": "1.0",
            "tool": "rvqstream",
            "tool_version": __version__,
            "python": platform.python_version(),
            "numpy": np.__version__,
            "command": self.command,
            "argv": self.argv,
            "seed": self.seed,
            "inputs": self.inputs,
            "outputs": self.outputs,
        }
        atomic_write_text(path, json.dumps(doc, indent=2, sort_keys=True) + "\n")


def _write_json(path, obj) -> None:
    atomic_write_text(path, json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _save_npy(path, arr: np.ndarray) -> None:
    import io

    buf = io.BytesIO()
    np.save(buf, arr, allow_pickle=False)
    atomic_write_bytes(path, buf.getvalue())


def _load_npy(path) -> np.ndarray:
    return np.load(path, allow_pickle=False)


def _require(args, *names):
    missing = [n for n in names if getattr(args, n, None) in (None, "")]
    if missing:
        raise _UsageError(f"{args.command}: missing required option(s): "
                          + ", ".join("--" + n.replace("_", "-") for n in missing))


class _UsageError(Exception):
    pass


# ---------------------------------------------------------------------------
# subcommands


def cmd_gen_corpus(args, m: _Manifest):
    _require(args, "out")
    spec = SyntheticCorpusSpec(
        kind=args.kind, frames=args.frames, dim=args.dim, seed=args.seed, components=args.components,
        sigma=args.sigma, mean_scale=args.mean_scale, frame_rate_hz=args.frame_rate_hz,
        weights=tuple(args.weights) if args.weights else None,
    )
    corpus = gen_corpus(spec)
    _save_npy(args.out, corpus.frames)
    m.output(args.out)
    summary = {"schema_version": "1.0", "spec": asdict(spec), **corpus.summary(),
               "sha256": m.outputs[str(Path(args.out))]}
    _write_json(str(args.out) + ".json", summary)
    m.output(str(args.out) + ".json")
    return [args.out]


def cmd_train_codebook(args, m: _Manifest):
    _require(args, "corpus", "out")
    data = _load_npy(m.input(args.corpus))
    cfg = TrainConfig(
        codebook_size=args.k, dim=data.shape[1], depth=args.depth, epochs=args.epochs, decay=args.decay,
        dead_code_threshold=args.dead_threshold, seed=args.seed, pin_zero_acoustic=not args.no_pin_zero,
        frame_rate_hz=args.frame_rate_hz, workers=args.workers,
    )
    stack = train_codebooks(data, cfg)
    save_stack(args.out, stack, cfg)
    m.output(args.out)
    m.output(str(args.out) + ".json")
    print(json.dumps({"distortions": stack.distortions}))
    return [args.out]


def cmd_encode(args, m: _Manifest):
    _require(args, "codebook", "corpus", "out")
    stack = load_stack(m.input(args.codebook))
    data = _load_npy(m.input(args.corpus))
    depth = args.depth or stack.depth
    codes, _ = encode(data, stack, depth)
    save_tokens(args.out, codes, depth, stack.frame_rate_hz)
    m.output(args.out)
    return [args.out]


def cmd_decode(args, m: _Manifest):
    _require(args, "codebook", "tokens", "out")
    stack = load_stack(m.input(args.codebook))
    codes, depth, _ = load_tokens(m.input(args.tokens))
    depth = args.depth or depth
    if args.fir:
        feats = StreamCodec(stack, FirFilter(tuple(args.fir)), depth).decode_offline(codes)
    else:
        feats = decode(codes, stack, depth)
    _save_npy(args.out, feats)
    m.output(args.out)
    return [args.out]


def cmd_stream_decode(args, m: _Manifest):
    _require(args, "codebook", "tokens")
    stack = load_stack(m.input(args.codebook))
    taps = tuple(args.fir) if args.fir else None
    out_fh = open(args.out, "wb") if args.out else sys.stdout.buffer
    try:
        with open(args.tokens, "rb") as fh:
            depth, rate, count = read_token_header(fh)
            codec = StreamCodec(stack, FirFilter(taps) if taps else None, args.depth or depth, rate)
            state = codec.new_state()
            index = 0
            for block in iter_token_blocks(fh, count, args.read_frames):
                for codes in block:
                    out_fh.write(pack_frame(index, codec.push_decode(state, codes)))
                    index += 1
                out_fh.flush()
    finally:
        if args.out:
            out_fh.close()
    if args.out:
        m.output(args.out)
        return [args.out]
    return []


def cmd_mask_dump(args, m: _Manifest):
    _require(args, "pbm", "csv")
    part = BlockPartition(args.chunk_size, args.tokens, args.lookback, args.lookahead)
    mask = build_mask(part)
    sched = schedule_chunks(part, args.token_ms, args.vocoder_lookahead_ms)
    atomic_write_text(args.pbm, mask_to_pbm(mask.token_mask()))
    atomic_write_text(args.csv, sched.to_csv())
    m.output(args.pbm)
    m.output(args.csv)
    return [args.pbm, args.csv]


def _model(args):
    if args.model == "echo":
        return EchoModel(args.k, args.seed)
    if args.model == "markov":
        return MarkovModel(args.k, args.seed)
    if args.model == "constant":
        codes = tuple(args.constant_codes or [0] * 16)
        if len(codes) != 16:
            raise _UsageError("--constant-codes takes exactly 16 integers")
        return ConstantModel(codes, args.k)
    raise _UsageError(f"unknown model {args.model!r}")


def cmd_session(args, m: _Manifest):
    _require(args, "out")
    if args.text_file:
        text = Path(m.input(args.text_file)).read_text()
    else:
        text = args.text or ""
    tokens = tokenize(text, args.tokenizer)
    rule = StopRule(max_steps=args.max_steps, pad_steps=args.pad_steps, stop_code=args.stop_code,
                    guard=args.guard)
    sess = run_session(tokens, _model(args), rule, context_frames=args.context_frames,
                       speaker=args.speaker, text_interval_ms=args.text_interval_ms, step_ms=args.step_ms)
    atomic_write_text(args.out, sess.to_jsonl())
    m.output(args.out)
    print(json.dumps({"frames": int(sess.frames.shape[0])}))
    return [args.out]


def cmd_simulate(args, m: _Manifest):
    cfg = PipelineConfig.preset(args.pipeline, lm_ttfp_ms=args.ttfp_ms, lm_tpp_ms=args.lm_tpp_ms,
                                decode_tpp_ms=args.decode_tpp_ms)
    if args.transcript:
        records = read_transcript(Path(m.input(args.transcript)).read_text())
        report, trace = replay_transcript(records, cfg, flush=args.flush)
    else:
        tokens = args.tokens if args.tokens is not None else cfg.first_decodable_tokens
        report, trace = simulate(cfg, tokens, overlap=not args.serial, flush=args.flush)
    doc = {"pipeline": cfg.pipeline, "overlap": not args.serial, **report.to_dict()}
    text = json.dumps(doc, indent=2, sort_keys=True) + "\n"
    outputs = []
    if args.trace_out:
        atomic_write_text(args.trace_out, trace_to_jsonl(trace))
        m.output(args.trace_out)
        outputs.append(args.trace_out)
    if args.out:
        atomic_write_text(args.out, text)
        m.output(args.out)
        outputs.append(args.out)
    else:
        sys.stdout.write(text)
    return outputs


def cmd_sweep(args, m: _Manifest):
    if args.input:
        text = Path(m.input(args.input)).read_text()
    else:
        text = bundled_configs()
    rows = sweep(read_sweep_csv(text), overlap=not args.serial)
    out = sweep_to_csv(rows)
    if args.out:
        atomic_write_text(args.out, out)
        m.output(args.out)
        return [args.out]
    sys.stdout.write(out)
    return []


def cmd_eval(args, m: _Manifest):
    _require(args, "codebook", "corpus")
    stack = load_stack(m.input(args.codebook))
    data = _load_npy(m.input(args.corpus))
    report = eval_codec(stack, data, args.depth)
    if args.teacher:
        teacher = _load_npy(m.input(args.teacher))
        proj = _load_npy(m.input(args.projection)) if args.projection else None
        report.extra["semantic_alignment_loss"] = semantic_alignment_loss(stack, data, teacher, proj)
    doc = json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n"
    if args.out:
        atomic_write_text(args.out, doc)
        m.output(args.out)
        return [args.out]
    sys.stdout.write(doc)
    return []


# ---------------------------------------------------------------------------
# parser


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=0, help="RNG seed (default 0)")
    p.add_argument("--config", help="TOML or JSON file with option defaults")
    p.add_argument("--manifest", help="where to write run-manifest.json")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rvqstream", description="Streaming RVQ codec toolkit and latency model.")
    parser.add_argument("--version", action="version", version=f"rvqstream {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")

    p = sub.add_parser("gen-corpus", help="generate a synthetic feature corpus (.npy)")
    _common(p)
    p.add_argument("--kind", default="gaussian_mixture", choices=["gaussian_mixture", "filterbank_of_synthetic_tones"])
    p.add_argument("--frames", type=int, default=4096)
    p.add_argument("--dim", type=int, default=64)
    p.add_argument("--components", type=int, default=8)
    p.add_argument("--weights", type=float, nargs="+")
    p.add_argument("--sigma", type=float, default=1.0)
    p.add_argument("--mean-scale", type=float, default=4.0)
    p.add_argument("--frame-rate-hz", type=float, default=12.5)
    p.add_argument("--out")
    p.set_defaults(func=cmd_gen_corpus)

    p = sub.add_parser("train-codebook", help="train an RVQ stack with EMA k-means")
    _common(p)
    p.add_argument("--corpus")
    p.add_argument("--k", type=int, default=2048, help="codebook size per layer")
    p.add_argument("--depth", type=int, default=16)
    p.add_argument("--epochs", type=int, default=20)
    p.add_argument("--decay", type=float, default=0.99)
    p.add_argument("--dead-threshold", type=float, default=1e-3)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--frame-rate-hz", type=float, default=12.5)
    p.add_argument("--no-pin-zero", action="store_true", help="do not reserve a zero entry in acoustic layers")
    p.add_argument("--out")
    p.set_defaults(func=cmd_train_codebook)

    p = sub.add_parser("encode", help="encode a feature corpus to a token stream")
    _common(p)
    p.add_argument("--codebook")
    p.add_argument("--corpus")
    p.add_argument("--depth", type=int)
    p.add_argument("--out")
    p.set_defaults(func=cmd_encode)

    p = sub.add_parser("decode", help="decode a token stream to features (.npy)")
    _common(p)
    p.add_argument("--codebook")
    p.add_argument("--tokens")
    p.add_argument("--depth", type=int)
    p.add_argument("--fir", type=float, nargs="+", help="apply a causal FIR post-filter with these taps")
    p.add_argument("--out")
    p.set_defaults(func=cmd_decode)

    p = sub.add_parser("stream-decode", help="incrementally decode a token stream to a framed binary pipe")
    _common(p)
    p.add_argument("--codebook")
    p.add_argument("--tokens")
    p.add_argument("--depth", type=int)
    p.add_argument("--fir", type=float, nargs="+", help="FIR taps (default 0.4 0.3 0.2 0.1)")
    p.add_argument("--read-frames", type=int, default=16, help="frames per read from the token file")
    p.add_argument("--out", help="output file (default stdout)")
    p.set_defaults(func=cmd_stream_decode)

    p = sub.add_parser("mask-dump", help="write the block-attention mask (PBM) and chunk schedule (CSV)")
    _common(p)
    p.add_argument("--chunk-size", type=int, default=8)
    p.add_argument("--tokens", type=int, default=48)
    p.add_argument("--lookback", type=int, default=3)
    p.add_argument("--lookahead", type=int, default=1)
    p.add_argument("--token-ms", type=float, default=40.0)
    p.add_argument("--vocoder-lookahead-ms", type=float, default=130.0)
    p.add_argument("--pbm")
    p.add_argument("--csv")
    p.set_defaults(func=cmd_mask_dump)

    p = sub.add_parser("session", help="run a dual-track toy session and write its JSON-lines transcript")
    _common(p)
    p.add_argument("--text")
    p.add_argument("--text-file")
    p.add_argument("--tokenizer", default="whitespace", choices=["whitespace", "bytes"])
    p.add_argument("--model", default="echo", choices=["echo", "markov", "constant"])
    p.add_argument("--constant-codes", type=int, nargs="+")
    p.add_argument("--k", type=int, default=2048)
    p.add_argument("--max-steps", type=int)
    p.add_argument("--pad-steps", type=int)
    p.add_argument("--stop-code", type=int)
    p.add_argument("--guard", type=int, default=100_000)
    p.add_argument("--context-frames", type=int, default=4)
    p.add_argument("--speaker", type=float, nargs="+")
    p.add_argument("--text-interval-ms", type=float, default=0.0)
    p.add_argument("--step-ms", type=float, default=1.0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_session)

    p = sub.add_parser("simulate", help="simulate one streaming session and report latencies (JSON)")
    _common(p)
    p.add_argument("--pipeline", default="12hz", choices=["25hz", "12hz"])
    p.add_argument("--ttfp-ms", type=str, default="0")
    p.add_argument("--lm-tpp-ms", type=str, default="0")
    p.add_argument("--decode-tpp-ms", type=str, default="0")
    p.add_argument("--tokens", type=int)
    p.add_argument("--serial", action="store_true", help="pause the LM while a packet decodes")
    p.add_argument("--flush", action="store_true", help="decode trailing tokens once generation ends")
    p.add_argument("--transcript", help="replay token times from a session transcript")
    p.add_argument("--trace-out")
    p.add_argument("--out", help="report path (default stdout)")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("sweep", help="simulate every row of a config CSV (default: bundled table5.csv)")
    _common(p)
    p.add_argument("input", nargs="?")
    p.add_argument("--serial", action="store_true")
    p.add_argument("--out")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("eval", help="evaluate a codebook on a corpus (SNR, spectral loss, perplexity)")
    _common(p)
    p.add_argument("--codebook")
    p.add_argument("--corpus")
    p.add_argument("--depth", type=int)
    p.add_argument("--teacher", help="teacher features (.npy), one row per corpus frame")
    p.add_argument("--projection", help="(teacher_dim x dim) projection (.npy); default is seeded orthonormal")
    p.add_argument("--out")
    p.set_defaults(func=cmd_eval)
    return parser


def _subparser(parser: argparse.ArgumentParser, name: str) -> argparse.ArgumentParser:
    for action in parser._actions:
        if isinstance(action, argparse._SubParsersAction):
            return action.choices[name]
    raise KeyError(name)


def _load_config(path: str) -> dict:
    text = Path(path).read_bytes()
    if str(path).endswith(".json"):
        return json.loads(text)
    return tomllib.loads(text.decode("utf-8"))


def _config_defaults(doc: dict, command: str) -> dict:
    vals = {k: v for k, v in doc.items() if not isinstance(v, dict)}
    section = doc.get(command) or doc.get(command.replace("-", "_")) or {}
    vals.update(section)
    return {k.replace("-", "_"): v for k, v in vals.items()}


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    if not argv:
        parser.print_help(sys.stderr)
        return 2
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            parser.print_help(sys.stderr)
            return 2
        if args.config:
            sub = _subparser(parser, args.command)
            known = {a.dest for a in sub._actions}
            defaults = _config_defaults(_load_config(args.config), args.command)
            unknown = set(defaults) - known
            if unknown:
                parser.error(f"config sets unknown option(s) for {args.command}: {sorted(unknown)}")
            sub.set_defaults(**defaults)
            args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)

    manifest = _Manifest(args.command, argv, args.seed)
    try:
        if args.config:
            manifest.input(args.config)
        outputs = args.func(args, manifest)
    except _UsageError as exc:
        print(f"rvqstream: error: {exc}", file=sys.stderr)
        return 2
    except (RvqStreamError, OSError, ValueError, KeyError) as exc:
        print(f"rvqstream: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1

    if args.manifest:
        where = Path(args.manifest)
    elif outputs:
        where = Path(outputs[0]).parent / "run-manifest.json"
    else:
        where = Path("run-manifest.json")
    manifest.write(where)
    return 0


if __name__ == "__main__":
    sys.exit(main())
