import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from conftest import make_stack
from rvqstream.cli import main
from rvqstream.rvq import TrainConfig, load_tokens, save_stack
from rvqstream.stream import FirFilter, StreamCodec, read_frames

from test_latency import PUBLISHED_FIRST_PACKET


@pytest.fixture
def work(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    return tmp_path


def run(*argv):
    return main([str(a) for a in argv])


def test_no_args_prints_usage(capsys):
    assert main([]) == 2
    assert "usage" in capsys.readouterr().err


def test_unknown_subcommand():
    assert run("frobnicate") == 2


def test_missing_option_is_usage_error(work):
    assert run("encode", "--codebook", "x.rvq") == 2


def test_runtime_error_exit_one(work):
    assert run("encode", "--codebook", "missing.rvq", "--corpus", "c.npy", "--out", "t.bin") == 1


def test_module_entry_point(work):
    proc = subprocess.run([sys.executable, "-m", "rvqstream.cli", "sweep"], capture_output=True, text=True)
    assert proc.returncode == 0
    assert "first_packet_latency_ms" in proc.stdout


@pytest.fixture
def exact_setup(work):
    stack = make_stack(k=8, dim=4, depth=16, seed=7)
    save_stack(work / "cb.rvq", stack, TrainConfig(codebook_size=8, dim=4))
    corpus = stack.semantic.entries.astype(np.float64)[[0, 3, 5, 5, 1, 7, 2]]
    np.save(work / "corpus.npy", corpus)
    return stack, corpus


def test_encode_decode_round_trip_exact(exact_setup, work):
    stack, corpus = exact_setup
    assert run("encode", "--codebook", "cb.rvq", "--corpus", "corpus.npy", "--out", "t.bin") == 0
    assert run("decode", "--codebook", "cb.rvq", "--tokens", "t.bin", "--out", "back.npy") == 0
    np.testing.assert_array_equal(np.load(work / "back.npy"), corpus)
    manifest = json.loads((work / "run-manifest.json").read_text())
    assert manifest["command"] == "decode"
    assert set(manifest["inputs"]) == {"cb.rvq", "t.bin"}
    assert len(manifest["outputs"]["back.npy"]) == 64


def test_stream_decode_matches_offline_fir(exact_setup, work):
    stack, _ = exact_setup
    np.save(work / "noisy.npy", np.random.default_rng(0).standard_normal((23, 4)) * 3)
    assert run("encode", "--codebook", "cb.rvq", "--corpus", "noisy.npy", "--out", "t.bin") == 0
    assert run("stream-decode", "--codebook", "cb.rvq", "--tokens", "t.bin", "--read-frames", "5",
               "--out", "pipe.bin") == 0
    assert run("decode", "--codebook", "cb.rvq", "--tokens", "t.bin", "--fir", "0.4", "0.3", "0.2", "0.1",
               "--out", "off.npy") == 0
    with open(work / "pipe.bin", "rb") as fh:
        got = list(read_frames(fh, 4))
    assert [i for i, _ in got] == list(range(23))
    streamed = np.stack([f for _, f in got])
    offline = np.load(work / "off.npy")
    np.testing.assert_array_equal(streamed, offline.astype(np.float32))
    ref = StreamCodec(stack, FirFilter()).decode_offline(load_tokens(work / "t.bin")[0])
    np.testing.assert_array_equal(offline, ref)


def test_pipeline_same_seed_identical(work):
    def pipeline(tag):
        assert run("gen-corpus", "--frames", 300, "--dim", 5, "--components", 4, "--seed", 3,
                   "--out", f"c{tag}.npy") == 0
        assert run("train-codebook", "--corpus", f"c{tag}.npy", "--k", 8, "--depth", 4, "--epochs", 3,
                   "--seed", 3, "--out", f"cb{tag}.rvq") == 0
        assert run("encode", "--codebook", f"cb{tag}.rvq", "--corpus", f"c{tag}.npy", "--out", f"t{tag}.bin") == 0
        assert run("eval", "--codebook", f"cb{tag}.rvq", "--corpus", f"c{tag}.npy", "--out", f"e{tag}.json") == 0
        return [(work / f"{p}{tag}{ext}").read_bytes() for p, ext in
                (("c", ".npy"), ("cb", ".rvq"), ("t", ".bin"), ("e", ".json"))]

    assert pipeline("a") == pipeline("b")
    report = json.loads((work / "ea.json").read_text())
    snrs = [report["snr_db"][str(d)] for d in range(1, 5)]
    assert snrs == sorted(snrs)


def test_sweep_bundled(work, capsys):
    assert run("sweep", "--out", "sweep.csv") == 0
    lines = [ln for ln in (work / "sweep.csv").read_text().splitlines() if not ln.startswith("#")]
    rows = list(csv.DictReader(lines))
    assert len(rows) == 12
    assert [int(r["first_packet_latency_ms"]) for r in rows] == PUBLISHED_FIRST_PACKET


def test_config_precedence(work, capsys):
    (work / "cfg.toml").write_text('[simulate]\npipeline = "25hz"\nttfp-ms = "125"\ndecode_tpp_ms = "25"\n'
                                   'lm_tpp_ms = "56"\n')
    assert run("simulate", "--config", "cfg.toml", "--out", "a.json") == 0
    a = json.loads((work / "a.json").read_text())
    assert a["pipeline"] == "25hz" and a["first_packet_latency_ms"] == 150
    assert run("simulate", "--config", "cfg.toml", "--decode-tpp-ms", "5", "--out", "b.json") == 0
    assert json.loads((work / "b.json").read_text())["first_packet_latency_ms"] == 130
    assert run("simulate", "--out", "c.json") == 0
    c = json.loads((work / "c.json").read_text())
    assert c["pipeline"] == "12hz" and c["first_packet_latency_ms"] == 0
    (work / "bad.json").write_text('{"nonsense": 1}')
    assert run("simulate", "--config", "bad.json") == 2


def test_simulate_trace_and_transcript(work):
    assert run("simulate", "--pipeline", "25hz", "--ttfp-ms", "125", "--lm-tpp-ms", "56", "--decode-tpp-ms", "25",
               "--tokens", 24, "--trace-out", "trace.jsonl", "--out", "rep.json") == 0
    rep = json.loads((work / "rep.json").read_text())
    assert rep["packets"] == 2 and rep["first_packet_audio_ms"] == 190
    events = [json.loads(x) for x in (work / "trace.jsonl").read_text().splitlines()]
    assert sum(e["event"] == "packet_emit" for e in events) == 2
    assert run("session", "--text", "a b c d e f g h", "--pad-steps", 0, "--step-ms", 80, "--k", 64,
               "--out", "s.jsonl") == 0
    assert run("simulate", "--transcript", "s.jsonl", "--decode-tpp-ms", "4", "--out", "r2.json") == 0
    assert json.loads((work / "r2.json").read_text())["packets"] == 2


def test_session_transcript(work):
    assert run("session", "--text", "hello streaming world", "--model", "markov", "--pad-steps", 2,
               "--k", 128, "--seed", 4, "--speaker", 0.1, 0.2, "--out", "s.jsonl") == 0
    recs = [json.loads(x) for x in (work / "s.jsonl").read_text().splitlines()]
    assert len(recs) == 5 and all(len(r["codes"]) == 16 for r in recs)
    assert recs[0]["speaker"] == [0.1, 0.2]


def test_mask_dump(work):
    assert run("mask-dump", "--chunk-size", 8, "--tokens", 44, "--pbm", "m.pbm", "--csv", "s.csv") == 0
    rows = list(csv.DictReader((work / "s.csv").read_text().splitlines()))
    assert [r["audio_ms"] for r in rows] == ["190", "320", "320", "320", "320", "160"]
    assert (work / "m.pbm").read_text().startswith("P1\n44 44\n")
