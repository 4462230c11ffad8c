import json

import numpy as np
import pytest

from rvqstream.dual_track import (
    PAD,
    ConstantModel,
    EchoModel,
    MarkovModel,
    StopRule,
    assemble_step,
    generate_frame,
    read_transcript,
    run_session,
    tokenize,
)
from rvqstream.errors import MaxStepsExceeded, ModelContractError


def test_assemble_first_step():
    rec = assemble_step(0, "a", [])
    assert rec.step == 0 and rec.text_token == "a" and rec.history == ()
    assert np.all(rec.context_summary() == 0)


def test_assemble_keeps_last_frames_only():
    frames = [np.full(16, i) for i in range(6)]
    rec = assemble_step(6, None, frames, context_frames=4)
    assert rec.text_token == PAD
    assert [int(f[0]) for f in rec.history] == [2, 3, 4, 5]
    np.testing.assert_allclose(rec.context_summary(), np.full(16, 3.5))


def test_pad_after_text_exhausted():
    sess = run_session(list("abcde"), EchoModel(64), StopRule(pad_steps=3))
    tokens = [r["text_token"] for r in sess.records]
    assert tokens[:5] == list("abcde")
    assert tokens[5:] == [PAD] * 3


def test_ten_step_session_records():
    sess = run_session(list("abcdefghij"), EchoModel(64), StopRule(max_steps=10))
    steps = [r["step"] for r in sess.records]
    assert steps == list(range(10))
    assert sess.frames.shape == (10, 16)


def test_constant_model_frames_identical():
    codes = tuple(range(16))
    sess = run_session(list("xyz"), ConstantModel(codes, 32), StopRule(pad_steps=2))
    assert sess.frames.shape == (5, 16)
    assert np.all(sess.frames == np.array(codes))


def test_markov_session_deterministic():
    text = "one two three four".split()
    a = run_session(text, MarkovModel(128, seed=4), StopRule(max_steps=20))
    b = run_session(text, MarkovModel(128, seed=4), StopRule(max_steps=20))
    np.testing.assert_array_equal(a.frames, b.frames)
    assert a.to_jsonl() == b.to_jsonl()
    c = run_session(text, MarkovModel(128, seed=5), StopRule(max_steps=20))
    assert not np.array_equal(a.frames, c.frames)


@pytest.mark.parametrize("model", [EchoModel(256, 1), MarkovModel(256, 2)])
def test_future_text_does_not_change_past_frames(model):
    text = list("streaming text")
    alt = text[:6] + list("XYZWVUTS")
    a = run_session(text, model, StopRule(pad_steps=2))
    b = run_session(alt, model, StopRule(pad_steps=2))
    np.testing.assert_array_equal(a.frames[:6], b.frames[:6])


def test_empty_text_stop_at_zero():
    sess = run_session([], EchoModel(16), StopRule(max_steps=0))
    assert sess.frames.shape == (0, 16) and sess.records == []


def test_four_tokens_plus_four_pads():
    sess = run_session("a b c d".split(), EchoModel(16), StopRule(pad_steps=4))
    assert len(sess.records) == 8
    assert [r["text_token"] for r in sess.records].count(PAD) == 4


def test_event_order_text_before_frame():
    sess = run_session(list("abc"), EchoModel(16), StopRule(pad_steps=1), text_interval_ms=80, step_ms=20)
    seen_text = set()
    for kind, step, _ in sess.events:
        if kind == "text_in":
            seen_text.add(step)
        elif kind == "frame_out":
            assert step in seen_text
    for r in sess.records:
        assert r["t_frame_out"] >= r["t_text_in"] + 20
    outs = [r["t_frame_out"] for r in sess.records]
    assert outs == sorted(outs)
    assert [r["t_text_in"] for r in sess.records[:3]] == [0, 80, 160]


def test_stop_code_ends_without_emitting():
    model = ConstantModel(tuple([5] * 16), 8)
    sess = run_session(list("ab"), model, StopRule(stop_code=5, max_steps=10))
    assert sess.frames.shape[0] == 0
    assert sess.events[-1][0] == "stop"


def test_unbounded_guard():
    with pytest.raises(MaxStepsExceeded):
        run_session(list("a"), EchoModel(16), StopRule(guard=50))


def test_out_of_range_model_output():
    with pytest.raises(ModelContractError):
        generate_frame(ConstantModel(tuple([0] * 15 + [16]), 16), assemble_step(0, "a", []))
    with pytest.raises(ModelContractError):
        generate_frame(ConstantModel(tuple([16] + [0] * 15), 16), assemble_step(0, "a", []))
    with pytest.raises(ModelContractError):
        generate_frame(ConstantModel((1, 2, 3), 16), assemble_step(0, "a", []))


def test_transcript_format_and_speaker():
    sess = run_session(["hi"], EchoModel(32), StopRule(pad_steps=1), speaker=[0.5, -1.0])
    text = sess.to_jsonl()
    lines = [json.loads(x) for x in text.splitlines()]
    assert set(lines[0]) == {"step", "text_token", "codes", "t_text_in", "t_frame_out", "speaker"}
    assert lines[0]["speaker"] == [0.5, -1.0]
    assert "speaker" not in lines[1]
    assert read_transcript(text) == lines
    with pytest.raises(ValueError):
        read_transcript('{"step": 0}\n')


def test_tokenize_modes():
    assert tokenize("a  b\nc") == ["a", "b", "c"]
    assert tokenize("hé", "bytes") == ["<0x68>", "<0xc3>", "<0xa9>"]
