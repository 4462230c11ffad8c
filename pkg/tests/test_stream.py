import io

import numpy as np
import pytest

from conftest import make_stack
from rvqstream.errors import CodeRangeError, ConfigError, DimensionError
from rvqstream.rvq import decode_frame, encode, iter_token_blocks, read_token_header, tokens_to_bytes
from rvqstream.stream import FirFilter, StreamCodec, StreamState, pack_frame, read_frames


@pytest.fixture
def codec():
    return StreamCodec(make_stack(k=16, dim=5, seed=3))


def frames(n, dim=5, seed=0):
    return np.random.default_rng(seed).standard_normal((n, dim)) * 2


def test_streaming_encode_matches_offline(codec):
    xs = frames(10)
    state = codec.new_state()
    streamed = np.stack([codec.push_encode(state, x) for x in xs])
    offline, _ = encode(xs, codec.stack)
    np.testing.assert_array_equal(streamed, offline)


def test_first_frame_emitted_without_delay(codec):
    state = codec.new_state()
    out = codec.push_encode(state, frames(1)[0])
    assert out.shape == (16,)
    assert state.frames_encoded == 1 and state.history == []


def test_appending_frames_keeps_emitted_codes(codec):
    xs = frames(12, seed=4)
    s1 = codec.new_state()
    short = [codec.push_encode(s1, x) for x in xs[:7]]
    s2 = codec.new_state()
    longer = [codec.push_encode(s2, x) for x in xs]
    np.testing.assert_array_equal(np.stack(short), np.stack(longer[:7]))


def test_identity_filter_equals_plain_decode():
    stack = make_stack(k=16, dim=5, seed=3)
    codec = StreamCodec(stack, FirFilter((1.0,)))
    state = codec.new_state()
    codes, _ = encode(frames(6), stack)
    for c in codes:
        np.testing.assert_array_equal(codec.push_decode(state, c), decode_frame(c, stack))


def test_perturbing_future_code_leaves_past_outputs(codec):
    codes, _ = encode(frames(9, seed=2), codec.stack)
    n = 4
    alt = codes.copy()
    alt[n + 1, :] = (alt[n + 1, :] + 1) % 16

    def run(cs):
        st = codec.new_state()
        return np.stack([codec.push_decode(st, c) for c in cs])

    a, b = run(codes), run(alt)
    np.testing.assert_array_equal(a[: n + 1], b[: n + 1])
    assert not np.array_equal(a[n + 1], b[n + 1])


def test_stream_file_decode_matches_offline(codec):
    codes, _ = encode(frames(37, seed=8), codec.stack)
    fh = io.BytesIO(tokens_to_bytes(codes, 16))
    depth, rate, count = read_token_header(fh)
    assert (depth, rate, count) == (16, 12.5, 37)
    state = codec.new_state()
    out = [codec.push_decode(state, c) for block in iter_token_blocks(fh, count, read_frames=5) for c in block]
    np.testing.assert_array_equal(np.stack(out), codec.decode_offline(codes))


def test_history_bounded_and_reset(codec):
    state = codec.new_state()
    codes, _ = encode(frames(10), codec.stack)
    for c in codes:
        codec.push_decode(state, c)
        assert len(state.history) <= codec.fir.history_length
    codec.reset(state)
    assert state == StreamState()


def test_state_serialization_round_trip(codec):
    state = codec.new_state()
    codes, _ = encode(frames(5), codec.stack)
    for c in codes:
        codec.push_decode(state, c)
    clone = StreamState.from_dict(state.to_dict())
    assert clone == state
    nxt = codes[0]
    np.testing.assert_array_equal(codec.push_decode(clone, nxt), codec.push_decode(state, nxt))


def test_errors(codec):
    state = codec.new_state()
    with pytest.raises(DimensionError):
        codec.push_encode(state, np.zeros(4))
    bad = np.zeros(16, dtype=int)
    bad[0] = 99
    with pytest.raises(CodeRangeError):
        codec.push_decode(state, bad)


@pytest.mark.parametrize("taps", [(), (0.0, 1.0), (0.5, 0.2)])
def test_fir_validation(taps):
    with pytest.raises(ConfigError):
        FirFilter(taps)


def test_default_fir_taps():
    fir = FirFilter()
    assert fir.taps == (0.4, 0.3, 0.2, 0.1)
    assert fir.history_length == 3


def test_framed_pipe_round_trip():
    rows = np.random.default_rng(0).standard_normal((4, 3)).astype(np.float32)
    blob = b"".join(pack_frame(i, r) for i, r in enumerate(rows))
    assert len(blob) == 4 * (8 + 12)
    got = list(read_frames(io.BytesIO(blob), 3))
    assert [i for i, _ in got] == [0, 1, 2, 3]
    np.testing.assert_array_equal(np.stack([f for _, f in got]), rows)
