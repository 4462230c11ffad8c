"""Synthetic feature corpora and codec evaluation metrics."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError
from .rvq import RvqStack, _as_frames, decode, encode, perplexity

SNR_CAP_DB = 120.0
SPECTRAL_WINDOWS = (32, 64, 128)


@dataclass(frozen=True)
class SyntheticCorpusSpec:
    """Recipe for a synthetic corpus.

    ``gaussian_mixture`` draws frames from ``components`` isotropic Gaussians
    whose means are spread with scale ``mean_scale``. ``filterbank_of_synthetic_tones``
    renders a waveform of gliding tones plus noise and computes log mel-like
    filterbank energies at ``frame_rate_hz``.
    """

    kind: str = "gaussian_mixture"
    frames: int = 4096
    dim: int = 64
    seed: int = 0
    components: int = 8
    weights: tuple[float, ...] | None = None
    sigma: float = 1.0
    mean_scale: float = 4.0
    means: tuple[tuple[float, ...], ...] | None = None
    sample_rate: int = 16000
    frame_rate_hz: float = 12.5
    tones: int = 3
    noise: float = 0.01

    def validate(self) -> None:
        if self.frames < 1:
            raise ConfigError("a corpus needs at least one frame")
        if self.dim < 1:
            raise ConfigError("dim must be positive")
        if self.kind not in ("gaussian_mixture", "filterbank_of_synthetic_tones"):
            raise ConfigError(f"unknown corpus kind {self.kind!r}")
        if self.kind == "gaussian_mixture":
            if self.components < 1 or self.sigma < 0:
                raise ConfigError("components >= 1 and sigma >= 0 required")
            if self.weights is not None and (len(self.weights) != self.components or min(self.weights) < 0
                                             or sum(self.weights) <= 0):
                raise ConfigError("weights must be non-negative, one per component")
            if self.means is not None and np.shape(self.means) != (self.components, self.dim):
                raise ConfigError("means must be components x dim")


@dataclass
class Corpus:
    frames: np.ndarray
    labels: np.ndarray | None = None
    means: np.ndarray | None = None

    def summary(self) -> dict:
        return {
            "frames": int(self.frames.shape[0]),
            "dim": int(self.frames.shape[1]),
            "mean": self.frames.mean(axis=0).tolist(),
            "variance": self.frames.var(axis=0).tolist(),
        }


def _mixture(spec: SyntheticCorpusSpec, rng: np.random.Generator) -> Corpus:
    if spec.means is not None:
        means = np.asarray(spec.means, dtype=np.float64)
    else:
        means = rng.standard_normal((spec.components, spec.dim)) * spec.mean_scale
    w = np.ones(spec.components) if spec.weights is None else np.asarray(spec.weights, dtype=np.float64)
    w = w / w.sum()
    labels = rng.choice(spec.components, size=spec.frames, p=w)
    noise = rng.standard_normal((spec.frames, spec.dim)) * spec.sigma
    return Corpus(means[labels] + noise, labels, means)


def mel_filterbank(n_filters: int, n_fft: int, sample_rate: int) -> np.ndarray:
    """Triangular filters evenly spaced on the mel scale, shape (n_filters, n_fft//2 + 1)."""
    def hz_to_mel(f):
        return 2595.0 * np.log10(1.0 + f / 700.0)

    def mel_to_hz(m):
        return 700.0 * (10.0 ** (m / 2595.0) - 1.0)

    edges = mel_to_hz(np.linspace(0.0, hz_to_mel(sample_rate / 2), n_filters + 2))
    freqs = np.linspace(0.0, sample_rate / 2, n_fft // 2 + 1)
    fb = np.zeros((n_filters, freqs.size))
    for i in range(n_filters):
        lo, mid, hi = edges[i], edges[i + 1], edges[i + 2]
        rising = (freqs - lo) / max(mid - lo, 1e-12)
        falling = (hi - freqs) / max(hi - mid, 1e-12)
        fb[i] = np.clip(np.minimum(rising, falling), 0.0, None)
    return fb


def _tones(spec: SyntheticCorpusSpec, rng: np.random.Generator) -> Corpus:
    hop = int(round(spec.sample_rate / spec.frame_rate_hz))
    n_fft = 1 << int(np.ceil(np.log2(hop)))
    n = spec.frames * hop
    t = np.arange(n) / spec.sample_rate
    wave = np.zeros(n)
    for _ in range(spec.tones):
        f0, f1 = rng.uniform(80.0, spec.sample_rate / 4, size=2)
        amp = rng.uniform(0.2, 1.0)
        rate = rng.uniform(0.1, 2.0)
        freq = f0 + (f1 - f0) * 0.5 * (1.0 + np.sin(2 * np.pi * rate * t))
        phase = 2 * np.pi * np.cumsum(freq) / spec.sample_rate
        envelope = 0.5 * (1.0 + np.sin(2 * np.pi * rng.uniform(0.2, 1.5) * t + rng.uniform(0, 2 * np.pi)))
        wave += amp * envelope * np.sin(phase)
    wave += spec.noise * rng.standard_normal(n)
    frames = wave.reshape(spec.frames, hop)
    if n_fft > hop:
        frames = np.pad(frames, ((0, 0), (0, n_fft - hop)))
    window = np.hanning(n_fft)
    power = np.abs(np.fft.rfft(frames * window, axis=1)) ** 2
    feats = np.log(power @ mel_filterbank(spec.dim, n_fft, spec.sample_rate).T + 1e-6)
    return Corpus(feats)


def gen_corpus(spec: SyntheticCorpusSpec) -> Corpus:
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    if spec.kind == "gaussian_mixture":
        return _mixture(spec, rng)
    return _tones(spec, rng)


# ---------------------------------------------------------------------------
# metrics


def snr_db(reference, estimate) -> float:
    """Signal-to-noise ratio over a whole sequence, capped at ``SNR_CAP_DB``."""
    ref = np.asarray(reference, dtype=np.float64)
    err = ref - np.asarray(estimate, dtype=np.float64)
    noise = float(np.sum(err * err))
    signal = float(np.sum(ref * ref))
    if noise == 0.0:
        return SNR_CAP_DB
    if signal == 0.0:
        return -SNR_CAP_DB
    return min(SNR_CAP_DB, 10.0 * np.log10(signal / noise))


def _segments(x: np.ndarray, window: int) -> np.ndarray:
    """Split (N, D) into zero-padded (S, window, D) non-overlapping segments."""
    n = x.shape[0]
    s = max(1, -(-n // window))
    padded = np.zeros((s * window, x.shape[1]))
    padded[:n] = x
    return padded.reshape(s, window, x.shape[1])


def spectral_loss(reference, estimate, window: int) -> float:
    """Mean absolute difference of per-dimension magnitude spectra over time windows."""
    ref = np.asarray(reference, dtype=np.float64)
    est = np.asarray(estimate, dtype=np.float64)
    if ref.shape != est.shape:
        raise ConfigError(f"shape mismatch {ref.shape} vs {est.shape}")
    a = np.abs(np.fft.rfft(_segments(ref, window), axis=1))
    b = np.abs(np.fft.rfft(_segments(est, window), axis=1))
    return float(np.mean(np.abs(a - b)))


def multiscale_spectral_loss(reference, estimate, windows=SPECTRAL_WINDOWS) -> dict[int, float]:
    return {w: spectral_loss(reference, estimate, w) for w in windows}


@dataclass
class EvalReport:
    snr_db: list[float]
    multiscale_spectral_loss: dict[int, float]
    perplexity: list[float]
    frames: int
    depth: int
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "schema_version": "1.0",
            "frames": self.frames,
            "depth": self.depth,
            "snr_db": {str(d + 1): v for d, v in enumerate(self.snr_db)},
            "multiscale_spectral_loss": {str(w): v for w, v in self.multiscale_spectral_loss.items()},
            "perplexity": {str(i): v for i, v in enumerate(self.perplexity)},
            **self.extra,
        }


def eval_codec(stack: RvqStack, corpus, depth: int | None = None) -> EvalReport:
    """SNR at every depth, spectral loss at full depth, per-layer code perplexity."""
    x = _as_frames(corpus, stack.dim)
    depth = depth or stack.depth
    codes, _ = encode(x, stack, depth)
    snrs = [snr_db(x, decode(codes, stack, d)) for d in range(1, depth + 1)]
    recon = decode(codes, stack, depth)
    return EvalReport(
        snr_db=snrs,
        multiscale_spectral_loss=multiscale_spectral_loss(x, recon),
        perplexity=[perplexity(codes[:, i], stack.layers[i].size) for i in range(depth)],
        frames=x.shape[0],
        depth=depth,
    )
