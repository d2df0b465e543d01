"""Seeded synthetic corpora: a keyword-style task and an emotion-prosody task.

Keyword clips carry a class-specific tone pair with a class-specific
onset pattern over a quiet noise floor. Emotion clips share harmonic
carrier "words"; non-neutral classes add a class-specific prosody
component (gliding pitch contour with a pulsed amplitude envelope),
neutral is the bare carrier. Everything is a pure function of the spec.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np

from .audio import AudioClip, wav_read, wav_write

KEYWORD_NAMES = ["up", "down", "left", "right", "go", "stop", "yes", "no"]
EMOTION_NAMES = ["neutral", "happy", "sad", "angry", "fear"]

NOISE_FLOOR_AMPLITUDE = 0.0316  # -30 dBFS
MANIFEST_VERSION = 1


class DatasetError(ValueError):
    pass


@dataclass
class SyntheticDatasetSpec:
    task: str  # "keyword" or "emotion"
    num_classes: int = 8
    clips_per_class: int = 100
    clip_length: int = 16384
    sample_rate: int = 16000
    seed: int = 0
    words: int = 10       # emotion task only
    renditions: int = 10  # emotion task only

    def __post_init__(self):
        if self.task not in ("keyword", "emotion"):
            raise DatasetError(f"unknown task {self.task!r}")
        if self.num_classes < 2:
            raise DatasetError("need at least 2 classes")
        if self.task == "emotion":
            if self.num_classes < 3:
                raise DatasetError("emotion task needs >= 3 classes (incl. neutral)")
            if self.clips_per_class != self.words * self.renditions:
                raise DatasetError("emotion clips_per_class must equal words * renditions")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "SyntheticDatasetSpec":
        return cls(**d)


@dataclass
class LabeledAudioDataset:
    clips: np.ndarray          # (M, N) float32
    labels: np.ndarray         # (M,) int64
    class_names: list
    train_idx: np.ndarray
    test_idx: np.ndarray
    spec: SyntheticDatasetSpec
    meta: list = field(default_factory=list)  # per-clip dicts (word/rendition for emotion)

    @property
    def neutral_class(self) -> int:
        return self.class_names.index("neutral")

    def subset(self, idx):
        return self.clips[idx], self.labels[idx]


def _rng(*entropy) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(list(entropy)))


def _split(m: int, seed: int, test_fraction: float = 0.2):
    perm = _rng(seed, 0xDEAD).permutation(m)
    n_test = int(round(m * test_fraction))
    test_idx = np.sort(perm[:n_test])
    train_idx = np.sort(perm[n_test:])
    return train_idx, test_idx


def _keyword_clip(spec: SyntheticDatasetSpec, c: int, i: int) -> np.ndarray:
    rng = _rng(spec.seed, 1, c, i)
    n = spec.clip_length
    sr = spec.sample_rate
    t = np.arange(n) / sr
    f1 = 300.0 * (1.22**c)
    f2 = f1 * 1.5
    sig = np.zeros(n)
    n_bursts = 2 + (c % 3)
    burst_len = n // (2 * n_bursts + 1)
    for freq, half in ((f1, 0), (f2, 1)):
        offset = half * n // 2 + (c % 4) * (n // 40)
        for b in range(n_bursts):
            start = offset + b * 2 * burst_len + int(rng.integers(-64, 65))
            start = max(0, min(start, n - burst_len))
            seg = np.arange(start, start + burst_len)
            env = np.hanning(burst_len)
            phase = rng.uniform(0, 2 * np.pi)
            sig[seg] += env * np.sin(2 * np.pi * freq * t[seg] + phase)
    amp = 0.55 + 0.1 * rng.uniform()
    sig *= amp / max(np.abs(sig).max(), 1e-9)
    sig += rng.uniform(-NOISE_FLOOR_AMPLITUDE, NOISE_FLOOR_AMPLITUDE, size=n)
    return sig.astype(np.float32)


def generate_keyword_dataset(spec: SyntheticDatasetSpec) -> LabeledAudioDataset:
    if spec.task != "keyword":
        raise DatasetError("spec.task must be 'keyword'")
    names = [KEYWORD_NAMES[c] if c < len(KEYWORD_NAMES) else f"kw{c}" for c in range(spec.num_classes)]
    clips, labels = [], []
    for c in range(spec.num_classes):
        for i in range(spec.clips_per_class):
            clips.append(_keyword_clip(spec, c, i))
            labels.append(c)
    clips = np.stack(clips)
    labels = np.asarray(labels, dtype=np.int64)
    train_idx, test_idx = _split(len(labels), spec.seed)
    return LabeledAudioDataset(clips, labels, names, train_idx, test_idx, spec,
                               meta=[{} for _ in range(len(labels))])


def emotion_carrier(spec: SyntheticDatasetSpec, word: int, rendition: int) -> np.ndarray:
    """The unmodulated harmonic 'word' template; the neutral clip equals this exactly."""
    rng = _rng(spec.seed, 2, word, rendition)
    n = spec.clip_length
    sr = spec.sample_rate
    t = np.arange(n) / sr
    f0 = 110.0 * (1.13**word) * (1.0 + 0.01 * rng.uniform(-1, 1))
    word_rng = _rng(spec.seed, 3, word)
    harmonic_amps = word_rng.uniform(0.3, 1.0, size=6) / (1.0 + np.arange(6))
    sig = np.zeros(n)
    for h, a in enumerate(harmonic_amps, start=1):
        sig += a * np.sin(2 * np.pi * h * f0 * t + word_rng.uniform(0, 2 * np.pi))
    attack = int(0.05 * sr)
    env = np.ones(n)
    env[:attack] = np.linspace(0, 1, attack)
    env[-attack:] = np.linspace(1, 0, attack)
    amp = (0.5 + 0.04 * rng.uniform(-1, 1))
    sig = sig * env * amp / max(np.abs(sig).max(), 1e-9)
    return sig.astype(np.float32)


# per emotion class (index 1..): prosody band centre (Hz), glide slope, burst count
_PROSODY_TABLE = [
    (620.0, 0.15, 2),
    (900.0, -0.15, 3),
    (1250.0, 0.30, 4),
    (1650.0, -0.30, 2),
    (2050.0, 0.45, 3),
    (2450.0, -0.45, 4),
]

_PROSODY_BURST_SEC = 0.05


def _prosody_component(spec: SyntheticDatasetSpec, c: int, word: int, rendition: int) -> np.ndarray:
    """Short class-specific gliding bursts (c >= 1).

    The bursts are deliberately compact in time so that the class evidence
    occupies a small share of the latent grid; everything outside them is
    plain carrier, i.e. indistinguishable from the neutral class.
    """
    rng = _rng(spec.seed, 4, c, word, rendition)
    n = spec.clip_length
    sr = spec.sample_rate
    fc, glide, count = _PROSODY_TABLE[(c - 1) % len(_PROSODY_TABLE)]
    burst_len = int(_PROSODY_BURST_SEC * sr)
    sig = np.zeros(n, dtype=np.float32)
    amp = 0.45 * (0.9 + 0.2 * rng.uniform())
    starts = rng.permutation(count * 2)[:count]  # distinct slots over the clip
    slot = (n - burst_len) // (count * 2)
    tb = np.arange(burst_len) / sr
    window = np.hanning(burst_len)
    for k in sorted(starts):
        s = k * slot + int(rng.integers(0, max(slot - burst_len, 1)))
        inst_freq = fc * (1.0 + glide * (tb / _PROSODY_BURST_SEC - 0.5))
        phase = 2 * np.pi * np.cumsum(inst_freq) / sr
        sig[s : s + burst_len] += (amp * window * np.sin(phase + rng.uniform(0, 2 * np.pi))
                                   ).astype(np.float32)
    return sig


def generate_emotion_dataset(spec: SyntheticDatasetSpec) -> LabeledAudioDataset:
    if spec.task != "emotion":
        raise DatasetError("spec.task must be 'emotion'")
    names = [EMOTION_NAMES[c] if c < len(EMOTION_NAMES) else f"emo{c}" for c in range(spec.num_classes)]
    clips, labels, meta = [], [], []
    for c in range(spec.num_classes):
        for word in range(spec.words):
            for r in range(spec.renditions):
                carrier = emotion_carrier(spec, word, r)
                if c == 0:
                    clip = carrier
                else:
                    clip = carrier + _prosody_component(spec, c, word, r)
                clips.append(clip)
                labels.append(c)
                meta.append({"word": word, "rendition": r})
    clips = np.stack(clips)
    labels = np.asarray(labels, dtype=np.int64)
    train_idx, test_idx = _split(len(labels), spec.seed)
    return LabeledAudioDataset(clips, labels, names, train_idx, test_idx, spec, meta)


def generate_dataset(spec: SyntheticDatasetSpec) -> LabeledAudioDataset:
    if spec.task == "keyword":
        return generate_keyword_dataset(spec)
    return generate_emotion_dataset(spec)


def save_dataset(ds: LabeledAudioDataset, directory) -> None:
    """Materialize as WAV files plus a JSON manifest with labels and split indices."""
    directory = Path(directory)
    (directory / "clips").mkdir(parents=True, exist_ok=True)
    for i, clip in enumerate(ds.clips):
        wav_write(AudioClip(clip, ds.spec.sample_rate), directory / "clips" / f"clip_{i:05d}.wav")
    manifest = {
        "version": MANIFEST_VERSION,
        "spec": ds.spec.to_dict(),
        "class_names": list(ds.class_names),
        "labels": ds.labels.tolist(),
        "train_idx": ds.train_idx.tolist(),
        "test_idx": ds.test_idx.tolist(),
        "meta": ds.meta,
    }
    with open(directory / "manifest.json", "w") as f:
        json.dump(manifest, f, sort_keys=True, indent=1)


def load_dataset(directory) -> LabeledAudioDataset:
    directory = Path(directory)
    with open(directory / "manifest.json") as f:
        manifest = json.load(f)
    if manifest.get("version") != MANIFEST_VERSION:
        raise DatasetError(f"unsupported manifest version {manifest.get('version')}")
    spec = SyntheticDatasetSpec.from_dict(manifest["spec"])
    labels = np.asarray(manifest["labels"], dtype=np.int64)
    clips = np.stack(
        [wav_read(directory / "clips" / f"clip_{i:05d}.wav").samples for i in range(len(labels))]
    )
    return LabeledAudioDataset(
        clips,
        labels,
        manifest["class_names"],
        np.asarray(manifest["train_idx"], dtype=np.int64),
        np.asarray(manifest["test_idx"], dtype=np.int64),
        spec,
        manifest.get("meta", []),
    )
