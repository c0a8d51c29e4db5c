"""Sound synthesis by modulating r0 while the circuit runs.

The circuit is integrated at the usual step, a node voltage is box-filtered
down to the audio rate, its mean is removed, and the peak is normalized to
0.9 before 16-bit quantization.
"""

from __future__ import annotations

import io as _io
import math
import struct
import wave
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .analysis import DEFAULT_INIT
from .circuit import CircuitParams
from .integrator import (
    DEFAULT_DT,
    DEFAULT_RECORD_EVERY,
    SET_R0,
    Event,
    Schedule,
    SineR0,
    boxcar_resample,
    simulate,
)
from .io import atomic_open, write_csv

STAIRCASE = "staircase"
SINE = "sine"
DEFAULT_LEVELS = (2000.0, 1800.0, 1600.0)
DEFAULT_RATE = 44100
TRANSIENT = 0.01  # s dropped before the clip starts
PEAK = 0.9
SILENCE = 1e-9  # V
NODES = ("v_c1", "v_c2", "i_l")


class DegenerateAudio(ArithmeticError):
    """The rendered node is silent after the transient."""


@dataclass(frozen=True)
class Modulation:
    kind: str = STAIRCASE
    levels: tuple[float, ...] = DEFAULT_LEVELS
    center: float = 1850.0
    depth: float = 150.0
    freq: float = 100.0
    duration: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "levels", tuple(float(v) for v in self.levels))
        if self.kind not in (STAIRCASE, SINE):
            raise ValueError(f"modulation kind must be {STAIRCASE!r} or {SINE!r}")
        if not (self.freq > 0 and math.isfinite(self.freq)):
            raise ValueError("modulation frequency must be positive")
        if not self.duration > 0:
            raise ValueError("duration must be positive")
        if self.kind == STAIRCASE:
            if not self.levels:
                raise ValueError("staircase needs at least one level")
            if any(not (v > 0 and math.isfinite(v)) for v in self.levels):
                raise ValueError("staircase levels must be positive resistances")
        elif not (self.center > 0 and 0 <= self.depth < self.center):
            raise ValueError("sine modulation needs center > depth >= 0")

    @classmethod
    def staircase(cls, levels: Sequence[float] = DEFAULT_LEVELS, freq: float = 100.0,
                  duration: float = 1.0) -> "Modulation":
        return cls(STAIRCASE, tuple(levels), freq=freq, duration=duration)

    @classmethod
    def sine(cls, center: float = 1850.0, depth: float = 150.0, freq: float = 100.0,
             duration: float = 1.0) -> "Modulation":
        return cls(SINE, center=center, depth=depth, freq=freq, duration=duration)

    @property
    def hold(self) -> float:
        """Time each staircase level is held."""
        return 1.0 / (self.freq * len(self.levels))


@dataclass(frozen=True)
class AudioClip:
    rate: int
    samples: np.ndarray = field(repr=False)

    def __post_init__(self):
        if not (isinstance(self.rate, (int, np.integer)) and self.rate > 0):
            raise ValueError("sample rate must be a positive integer")
        s = np.asarray(self.samples, dtype=np.float64)
        if s.ndim != 1 or not np.all(np.isfinite(s)) or (len(s) and np.max(np.abs(s)) > 1.0):
            raise ValueError("samples must be a finite 1-D sequence within [-1, 1]")
        object.__setattr__(self, "samples", s)

    @property
    def duration(self) -> float:
        return len(self.samples) / self.rate


def modulation_schedule(m: Modulation, t_end: float | None = None) -> Schedule:
    """Events (staircase) or a continuous waveform (sine) driving r0 until ``t_end``."""
    t_end = m.duration + TRANSIENT if t_end is None else t_end
    if m.kind == SINE:
        return Schedule((), SineR0(m.center, m.depth, m.freq))
    n = int(math.ceil(t_end / m.hold - 1e-9))
    events = tuple(Event(k * m.hold, SET_R0, m.levels[k % len(m.levels)]) for k in range(n))
    return Schedule(events)


def synthesize(p: CircuitParams, m: Modulation, rate: int = DEFAULT_RATE, output_node: str = "v_c1",
               dt: float = DEFAULT_DT, record_every: int = DEFAULT_RECORD_EVERY,
               init: Sequence[float] = DEFAULT_INIT) -> tuple[AudioClip, np.ndarray]:
    """Render ``m.duration`` seconds of ``output_node`` after a 10 ms transient.

    Returns the clip and the pre-quantization node voltage at the audio rate
    (after DC removal, before scaling).
    """
    if output_node not in NODES:
        raise ValueError(f"output node must be one of {NODES}")
    rec_rate = 1.0 / (dt * record_every)
    if rate > rec_rate * (1 + 1e-12):
        raise ValueError(f"audio rate {rate} Hz exceeds the recording rate {rec_rate:g} Hz")
    if m.duration < TRANSIENT:
        raise ValueError("duration must be at least 10 ms")
    t_end = TRANSIENT + m.duration
    tr = simulate(p, init, t_end, dt, modulation_schedule(m, t_end), record_every, discard=TRANSIENT)
    x = boxcar_resample(tr.samples[:, NODES.index(output_node)], tr.rate, rate)
    x = x[: int(round(m.duration * rate))]
    x = x - x.mean()
    peak = float(np.max(np.abs(x))) if len(x) else 0.0
    if not peak >= SILENCE:
        raise DegenerateAudio(f"{output_node} is silent after the transient (peak {peak:.3g})")
    return AudioClip(int(rate), x * (PEAK / peak)), x


def pcm16(samples: np.ndarray) -> np.ndarray:
    return np.round(np.asarray(samples, dtype=np.float64) * 32767.0).astype("<i2")


def wav_bytes(clip: AudioClip) -> bytes:
    buf = _io.BytesIO()
    with wave.open(buf, "wb") as w:
        w.setnchannels(1)
        w.setsampwidth(2)
        w.setframerate(clip.rate)
        w.writeframes(pcm16(clip.samples).tobytes())
    return buf.getvalue()


def write_wav(clip: AudioClip, destination) -> int:
    """Mono PCM16 WAV; returns the number of bytes written."""
    data = wav_bytes(clip)
    with atomic_open(Path(destination), "wb") as fh:
        fh.write(data)
    return len(data)


def read_wav(source) -> AudioClip:
    """Parse a mono 16-bit PCM WAV written by :func:`write_wav`."""
    with wave.open(str(source), "rb") as w:
        if w.getnchannels() != 1 or w.getsampwidth() != 2 or w.getcomptype() != "NONE":
            raise ValueError("expected mono 16-bit PCM")
        rate = w.getframerate()
        raw = w.readframes(w.getnframes())
    q = np.frombuffer(raw, dtype="<i2").astype(np.float64) / 32767.0
    return AudioClip(rate, np.clip(q, -1.0, 1.0))


def riff_sizes(data: bytes) -> tuple[int, int]:
    """(RIFF chunk size, data chunk size) as stored in a canonical 44-byte header."""
    return struct.unpack_from("<I", data, 4)[0], struct.unpack_from("<I", data, 40)[0]


def write_samples_csv(path, rate: int, samples: np.ndarray) -> None:
    write_csv(path, ("t", "value"), (np.arange(len(samples)) / rate, samples))


def spectrogram(x: np.ndarray, seg: int) -> np.ndarray:
    """Magnitude spectra of consecutive non-overlapping Hann-windowed segments."""
    x = np.asarray(x, dtype=np.float64)
    n = len(x) // seg
    frames = x[: n * seg].reshape(n, seg) * np.hanning(seg)
    return np.abs(np.fft.rfft(frames, axis=1))


def spectral_flatness(x: np.ndarray) -> float:
    """Geometric over arithmetic mean of the power spectrum (0 = pure tone, 1 = white)."""
    pw = np.abs(np.fft.rfft(np.asarray(x, dtype=np.float64) * np.hanning(len(x)))) ** 2 + 1e-300
    return float(np.exp(np.mean(np.log(pw))) / np.mean(pw))
