"""Array data synthesis, noise injection, and cross-spectral estimation.

Time-domain channels follow the free-field monopole model: each sensor sees
amplitude/(4*pi*r) times the source waveform delayed by r/C.  Tones are
evaluated analytically; broadband sources use bandpass-filtered Gaussian
noise with windowed-sinc fractional delays.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import signal as sps

from .exceptions import DegenerateGeometryError, NyquistError, OffBinFrequencyError
from .geometry import ArrayGeometry
from .validation import (
    check_csm_entries,
    check_point,
    check_positive,
    check_snapshot_blocks,
)
from .waves import MIN_DISTANCE

#: Taps of the windowed-sinc fractional-delay filter for broadband sources.
FRACTIONAL_DELAY_TAPS = 65

#: Samples discarded to let the bandpass filter reach steady state.
_FILTER_WARMUP = 4096

_TIMESERIES_MAGIC = b"CSBT"
_TIMESERIES_VERSION = 1
_TIMESERIES_HEADER = struct.Struct("<4sIIQd")


@dataclass(frozen=True)
class Source:
    """One source of a scene: a tone or a broadband emitter.

    Attributes:
        position: 3-D position in meters.
        kind: "tone" or "broadband".
        amplitude: pressure amplitude in Pa at 1 m.  Tones use it as the peak
            amplitude; broadband waveforms are scaled to the RMS of a tone
            with the same amplitude (amplitude / sqrt(2)), so both kinds
            radiate the same power at 1 m.
        frequency: tone frequency in Hz (tones only).
        band: (low, high) passband edges in Hz (broadband only).
        phase: tone phase in radians.
        seed: regeneration seed for the broadband waveform.
    """

    position: np.ndarray
    kind: str
    amplitude: float
    frequency: float | None = None
    band: tuple[float, float] | None = None
    phase: float = 0.0
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "position", check_point(self.position, "source position"))
        check_positive(self.amplitude, "amplitude")
        if self.kind == "tone":
            if self.frequency is None:
                raise ValueError("tone sources need a frequency")
            check_positive(self.frequency, "frequency")
        elif self.kind == "broadband":
            if self.band is None:
                raise ValueError("broadband sources need band edges")
            lo, hi = (float(v) for v in self.band)
            if not (0 < lo < hi):
                raise ValueError(f"band edges must satisfy 0 < low < high, got {self.band}")
            object.__setattr__(self, "band", (lo, hi))
        else:
            raise ValueError(f"unknown source kind {self.kind!r}")

    @property
    def max_frequency(self) -> float:
        return self.frequency if self.kind == "tone" else self.band[1]


def tone(position, frequency: float, amplitude: float = 1.0, phase: float = 0.0) -> Source:
    """Monopole tone: amplitude * cos(2*pi*frequency*t + phase) at 1 m."""
    return Source(position=np.asarray(position, dtype=float), kind="tone",
                  amplitude=amplitude, frequency=float(frequency), phase=float(phase))


def broadband(position, band, amplitude: float = 1.0, seed: int = 0) -> Source:
    """Monopole broadband source: bandpass Gaussian noise, deterministic per seed."""
    return Source(position=np.asarray(position, dtype=float), kind="broadband",
                  amplitude=amplitude, band=(float(band[0]), float(band[1])), seed=int(seed))


@dataclass(frozen=True)
class SourceScene:
    """An immutable collection of sources."""

    sources: tuple[Source, ...]

    def __init__(self, sources):
        srcs = tuple(sources)
        if not srcs:
            raise ValueError("scene needs at least one source")
        object.__setattr__(self, "sources", srcs)

    @property
    def max_frequency(self) -> float:
        return max(s.max_frequency for s in self.sources)


@dataclass(frozen=True)
class TimeSeries:
    """Multichannel pressure samples: row i is the channel of sensor i."""

    samples: np.ndarray
    sample_rate: float

    def __post_init__(self):
        arr = np.asarray(self.samples, dtype=np.float64).copy()
        if arr.ndim != 2 or arr.shape[1] < 1:
            raise ValueError(f"samples must have shape (M, L) with L >= 1, got {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("samples contain non-finite values")
        check_positive(self.sample_rate, "sample_rate")
        arr.setflags(write=False)
        object.__setattr__(self, "samples", arr)

    @property
    def num_channels(self) -> int:
        return self.samples.shape[0]

    @property
    def num_samples(self) -> int:
        return self.samples.shape[1]


@dataclass(frozen=True)
class SnapshotSet:
    """Per-block frequency-domain sensor vectors at one analysis bin.

    ``blocks[k]`` is the complex M-vector of block k, scaled so an on-bin
    sinusoid of complex amplitude a yields Y = a.
    """

    blocks: np.ndarray
    frequency: float
    block_size: int
    window: str
    sample_rate: float

    def __post_init__(self):
        arr = check_snapshot_blocks(self.blocks).copy()
        arr.setflags(write=False)
        object.__setattr__(self, "blocks", arr)

    @property
    def num_blocks(self) -> int:
        return self.blocks.shape[0]

    @property
    def num_channels(self) -> int:
        return self.blocks.shape[1]


@dataclass(frozen=True)
class CrossSpectralMatrix:
    """Hermitian PSD M x M matrix of averaged snapshot outer products."""

    entries: np.ndarray
    block_count: int
    frequency: float

    def __post_init__(self):
        ent = check_csm_entries(self.entries).copy()
        diag = ent.diagonal().real
        if np.any(diag < -1e-12 * max(diag.max(initial=0.0), 1.0)):
            raise ValueError("cross-spectral matrix diagonal must be nonnegative")
        trace = diag.sum()
        eigmin = np.linalg.eigvalsh(ent).min() if ent.shape[0] > 1 else diag[0]
        if eigmin < -1e-10 * max(trace, 1e-300):
            raise ValueError("cross-spectral matrix is not positive semidefinite")
        ent.setflags(write=False)
        object.__setattr__(self, "entries", ent)

    @property
    def num_channels(self) -> int:
        return self.entries.shape[0]


def _fractional_delay_kernel(frac: float, taps: int = FRACTIONAL_DELAY_TAPS) -> np.ndarray:
    """Windowed-sinc interpolation kernel delaying by (taps-1)/2 + frac samples."""
    center = (taps - 1) / 2.0
    n = np.arange(taps)
    kernel = np.sinc(n - center - frac) * np.hanning(taps)
    return kernel / kernel.sum()


def _broadband_waveform(source: Source, sample_rate: float, length: int,
                        master_seed: int) -> np.ndarray:
    """Deterministic bandpass Gaussian waveform, unit tone-equivalent amplitude."""
    rng = np.random.default_rng(np.random.SeedSequence([int(master_seed) & 0xFFFFFFFF,
                                                        int(source.seed) & 0xFFFFFFFF]))
    raw = rng.standard_normal(length + _FILTER_WARMUP)
    lo, hi = source.band
    sos = sps.butter(4, [lo, hi], btype="bandpass", fs=sample_rate, output="sos")
    filtered = sps.sosfilt(sos, raw)[_FILTER_WARMUP:]
    rms = np.sqrt(np.mean(filtered**2))
    if rms == 0.0:
        raise ValueError("broadband waveform degenerated to zero; widen the band")
    # Match the RMS of a unit-amplitude tone.
    return filtered / (rms * np.sqrt(2.0))


def synthesize(
    scene: SourceScene,
    geometry: ArrayGeometry,
    sample_rate: float,
    duration: float,
    speed: float,
    seed: int = 0,
) -> TimeSeries:
    """Render the array time series for a scene.

    Channel i receives, for every source, amplitude/(4*pi*r_i) times the
    source waveform delayed by r_i/speed.  Tone delays are exact (analytic);
    broadband delays use a 65-tap windowed-sinc interpolator.

    Raises:
        NyquistError: if sample_rate <= 2x the highest scene frequency.
        DegenerateGeometryError: if a source (nearly) touches a sensor.
    """
    check_positive(sample_rate, "sample_rate")
    check_positive(duration, "duration")
    check_positive(speed, "speed")
    length = int(round(duration * sample_rate))
    if length < 1:
        raise ValueError("duration * sample_rate must be >= 1")
    if sample_rate <= 2.0 * scene.max_frequency:
        raise NyquistError(
            f"sample_rate {sample_rate} Hz must exceed twice the highest scene "
            f"frequency ({scene.max_frequency} Hz)"
        )

    m = geometry.num_sensors
    t = np.arange(length) / sample_rate
    out = np.zeros((m, length))

    for source in scene.sources:
        r = np.linalg.norm(geometry.positions - source.position[None, :], axis=1)
        bad = np.nonzero(r < MIN_DISTANCE)[0]
        if bad.size:
            raise DegenerateGeometryError(
                f"source at {tuple(source.position)} coincides with sensor {bad[0]}"
            )
        gains = source.amplitude / (4.0 * np.pi * r)
        delays = r / speed

        if source.kind == "tone":
            w = 2.0 * np.pi * source.frequency
            out += gains[:, None] * np.cos(w * (t[None, :] - delays[:, None]) + source.phase)
        else:
            delay_samples = delays * sample_rate
            n_int = np.floor(delay_samples).astype(int)
            ext = int(n_int.max()) + FRACTIONAL_DELAY_TAPS
            # Waveform defined for sample indices -ext .. length-1 so every
            # channel is in steady state from t = 0.
            wave = _broadband_waveform(source, sample_rate, length + ext, seed)
            center = (FRACTIONAL_DELAY_TAPS - 1) // 2
            for i in range(m):
                kernel = _fractional_delay_kernel(delay_samples[i] - n_int[i])
                full = np.convolve(wave, kernel)
                start = ext - n_int[i] + center
                out[i] += gains[i] * full[start:start + length]

    return TimeSeries(out, sample_rate=float(sample_rate))


def add_noise(clean: TimeSeries, snr_db: float, seed: int) -> tuple[TimeSeries, np.ndarray]:
    """Add independent white Gaussian noise per channel at a target SNR.

    The per-channel noise variance is set from the measured clean channel
    power so that 10*log10(signal_power_i / noise_power_i) == snr_db holds
    exactly for every channel.  ``snr_db = inf`` adds nothing.

    Returns:
        (noisy time series, per-channel noise variance in Pa^2).
    """
    if np.isposinf(snr_db):
        return TimeSeries(clean.samples, clean.sample_rate), np.zeros(clean.num_channels)
    snr_db = float(snr_db)
    if not np.isfinite(snr_db):
        raise ValueError("snr_db must be finite or +inf")

    signal_power = np.mean(clean.samples**2, axis=1)
    if np.any(signal_power == 0.0):
        idx = int(np.argmin(signal_power))
        raise ValueError(f"channel {idx} has zero clean power; finite SNR is undefined")
    noise_power = signal_power / (10.0 ** (snr_db / 10.0))

    rng = np.random.default_rng(int(seed))
    noise = rng.standard_normal(clean.samples.shape) * np.sqrt(noise_power)[:, None]
    return TimeSeries(clean.samples + noise, clean.sample_rate), noise_power


_WINDOWS = {
    "rectangular": np.ones,
    # Periodic Hann: zero leakage outside the two adjacent bins.
    "hann": lambda n: 0.5 - 0.5 * np.cos(2.0 * np.pi * np.arange(n) / n),
}


def to_snapshots(
    ts: TimeSeries,
    block_size: int,
    frequency: float,
    window: str = "rectangular",
    overlap_fraction: float = 0.5,
) -> SnapshotSet:
    """Extract per-block frequency-domain snapshots at one exact DFT bin.

    Blocks of ``block_size`` samples advance by ``block_size * (1 -
    overlap_fraction)``; each is windowed and transformed, and coherent-gain
    compensation (2 / sum(window)) is applied so an on-bin sinusoid of
    amplitude a yields |Y| = a.

    Raises:
        OffBinFrequencyError: if the frequency is not an exact bin; the two
            nearest bins are reported.
        ValueError: block-too-long, unknown window, bad overlap.
    """
    block_size = int(block_size)
    if block_size < 2:
        raise ValueError("block_size must be >= 2")
    if block_size > ts.num_samples:
        raise ValueError(
            f"block_size {block_size} exceeds series length {ts.num_samples}"
        )
    if window not in _WINDOWS:
        raise ValueError(f"unknown window {window!r}; expected one of {sorted(_WINDOWS)}")
    if not (0.0 <= overlap_fraction < 1.0):
        raise ValueError("overlap_fraction must lie in [0, 1)")
    check_positive(frequency, "frequency")

    bin_width = ts.sample_rate / block_size
    bin_exact = frequency / bin_width
    bin_index = int(round(bin_exact))
    if abs(bin_exact - bin_index) > 1e-6:
        below = np.floor(bin_exact) * bin_width
        above = np.ceil(bin_exact) * bin_width
        raise OffBinFrequencyError(frequency, below, above)
    if not (1 <= bin_index < block_size / 2):
        raise ValueError(
            f"bin {bin_index} must lie strictly between DC and Nyquist for "
            f"block_size {block_size}"
        )

    hop = max(1, int(round(block_size * (1.0 - overlap_fraction))))
    num_blocks = (ts.num_samples - block_size) // hop + 1
    starts = np.arange(num_blocks) * hop

    win = _WINDOWS[window](block_size)
    probe = win * np.exp(-2j * np.pi * bin_index * np.arange(block_size) / block_size)
    scale = 2.0 / win.sum()

    view = np.lib.stride_tricks.sliding_window_view(ts.samples, block_size, axis=1)
    segments = view[:, starts, :]  # (M, K, block_size)
    blocks = scale * np.einsum("mkb,b->km", segments, probe)
    return SnapshotSet(blocks, frequency=float(frequency), block_size=block_size,
                       window=window, sample_rate=ts.sample_rate)


def snapshot_noise_variance(noise_power: np.ndarray | float, block_size: int,
                            window: str = "rectangular") -> np.ndarray | float:
    """Per-bin snapshot variance produced by white noise of the given variance.

    With the coherent-gain scaling of :func:`to_snapshots`, time-domain white
    noise of variance s2 yields E|Y|^2 = 4 * s2 * sum(w^2) / sum(w)^2 at
    every bin; this converts noise powers from :func:`add_noise` into the
    units the residual-ball policies need.
    """
    win = _WINDOWS[window](int(block_size))
    factor = 4.0 * np.sum(win**2) / np.sum(win) ** 2
    return noise_power * factor


def csm_from_blocks(blocks: np.ndarray, frequency: float) -> CrossSpectralMatrix:
    """Average outer products of raw snapshot rows: R = (1/K) sum_k Y_k Y_k^H."""
    blocks = check_snapshot_blocks(blocks)
    k = blocks.shape[0]
    r = blocks.T @ blocks.conj() / k
    r = 0.5 * (r + r.conj().T)
    return CrossSpectralMatrix(r, block_count=k, frequency=float(frequency))


def estimate_csm(snapshots: SnapshotSet) -> CrossSpectralMatrix:
    """Average the snapshot outer products: R = (1/K) sum_k Y_k Y_k^H."""
    return csm_from_blocks(snapshots.blocks, snapshots.frequency)


def vectorize_csm(csm: CrossSpectralMatrix) -> np.ndarray:
    """Row-major vectorization: element i*M + l equals R[i, l].

    Matches the row convention of the lifted steering matrix.
    """
    return np.asarray(csm.entries).reshape(-1).copy()


def devectorize_csm(vec: np.ndarray, block_count: int, frequency: float) -> CrossSpectralMatrix:
    """Inverse of :func:`vectorize_csm`."""
    vec = np.asarray(vec, dtype=np.complex128)
    m = int(round(np.sqrt(vec.size)))
    if m * m != vec.size:
        raise ValueError(f"vector length {vec.size} is not a perfect square")
    return CrossSpectralMatrix(vec.reshape(m, m), block_count=block_count,
                               frequency=frequency)


def save_timeseries(ts: TimeSeries, path) -> None:
    """Write the binary time-series format (channel-major float64)."""
    header = _TIMESERIES_HEADER.pack(_TIMESERIES_MAGIC, _TIMESERIES_VERSION,
                                     ts.num_channels, ts.num_samples, ts.sample_rate)
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(np.ascontiguousarray(ts.samples, dtype="<f8").tobytes())


def load_timeseries(path) -> TimeSeries:
    """Read a file written by :func:`save_timeseries`."""
    with open(path, "rb") as fh:
        raw = fh.read(_TIMESERIES_HEADER.size)
        if len(raw) < _TIMESERIES_HEADER.size:
            raise ValueError(f"{path}: truncated header")
        magic, version, m, length, sample_rate = _TIMESERIES_HEADER.unpack(raw)
        if magic != _TIMESERIES_MAGIC:
            raise ValueError(f"{path}: bad magic {magic!r}")
        if version != _TIMESERIES_VERSION:
            raise ValueError(f"{path}: unsupported version {version}")
        data = np.frombuffer(fh.read(8 * m * length), dtype="<f8")
        if data.size != m * length:
            raise ValueError(f"{path}: truncated sample data")
    return TimeSeries(data.reshape(m, length), sample_rate=sample_rate)


def save_csm_csv(csm: CrossSpectralMatrix, path, block_size: int | None = None,
                 window: str | None = None) -> None:
    """Write a CSM as CSV rows i,l,re,im plus a JSON sidecar."""
    path = Path(path)
    lines = ["i,l,re,im"]
    m = csm.num_channels
    for i in range(m):
        for l in range(m):
            v = csm.entries[i, l]
            lines.append(f"{i},{l},{v.real!r},{v.imag!r}")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    sidecar = {
        "frequency": csm.frequency,
        "block_count": csm.block_count,
        "block_size": block_size,
        "window": window,
    }
    path.with_suffix(".json").write_text(
        json.dumps(sidecar, indent=2, sort_keys=True) + "\n", encoding="utf-8")
