"""Uniformly sampled periodic signals and their discrete spectra.

Time is in milliseconds and sampling rates are in samples per millisecond.
The forward transform is unnormalized and the inverse carries the 1/g factor,
so that ``<u, u> = dt/g * sum |U_k|^2``.
"""

from __future__ import annotations

import csv
import functools
import io
import os
from dataclasses import dataclass, field

import numpy as np
from scipy import signal as _scisignal

from .errors import DimensionError

__all__ = [
    "TimeGrid",
    "Signal",
    "Spectrum",
    "LiftedSignal",
    "inner_product",
    "l2_norm",
    "to_spectrum",
    "from_spectrum",
    "resample",
    "save_csv",
    "load_csv",
    "signals_to_csv",
]


@dataclass(frozen=True)
class TimeGrid:
    """Uniform periodic time grid.

    Parameters
    ----------
    duration : float
        Time span in ms.
    fs : float
        Samples per ms.
    """

    duration: float
    fs: float
    length: int = field(init=False)

    def __post_init__(self):
        if not (np.isfinite(self.duration) and self.duration > 0):
            raise DimensionError(f"duration must be positive, got {self.duration}")
        if not (np.isfinite(self.fs) and self.fs > 0):
            raise DimensionError(f"fs must be positive, got {self.fs}")
        g = int(round(self.duration * self.fs))
        if g < 2:
            raise DimensionError(f"grid needs at least 2 samples, got {g}")
        object.__setattr__(self, "length", g)

    @property
    def dt(self) -> float:
        return 1.0 / self.fs

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.length) * self.dt

    @property
    def omega(self) -> np.ndarray:
        """Angular frequencies of the ``rfft`` bins in rad/ms.

        The Nyquist bin of an even-length grid is set to zero so that every
        spectral operator maps real signals to real signals without losing
        the inverse relation between an operator and its resolvent.
        """
        return _rfft_omega(self.length, self.dt)

    def check_same(self, other: "TimeGrid"):
        if self != other:
            raise DimensionError(f"grid mismatch: {self} vs {other}")


@functools.lru_cache(maxsize=64)
def _rfft_omega(g: int, dt: float) -> np.ndarray:
    w = 2.0 * np.pi * np.fft.rfftfreq(g, d=dt)
    if g % 2 == 0:
        w[-1] = 0.0
    w.setflags(write=False)
    return w


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=float, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Signal:
    """Real samples on a :class:`TimeGrid`. Samples are stored read-only."""

    grid: TimeGrid
    samples: np.ndarray

    def __post_init__(self):
        s = _frozen(self.samples)
        if s.shape != (self.grid.length,):
            raise DimensionError(
                f"expected {self.grid.length} samples, got shape {s.shape}"
            )
        if not np.all(np.isfinite(s)):
            raise ValueError("signal samples must be finite")
        object.__setattr__(self, "samples", s)

    @classmethod
    def constant(cls, grid: TimeGrid, value: float) -> "Signal":
        return cls(grid, np.full(grid.length, float(value)))

    @classmethod
    def from_function(cls, grid: TimeGrid, fn) -> "Signal":
        return cls(grid, fn(grid.times))

    def __len__(self):
        return self.grid.length


@dataclass(frozen=True, eq=False)
class Spectrum:
    """Full-length DFT coefficients of a signal (unnormalized forward)."""

    grid: TimeGrid
    coefficients: np.ndarray

    def __post_init__(self):
        c = np.array(self.coefficients, dtype=complex, copy=True)
        if c.shape != (self.grid.length,):
            raise DimensionError(f"expected {self.grid.length} coefficients")
        c.setflags(write=False)
        object.__setattr__(self, "coefficients", c)

    def is_conjugate_symmetric(self, atol=1e-9) -> bool:
        c = self.coefficients
        mirrored = np.conj(np.roll(c[::-1], 1))
        return bool(np.allclose(c, mirrored, atol=atol * max(1.0, np.abs(c).max())))


@dataclass(frozen=True, eq=False)
class LiftedSignal:
    """Ordered tuple of signals on one grid, an element of the product space."""

    parts: tuple

    def __post_init__(self):
        parts = tuple(self.parts)
        if not parts:
            raise DimensionError("a lifted signal needs at least one part")
        g0 = parts[0].grid
        for p in parts[1:]:
            g0.check_same(p.grid)
        object.__setattr__(self, "parts", parts)

    @property
    def grid(self) -> TimeGrid:
        return self.parts[0].grid

    def __len__(self):
        return len(self.parts)

    def __getitem__(self, i):
        return self.parts[i]

    def as_array(self) -> np.ndarray:
        return np.stack([p.samples for p in self.parts])

    @classmethod
    def from_array(cls, grid: TimeGrid, arr) -> "LiftedSignal":
        arr = np.atleast_2d(np.asarray(arr, dtype=float))
        return cls(tuple(Signal(grid, row) for row in arr))


def inner_product(u: Signal, y: Signal) -> float:
    """Riemann-sum inner product ``dt * sum(u * y)``."""
    u.grid.check_same(y.grid)
    return float(u.grid.dt * np.dot(u.samples, y.samples))


def l2_norm(u: Signal) -> float:
    return float(np.sqrt(inner_product(u, u)))


def to_spectrum(u: Signal) -> Spectrum:
    return Spectrum(u.grid, np.fft.fft(u.samples))


def from_spectrum(s: Spectrum) -> Signal:
    """Inverse transform; the imaginary residue of a real spectrum is dropped."""
    x = np.fft.ifft(s.coefficients)
    return Signal(s.grid, x.real)


def resample(u: Signal, target: TimeGrid) -> Signal:
    """Band-limited resampling by spectral zero padding or truncation."""
    if not np.isclose(u.grid.duration, target.duration, rtol=0, atol=1e-9):
        raise DimensionError(
            f"resample needs equal durations: {u.grid.duration} vs {target.duration}"
        )
    if target.length == u.grid.length:
        return Signal(target, u.samples)
    return Signal(target, _scisignal.resample(u.samples, target.length))


def signals_to_csv(signals, header=None) -> str:
    """Render one or more same-grid signals as CSV text.

    Times use six decimals; values use 17 significant digits so that a
    read-back is exact.
    """
    signals = list(signals)
    grid = signals[0].grid
    for s in signals[1:]:
        grid.check_same(s.grid)
    if header is None:
        header = ["t", "value"] if len(signals) == 1 else ["t"] + [
            f"v{k}" for k in range(len(signals))
        ]
    buf = io.StringIO()
    buf.write(",".join(header) + "\n")
    t = grid.times
    cols = [s.samples for s in signals]
    for k in range(grid.length):
        row = [f"{t[k]:.6f}"] + [f"{c[k]:.17g}" for c in cols]
        buf.write(",".join(row) + "\n")
    return buf.getvalue()


def save_csv(u: Signal, path) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(signals_to_csv([u]))


def load_csv(path, fs=None) -> Signal:
    """Read a ``t,value`` file back into a Signal.

    The grid is inferred from the sample spacing unless ``fs`` is given.
    """
    with open(os.fspath(path), newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or [c.strip() for c in rows[0][:2]] != ["t", "value"]:
        raise ValueError(f"{path}: expected header 't,value'")
    data = np.array([[float(r[0]), float(r[1])] for r in rows[1:] if r], dtype=float)
    if data.shape[0] < 2:
        raise ValueError(f"{path}: need at least two samples")
    t, v = data[:, 0], data[:, 1]
    if fs is None:
        fs = 1.0 / float(np.median(np.diff(t)))
        fs = float(np.round(fs, 9))
    grid = TimeGrid(len(v) / fs, fs)
    return Signal(grid, v)
