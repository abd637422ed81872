"""Time-periodic forcing data.

Forcings are finite Fourier series in time over a fixed period T, so
T-periodicity holds by construction: each term is a spatial pattern
multiplied by cos(2 pi m t / T + phase).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DiagnosticsError
from .grid import ScalarField, TensorField, VectorField


@dataclass(frozen=True)
class HarmonicTerm:
    harmonic: int
    field: object  # ScalarField | VectorField | TensorField
    phase: float = 0.0


@dataclass(frozen=True)
class TimeFourierField:
    """Sum of spatial patterns modulated by cos(2 pi m t / T + phase)."""

    period: float
    terms: tuple

    def __post_init__(self):
        if not self.period > 0:
            raise ConfigError(f"forcing period must be positive, got {self.period}")
        kinds = {type(t.field) for t in self.terms}
        if len(kinds) > 1:
            raise ConfigError("all terms of one forcing must share a field kind")

    @property
    def grid(self):
        return self.terms[0].field.grid

    def coefficients(self, t):
        return [
            np.cos(2.0 * np.pi * term.harmonic * t / self.period + term.phase)
            for term in self.terms
        ]

    def value(self, t):
        coefs = self.coefficients(t)
        acc = None
        for c, term in zip(coefs, self.terms):
            acc = c * term.field.values if acc is None else acc + c * term.field.values
        first = self.terms[0].field
        return type(first)(first.grid, acc)


def constant_in_time(period, field):
    return TimeFourierField(period=period, terms=(HarmonicTerm(harmonic=0, field=field),))


@dataclass(frozen=True)
class ForcingSpec:
    """Time-periodic data driving the system: tensor F, vector f, field g, kappa.

    ``kappa`` is the volume-expansion coefficient scaling the buoyancy
    coupling theta * g; it is allowed to be 0 so the coupling can be switched
    off exactly (the zero-temperature reduction needs that).
    """

    period: float
    kappa: float = 0.0
    F: TimeFourierField | None = None
    f: TimeFourierField | None = None
    g: TimeFourierField | None = None

    def __post_init__(self):
        if not (np.isfinite(self.period) and self.period > 0):
            raise ConfigError(f"period must be positive and finite, got {self.period}")
        if self.kappa < 0 or not np.isfinite(self.kappa):
            raise ConfigError(f"kappa must be >= 0, got {self.kappa}")
        for name, tf, kind in (
            ("F", self.F, TensorField),
            ("f", self.f, VectorField),
            ("g", self.g, VectorField),
        ):
            if tf is None:
                continue
            if abs(tf.period - self.period) > 1e-12 * self.period:
                raise ConfigError(f"forcing component {name} has period {tf.period} != {self.period}")
            for term in tf.terms:
                if not isinstance(term.field, kind):
                    raise ConfigError(f"forcing component {name} needs {kind.__name__} patterns")

    @property
    def grid(self):
        for tf in (self.F, self.f, self.g):
            if tf is not None:
                return tf.grid
        return None

    def is_empty(self):
        return self.F is None and self.f is None and (self.g is None or self.kappa == 0.0)


def zero_forcing(period=1.0):
    return ForcingSpec(period=period)


@dataclass
class SampledScalarSeries:
    """A scalar field known at node times; linear interpolation in between."""

    times: np.ndarray
    fields: list

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        if len(self.fields) != len(self.times):
            raise DiagnosticsError("sampled series needs one field per time")

    @classmethod
    def from_trajectory(cls, traj):
        return cls(times=np.asarray(traj.times), fields=[s.theta for s in traj.states])

    def value(self, t):
        ts = self.times
        if t <= ts[0]:
            return self.fields[0]
        if t >= ts[-1]:
            return self.fields[-1]
        j = int(np.searchsorted(ts, t)) - 1
        tj, tj1 = ts[j], ts[j + 1]
        if abs(t - tj) <= 1e-12 * max(1.0, abs(t)):
            return self.fields[j]
        x = (t - tj) / (tj1 - tj)
        f0, f1 = self.fields[j], self.fields[j + 1]
        return ScalarField(f0.grid, (1.0 - x) * f0.values + x * f1.values)


@dataclass
class SampledSpectralForcing:
    """Extra inhomogeneity in coefficient space, sampled at node times.

    Used by the periodic engine to freeze a nonlinearity along a stored
    trajectory: rows interpolate linearly between nodes.
    """

    times: np.ndarray
    vel: list | None = None  # list of (n, ...) complex arrays
    th: list | None = None  # list of (...) complex arrays

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)

    def _interp(self, samples, t):
        ts = self.times
        if t <= ts[0]:
            return samples[0]
        if t >= ts[-1]:
            return samples[-1]
        j = int(np.searchsorted(ts, t)) - 1
        x = (t - ts[j]) / (ts[j + 1] - ts[j])
        if x == 0.0:
            return samples[j]
        return (1.0 - x) * samples[j] + x * samples[j + 1]

    def rows_at(self, t):
        vel = self._interp(self.vel, t) if self.vel is not None else None
        th = self._interp(self.th, t) if self.th is not None else None
        return vel, th
