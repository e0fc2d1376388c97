"""Gated-exposure physics.

A gated imager fires a laser pulse and opens the sensor gate a configurable
delay after the pulse has been emitted. The pixel response for a target at
distance ``r`` is the time overlap between the returning pulse and the gate
gain window, optionally attenuated by target reflectance, atmospheric
extinction and the 1/r^2 irradiance falloff.

Delay convention used throughout the package: the configured delay ``t0`` is
measured from the *trailing* edge of the emitted pulse, i.e. the gate opens
``pulse_width + t0`` nanoseconds after the pulse onset. With rectangular
shapes this puts the sensitive band of a slice at
``[c0*t0/2, c0*(t0 + t_pulse + t_gate)/2]`` metres.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import UnsupportedShapeError

#: Speed of light in metres per nanosecond (exact).
SPEED_OF_LIGHT_M_PER_NS = 0.299792458

PULSE_KINDS = ("rectangular", "triangular", "trapezoidal", "gaussian")
GATE_KINDS = ("rectangular", "triangular", "trapezoidal")


def _check_finite(name, value):
    if not math.isfinite(value):
        raise ValueError(f"{name} must be finite, got {value!r}")
    return float(value)


@dataclass(frozen=True)
class PulseShape:
    """Emitted laser pulse: unit peak power on a finite support [0, width_ns].

    ``rise_ns``/``fall_ns`` apply to trapezoidal pulses, ``sigma_ns`` to
    (truncated) gaussian pulses.
    """

    width_ns: float
    kind: str = "rectangular"
    rise_ns: float = 0.0
    fall_ns: float = 0.0
    sigma_ns: float | None = None

    def __post_init__(self):
        if self.kind not in PULSE_KINDS:
            raise ValueError(f"unknown pulse kind {self.kind!r}")
        if not (math.isfinite(self.width_ns) and self.width_ns > 0):
            raise ValueError("pulse width must be positive and finite")
        if self.kind == "trapezoidal":
            if self.rise_ns < 0 or self.fall_ns < 0:
                raise ValueError("rise/fall times must be >= 0")
            if self.rise_ns + self.fall_ns > self.width_ns:
                raise ValueError("rise + fall must not exceed the pulse width")
        if self.kind == "gaussian" and self.sigma_ns is None:
            object.__setattr__(self, "sigma_ns", self.width_ns / 6.0)
        if self.sigma_ns is not None and self.sigma_ns <= 0:
            raise ValueError("gaussian sigma must be positive")

    def power(self, t):
        """Instantaneous power at time ``t`` (ns from pulse onset)."""
        t = np.asarray(t, dtype=float)
        w = self.width_ns
        inside = (t >= 0.0) & (t <= w)
        if self.kind == "rectangular":
            out = inside.astype(float)
        elif self.kind == "triangular":
            out = np.where(inside, 1.0 - np.abs(2.0 * t / w - 1.0), 0.0)
        elif self.kind == "trapezoidal":
            out = np.where(inside, 1.0, 0.0)
            if self.rise_ns > 0:
                out = np.where(inside & (t < self.rise_ns), t / self.rise_ns, out)
            if self.fall_ns > 0:
                out = np.where(inside & (t > w - self.fall_ns), (w - t) / self.fall_ns, out)
        else:  # gaussian, truncated to the finite support
            mid = 0.5 * w
            out = np.where(inside, np.exp(-0.5 * ((t - mid) / self.sigma_ns) ** 2), 0.0)
        return out if out.ndim else float(out)

    def knots(self):
        """Support breakpoints, used to split numeric integration intervals."""
        w = self.width_ns
        if self.kind == "rectangular":
            return (0.0, w)
        if self.kind == "triangular":
            return (0.0, 0.5 * w, w)
        if self.kind == "trapezoidal":
            return (0.0, self.rise_ns, w - self.fall_ns, w)
        return (0.0, 0.5 * w, w)


@dataclass(frozen=True)
class GateShape:
    """Sensor gate gain: unit peak on a finite support [0, width_ns]."""

    width_ns: float
    kind: str = "rectangular"
    rise_ns: float = 0.0
    fall_ns: float = 0.0

    def __post_init__(self):
        if self.kind not in GATE_KINDS:
            raise ValueError(f"unknown gate kind {self.kind!r}")
        if not (math.isfinite(self.width_ns) and self.width_ns > 0):
            raise ValueError("gate width must be positive and finite")
        if self.kind == "trapezoidal":
            if self.rise_ns < 0 or self.fall_ns < 0:
                raise ValueError("rise/fall times must be >= 0")
            if self.rise_ns + self.fall_ns > self.width_ns:
                raise ValueError("rise + fall must not exceed the gate width")

    def gain(self, t):
        """Gate gain at time ``t`` (ns from gate opening)."""
        t = np.asarray(t, dtype=float)
        w = self.width_ns
        inside = (t >= 0.0) & (t <= w)
        if self.kind == "rectangular":
            out = inside.astype(float)
        elif self.kind == "triangular":
            out = np.where(inside, 1.0 - np.abs(2.0 * t / w - 1.0), 0.0)
        else:
            out = np.where(inside, 1.0, 0.0)
            if self.rise_ns > 0:
                out = np.where(inside & (t < self.rise_ns), t / self.rise_ns, out)
            if self.fall_ns > 0:
                out = np.where(inside & (t > w - self.fall_ns), (w - t) / self.fall_ns, out)
        return out if out.ndim else float(out)

    def knots(self):
        w = self.width_ns
        if self.kind == "rectangular":
            return (0.0, w)
        if self.kind == "triangular":
            return (0.0, 0.5 * w, w)
        return (0.0, self.rise_ns, w - self.fall_ns, w)


@dataclass(frozen=True)
class SliceConfig:
    """One gated exposure: pulse count, pulse shape, gate shape and delay."""

    pulses: int
    pulse: PulseShape
    gate: GateShape
    delay_ns: float

    def __post_init__(self):
        if int(self.pulses) < 1:
            raise ValueError("pulse count must be >= 1")
        object.__setattr__(self, "pulses", int(self.pulses))
        delay = _check_finite("delay_ns", self.delay_ns)
        if delay < 0:
            raise ValueError("delay must be >= 0")
        object.__setattr__(self, "delay_ns", delay)

    @classmethod
    def rectangular(cls, pulses, pulse_ns, gate_ns, delay_ns):
        return cls(pulses, PulseShape(pulse_ns), GateShape(gate_ns), delay_ns)

    @property
    def is_rectangular(self):
        return self.pulse.kind == "rectangular" and self.gate.kind == "rectangular"

    @property
    def gate_open_ns(self):
        """Gate opening time measured from the pulse onset."""
        return self.pulse.width_ns + self.delay_ns


def standard_slices():
    """The stock three-slice parameter set this package ships as default.

    Slice bands work out to roughly 3-72 m, 18-123 m and 57-176 m; pulse
    counts increase with range to compensate for the weaker far returns.
    """
    return (
        SliceConfig.rectangular(202, 240.0, 220.0, 20.0),
        SliceConfig.rectangular(591, 280.0, 420.0, 120.0),
        SliceConfig.rectangular(770, 370.0, 420.0, 380.0),
    )


@dataclass(frozen=True)
class Atmosphere:
    """Target reflectance and two-way atmospheric extinction.

    The distance-dependent attenuation applied to a return from range ``r``
    is ``alpha * exp(-2 * gamma * r) / r**2``; gamma = 0 models clear air.
    """

    alpha: float = 1.0
    gamma_per_m: float = 0.0

    def __post_init__(self):
        if not (0.0 <= self.alpha <= 1.0):
            raise ValueError("reflectance alpha must lie in [0, 1]")
        if not (math.isfinite(self.gamma_per_m) and self.gamma_per_m >= 0.0):
            raise ValueError("extinction gamma must be >= 0")

    def attenuation(self, r):
        """Two-way path transmission exp(-2*gamma*r)."""
        r = np.asarray(r, dtype=float)
        out = np.exp(-2.0 * self.gamma_per_m * r)
        return out if out.ndim else float(out)

    def kappa(self, r):
        """Full distance factor alpha * beta(r) / r^2. Requires r > 0."""
        r = np.asarray(r, dtype=float)
        if np.any(r <= 0.0):
            raise ValueError("irradiance factor is singular at r <= 0")
        out = self.alpha * np.exp(-2.0 * self.gamma_per_m * r) / (r * r)
        return out if out.ndim else float(out)


@dataclass(frozen=True)
class RangeProfile:
    """Sampled intensity curve over distance (m) or gate delay (ns)."""

    axis: str
    coordinates: np.ndarray
    intensities: np.ndarray

    def __post_init__(self):
        if self.axis not in ("distance_m", "delay_ns"):
            raise ValueError(f"unknown profile axis {self.axis!r}")
        coords = np.asarray(self.coordinates, dtype=float)
        vals = np.asarray(self.intensities, dtype=float)
        if coords.size == 0:
            raise ValueError("profile must contain at least one sample")
        if coords.shape != vals.shape:
            raise ValueError("coordinate/intensity length mismatch")
        if np.any(np.diff(coords) <= 0):
            raise ValueError("profile coordinates must be strictly increasing")
        if np.any(vals < 0):
            raise ValueError("profile intensities must be >= 0")
        object.__setattr__(self, "coordinates", coords)
        object.__setattr__(self, "intensities", vals)

    def __len__(self):
        return self.coordinates.size

    def write_csv(self, path):
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("coordinate,intensity\n")
            for c, v in zip(self.coordinates, self.intensities):
                fh.write(f"{float(c)!r},{float(v)!r}\n")


def _adaptive_simpson(f, a, b, tol, depth=48):
    """Adaptive Simpson quadrature of ``f`` on [a, b] to absolute ``tol``."""
    fa, fb = f(a), f(b)
    mid = 0.5 * (a + b)
    fm = f(mid)
    whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb)

    def recurse(lo, flo, mi, fmi, hi, fhi, approx, tol, depth):
        lm = 0.5 * (lo + mi)
        rm = 0.5 * (mi + hi)
        flm, frm = f(lm), f(rm)
        left = (mi - lo) / 6.0 * (flo + 4.0 * flm + fmi)
        right = (hi - mi) / 6.0 * (fmi + 4.0 * frm + fhi)
        if depth <= 0 or abs(left + right - approx) <= 15.0 * tol:
            return left + right + (left + right - approx) / 15.0
        return recurse(lo, flo, lm, flm, mi, fmi, left, 0.5 * tol, depth - 1) + recurse(
            mi, fmi, rm, frm, hi, fhi, right, 0.5 * tol, depth - 1
        )

    return recurse(a, fa, mid, fm, b, fb, whole, tol, depth)


def gated_response(pulse: PulseShape, gate: GateShape, delay_ns, r_m):
    """Pixel response (arbitrary units) for a single pulse/gate pair.

    Evaluates the time overlap integral of the returning pulse and the gate
    gain for a target at ``r_m`` metres. Closed form when both shapes are
    rectangular, adaptive Simpson quadrature otherwise.
    """
    delay_ns = _check_finite("delay_ns", delay_ns)
    r_m = _check_finite("r_m", r_m)
    if r_m < 0:
        raise ValueError("target distance must be >= 0")

    tau = 2.0 * r_m / SPEED_OF_LIGHT_M_PER_NS  # two-way travel time
    gate_open = pulse.width_ns + delay_ns
    lo = max(tau, gate_open)
    hi = min(tau + pulse.width_ns, gate_open + gate.width_ns)
    if hi <= lo:
        return 0.0

    if pulse.kind == "rectangular" and gate.kind == "rectangular":
        return hi - lo

    knots = sorted(
        {lo, hi}
        | {tau + k for k in pulse.knots() if lo < tau + k < hi}
        | {gate_open + k for k in gate.knots() if lo < gate_open + k < hi}
    )

    def integrand(t):
        return float(gate.gain(t - gate_open)) * float(pulse.power(t - tau))

    tol = 1e-9 * min(pulse.width_ns, gate.width_ns) / max(len(knots) - 1, 1)
    total = 0.0
    for a, b in zip(knots[:-1], knots[1:]):
        total += _adaptive_simpson(integrand, a, b, tol)
    return max(total, 0.0)


def slice_support(cfg: SliceConfig):
    """Distance band (r_min, r_max) outside which the response is zero."""
    c = SPEED_OF_LIGHT_M_PER_NS
    r_min = 0.5 * c * cfg.delay_ns
    r_max = 0.5 * c * (cfg.delay_ns + cfg.pulse.width_ns + cfg.gate.width_ns)
    return (r_min, r_max)


def rect_overlap(cfg: SliceConfig, r):
    """Vectorized rectangular overlap (ns) for an array of distances."""
    if not cfg.is_rectangular:
        raise UnsupportedShapeError("vectorized overlap requires rectangular shapes")
    r = np.asarray(r, dtype=float)
    tau = 2.0 * r / SPEED_OF_LIGHT_M_PER_NS
    open_t = cfg.gate_open_ns
    lo = np.maximum(tau, open_t)
    hi = np.minimum(tau + cfg.pulse.width_ns, open_t + cfg.gate.width_ns)
    out = np.clip(hi - lo, 0.0, None)
    return out if out.ndim else float(out)


def gdp(pulse: PulseShape, gate: GateShape, r_m, delays):
    """Gate delay profile: response of a fixed target over a delay grid.

    Triangular when pulse and gate widths match, trapezoidal otherwise.
    """
    delays = np.asarray(delays, dtype=float)
    if delays.size == 0:
        raise ValueError("delay grid must not be empty")
    if np.any(np.diff(delays) <= 0):
        raise ValueError("delay grid must be strictly increasing")
    if pulse.kind == "rectangular" and gate.kind == "rectangular":
        tau = 2.0 * float(r_m) / SPEED_OF_LIGHT_M_PER_NS
        open_t = pulse.width_ns + delays
        lo = np.maximum(tau, open_t)
        hi = np.minimum(tau + pulse.width_ns, open_t + gate.width_ns)
        vals = np.clip(hi - lo, 0.0, None)
    else:
        vals = np.array([gated_response(pulse, gate, d, r_m) for d in delays])
    return RangeProfile("delay_ns", delays, vals)


def rip(cfg: SliceConfig, atmo: Atmosphere, r_grid, include_irradiance=True):
    """Range intensity profile of one slice over a distance grid.

    Without irradiance this is ``pulses * overlap(r)``; with irradiance the
    curve is additionally scaled by ``alpha * beta(r) / r^2``.
    """
    r_grid = np.asarray(r_grid, dtype=float)
    if r_grid.size == 0:
        raise ValueError("distance grid must not be empty")
    if np.any(np.diff(r_grid) <= 0):
        raise ValueError("distance grid must be strictly increasing")
    if cfg.is_rectangular:
        vals = cfg.pulses * rect_overlap(cfg, r_grid)
    else:
        vals = cfg.pulses * np.array(
            [gated_response(cfg.pulse, cfg.gate, cfg.delay_ns, r) for r in r_grid]
        )
    if include_irradiance:
        vals = vals * atmo.kappa(r_grid)  # raises on r <= 0
    return RangeProfile("distance_m", r_grid, vals)


def rip_breakpoints(cfg: SliceConfig):
    """Distances where a rectangular slice changes behavior.

    Returns (rise_start, plateau_start, fall_start, fall_end); the plateau
    has zero width when pulse and gate widths are equal.
    """
    if not cfg.is_rectangular:
        raise UnsupportedShapeError("breakpoints are defined for rectangular shapes only")
    c = SPEED_OF_LIGHT_M_PER_NS
    t0 = cfg.delay_ns
    tl = cfg.pulse.width_ns
    tg = cfg.gate.width_ns
    return (
        0.5 * c * t0,
        0.5 * c * (t0 + min(tl, tg)),
        0.5 * c * (t0 + max(tl, tg)),
        0.5 * c * (t0 + tl + tg),
    )
