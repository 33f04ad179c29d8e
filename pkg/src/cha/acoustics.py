"""2D time-domain forward model of the masked single-detector setup.

Geometry lives in the x-y scan plane in millimetres: the mask runs along x
at a fixed y in front of the receiver, and the transmitter sits at larger y
facing back toward it. Time is in seconds, frequency in Hz, speed of sound
in m/s.

Apertures are point detectors weighted by the far-field piston pattern of
their own diameter; propagation is a delayed pulse with 1/r spreading and
the transmitter's piston pattern evaluated at the centre frequency.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import j1

from .codes import MaskPattern

REFERENCE_DISTANCE_MM = 1.0
PULSE_SUPPORT = 6.0  # envelope standard deviations kept on either side of an arrival


@dataclass(frozen=True)
class Medium:
    speed_of_sound: float = 1480.0  # m/s

    def __post_init__(self):
        if not self.speed_of_sound > 0:
            raise ValueError("speed of sound must be positive")

    @property
    def mm_per_s(self) -> float:
        return self.speed_of_sound * 1e3


class Role(str, enum.Enum):
    TRANSMITTER = "transmitter"
    RECEIVER = "receiver"


@dataclass(frozen=True)
class Transducer:
    """Circular piston seen edge-on in the scan plane.

    At ``normal_angle = 0`` a transmitter faces -y and a receiver faces +y;
    positive angles rotate the facing direction toward +x for a receiver
    and toward -x for a transmitter, so a transmitter at
    ``d (sin a, cos a)`` with ``normal_angle = a`` faces the origin.
    """

    center: tuple[float, float]
    diameter: float
    normal_angle: float = 0.0
    role: Role = Role.TRANSMITTER

    def __post_init__(self):
        object.__setattr__(self, "center", (float(self.center[0]), float(self.center[1])))
        object.__setattr__(self, "role", Role(self.role))
        if not self.diameter > 0:
            raise ValueError("transducer diameter must be positive")
        if not abs(self.normal_angle) < 90:
            raise ValueError(f"|normal_angle| must be < 90 deg, got {self.normal_angle}")

    @property
    def facing(self) -> np.ndarray:
        a = math.radians(self.normal_angle)
        sign = -1.0 if self.role is Role.TRANSMITTER else 1.0
        return sign * np.array([math.sin(a), math.cos(a)])

    def off_axis_angle(self, points) -> np.ndarray:
        """Angle (deg) between the facing direction and the ray to each point."""
        d = np.atleast_2d(np.asarray(points, dtype=float)) - np.asarray(self.center)
        r = np.hypot(d[:, 0], d[:, 1])
        cos = np.clip(d @ self.facing / r, -1.0, 1.0)
        return np.degrees(np.arccos(cos))


@dataclass(frozen=True)
class Pulse:
    center_frequency: float = 1e6
    fractional_bandwidth: float = 0.6
    amplitude: float = 1.0

    def __post_init__(self):
        if not self.center_frequency > 0:
            raise ValueError("center frequency must be positive")
        if not 0 < self.fractional_bandwidth < 2:
            raise ValueError("fractional bandwidth must be in (0, 2)")

    @property
    def tau(self) -> float:
        """Envelope standard deviation giving a -6 dB spectral width of bw * f0."""
        return math.sqrt(2 * math.log(2)) / (math.pi * self.fractional_bandwidth * self.center_frequency)

    @property
    def half_support(self) -> float:
        return PULSE_SUPPORT * self.tau

    def waveform(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        return self.amplitude * np.exp(-0.5 * (t / self.tau) ** 2) * np.sin(2 * np.pi * self.center_frequency * t)


@dataclass(frozen=True)
class TimeGrid:
    t0: float
    step: float
    count: int

    def __post_init__(self):
        if not self.step > 0 or self.count < 1:
            raise ValueError("time grid needs step > 0 and at least one sample")

    @property
    def times(self) -> np.ndarray:
        return self.t0 + self.step * np.arange(self.count)

    @property
    def end(self) -> float:
        return self.t0 + self.step * (self.count - 1)

    def covers(self, start: float, stop: float) -> bool:
        eps = 1e-9 * self.step
        return self.t0 <= start + eps and stop <= self.end + eps

    @classmethod
    def spanning(cls, start: float, stop: float, step: float) -> "TimeGrid":
        """Grid on multiples of ``step`` covering [start, stop]."""
        i0 = math.floor(start / step)
        i1 = math.ceil(stop / step)
        return cls(i0 * step, step, i1 - i0 + 1)


@dataclass(frozen=True, eq=False)
class SignalTrace:
    samples: np.ndarray
    time_step: float
    t0: float = 0.0

    def __post_init__(self):
        s = np.asarray(self.samples, dtype=float)
        if not self.time_step > 0:
            raise ValueError("time_step must be positive")
        if not np.all(np.isfinite(s)):
            raise ValueError("trace contains non-finite samples")
        object.__setattr__(self, "samples", s)

    @property
    def times(self) -> np.ndarray:
        return self.t0 + self.time_step * np.arange(self.samples.size)

    @property
    def peak(self) -> float:
        return float(np.max(np.abs(self.samples)))


def _trace(samples, grid: TimeGrid) -> SignalTrace:
    return SignalTrace(samples, grid.step, grid.t0)


def excitation_pulse(p: Pulse, grid: TimeGrid) -> SignalTrace:
    """Gaussian-modulated sine centred on t = 0."""
    if grid.step > 1 / (10 * p.center_frequency):
        raise ValueError(
            f"time step {grid.step:g} s under-resolves {p.center_frequency:g} Hz; need <= {1 / (10 * p.center_frequency):g} s"
        )
    if not grid.covers(-p.half_support, p.half_support):
        raise ValueError(f"time grid must cover +-{p.half_support:g} s around the pulse centre")
    return _trace(p.waveform(grid.times), grid)


def piston_directivity(theta, diameter: float, frequency: float, medium: Medium = Medium()):
    """Far-field circular piston pattern 2 J1(ka sin t)/(ka sin t), in [-1, 1].

    ``theta`` in degrees (scalar or array), ``diameter`` in mm.
    """
    theta = np.asarray(theta, dtype=float)
    if np.any(np.abs(theta) >= 90):
        raise ValueError("directivity is defined for |theta| < 90 deg")
    ka = 2 * np.pi * frequency / medium.speed_of_sound * (diameter * 1e-3 / 2)
    x = ka * np.sin(np.radians(theta))
    small = np.abs(x) < 1e-4  # series branch: truncation x^4/192 is below 1 ulp
    safe = np.where(small, 1.0, x)
    out = np.where(small, 1.0 - x**2 / 8, 2 * j1(safe) / safe)
    return float(out) if out.ndim == 0 else out


def _check_window(grid: TimeGrid, delays, pulse: Pulse):
    lo = float(np.min(delays)) - pulse.half_support
    hi = float(np.max(delays)) + pulse.half_support
    if not grid.covers(lo, hi):
        raise ValueError(f"time grid [{grid.t0:g}, {grid.end:g}] s does not contain arrivals; need [{lo:g}, {hi:g}] s")


def _field(tx: Transducer, points, pulse: Pulse, medium: Medium, grid: TimeGrid) -> np.ndarray:
    """Rows of (r0/r) D_tx a(t - r/c) for each point, shape (m, T)."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    d = pts - np.asarray(tx.center)
    r = np.hypot(d[:, 0], d[:, 1])
    if np.any(r == 0):
        raise ValueError("field point coincides with the transmitter centre")
    delays = r / medium.mm_per_s
    _check_window(grid, delays, pulse)
    amp = (REFERENCE_DISTANCE_MM / r) * piston_directivity(
        tx.off_axis_angle(pts), tx.diameter, pulse.center_frequency, medium
    )
    return amp[:, None] * pulse.waveform(grid.times[None, :] - delays[:, None])


def field_at_point(tx: Transducer, point, pulse: Pulse, medium: Medium, grid: TimeGrid) -> SignalTrace:
    return _trace(_field(tx, point, pulse, medium, grid)[0], grid)


def arrival_times(tx: Transducer, points, medium: Medium) -> np.ndarray:
    d = np.atleast_2d(np.asarray(points, dtype=float)) - np.asarray(tx.center)
    return np.hypot(d[:, 0], d[:, 1]) / medium.mm_per_s


def auto_time_grid(delays, pulse: Pulse, step: float = 1e-8) -> TimeGrid:
    """Smallest step-aligned grid holding every arrival plus the pulse support."""
    return TimeGrid.spanning(float(np.min(delays)) - pulse.half_support,
                             float(np.max(delays)) + pulse.half_support, step)


@dataclass(frozen=True)
class VirtualArrayGeometry:
    """Mask placed ``gap`` mm in front of a receiver facing +y, centred on it."""

    mask: MaskPattern
    receiver: Transducer
    gap: float = 1.5

    def __post_init__(self):
        if self.receiver.role is not Role.RECEIVER:
            raise ValueError("geometry needs a receiver transducer")

    @property
    def n(self) -> int:
        return (len(self.mask.cells) + 1) // 2

    @property
    def mask_y(self) -> float:
        return self.receiver.center[1] + self.gap

    @property
    def element_positions(self) -> np.ndarray:
        """x coordinates (mm) of the n virtual elements."""
        j = np.arange(self.n) - (self.n - 1) / 2
        return self.receiver.center[0] + j * self.mask.pitch

    @property
    def element_points(self) -> np.ndarray:
        x = self.element_positions
        return np.column_stack([x, np.full_like(x, self.mask_y)])

    @property
    def central_element(self) -> int:
        return (self.n - 1) // 2

    def coverage(self, x) -> np.ndarray:
        """1 where an aperture at ``x`` lies over the receiver face, else 0."""
        half = self.receiver.diameter / 2
        return (np.abs(np.asarray(x, dtype=float) - self.receiver.center[0]) <= half + 1e-12).astype(float)


def _aperture_rows(tx, points, geometry, pulse, medium, grid):
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    d = np.asarray(tx.center) - pts
    incidence = np.degrees(np.arctan2(np.abs(d[:, 0]), d[:, 1]))
    weight = piston_directivity(incidence, geometry.mask.aperture_diameter, pulse.center_frequency, medium)
    weight = weight * geometry.coverage(pts[:, 0])
    return weight[:, None] * _field(tx, pts, pulse, medium, grid)


def aperture_signal(tx: Transducer, aperture_center, geometry: VirtualArrayGeometry,
                    pulse: Pulse, medium: Medium, grid: TimeGrid) -> SignalTrace:
    """Signal a single open aperture passes to the receiver."""
    pt = np.asarray(aperture_center, dtype=float)
    if abs(pt[1] - geometry.mask_y) > 1e-9:
        raise ValueError("aperture centre must lie on the mask line")
    return _trace(_aperture_rows(tx, pt, geometry, pulse, medium, grid)[0], grid)


def aperture_signals(tx: Transducer, geometry: VirtualArrayGeometry, pulse: Pulse,
                     medium: Medium, grid: TimeGrid) -> np.ndarray:
    """The true per-element signals X, shape (n, T)."""
    return _aperture_rows(tx, geometry.element_points, geometry, pulse, medium, grid)


def _masked_sum(window, x_rows) -> np.ndarray:
    open_rows = x_rows[np.asarray(window, dtype=bool)]
    return open_rows.sum(axis=0) if len(open_rows) else np.zeros(x_rows.shape[1])


def masked_detector_signal(tx: Transducer, geometry: VirtualArrayGeometry, shift: int,
                           pulse: Pulse, medium: Medium, grid: TimeGrid) -> SignalTrace:
    """Receiver output with the mask advanced ``shift`` cells."""
    window = geometry.mask.window(shift)
    return _trace(_masked_sum(window, aperture_signals(tx, geometry, pulse, medium, grid)), grid)


def masked_scan(tx: Transducer, geometry: VirtualArrayGeometry, pulse: Pulse, medium: Medium,
                grid: TimeGrid, x_rows: np.ndarray | None = None) -> np.ndarray:
    """All n masked acquisitions stacked as rows, shape (n, T)."""
    if x_rows is None:
        x_rows = aperture_signals(tx, geometry, pulse, medium, grid)
    return np.stack([_masked_sum(geometry.mask.window(s), x_rows) for s in range(geometry.n)])


def _chord(n_points: int, radius: float):
    u = ((np.arange(n_points) + 0.5) / n_points * 2 - 1) * radius
    # disc chord length profile normalised to unit mean over [-a, a]
    g = np.sqrt(1 - (u / radius) ** 2)
    return u, g / g.mean()


def _unmasked(tx, receiver, angle, pulse, medium, grid, n_points, far_field):
    a = math.radians(receiver.normal_angle + angle)
    axis = np.array([math.cos(a), -math.sin(a)])
    u, g = _chord(n_points, receiver.diameter / 2)
    centre = np.asarray(receiver.center)
    pts = centre + u[:, None] * axis
    du = receiver.diameter / n_points
    if far_field:
        to_tx = np.asarray(tx.center) - centre
        r_c = float(np.hypot(*to_tx))
        k_hat = to_tx / r_c
        delays = (r_c - (pts - centre) @ k_hat) / medium.mm_per_s
        _check_window(grid, delays, pulse)
        amp = REFERENCE_DISTANCE_MM / r_c * piston_directivity(
            float(tx.off_axis_angle(centre)[0]), tx.diameter, pulse.center_frequency, medium)
        rows = amp * pulse.waveform(grid.times[None, :] - delays[:, None])
    else:
        rows = _field(tx, pts, pulse, medium, grid)
    return (g * du) @ rows


def unmasked_detector_signal(tx: Transducer, receiver: Transducer, angle: float, pulse: Pulse,
                             medium: Medium, grid: TimeGrid, n_points: int | None = None,
                             far_field: bool = True) -> SignalTrace:
    """Coherent integration of the incident field over the bare receiver.

    The disc is collapsed onto its chord in the scan plane: each chord
    sample is weighted by the disc width perpendicular to the plane, which
    reproduces the circular piston pattern. With ``far_field`` the incident
    wave is linearised about the receiver centre (plane wave, uniform
    amplitude); otherwise every chord point sees the exact spherical field.
    The receiver is rotated by ``angle`` degrees about its centre.

    Without ``n_points`` the quadrature starts at max(64, 4 points per
    wavelength) and doubles until the peak changes by less than 0.1 dB.
    """
    if not abs(receiver.normal_angle + angle) < 90:
        raise ValueError("receiver rotation must stay below 90 deg")
    quarter_wave = medium.mm_per_s / pulse.center_frequency / 4
    if n_points is not None:
        if n_points < 64 or receiver.diameter / n_points > quarter_wave:
            raise ValueError(
                f"{n_points} quadrature points under-resolve a {receiver.diameter} mm receiver "
                f"(need >= 64 and spacing <= {quarter_wave:.4g} mm)"
            )
        return _trace(_unmasked(tx, receiver, angle, pulse, medium, grid, n_points, far_field), grid)

    m = max(64, math.ceil(receiver.diameter / quarter_wave))
    prev = _unmasked(tx, receiver, angle, pulse, medium, grid, m, far_field)
    for _ in range(8):
        m *= 2
        cur = _unmasked(tx, receiver, angle, pulse, medium, grid, m, far_field)
        change = abs(20 * math.log10(np.abs(cur).max() / np.abs(prev).max()))
        prev = cur
        if change < 0.1:
            break
    return _trace(prev, grid)


def loss_db(reference_peak: float, peak: float) -> float:
    """Attenuation of ``peak`` relative to ``reference_peak`` in dB (positive = weaker)."""
    return 20 * math.log10(reference_peak / peak)
