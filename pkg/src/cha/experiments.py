"""Scenario runners for the three measurement sets (uniformity, field map,
angular response) plus the multiplexing-gain benchmark, all driven through
the acoustic forward model.
"""
from __future__ import annotations

import dataclasses
import hashlib
import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import acoustics as ac
from .codes import CodeMatrix, MaskPattern, build_code, mask_pattern_from_code, quadratic_residue_sequence, s_order_problem
from .multiplex import NoiseModel, inverse, monte_carlo_gain, snr_gain, theoretical_gain

SCENARIOS = ("uniformity", "fieldmap", "angular", "gain")
DEFAULT_DISTANCE_MM = {"uniformity": 150.0, "fieldmap": 150.0, "angular": 220.0, "gain": 150.0}

# noise substream tags
_UNIFORMITY, _MAP_MUX, _MAP_DIRECT, _ANGLE_MASKED, _ANGLE_UNMASKED = range(1, 6)


class ConfigError(ValueError):
    """Invalid scenario configuration; ``key`` names the offending field."""

    def __init__(self, key: str, message: str, line: int | None = None):
        self.key = key
        self.line = line
        where = f"line {line}, " if line is not None else ""
        super().__init__(f"{where}key '{key}': {message}")


@dataclass(frozen=True)
class ScanConfig:
    """One simulated experiment. Field names carry their units."""

    scenario: str = "gain"
    code_order: int = 31
    pitch_mm: float = 2.0
    aperture_diameter_mm: float = 1.5
    mask_gap_mm: float = 1.5
    transmitter_diameter_mm: float = 12.7
    receiver_diameter_mm: float = 38.0
    c_m_per_s: float = 1480.0
    center_frequency_hz: float = 1e6
    fractional_bandwidth: float = 0.6
    amplitude: float = 1.0
    sigma: float = 0.0
    averages: int = 1
    seed: int = 0
    time_step_s: float = 1e-8
    distance_mm: float | None = None
    x_step_mm: float | None = None
    y_start_mm: float = 20.0
    y_step_mm: float = 0.5
    y_range_mm: float = 150.0
    angles_deg: tuple[float, ...] = (0.0, 10.0, 30.0, 40.0)
    trials: int = 1000
    interlace: int = 1

    def __post_init__(self):
        object.__setattr__(self, "angles_deg", tuple(float(a) for a in self.angles_deg))
        if self.scenario not in SCENARIOS:
            raise ConfigError("scenario", f"must be one of {', '.join(SCENARIOS)}, got {self.scenario!r}")
        if self.code_order != 1 and s_order_problem(self.code_order):
            raise ConfigError("code_order", f"invalid S-matrix order: {s_order_problem(self.code_order)}")
        positive = ("pitch_mm", "aperture_diameter_mm", "transmitter_diameter_mm", "receiver_diameter_mm",
                    "c_m_per_s", "center_frequency_hz", "time_step_s", "y_step_mm", "y_range_mm")
        for name in positive:
            if not getattr(self, name) > 0:
                raise ConfigError(name, "must be positive")
        if self.aperture_diameter_mm > self.pitch_mm:
            raise ConfigError("aperture_diameter_mm", f"exceeds pitch_mm ({self.pitch_mm})")
        if self.mask_gap_mm < 0:
            raise ConfigError("mask_gap_mm", "must be >= 0")
        if not 0 < self.fractional_bandwidth < 2:
            raise ConfigError("fractional_bandwidth", "must be in (0, 2)")
        if not (self.sigma >= 0 and math.isfinite(self.sigma)):
            raise ConfigError("sigma", "must be finite and >= 0")
        if self.averages < 1:
            raise ConfigError("averages", "must be >= 1")
        if self.time_step_s > 1 / (10 * self.center_frequency_hz):
            raise ConfigError("time_step_s", f"must be <= {1 / (10 * self.center_frequency_hz):g} s")
        if self.distance_mm is not None and not self.distance_mm > 0:
            raise ConfigError("distance_mm", "must be positive")
        if self.x_step_mm is not None and not math.isclose(self.x_step_mm, self.pitch_mm):
            raise ConfigError("x_step_mm", f"multiplexed scans step one pitch ({self.pitch_mm} mm) per acquisition")
        if not self.angles_deg or any(not abs(a) < 90 for a in self.angles_deg):
            raise ConfigError("angles_deg", "needs at least one angle, all with |angle| < 90")
        if self.trials < 1:
            raise ConfigError("trials", "must be >= 1")
        if self.interlace < 1:
            raise ConfigError("interlace", "must be >= 1")

    @classmethod
    def for_mask(cls, n: int, **overrides) -> "ScanConfig":
        """Defaults for the two fabricated masks (31: 2 mm pitch, 1.5 mm holes; 59: 1 mm, 1 mm)."""
        geometry = {31: (2.0, 1.5), 59: (1.0, 1.0)}.get(n, (1.0, 1.0))
        base = dict(code_order=n, pitch_mm=geometry[0], aperture_diameter_mm=geometry[1])
        base.update(overrides)
        return cls(**base)

    @property
    def distance(self) -> float:
        return self.distance_mm if self.distance_mm is not None else DEFAULT_DISTANCE_MM[self.scenario]

    @property
    def effective_sigma(self) -> float:
        return self.sigma / math.sqrt(self.averages)

    def medium(self) -> ac.Medium:
        return ac.Medium(self.c_m_per_s)

    def pulse(self) -> ac.Pulse:
        return ac.Pulse(self.center_frequency_hz, self.fractional_bandwidth, self.amplitude)

    def noise(self) -> NoiseModel:
        return NoiseModel(self.effective_sigma, self.seed)

    def code(self) -> CodeMatrix:
        return build_code("smatrix", self.code_order)

    def mask(self) -> MaskPattern:
        base = [1] if self.code_order == 1 else quadratic_residue_sequence(self.code_order)
        return mask_pattern_from_code(base, self.pitch_mm, self.aperture_diameter_mm)

    def receiver(self) -> ac.Transducer:
        return ac.Transducer((0.0, 0.0), self.receiver_diameter_mm, 0.0, ac.Role.RECEIVER)

    def geometry(self) -> ac.VirtualArrayGeometry:
        return ac.VirtualArrayGeometry(self.mask(), self.receiver(), self.mask_gap_mm)

    def transmitter(self, x: float, distance: float, angle: float = 0.0) -> ac.Transducer:
        """Transmitter ``distance`` mm from mask point (x, mask_y), aimed back at it."""
        geom_y = self.mask_gap_mm
        a = math.radians(angle)
        centre = (x + distance * math.sin(a), geom_y + distance * math.cos(a))
        return ac.Transducer(centre, self.transmitter_diameter_mm, angle, ac.Role.TRANSMITTER)

    def as_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["angles_deg"] = list(self.angles_deg)
        return d

    def digest(self) -> str:
        return hashlib.sha256(json.dumps(self.as_dict(), sort_keys=True).encode()).hexdigest()


@dataclass
class Grid2D:
    values: np.ndarray  # (len(y), len(x))
    x_mm: np.ndarray
    y_mm: np.ndarray


@dataclass
class ExperimentReport:
    scenario: str
    config: ScanConfig
    results: dict = field(default_factory=dict)
    tables: dict[str, dict[str, np.ndarray]] = field(default_factory=dict)
    grids: dict[str, Grid2D] = field(default_factory=dict)

    @property
    def seed(self) -> int:
        return self.config.seed

    @property
    def config_hash(self) -> str:
        return self.config.digest()


def _require(cfg: ScanConfig, scenario: str):
    if cfg.scenario != scenario:
        cfg = dataclasses.replace(cfg, scenario=scenario)
    return cfg


def _acquire(cfg, tx, geom, w_inv, stream_mux, stream_direct=None):
    """Simulate one transmitter placement: true X, demultiplexed X^ and optional direct scan."""
    pulse, medium, noise = cfg.pulse(), cfg.medium(), cfg.noise()
    grid = ac.auto_time_grid(ac.arrival_times(tx, geom.element_points, medium), pulse, cfg.time_step_s)
    x = ac.aperture_signals(tx, geom, pulse, medium, grid)
    y = ac.masked_scan(tx, geom, pulse, medium, grid, x_rows=x)
    y = y + noise.sample(y.shape, *stream_mux)
    xhat = w_inv @ y
    direct = None
    if stream_direct is not None:
        direct = x + noise.sample(x.shape, *stream_direct)
    return grid, x, y, xhat, direct


def run_uniformity_scan(cfg: ScanConfig) -> ExperimentReport:
    """Sensitivity of each virtual element to an identical on-axis transmitter."""
    cfg = _require(cfg, "uniformity")
    geom = cfg.geometry()
    w_inv = inverse(cfg.code())
    raw = np.zeros(geom.n)
    for j, xj in enumerate(geom.element_positions):
        tx = cfg.transmitter(xj, cfg.distance)
        _, _, _, xhat, _ = _acquire(cfg, tx, geom, w_inv, (_UNIFORMITY, j))
        raw[j] = np.abs(xhat[j]).max()
    peak = raw.max()
    if not peak > 0:
        raise ValueError("no virtual element receives signal; receiver does not cover the mask")
    sens = raw / peak
    active = np.flatnonzero(sens >= 0.5)
    report = ExperimentReport("uniformity", cfg)
    report.results = {
        "n": geom.n,
        "array_span_mm": geom.mask.array_span,
        "receiver_span_mm": cfg.receiver_diameter_mm,
        "active_elements": int(active.size),
        "first_active": int(active[0]) if active.size else -1,
        "last_active": int(active[-1]) if active.size else -1,
        "min_active_sensitivity": float(sens[active].min()) if active.size else 0.0,
    }
    report.tables["sensitivity"] = {
        "element": np.arange(geom.n),
        "position_mm": geom.element_positions,
        "sensitivity": sens,
        "raw_peak": raw,
    }
    return report


def interlace_maps(maps) -> np.ndarray:
    """Merge maps taken with the transmitter offset by i*pitch/k, i = 0..k-1.

    Each map has element columns on axis 1. Relative to the transmitter an
    offset of +d moves every element by -d, so larger offsets come first
    within each pitch cell.
    """
    stack = np.stack(list(maps)[::-1], axis=2)  # (rows, n, k, ...)
    shape = stack.shape
    return stack.reshape(shape[0], shape[1] * shape[2], *shape[3:])


def demultiplex_interlaced(y_stitched: np.ndarray, w: CodeMatrix, k: int) -> np.ndarray:
    """Demultiplex an interlaced stack of raw scans without first splitting it."""
    rows, cols = y_stitched.shape[:2]
    n = w.order
    if cols != n * k:
        raise ValueError(f"expected {n * k} interlaced columns, got {cols}")
    cube = y_stitched.reshape(rows, n, k, *y_stitched.shape[2:])
    out = np.einsum("ij,rjk...->rik...", inverse(w), cube)
    return out.reshape(y_stitched.shape)


def run_field_map(cfg: ScanConfig) -> ExperimentReport:
    """2D radiation map from masked scanning next to the direct single-aperture (W = I) map."""
    cfg = _require(cfg, "fieldmap")
    n_rows = int(round(cfg.y_range_mm / cfg.y_step_mm))
    if n_rows < 2:
        raise ValueError(f"y_range_mm / y_step_mm gives {n_rows} row(s); need >= 2")
    geom = cfg.geometry()
    w = cfg.code()
    w_inv = inverse(w)
    k = cfg.interlace
    ys = cfg.y_start_mm + cfg.y_step_mm * np.arange(n_rows)
    offsets = cfg.pitch_mm * np.arange(k) / k

    mux_maps, direct_maps = [], []
    sq_mux = sq_direct = 0.0
    count = 0
    num = den = 0.0
    max_rel = 0.0
    best = (-1.0, None)
    for oi, off in enumerate(offsets):
        mux_map = np.zeros((n_rows, geom.n))
        direct_map = np.zeros((n_rows, geom.n))
        for r, y in enumerate(ys):
            tx = cfg.transmitter(geom.receiver.center[0] + off, y)
            grid, x, _, xhat, direct = _acquire(cfg, tx, geom, w_inv, (_MAP_MUX, oi, r), (_MAP_DIRECT, oi, r))
            mux_map[r] = np.abs(xhat).max(axis=1)
            direct_map[r] = np.abs(direct).max(axis=1)
            sq_mux += float(np.sum((xhat - x) ** 2))
            sq_direct += float(np.sum((direct - x) ** 2))
            count += x.size
            num += float(np.sum((xhat - direct) ** 2))
            den += float(np.sum(direct**2))
            scale = np.abs(direct).max()
            if scale > 0:
                max_rel = max(max_rel, float(np.abs(xhat - direct).max() / scale))
            j = int(np.argmax(direct_map[r]))
            if direct_map[r, j] > best[0]:
                best = (direct_map[r, j], (grid.times, direct[j].copy(), xhat[j].copy()))
        mux_maps.append(mux_map)
        direct_maps.append(direct_map)

    rel_x = (np.arange(geom.n) - (geom.n - 1) / 2)[:, None] * cfg.pitch_mm - offsets[None, :]
    x_axis = interlace_maps([rel_x[:, i][None, :] for i in range(k)])[0]
    mux_grid = interlace_maps(mux_maps)
    direct_grid = interlace_maps(direct_maps)

    times, d_trace, m_trace = best[1]
    d_norm = d_trace / np.abs(d_trace).max()
    m_norm = m_trace / np.abs(m_trace).max()

    std_mux = math.sqrt(sq_mux / count)
    std_direct = math.sqrt(sq_direct / count)
    report = ExperimentReport("fieldmap", cfg)
    report.results = {
        "n": geom.n,
        "rows": n_rows,
        "columns": int(x_axis.size),
        "discrepancy_l2": math.sqrt(num / den) if den > 0 else 0.0,
        "max_relative_deviation": max_rel,
        "map_max_relative_deviation": float(np.abs(mux_grid - direct_grid).max() / np.abs(direct_grid).max()),
        "peak_trace_max_deviation": float(np.abs(d_norm - m_norm).max()),
        "noise_std_direct": std_direct,
        "noise_std_demux": std_mux,
        "noise_gain": std_direct / std_mux if cfg.effective_sigma > 0 else None,
        "theoretical_gain": theoretical_gain("smatrix", geom.n),
    }
    report.grids["map_demux"] = Grid2D(mux_grid, x_axis, ys)
    report.grids["map_direct"] = Grid2D(direct_grid, x_axis, ys)
    report.tables["peak_traces"] = {"time_s": times, "direct": d_norm, "demux": m_norm}
    return report


def run_angular_response(cfg: ScanConfig) -> ExperimentReport:
    """Loss vs incidence angle for the demultiplexed central element and the bare receiver."""
    cfg = _require(cfg, "angular")
    geom = cfg.geometry()
    w_inv = inverse(cfg.code())
    pulse, medium, noise = cfg.pulse(), cfg.medium(), cfg.noise()
    centre = geom.central_element
    dist = cfg.distance
    receiver = geom.receiver
    a = receiver.diameter / 2

    def masked_peak(angle, i):
        tx = cfg.transmitter(geom.element_positions[centre], dist, angle)
        _, _, y, xhat, _ = _acquire(cfg, tx, geom, w_inv, (_ANGLE_MASKED, i))
        return float(np.abs(xhat[centre]).max()), y, xhat

    def unmasked_peaks(angle, i):
        tx = ac.Transducer((receiver.center[0], receiver.center[1] + dist), cfg.transmitter_diameter_mm)
        r_c = dist / medium.mm_per_s
        grid = ac.auto_time_grid([r_c - 1.1 * a / medium.mm_per_s, r_c + 1.1 * a / medium.mm_per_s],
                                 pulse, cfg.time_step_s)
        out = []
        for j, far in enumerate((True, False)):
            s = ac.unmasked_detector_signal(tx, receiver, angle, pulse, medium, grid, far_field=far).samples
            s = s + noise.sample(s.shape, _ANGLE_UNMASKED, i, j)
            out.append(float(np.abs(s).max()))
        return out

    ref_masked, _, _ = masked_peak(0.0, 0)
    ref_far, ref_exact = unmasked_peaks(0.0, 0)
    rows = {k: [] for k in ("angle_deg", "masked_loss_db", "unmasked_loss_db", "unmasked_exact_loss_db",
                            "aperture_model_loss_db", "receiver_model_loss_db")}
    oblique = None
    for i, angle in enumerate(cfg.angles_deg, start=1):
        m, y, xhat = masked_peak(angle, i)
        far, exact = unmasked_peaks(angle, i)
        rows["angle_deg"].append(angle)
        rows["masked_loss_db"].append(ac.loss_db(ref_masked, m))
        rows["unmasked_loss_db"].append(ac.loss_db(ref_far, far))
        rows["unmasked_exact_loss_db"].append(ac.loss_db(ref_exact, exact))
        rows["aperture_model_loss_db"].append(-20 * math.log10(abs(ac.piston_directivity(
            angle, cfg.aperture_diameter_mm, cfg.center_frequency_hz, medium))))
        rows["receiver_model_loss_db"].append(-20 * math.log10(abs(ac.piston_directivity(
            angle, cfg.receiver_diameter_mm, cfg.center_frequency_hz, medium))))
        if oblique is None or abs(angle) > oblique[0]:
            oblique = (abs(angle), y, xhat)

    report = ExperimentReport("angular", cfg)
    report.tables["loss"] = {k: np.asarray(v, dtype=float) for k, v in rows.items()}
    report.results = {
        "n": geom.n,
        "distance_mm": dist,
        "angles_deg": list(cfg.angles_deg),
        "masked_loss_db": [float(v) for v in rows["masked_loss_db"]],
        "unmasked_loss_db": [float(v) for v in rows["unmasked_loss_db"]],
        "unmasked_exact_loss_db": [float(v) for v in rows["unmasked_exact_loss_db"]],
    }
    # raw scans and demultiplexed neighbours at the steepest angle
    _, y, xhat = oblique
    lo = max(0, centre - 5)
    hi = min(geom.n, lo + 10)
    report.tables["oblique_raw"] = {f"shift_{s}": y[s] for s in range(min(10, geom.n))}
    report.tables["oblique_demux"] = {f"element_{j}": xhat[j] for j in range(lo, hi)}
    return report


def run_gain_benchmark(cfg: ScanConfig, workers: int = 1) -> ExperimentReport:
    """Monte-Carlo multiplexing advantage through the acoustic path."""
    cfg = _require(cfg, "gain")
    if cfg.trials < 1000:
        raise ValueError(f"gain benchmark needs >= 1000 trials, got {cfg.trials}")
    if not cfg.effective_sigma > 0:
        raise ValueError("gain benchmark needs sigma > 0")
    geom = cfg.geometry()
    w = cfg.code()
    pulse, medium = cfg.pulse(), cfg.medium()
    tx = cfg.transmitter(geom.element_positions[geom.central_element], cfg.distance)
    grid = ac.auto_time_grid(ac.arrival_times(tx, geom.element_points, medium), pulse, cfg.time_step_s)
    x = ac.aperture_signals(tx, geom, pulse, medium, grid)
    y = ac.masked_scan(tx, geom, pulse, medium, grid, x_rows=x)
    est = monte_carlo_gain(w, cfg.effective_sigma, cfg.trials, cfg.seed, x=x, y=y, workers=workers)
    report = ExperimentReport("gain", cfg)
    report.results = {
        "n": geom.n,
        "trials": cfg.trials,
        "measured_gain": est.measured_gain,
        "stderr": est.stderr,
        "peak_gain": est.peak_gain,
        "theoretical_gain": theoretical_gain("smatrix", geom.n),
        "matrix_gain": snr_gain(w),
    }
    report.tables["element_gain"] = {
        "element": np.arange(geom.n),
        "position_mm": geom.element_positions,
        "gain": est.per_element,
    }
    return report


RUNNERS = {
    "uniformity": run_uniformity_scan,
    "fieldmap": run_field_map,
    "angular": run_angular_response,
    "gain": run_gain_benchmark,
}


def run_scenario(cfg: ScanConfig) -> ExperimentReport:
    return RUNNERS[cfg.scenario](cfg)
