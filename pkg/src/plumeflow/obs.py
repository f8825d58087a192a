"""Observation operator: the 3-channel conditioning image.

Channel order is fixed as (seismic time-lapse image, saturation at the
well, pressure at the well). The seismic channel is a per-trace
convolutional imaging proxy: log-impedance reflectivity convolved in depth
with a Ricker wavelet stretched by the local velocity, monitor minus
baseline, plus band-limited noise scaled to an exact target SNR.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .geomodel import EarthModel
from .grids import area_average
from .resim import SimResult

GARDNER_COEFF = 310.0  # rho = 310 * v^0.25, SI units


@dataclass(frozen=True)
class WaveletConfig:
    peak_frequency: float = 15.0        # Hz
    background_velocity_use: bool = True  # stretch the wavelet by local velocity

    def __post_init__(self):
        if self.peak_frequency <= 0:
            raise ValueError("peak frequency must be positive")


@dataclass(frozen=True)
class ObsConfig:
    wavelet: WaveletConfig = field(default_factory=WaveletConfig)
    snr_db: float = 8.0
    dvel_per_sat: float = 300.0   # m/s of velocity drop at full CO2 saturation
    pressure_scale: float = 4.5e5  # fixed Pa scale mapping overpressure into [0, 1]
    seismic_scale: float = 0.01   # fixed amplitude divisor for the stored channel
    monitor_col_offset: int | None = None  # optional second well, off by default


@dataclass
class ObservationTriple:
    y1_seismic: np.ndarray   # imaged time-lapse amplitude, arbitrary units
    y2_well_sat: np.ndarray  # saturation column at the well, zero elsewhere
    y3_well_pres: np.ndarray  # normalized overpressure column at the well
    snr_db: float

    def stack(self) -> np.ndarray:
        """(3, nz, nx) array in the declared channel order."""
        return np.stack([self.y1_seismic, self.y2_well_sat, self.y3_well_pres])


def ricker(t, f: float):
    """Zero-phase Ricker pulse: (1 - 2 pi^2 f^2 t^2) exp(-pi^2 f^2 t^2)."""
    if f <= 0:
        raise ValueError("peak frequency must be positive")
    t = np.asarray(t, dtype=float)
    a = (np.pi * f * t) ** 2
    return ((1.0 - 2.0 * a) * np.exp(-a))[()]


def saturation_to_dvel(s: np.ndarray, model: EarthModel,
                       dvel_per_sat: float = 300.0) -> np.ndarray:
    """Linear velocity perturbation: full CO2 saturation slows rock by beta."""
    if s.shape != model.grid.shape:
        raise ValueError("saturation shape does not match the model grid")
    return -dvel_per_sat * s


def _log_impedance(v: np.ndarray) -> np.ndarray:
    """log of Gardner-style acoustic impedance, rho(v) * v = 310 v^1.25."""
    return np.log(GARDNER_COEFF) + 1.25 * np.log(v)


def _wavelet_matrix(model: EarthModel, cfg: WaveletConfig) -> np.ndarray:
    """Depth-sampled Ricker kernels, shape (nz, nz-1, nx).

    Entry [i, k, j] is the wavelet response at output depth i from the
    interface between rows k and k+1 in column j, stretched so the
    dominant wavelength is the local velocity over the peak frequency.
    """
    grid = model.grid
    z_cells = grid.cell_depths()
    z_faces = (np.arange(grid.nz - 1) + 1.0) * grid.dz
    if cfg.background_velocity_use:
        v_face = 0.5 * (model.velocity[:-1, :] + model.velocity[1:, :])
    else:
        v_face = np.full((grid.nz - 1, grid.nx), float(model.velocity.mean()))
    dz = z_cells[:, None, None] - z_faces[None, :, None]
    return ricker(dz / v_face[None, :, :], cfg.peak_frequency)


def _reflectivity(v: np.ndarray) -> np.ndarray:
    """Interface series per column: 0.5 * d(ln Z) across each face."""
    ln_z = _log_impedance(v)
    return 0.5 * (ln_z[1:, :] - ln_z[:-1, :])


def image_timelapse(model: EarthModel, s_monitor: np.ndarray,
                    s_baseline: np.ndarray | None = None,
                    cfg: WaveletConfig = WaveletConfig(),
                    dvel_per_sat: float = 300.0) -> np.ndarray:
    """Monitor image minus baseline image, per lateral column.

    Identically zero when monitor and baseline saturations coincide.
    """
    v0 = model.velocity
    v_mon = v0 + saturation_to_dvel(s_monitor, model, dvel_per_sat)
    if s_baseline is None:
        v_bas = v0
    else:
        v_bas = v0 + saturation_to_dvel(s_baseline, model, dvel_per_sat)
    if np.array_equal(v_mon, v_bas):
        return np.zeros(model.grid.shape)
    w = _wavelet_matrix(model, cfg)
    r_diff = _reflectivity(v_mon) - _reflectivity(v_bas)
    return np.einsum("ikj,kj->ij", w, r_diff)


def bandlimited_noise(shape_model: EarthModel, cfg: WaveletConfig,
                      seed: int) -> np.ndarray:
    """Unit-RMS noise: white interface noise pushed through the imaging kernel."""
    rng = np.random.default_rng(np.random.SeedSequence([0x0B5, seed & 0xFFFFFFFF]))
    white = rng.standard_normal((shape_model.grid.nz - 1, shape_model.grid.nx))
    w = _wavelet_matrix(shape_model, cfg)
    colored = np.einsum("ikj,kj->ij", w, white)
    return colored / np.sqrt(np.mean(colored ** 2))


def _exact_snr_mix(y1: np.ndarray, noise: np.ndarray, snr_db: float) -> np.ndarray:
    sig_energy = float(np.sum(y1 ** 2))
    if sig_energy == 0.0:
        raise ValueError("zero-signal image: SNR is undefined")
    scale = np.sqrt(sig_energy / np.sum(noise ** 2)) * 10.0 ** (-snr_db / 20.0)
    return y1 + scale * noise


def add_bandlimited_noise(y1: np.ndarray, snr_db: float, seed: int,
                          model: EarthModel,
                          cfg: WaveletConfig = WaveletConfig()) -> np.ndarray:
    """Add Ricker-colored noise rescaled so the SNR is met exactly.

    snr_db = +inf disables the noise. Raises on an identically zero input,
    for which an SNR is undefined.
    """
    if np.isinf(snr_db):
        return y1.copy()
    if y1.shape != model.grid.shape:
        raise ValueError("image shape does not match the model grid")
    return _exact_snr_mix(y1, bandlimited_noise(model, cfg, seed), snr_db)


def assemble_observation(sim: SimResult, model: EarthModel,
                         cfg: ObsConfig = ObsConfig(), *, seed: int = 0,
                         out_shape: tuple[int, int] | None = None) -> ObservationTriple:
    """Build the conditioning triple from the final simulation snapshot.

    The clean time-lapse image is formed at simulation resolution,
    area-averaged to `out_shape`, then noise is added so the stored channel
    meets the configured SNR exactly. Well channels are single columns at
    the output resolution.
    """
    grid = model.grid
    out_shape = out_shape or grid.shape
    s_final = sim.saturation[-1]
    op_final = sim.overpressure[-1]

    y1 = image_timelapse(model, s_final, None, cfg.wavelet, cfg.dvel_per_sat)
    y1 = area_average(y1, out_shape)
    if np.isinf(cfg.snr_db):
        pass
    elif np.any(y1):
        # noise is colored at simulation resolution but scaled against the
        # resampled image, so the stored channel meets the SNR exactly
        noise = area_average(bandlimited_noise(model, cfg.wavelet, seed), out_shape)
        y1 = _exact_snr_mix(y1, noise, cfg.snr_db)
    else:
        # nothing injected: the channel is a pure noise realization
        y1 = area_average(bandlimited_noise(model, cfg.wavelet, seed), out_shape)
    y1 = y1 / cfg.seismic_scale

    well_cols = [model.well_col]
    if cfg.monitor_col_offset is not None:
        well_cols.append(int(np.clip(model.well_col + cfg.monitor_col_offset,
                                     0, grid.nx - 1)))

    s_out = area_average(s_final, out_shape)
    op_out = area_average(op_final, out_shape)
    y2 = np.zeros(out_shape)
    y3 = np.zeros(out_shape)
    for col in well_cols:
        out_col = col * out_shape[1] // grid.nx
        y2[:, out_col] = s_out[:, out_col]
        y3[:, out_col] = np.clip(op_out[:, out_col] / cfg.pressure_scale, 0.0, 1.0)
    return ObservationTriple(y1_seismic=y1, y2_well_sat=y2,
                             y3_well_pres=y3, snr_db=cfg.snr_db)
