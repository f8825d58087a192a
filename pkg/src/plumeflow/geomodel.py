"""Randomized layered earth models and rock-physics transforms.

A model is a stack of sub-horizontal layers with a compaction-like velocity
trend, a low-permeability seal at roughly a third of the depth, one sealed
fracture column, and an injection well placed in high-permeability rock
below the seal. Velocity maps to porosity through a clamped linear law and
porosity maps to permeability through the Kozeny-Carman relation.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .grids import Grid2D

V_MIN = 1500.0
V_MAX = 5500.0


@dataclass(frozen=True)
class GeoConfig:
    """Knobs for the synthetic model generator and rock-physics laws."""

    n_layers: int = 9
    v_top: float = 1800.0          # mean velocity of the shallowest layer, m/s
    v_bottom: float = 4200.0       # mean velocity of the deepest layer, m/s
    v_jitter: float = 150.0        # per-layer velocity perturbation std, m/s
    v_texture: float = 25.0        # smooth intra-layer velocity noise std, m/s
    shale_prob: float = 0.35       # chance a layer is a tight interbed
    shale_boost: float = 1300.0    # velocity bump for tight interbeds, m/s
    interface_wobble: float = 1.5  # lateral interface perturbation std, cells
    seal_depth_frac: float = 0.33  # seal top as a fraction of nz
    seal_thick_frac: float = 0.11  # seal thickness as a fraction of nz
    seal_velocity: float = 4600.0  # tight cap-rock velocity, m/s
    seal_perm_factor: float = 2e-3  # seal K relative to median reservoir K
    fracture_max_offset: int = 3   # fracture column within this many cells of the well
    # velocity -> porosity law: phi = clamp(phi_max - c_vphi*(v - v0))
    phi_max: float = 0.36
    phi_min: float = 0.02
    v0: float = 1500.0
    c_vphi: float = 1.1e-4
    d_grain: float = 1e-4          # grain diameter for Kozeny-Carman, m

    def __post_init__(self):
        if self.n_layers < 3:
            raise ValueError("need at least 3 layers")


@dataclass(frozen=True)
class EarthModel:
    """Gridded velocity/porosity/permeability plus seal and well geometry."""

    grid: Grid2D
    velocity: np.ndarray      # (nz, nx), m/s
    porosity: np.ndarray      # (nz, nx), fraction
    permeability: np.ndarray  # (nz, nx), m^2
    seal_rows: range          # row indices of the seal layer
    fracture_col: int         # lateral index of the sealed fracture
    well_col: int             # lateral index of the injection well
    seed: int

    def validate(self):
        """Raise if any structural invariant is violated."""
        v, phi, k = self.velocity, self.porosity, self.permeability
        if v.shape != self.grid.shape:
            raise ValueError("field shape does not match grid")
        if v.min() < V_MIN or v.max() > V_MAX:
            raise ValueError("velocity out of physical range")
        if phi.min() <= 0 or phi.max() > 0.4:
            raise ValueError("porosity out of (0, 0.4]")
        if k.min() <= 0:
            raise ValueError("permeability must be positive")
        res = k[self.seal_rows.stop:, :]
        if k[self.seal_rows.start:self.seal_rows.stop, :].max() > 0.01 * np.median(res):
            raise ValueError("seal is not at least 100x tighter than the reservoir")
        if not (0 <= self.well_col < self.grid.nx):
            raise ValueError("well column outside grid")
        if not (0 <= self.fracture_col < self.grid.nx):
            raise ValueError("fracture column outside grid")

    def reservoir_rows(self) -> range:
        """Rows below the seal."""
        return range(self.seal_rows.stop, self.grid.nz)


def velocity_to_porosity(v, cfg: GeoConfig = GeoConfig()):
    """Clamped linear velocity-to-porosity law, monotone non-increasing in v.

    Accepts scalars or arrays; velocities must lie within [1500, 5500] m/s.
    """
    v = np.asarray(v, dtype=float)
    if np.any(v < V_MIN) or np.any(v > V_MAX):
        raise ValueError(f"velocity outside [{V_MIN}, {V_MAX}] m/s")
    phi = cfg.phi_max - cfg.c_vphi * (v - cfg.v0)
    return np.clip(phi, cfg.phi_min, cfg.phi_max)[()]


def porosity_to_permeability(phi, d_grain: float = GeoConfig.d_grain):
    """Kozeny-Carman: K = d^2 * phi^3 / (180 * (1 - phi)^2), in m^2."""
    phi = np.asarray(phi, dtype=float)
    if np.any(phi <= 0) or np.any(phi >= 1):
        raise ValueError("porosity must lie strictly inside (0, 1)")
    if d_grain <= 0:
        raise ValueError("grain diameter must be positive")
    return (d_grain ** 2 * phi ** 3 / (180.0 * (1.0 - phi) ** 2))[()]


def _smooth_curve(rng, nx: int, std: float) -> np.ndarray:
    """Smooth zero-mean lateral perturbation built from a few long sinusoids."""
    x = np.linspace(0.0, 1.0, nx)
    curve = np.zeros(nx)
    for k in range(1, 4):
        amp = rng.normal(0.0, std / k)
        phase = rng.uniform(0.0, 2.0 * np.pi)
        curve += amp * np.sin(2.0 * np.pi * k * x + phase)
    return curve


def make_layered_model(seed: int, grid: Grid2D, cfg: GeoConfig = GeoConfig()) -> EarthModel:
    """Generate a seeded random layered model; bit-identical for equal inputs."""
    nz, nx = grid.nz, grid.nx
    seal_thick = max(3, round(cfg.seal_thick_frac * nz))
    seal_top_nominal = round(cfg.seal_depth_frac * nz)
    if seal_top_nominal < 8 or nz - (seal_top_nominal + seal_thick) < 8:
        raise ValueError(
            f"grid with nz={nz} cannot hold 8+ overburden rows, the seal and "
            "8+ reservoir rows at the configured seal placement")

    rng = np.random.default_rng(np.random.SeedSequence([0x6E0, seed & 0xFFFFFFFF]))

    seal_top = int(np.clip(seal_top_nominal + rng.integers(-2, 3), 8, nz - seal_thick - 8))
    seal_rows = range(seal_top, seal_top + seal_thick)

    # Sub-horizontal layer interfaces with smooth lateral wobble. The seal
    # boundaries stay flat so the seal row range is exact. One interface is
    # pinned into the overburden a little above the seal: together with the
    # guaranteed tight interbed below it, it gives escaped CO2 a place to
    # pond where a leak is visible.
    depth_fracs = np.sort(rng.uniform(0.05, 0.95, size=cfg.n_layers - 2))
    trap_frac = rng.uniform(seal_top - 11.0, seal_top - 5.0) / nz
    depth_fracs = np.sort(np.append(depth_fracs, trap_frac))
    interfaces = []
    for frac in depth_fracs:
        base = frac * nz
        wobble = _smooth_curve(rng, nx, cfg.interface_wobble)
        interfaces.append(base + wobble)

    # Layer velocities follow a compaction trend with jitter, kept inside the
    # physical range with margin left for texture noise.
    layer_fracs = np.concatenate([[0.0], depth_fracs, [1.0]])
    centers = 0.5 * (layer_fracs[:-1] + layer_fracs[1:])
    v_layers = cfg.v_top + (cfg.v_bottom - cfg.v_top) * centers
    v_layers = v_layers + rng.normal(0.0, cfg.v_jitter, size=v_layers.shape)
    # Tight interbeds pond escaped CO2 into visible plumes and enrich the
    # reflectivity. They are confined to the overburden, clear of the rows
    # just above the seal (so leaked gas has room to pond) and of the
    # reservoir (so the injected plume always reaches the seal). The layer
    # sitting on the pinned trap interface is always tight.
    shale_ok = centers * nz < seal_top - 3
    shale = (rng.random(v_layers.shape) < cfg.shale_prob) & shale_ok
    trap_layer = int(np.searchsorted(depth_fracs, trap_frac))
    shale[trap_layer] = True
    v_layers = np.where(shale, v_layers + cfg.shale_boost, v_layers)
    v_layers = np.clip(v_layers, V_MIN + 100.0, V_MAX - 100.0)

    rows = np.arange(nz)[:, None].astype(float)
    velocity = np.full((nz, nx), v_layers[0])
    for iface, v in zip(interfaces, v_layers[1:]):
        velocity = np.where(rows >= iface[None, :], v, velocity)

    velocity[seal_rows.start:seal_rows.stop, :] = cfg.seal_velocity

    texture = rng.normal(0.0, cfg.v_texture, size=(nz, nx))
    # cheap separable smoothing keeps the texture band-limited
    kern = np.array([0.25, 0.5, 0.25])
    texture = np.apply_along_axis(lambda r: np.convolve(r, kern, mode="same"), 1, texture)
    texture = np.apply_along_axis(lambda c: np.convolve(c, kern, mode="same"), 0, texture)
    velocity = np.clip(velocity + texture, V_MIN, V_MAX)

    porosity = velocity_to_porosity(velocity, cfg)
    permeability = porosity_to_permeability(porosity, cfg.d_grain)

    res_median = float(np.median(permeability[seal_rows.stop:, :]))
    k_seal = cfg.seal_perm_factor * res_median
    permeability[seal_rows.start:seal_rows.stop, :] = np.minimum(
        permeability[seal_rows.start:seal_rows.stop, :], k_seal)

    # Injection well: among a handful of candidate columns in the middle
    # third, take the one with the most permeable rock under the seal.
    perf = perforation_rows(grid, seal_rows)
    lo, hi = nx // 3, 2 * nx // 3
    candidates = rng.choice(np.arange(lo, hi), size=min(8, hi - lo), replace=False)
    scores = permeability[perf.start:perf.stop, candidates].mean(axis=0)
    well_col = int(candidates[int(np.argmax(scores))])

    offset = int(rng.integers(-cfg.fracture_max_offset, cfg.fracture_max_offset + 1))
    fracture_col = int(np.clip(well_col + offset, 1, nx - 2))

    model = EarthModel(grid=grid, velocity=velocity, porosity=porosity,
                       permeability=permeability, seal_rows=seal_rows,
                       fracture_col=fracture_col, well_col=well_col, seed=seed)
    model.validate()
    return model


def perforation_rows(grid: Grid2D, seal_rows: range) -> range:
    """Injection interval: a short column section starting below the seal."""
    start = seal_rows.stop + 2
    n_perf = max(3, grid.nz // 16)
    return range(start, min(start + n_perf, grid.nz - 2))
