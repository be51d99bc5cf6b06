"""Transmitter grid, distance matrix and field-response multipath channels."""

from __future__ import annotations

import dataclasses
import json
from typing import Sequence

import numpy as np

__all__ = [
    "PositionGrid",
    "PathParams",
    "ChannelSet",
    "ScenarioConfig",
    "build_grid",
    "distance_matrix",
    "elevation_from_uniform",
    "sample_paths",
    "field_response",
    "channel_at",
    "channel_matrix",
    "upa_positions",
    "upa_channel",
    "load_config_file",
    "dbm_to_watts",
    "watts_to_dbm",
    "db_to_linear",
    "make_channel",
]


def dbm_to_watts(dbm):
    return 10.0 ** (np.asarray(dbm, dtype=float) / 10.0) / 1000.0


def watts_to_dbm(watts):
    return 10.0 * np.log10(np.asarray(watts, dtype=float) * 1000.0)


def db_to_linear(db):
    return 10.0 ** (np.asarray(db, dtype=float) / 10.0)


@dataclasses.dataclass(frozen=True)
class PositionGrid:
    """Square lattice of candidate antenna positions.

    ``positions[n]`` is ``(x_n, y_n)`` in meters, row-major with ``y`` as the
    outer index, so position 0 is the origin.
    """

    step: float
    side_count: int
    positions: np.ndarray

    @property
    def N(self) -> int:
        return self.positions.shape[0]

    @property
    def extent(self) -> float:
        return self.step * (self.side_count - 1)

    def index_of(self, xy, tol: float = 1e-9) -> int:
        d = np.linalg.norm(self.positions - np.asarray(xy, float), axis=1)
        n = int(np.argmin(d))
        if d[n] > tol:
            raise KeyError(f"{xy} is not a grid point")
        return n


def build_grid(area_scale: float, wavelength: float, step: float) -> PositionGrid:
    """Quantize the ``l*lambda`` square into positions spaced ``step`` apart.

    Raises
    ------
    ValueError
        If the step does not tile the side length exactly (relative
        tolerance 1e-9) or the arguments are out of range.
    """
    if area_scale <= 0 or wavelength <= 0 or step <= 0:
        raise ValueError("area scale, wavelength and step must be positive")
    side = area_scale * wavelength
    if step > side * (1 + 1e-9):
        raise ValueError(f"step {step} exceeds the side length {side}")
    ratio = side / step
    count = int(round(ratio))
    if abs(ratio - count) > 1e-9 * max(1.0, ratio):
        raise ValueError(f"step {step} does not divide side length {side}")
    per_axis = count + 1
    ticks = np.arange(per_axis) * step
    yy, xx = np.meshgrid(ticks, ticks, indexing="ij")
    positions = np.column_stack([xx.ravel(), yy.ravel()])
    return PositionGrid(float(step), per_axis, positions)


def distance_matrix(grid: PositionGrid | np.ndarray) -> np.ndarray:
    """Pairwise Euclidean distances between candidate positions."""
    p = grid.positions if isinstance(grid, PositionGrid) else np.asarray(grid, float)
    diff = p[:, None, :] - p[None, :, :]
    return np.sqrt(np.sum(diff ** 2, axis=-1))


@dataclasses.dataclass(frozen=True)
class PathParams:
    """Per-user multipath parameters (arrays are ``K x L_p``)."""

    elevation: np.ndarray
    azimuth: np.ndarray
    gains: np.ndarray  # complex path responses
    distance: np.ndarray  # BS-user distance per user, meters
    alpha: float
    L0: float

    @property
    def K(self) -> int:
        return self.elevation.shape[0]

    @property
    def L_p(self) -> int:
        return self.elevation.shape[1]


def elevation_from_uniform(u):
    """Inverse CDF of the elevation density ``cos(theta)/2`` on [-pi/2, pi/2]."""
    return np.arcsin(2.0 * np.asarray(u, dtype=float) - 1.0)


def sample_paths(K: int, L_p: int, distance_range: Sequence[float], alpha: float,
                 L0: float, rng, angle_rng=None) -> PathParams:
    """Draw angles, distances and complex path gains for ``K`` users.

    ``rng`` is a seed or ``numpy.random.Generator``. When ``angle_rng`` is
    given the angles come from it instead, which keeps them fixed across
    trials that share it.
    """
    if K < 1 or L_p < 1:
        raise ValueError("K and L_p must be at least 1")
    if alpha <= 0:
        raise ValueError("path-loss exponent must be positive")
    lo, hi = float(distance_range[0]), float(distance_range[1])
    if not hi > lo or lo <= 0:
        raise ValueError(f"empty or invalid distance range {distance_range}")
    rng = np.random.default_rng(rng)
    arng = rng if angle_rng is None else np.random.default_rng(angle_rng)

    elevation = elevation_from_uniform(arng.uniform(0.0, 1.0, (K, L_p)))
    azimuth = arng.uniform(-np.pi / 2, np.pi / 2, (K, L_p))
    distance = rng.uniform(lo, hi, K)
    var = L0 * distance ** (-alpha)
    noise = rng.standard_normal((K, L_p)) + 1j * rng.standard_normal((K, L_p))
    gains = np.sqrt(var / 2.0)[:, None] * noise
    return PathParams(elevation, azimuth, gains, distance, float(alpha), float(L0))


def field_response(paths: PathParams, k: int, position, origin, wavelength: float) -> np.ndarray:
    """Transmit field-response vector of user ``k`` at ``position``.

    Phases are taken relative to ``origin`` (the first grid position), so
    the vector is all ones at the origin.
    """
    dx = float(position[0]) - float(origin[0])
    dy = float(position[1]) - float(origin[1])
    th, ph = paths.elevation[k], paths.azimuth[k]
    rho = 2.0 * np.pi / wavelength * (dx * np.cos(th) * np.sin(ph) + dy * np.sin(th))
    return np.exp(1j * rho)


def channel_at(paths: PathParams, coords: np.ndarray, wavelength: float,
               origin=(0.0, 0.0)) -> np.ndarray:
    """``K x len(coords)`` channel: sum of path gains times field response."""
    coords = np.asarray(coords, dtype=float)
    dx = coords[:, 0] - origin[0]
    dy = coords[:, 1] - origin[1]
    # (K, L, 1) x (1, 1, P)
    cx = (np.cos(paths.elevation) * np.sin(paths.azimuth))[:, :, None]
    cy = np.sin(paths.elevation)[:, :, None]
    rho = 2.0 * np.pi / wavelength * (cx * dx[None, None, :] + cy * dy[None, None, :])
    return np.einsum("kl,klp->kp", paths.gains, np.exp(1j * rho))


@dataclasses.dataclass(frozen=True)
class ChannelSet:
    """Candidate-position channels for all users.

    ``H_base[k, n]`` is the channel from position ``n`` to user ``k``; the
    stacked ``H_hat`` tiles it once per movable element.
    """

    H_base: np.ndarray
    H_hat: np.ndarray
    noise: np.ndarray  # per-user noise variance, watts
    M: int

    @property
    def K(self) -> int:
        return self.H_base.shape[0]

    @property
    def N(self) -> int:
        return self.H_base.shape[1]

    def effective(self, placement: Sequence[int]) -> np.ndarray:
        """``K x M`` channel for one position index per element."""
        return self.H_base[:, np.asarray(placement, dtype=int)]

    def digest(self) -> str:
        import hashlib

        h = hashlib.sha256()
        for arr in (self.H_hat, self.noise):
            h.update(np.ascontiguousarray(arr).tobytes())
        return h.hexdigest()[:16]


def make_channel(H_base: np.ndarray, M: int, noise) -> ChannelSet:
    H_base = np.asarray(H_base, dtype=complex)
    if H_base.ndim != 2:
        raise ValueError("H_base must be K x N")
    K = H_base.shape[0]
    noise = np.broadcast_to(np.asarray(noise, dtype=float), (K,)).copy()
    H_hat = np.tile(H_base, (1, M))
    N = H_base.shape[1]
    for m in range(M):
        assert np.array_equal(H_hat[:, m * N:(m + 1) * N], H_base)
    return ChannelSet(H_base, H_hat, noise, int(M))


def channel_matrix(paths: PathParams, grid: PositionGrid, M: int,
                   wavelength: float, noise_dbm: float | Sequence[float] = -80.0) -> ChannelSet:
    """Channels from every grid position to every user, tiled ``M`` times."""
    H = channel_at(paths, grid.positions, wavelength, origin=grid.positions[0])
    return make_channel(H, M, dbm_to_watts(noise_dbm))


def upa_positions(M: int, wavelength: float, rows: int = 2) -> np.ndarray:
    """``rows x M`` planar array at half-wavelength spacing anchored at the origin.

    Elements run along x within a row; rows stack along y.
    """
    half = wavelength / 2.0
    return np.array([(i * half, r * half) for r in range(rows) for i in range(M)])


def upa_channel(paths: PathParams, grid: PositionGrid, M: int, wavelength: float) -> np.ndarray:
    """``K x 2M`` channel of the fixed planar array placed at the grid origin.

    Raises
    ------
    ValueError
        If the array does not fit inside the transmitter area.
    """
    coords = upa_positions(M, wavelength) + grid.positions[0]
    if np.any(coords - grid.positions[0] > grid.extent + 1e-9):
        raise ValueError(f"a 2x{M} half-wavelength array does not fit in a "
                         f"{grid.extent} m square")
    return channel_at(paths, coords, wavelength, origin=grid.positions[0])


def load_config_file(path) -> dict:
    """Read a JSON or TOML key-value file."""
    with open(path, "rb") as fh:
        raw = fh.read()
    if str(path).endswith(".toml"):
        try:
            import tomllib
        except ModuleNotFoundError:  # Python < 3.11
            import tomli as tomllib
        return tomllib.loads(raw.decode())
    return json.loads(raw)


@dataclasses.dataclass(frozen=True)
class ScenarioConfig:
    """Scenario parameters; powers and noise are kept in watts internally."""

    lambda_m: float = 0.06
    area_scale_l: float = 2.0
    step_d_m: float = 0.01
    M: int = 4
    K: int = 4
    L_p: int = 16
    alpha: float = 2.2
    L0: float = 1e-4
    dmin_m: float = 0.015
    noise_dbm: float = -80.0
    dist_range_m: tuple = (20.0, 100.0)
    seed: int = 0
    angle_seed: int | None = None

    @property
    def noise_w(self) -> float:
        return float(dbm_to_watts(self.noise_dbm))

    def replace(self, **changes) -> "ScenarioConfig":
        return dataclasses.replace(self, **changes)

    @classmethod
    def from_mapping(cls, data: dict) -> "ScenarioConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise KeyError(f"unknown scenario keys: {sorted(unknown)}")
        data = dict(data)
        if "dist_range_m" in data:
            data["dist_range_m"] = tuple(data["dist_range_m"])
        return cls(**data)

    @classmethod
    def from_file(cls, path: str) -> "ScenarioConfig":
        data = load_config_file(path)
        return cls.from_mapping(data.get("scenario", data))

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["dist_range_m"] = list(self.dist_range_m)
        return d

    def grid(self) -> PositionGrid:
        return build_grid(self.area_scale_l, self.lambda_m, self.step_d_m)

    def paths(self, seed: int | None = None) -> PathParams:
        s = self.seed if seed is None else seed
        return sample_paths(self.K, self.L_p, self.dist_range_m, self.alpha, self.L0,
                            np.random.default_rng(s), angle_rng=self.angle_seed)

    def channel(self, seed: int | None = None, grid: PositionGrid | None = None) -> ChannelSet:
        g = self.grid() if grid is None else grid
        return channel_matrix(self.paths(seed), g, self.M, self.lambda_m, self.noise_dbm)

