"""Synthetic scattered-field (CSI) data for the 2D TM ring setup.

Time convention is e^{+jwt}; every field is normalised to a unit line source,
``(-j/4) H0^(2)(k |r - r'|)``. Two independent solvers are provided: an exact
cylindrical-harmonic series for a single homogeneous lossless disk and a
volume method of moments for arbitrary (possibly lossy) disks.
"""

from __future__ import annotations

import json
import struct
import warnings
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
import scipy.linalg as sla
from scipy import special

from . import specfun
from .errors import DatasetError, SingularSystemError, UnsupportedConfiguration
from .fileio import atomic_write_bytes, atomic_write_text
from .scene import ApertureSelection, SceneConfig, contrast, wavenumber

MAGIC = b"LSMD"
FORMAT_VERSION = 1
# magic, version, n_f, n_rx, n_tx, seed, noisy flag, snr_db (NaN when noiseless)
_HEADER = struct.Struct("<4sHIIIQBd")


@dataclass
class ScatteringDataset:
    """Per-frequency scattering matrices, rows = receivers, columns = transmitters."""

    matrices: np.ndarray
    frequencies: tuple[float, ...]
    rx_indices: tuple[int, ...]
    tx_indices: tuple[int, ...]
    noise_applied: bool = False
    snr_db: float | None = None
    seed: int | None = None
    geometry_hash: str = ""
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.matrices = np.asarray(self.matrices, dtype=complex)
        if self.matrices.ndim != 3:
            raise DatasetError("matrices must have shape (n_freq, n_rx, n_tx)")
        nf, nrx, ntx = self.matrices.shape
        if nf != len(self.frequencies):
            raise DatasetError("one matrix per frequency is required")
        if nrx != len(self.rx_indices) or ntx != len(self.tx_indices):
            raise DatasetError("matrix shape does not match antenna index lists")
        self.frequencies = tuple(float(f) for f in self.frequencies)
        self.rx_indices = tuple(int(i) for i in self.rx_indices)
        self.tx_indices = tuple(int(i) for i in self.tx_indices)

    @property
    def shape(self):
        return self.matrices.shape

    def select_receivers(self, aperture: ApertureSelection) -> "ScatteringDataset":
        """Keep only the rows of the given receivers (aperture applied at load time)."""
        pos = {r: m for m, r in enumerate(self.rx_indices)}
        try:
            rows = [pos[r] for r in aperture.rx_indices]
        except KeyError as exc:
            raise DatasetError(f"receiver {exc.args[0]} is not in the dataset") from None
        return replace(self, matrices=self.matrices[:, rows, :], rx_indices=tuple(aperture.rx_indices))

    def select_frequencies(self, indices) -> "ScatteringDataset":
        indices = list(indices)
        return replace(
            self,
            matrices=self.matrices[indices],
            frequencies=tuple(self.frequencies[i] for i in indices),
        )


def incident_field(tx_position, points, f: float) -> np.ndarray:
    """Field of a unit line source at ``tx_position`` evaluated at ``points``."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    d = np.hypot(points[:, 0] - tx_position[0], points[:, 1] - tx_position[1])
    if np.any(d <= 1e-12):
        raise ValueError("field point coincides with the line source")
    return -0.25j * specfun.hankel2(0, wavenumber(f) * d)


def greens_matrix(points, rx_positions, f: float) -> np.ndarray:
    """(P, N_rx) Green's function from each point to each receiver."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    rx = np.asarray(rx_positions, dtype=float)
    d = np.hypot(points[:, None, 0] - rx[None, :, 0], points[:, None, 1] - rx[None, :, 1])
    return -0.25j * specfun.hankel2(0, wavenumber(f) * d)


def greens_vector(pixel, aperture: ApertureSelection, ring, f: float) -> np.ndarray:
    """Green's function from one pixel to the aperture's receivers."""
    rx = ring.positions[list(aperture.rx_indices)]
    return greens_matrix(np.asarray(pixel, dtype=float)[None, :], rx, f)[0]


def _antennas(scene: SceneConfig):
    ring = scene.ring
    rx = ring.positions[list(scene.aperture.rx_indices)]
    tx = ring.positions
    return rx, tx


def series_coefficients(k: float, radius: float, eps_r: float) -> np.ndarray:
    """Scattering coefficients c_n, n = 0..N, for a lossless homogeneous disk.

    Obtained from continuity of E_z and dE_z/drho at the disk boundary; c_{-n} = c_n.
    """
    n = np.arange(int(np.ceil(k * radius)) + 16)
    k1 = k * np.sqrt(eps_r)
    x, x1 = k * radius, k1 * radius
    j, jp = specfun.bessel_j(n, x), specfun.bessel_j_prime(n, x)
    j1, j1p = specfun.bessel_j(n, x1), specfun.bessel_j_prime(n, x1)
    h, hp = specfun.hankel2(n, x), specfun.hankel2_prime(n, x)
    num = k1 * j1p * j - k * j1 * jp
    den = k * j1 * hp - k1 * j1p * h
    return num / den


def solve_cylinder_series(scene: SceneConfig, f: float) -> np.ndarray:
    """Exact scattered-field matrix (N_rx x N_tx) for one lossless circular cylinder."""
    if len(scene.scatterers) != 1:
        raise UnsupportedConfiguration("series solver handles exactly one scatterer")
    s = scene.scatterers[0]
    if s.sigma != 0:
        raise UnsupportedConfiguration("series solver requires sigma = 0; use the MoM solver")
    k = wavenumber(f)
    rx, tx = _antennas(scene)
    c = np.asarray(s.center, dtype=float)
    rho_r, phi_r = np.hypot(*(rx - c).T), np.arctan2(*(rx - c).T[::-1])
    rho_t, phi_t = np.hypot(*(tx - c).T), np.arctan2(*(tx - c).T[::-1])
    cn = series_coefficients(k, s.radius, s.eps_r)
    n = np.arange(len(cn))
    hr = specfun.hankel2(n[None, :], k * rho_r[:, None])
    ht = specfun.hankel2(n[None, :], k * rho_t[:, None])
    weight = np.where(n == 0, 1.0, 2.0) * cn
    dphi = phi_r[:, None] - phi_t[None, :]
    out = np.zeros((len(rx), len(tx)), dtype=complex)
    for m in n:
        out += weight[m] * np.outer(hr[:, m], ht[:, m]) * np.cos(m * dphi)
    return -0.25j * out


@dataclass(frozen=True)
class MomCells:
    centers: np.ndarray
    weights: np.ndarray  # contrast x fraction of the cell inside the scatterer
    size: float

    @property
    def equivalent_radius(self) -> float:
        return self.size / np.sqrt(np.pi)


def default_cell_size(scene: SceneConfig, f: float) -> float:
    eps_max = max(s.eps_r for s in scene.scatterers)
    return 2.0 * np.pi / (wavenumber(f) * np.sqrt(eps_max)) / 10.0


def mom_cells(scene: SceneConfig, f: float, cell_size: float, subsamples: int = 8) -> MomCells:
    """Square cells covering the scatterers, weighted by their inside-area fraction."""
    pts, wts = [], []
    off = ((np.arange(subsamples) + 0.5) / subsamples - 0.5) * cell_size
    for s in scene.scatterers:
        chi = contrast(s, f)
        n = int(np.ceil(s.radius / cell_size)) + 1
        ax = (np.arange(-n, n) + 0.5) * cell_size
        x, y = np.meshgrid(ax + s.center[0], ax + s.center[1], indexing="ij")
        frac = np.zeros_like(x)
        for ox in off:
            for oy in off:
                frac += np.hypot(x + ox - s.center[0], y + oy - s.center[1]) < s.radius
        frac /= subsamples**2
        keep = frac > 0
        pts.append(np.column_stack([x[keep], y[keep]]))
        wts.append(chi * frac[keep])
    return MomCells(np.vstack(pts), np.concatenate(wts), cell_size)


def _cell_integral_far(k, cells: MomCells, d):
    """Cell-integrated Green's function for distinct cells (equivalent disk)."""
    a = cells.equivalent_radius
    return -0.25j * (2 * np.pi * a / k) * special.j1(k * a) * specfun.hankel2(0, k * d)


def _cell_integral_self(k, cells: MomCells):
    a = cells.equivalent_radius
    return -0.25j * ((2 * np.pi * a / k) * specfun.hankel2(1, k * a) - 4j / k**2)


def _mom_system(k, cells: MomCells, block: int = 512):
    """Dense matrix of ``E_t - k^2 sum_q I(p,q) w_q E_t,q = E_i``, built in row blocks."""
    n = len(cells.centers)
    a = np.empty((n, n), dtype=complex)
    c = cells.centers
    for lo in range(0, n, block):
        hi = min(lo + block, n)
        d = np.hypot(c[lo:hi, None, 0] - c[None, :, 0], c[lo:hi, None, 1] - c[None, :, 1])
        rows = np.arange(lo, hi)
        d[rows - lo, rows] = 1.0
        blk = _cell_integral_far(k, cells, d)
        blk[rows - lo, rows] = _cell_integral_self(k, cells)
        blk *= -(k**2) * cells.weights[None, :]
        blk[rows - lo, rows] += 1.0
        a[lo:hi] = blk
    return a


def solve_mom(scene: SceneConfig, f: float, cell_size: float | None = None) -> np.ndarray:
    """Scattered-field matrix from the domain integral equation (Richmond cells)."""
    k = wavenumber(f)
    if cell_size is None:
        cell_size = default_cell_size(scene, f)
    elif cell_size > 1.25 * default_cell_size(scene, f):
        warnings.warn("MoM cell size exceeds lambda_interior/8; expect reduced accuracy")
    cells = mom_cells(scene, f, cell_size)
    rx, tx = _antennas(scene)
    system = _mom_system(k, cells)
    lu, piv = sla.lu_factor(system, check_finite=False)
    diag = np.abs(np.diag(lu))
    if not np.all(np.isfinite(diag)) or diag.min() <= 1e3 * np.finfo(float).eps * diag.max():
        raise SingularSystemError(
            f"MoM system is singular at f={f:g} Hz "
            f"(|U| diag range {diag.min():.3e}..{diag.max():.3e})"
        )
    e_inc = greens_matrix(cells.centers, tx, f)  # reciprocity: source/observer swap
    e_tot = sla.lu_solve((lu, piv), e_inc, check_finite=False)
    radiate = _radiation_matrix(k, cells, rx)
    return k**2 * radiate @ (cells.weights[:, None] * e_tot)


def _radiation_matrix(k, cells: MomCells, rx):
    d = np.hypot(rx[:, None, 0] - cells.centers[None, :, 0], rx[:, None, 1] - cells.centers[None, :, 1])
    return _cell_integral_far(k, cells, d)


def solve_born(scene: SceneConfig, f: float, cell_size: float | None = None) -> np.ndarray:
    """Single-scattering approximation on the MoM cells (total field = incident)."""
    k = wavenumber(f)
    cells = mom_cells(scene, f, cell_size or default_cell_size(scene, f))
    rx, tx = _antennas(scene)
    e_inc = greens_matrix(cells.centers, tx, f)
    return k**2 * _radiation_matrix(k, cells, rx) @ (cells.weights[:, None] * e_inc)


SOLVERS = {"series": solve_cylinder_series, "mom": solve_mom}


def synthesize(scene: SceneConfig, solver: str = "series", **kwargs) -> ScatteringDataset:
    """Noiseless dataset over all scene frequencies for the scene's receivers."""
    try:
        fn = SOLVERS[solver]
    except KeyError:
        raise UnsupportedConfiguration(f"unknown solver {solver!r}") from None
    mats = np.stack([fn(scene, f, **kwargs) for f in scene.frequencies])
    return ScatteringDataset(
        matrices=mats,
        frequencies=scene.frequencies,
        rx_indices=scene.aperture.rx_indices,
        tx_indices=tuple(range(scene.ring.count)),
        geometry_hash=scene.geometry_hash(),
        meta={"solver": solver},
    )


def incident_csi(scene: SceneConfig) -> ScatteringDataset:
    """Direct-path (empty room) CSI between every Tx and the scene's receivers.

    Monostatic pairs (same antenna) carry no direct path and are set to zero.
    """
    rx, tx = _antennas(scene)
    mats = []
    for f in scene.frequencies:
        d = np.hypot(rx[:, None, 0] - tx[None, :, 0], rx[:, None, 1] - tx[None, :, 1])
        same = d <= 1e-12
        d[same] = 1.0
        m = -0.25j * specfun.hankel2(0, wavenumber(f) * d)
        m[same] = 0.0
        mats.append(m)
    return ScatteringDataset(
        matrices=np.stack(mats),
        frequencies=scene.frequencies,
        rx_indices=scene.aperture.rx_indices,
        tx_indices=tuple(range(scene.ring.count)),
        geometry_hash=scene.geometry_hash(),
        meta={"solver": "incident"},
    )


def _check_compatible(a: ScatteringDataset, b: ScatteringDataset):
    if a.shape != b.shape:
        raise DatasetError(f"shape mismatch {a.shape} vs {b.shape}")
    if not np.allclose(a.frequencies, b.frequencies, rtol=0, atol=1e-6):
        raise DatasetError("frequency lists differ")
    if a.rx_indices != b.rx_indices or a.tx_indices != b.tx_indices:
        raise DatasetError("antenna index lists differ")


def csi_background_subtract(total: ScatteringDataset, background: ScatteringDataset) -> ScatteringDataset:
    """Scattered CSI = total CSI - empty-room CSI, entrywise."""
    _check_compatible(total, background)
    return replace(total, matrices=total.matrices - background.matrices, meta=dict(total.meta))


def add_awgn(dataset: ScatteringDataset, snr_db, seed: int) -> ScatteringDataset:
    """Add circular complex Gaussian noise at ``snr_db`` per frequency.

    Noise variance per entry is mean(|F_k|^2) / 10^(snr/10). Frequency k draws
    from ``default_rng([seed, k])``, so results do not depend on evaluation order.
    ``snr_db`` of None or +inf returns the dataset unchanged.
    """
    if snr_db is None or snr_db == np.inf:
        return dataset
    if dataset.noise_applied:
        raise DatasetError("dataset already carries noise")
    noisy = np.empty_like(dataset.matrices)
    for k, fk in enumerate(dataset.matrices):
        rng = np.random.default_rng([int(seed), k])
        var = np.mean(np.abs(fk) ** 2) / 10.0 ** (snr_db / 10.0)
        w = rng.standard_normal(fk.shape) + 1j * rng.standard_normal(fk.shape)
        noisy[k] = fk + np.sqrt(var / 2.0) * w
    return replace(dataset, matrices=noisy, noise_applied=True, snr_db=float(snr_db), seed=int(seed))


def _sidecar(dataset: ScatteringDataset) -> dict:
    return {
        "format": "LSMD",
        "version": FORMAT_VERSION,
        "frequencies_hz": list(dataset.frequencies),
        "rx_indices": list(dataset.rx_indices),
        "tx_indices": list(dataset.tx_indices),
        "noise_applied": dataset.noise_applied,
        "snr_db": dataset.snr_db,
        "seed": dataset.seed,
        "geometry_hash": dataset.geometry_hash,
        "meta": dataset.meta,
    }


def dataset_to_bytes(dataset: ScatteringDataset) -> bytes:
    nf, nrx, ntx = dataset.shape
    snr = np.nan if dataset.snr_db is None else dataset.snr_db
    seed = 0 if dataset.seed is None else int(dataset.seed)
    head = _HEADER.pack(MAGIC, FORMAT_VERSION, nf, nrx, ntx, seed, int(dataset.noise_applied), snr)
    # transpose -> column-major (transmitter-major); complex128 is interleaved re/im
    body = b"".join(np.ascontiguousarray(m.T, dtype="<c16").tobytes() for m in dataset.matrices)
    return head + body


def write_dataset(path, dataset: ScatteringDataset) -> Path:
    """Write ``path`` (binary LSMD) and ``path.json`` (metadata sidecar)."""
    path = Path(path)
    atomic_write_bytes(path, dataset_to_bytes(dataset))
    atomic_write_text(path.with_suffix(path.suffix + ".json"), json.dumps(_sidecar(dataset), indent=2, sort_keys=True))
    return path


def read_dataset(path) -> ScatteringDataset:
    path = Path(path)
    raw = path.read_bytes()
    if len(raw) < _HEADER.size:
        raise DatasetError(f"{path}: truncated header")
    magic, version, nf, nrx, ntx, seed, noisy, snr = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise DatasetError(f"{path}: not an LSMD file")
    if version != FORMAT_VERSION:
        raise DatasetError(f"{path}: unsupported LSMD version {version}")
    count = nf * nrx * ntx
    if len(raw) != _HEADER.size + 16 * count:
        raise DatasetError(f"{path}: payload size does not match header")
    data = np.frombuffer(raw, dtype="<c16", offset=_HEADER.size, count=count)
    mats = data.reshape(nf, ntx, nrx).transpose(0, 2, 1).astype(complex)
    side = path.with_suffix(path.suffix + ".json")
    meta = json.loads(side.read_text()) if side.exists() else {}
    return ScatteringDataset(
        matrices=mats,
        frequencies=tuple(meta.get("frequencies_hz", [np.nan] * nf)),
        rx_indices=tuple(meta.get("rx_indices", range(nrx))),
        tx_indices=tuple(meta.get("tx_indices", range(ntx))),
        noise_applied=bool(noisy),
        snr_db=None if np.isnan(snr) else float(snr),
        seed=int(seed) if noisy else meta.get("seed"),
        geometry_hash=meta.get("geometry_hash", ""),
        meta=meta.get("meta", {}),
    )
