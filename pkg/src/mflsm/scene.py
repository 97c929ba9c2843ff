"""Experiment geometry: imaging grid, antenna ring, receiver aperture, scatterers."""

from __future__ import annotations

import hashlib
import json
import math
import warnings
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .errors import SceneValidationError

EPS0 = 8.8541878128e-12
C0 = 299792458.0

# receiver count on the default 50-antenna ring for each named aperture
APERTURE_PRESETS = {"93.6": 13, "144": 20, "180": 25, "360": 50}


@dataclass(frozen=True)
class DoiGrid:
    half_width: float = 0.375
    side_pixels: int = 46

    @property
    def delta(self) -> float:
        return 2.0 * self.half_width / self.side_pixels

    @property
    def axis(self) -> np.ndarray:
        """Pixel-centre coordinates along one side."""
        return -self.half_width + (np.arange(self.side_pixels) + 0.5) * self.delta

    @property
    def n_pixels(self) -> int:
        return self.side_pixels**2

    @property
    def pixel_centers(self) -> np.ndarray:
        """(P, 2) array; pixel (i, j) sits at flat index i * side + j."""
        x, y = np.meshgrid(self.axis, self.axis, indexing="ij")
        return np.column_stack([x.ravel(), y.ravel()])

    def flat_index(self, i: int, j: int) -> int:
        return i * self.side_pixels + j


@dataclass(frozen=True)
class AntennaRing:
    radius: float = 6.0
    count: int = 50

    @property
    def angles(self) -> np.ndarray:
        return 2.0 * np.pi * np.arange(self.count) / self.count

    @property
    def positions(self) -> np.ndarray:
        a = self.angles
        return self.radius * np.column_stack([np.cos(a), np.sin(a)])

    @property
    def slot_degrees(self) -> float:
        return 360.0 / self.count


@dataclass(frozen=True)
class ApertureSelection:
    rx_indices: tuple[int, ...]

    @classmethod
    def arc(cls, n_rx: int, ring_count: int = 50, start: int = 0) -> "ApertureSelection":
        return cls(tuple((start + m) % ring_count for m in range(n_rx)))

    @classmethod
    def full(cls, ring_count: int = 50) -> "ApertureSelection":
        return cls.arc(ring_count, ring_count)

    @classmethod
    def from_degrees(cls, degrees: float, ring_count: int = 50, start: int = 0) -> "ApertureSelection":
        slot = 360.0 / ring_count
        n = int(round(degrees / slot))
        if n < 1 or n > ring_count or abs(n * slot - degrees) > 1e-6:
            raise SceneValidationError(
                [f"aperture {degrees} deg is not a whole number of {slot:g} deg slots"]
            )
        return cls.arc(n, ring_count, start)

    @classmethod
    def preset(cls, name, ring_count: int = 50, start: int = 0) -> "ApertureSelection":
        key = format(float(name), "g")
        if key not in APERTURE_PRESETS:
            raise SceneValidationError([f"unknown aperture preset {name!r}"])
        return cls.arc(APERTURE_PRESETS[key], ring_count, start)

    def degrees(self, ring_count: int = 50) -> float:
        return len(self.rx_indices) * 360.0 / ring_count

    @property
    def n_rx(self) -> int:
        return len(self.rx_indices)


@dataclass(frozen=True)
class Scatterer:
    center: tuple[float, float] = (0.0, 0.0)
    radius: float = 0.15
    eps_r: float = 1.1
    sigma: float = 0.0


def _default_frequencies():
    return tuple(float(f) * 1e9 for f in range(1, 9))


@dataclass(frozen=True)
class SceneConfig:
    grid: DoiGrid = field(default_factory=DoiGrid)
    ring: AntennaRing = field(default_factory=AntennaRing)
    aperture: ApertureSelection = field(default_factory=ApertureSelection.full)
    scatterers: tuple[Scatterer, ...] = field(default_factory=lambda: (Scatterer(),))
    frequencies: tuple[float, ...] = field(default_factory=_default_frequencies)
    snr_db: float | None = None
    rng_seed: int = 0
    alpha_policy: str = "fixed"

    def with_aperture(self, aperture: ApertureSelection) -> "SceneConfig":
        return replace(self, aperture=aperture)

    def geometry_hash(self) -> str:
        payload = {
            "grid": asdict(self.grid),
            "ring": asdict(self.ring),
            "scatterers": [asdict(s) for s in self.scatterers],
            "frequencies": list(self.frequencies),
        }
        blob = json.dumps(payload, sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


def wavenumber(f: float) -> float:
    return 2.0 * np.pi * f / C0


def contrast(s: Scatterer, f: float) -> complex:
    """eps_r + j sigma / (eps0 omega) - 1, sign as written for the e^{+jwt} model."""
    if f <= 0:
        raise ValueError("frequency must be > 0")
    return complex(s.eps_r - 1.0, s.sigma / (EPS0 * 2.0 * np.pi * f))


def ground_truth_mask(grid: DoiGrid, scatterers) -> np.ndarray:
    """Boolean (side, side) map, True where the pixel centre lies inside a disk."""
    pts = grid.pixel_centers
    inside = np.zeros(len(pts), dtype=bool)
    for s in scatterers:
        d = np.hypot(pts[:, 0] - s.center[0], pts[:, 1] - s.center[1])
        inside |= d < s.radius
    return inside.reshape(grid.side_pixels, grid.side_pixels)


def validate(config: SceneConfig) -> SceneConfig:
    """Check every invariant; raise one :class:`SceneValidationError` listing all failures."""
    errs = []
    g, ring = config.grid, config.ring
    if not g.half_width > 0:
        errs.append("grid half_width must be > 0")
    if int(g.side_pixels) != g.side_pixels or g.side_pixels < 1:
        errs.append("grid side_pixels must be a positive integer")
    if ring.count < 3:
        errs.append("antenna ring needs at least 3 antennas")
    if not ring.radius > 0:
        errs.append("antenna ring radius must be > 0")
    elif ring.radius <= math.sqrt(2.0) * g.half_width:
        errs.append("antenna ring must lie outside the imaging domain")
    elif ring.radius <= 2.0 * 2.0 * math.sqrt(2.0) * g.half_width:
        warnings.warn("ring radius is below twice the DOI diagonal; far-field assumption is weak")

    idx = list(config.aperture.rx_indices)
    if not idx:
        errs.append("aperture selects no receivers")
    elif any(i < 0 or i >= ring.count for i in idx):
        errs.append("aperture index out of ring range")
    elif len(set(idx)) != len(idx):
        errs.append("aperture indices repeat")
    elif any((b - a) % ring.count != 1 for a, b in zip(idx, idx[1:])):
        errs.append("aperture indices must form a contiguous arc")

    for k, s in enumerate(config.scatterers):
        if not s.radius > 0:
            errs.append(f"scatterer {k}: radius must be > 0")
        if s.eps_r < 1:
            errs.append(f"scatterer {k}: eps_r must be >= 1")
        if s.sigma < 0:
            errs.append(f"scatterer {k}: sigma must be >= 0")
        cx, cy = s.center
        if abs(cx) + s.radius >= g.half_width or abs(cy) + s.radius >= g.half_width:
            errs.append(f"scatterer {k}: disk leaves the imaging domain")

    f = list(config.frequencies)
    if not f:
        errs.append("empty frequency list")
    elif any(not fi > 0 for fi in f):
        errs.append("frequencies must be > 0")
    elif any(b <= a for a, b in zip(f, f[1:])):
        errs.append("frequencies must be strictly increasing")

    if config.snr_db is not None and not math.isfinite(config.snr_db):
        errs.append("snr_db must be finite or null")
    if not (isinstance(config.rng_seed, (int, np.integer)) and 0 <= config.rng_seed < 2**64):
        errs.append("rng_seed must be an unsigned 64-bit integer")
    if config.alpha_policy not in ("fixed", "l_curve"):
        errs.append("alpha_policy must be 'fixed' or 'l_curve'")
    if errs:
        raise SceneValidationError(errs)
    return config


def scene_to_dict(config: SceneConfig) -> dict:
    return {
        "grid": asdict(config.grid),
        "ring": asdict(config.ring),
        "aperture": {"rx_indices": list(config.aperture.rx_indices)},
        "scatterers": [
            {"center": list(s.center), "radius": s.radius, "eps_r": s.eps_r, "sigma": s.sigma}
            for s in config.scatterers
        ],
        "frequencies": list(config.frequencies),
        "snr_db": config.snr_db,
        "rng_seed": int(config.rng_seed),
        "alpha_policy": config.alpha_policy,
    }


def _aperture_from(doc, ring_count):
    if doc is None:
        return ApertureSelection.full(ring_count)
    start = int(doc.get("start", 0))
    if "rx_indices" in doc:
        return ApertureSelection(tuple(int(i) for i in doc["rx_indices"]))
    if "preset" in doc:
        return ApertureSelection.preset(doc["preset"], ring_count, start)
    if "degrees" in doc:
        return ApertureSelection.from_degrees(float(doc["degrees"]), ring_count, start)
    if "count" in doc:
        return ApertureSelection.arc(int(doc["count"]), ring_count, start)
    raise SceneValidationError(["aperture needs rx_indices, preset, degrees or count"])


def scene_from_dict(doc: dict) -> SceneConfig:
    """Build and validate a scene; missing keys take the defaults."""
    base = SceneConfig()
    unknown = set(doc) - set(scene_to_dict(base))
    if unknown:
        raise SceneValidationError([f"unknown scene field {k!r}" for k in sorted(unknown)])
    try:
        grid = DoiGrid(**doc["grid"]) if "grid" in doc else base.grid
        ring = AntennaRing(**doc["ring"]) if "ring" in doc else base.ring
        aperture = _aperture_from(doc.get("aperture"), ring.count)
        if "scatterers" in doc:
            scatterers = tuple(
                Scatterer(
                    center=tuple(float(c) for c in s.get("center", (0.0, 0.0))),
                    radius=float(s.get("radius", 0.15)),
                    eps_r=float(s.get("eps_r", 1.1)),
                    sigma=float(s.get("sigma", 0.0)),
                )
                for s in doc["scatterers"]
            )
        else:
            scatterers = base.scatterers
        freqs = tuple(float(f) for f in doc.get("frequencies", base.frequencies))
    except (TypeError, KeyError, ValueError) as exc:
        if isinstance(exc, SceneValidationError):
            raise
        raise SceneValidationError([f"malformed scene document: {exc}"]) from exc
    config = SceneConfig(
        grid=grid,
        ring=ring,
        aperture=aperture,
        scatterers=scatterers,
        frequencies=freqs,
        snr_db=doc.get("snr_db", base.snr_db),
        rng_seed=doc.get("rng_seed", base.rng_seed),
        alpha_policy=doc.get("alpha_policy", base.alpha_policy),
    )
    return validate(config)


def scene_to_json(config: SceneConfig) -> str:
    return json.dumps(scene_to_dict(config), indent=2, sort_keys=True)


def scene_from_json(text: str) -> SceneConfig:
    return scene_from_dict(json.loads(text))
