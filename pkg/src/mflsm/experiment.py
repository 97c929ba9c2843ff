"""Experiment description, run expansion and the forward -> invert -> report pipeline."""

from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import forward, inversion, metrics
from .errors import SceneValidationError
from .fileio import atomic_write_bytes, atomic_write_text
from .scene import ApertureSelection, SceneConfig, ground_truth_mask, scene_from_dict, scene_to_dict

log = logging.getLogger(__name__)

# alphas from the figure captions: MLSM 1e-2 at 27 dB and 1e-6 at 12 dB, MF-MLSM 1e-6
REFERENCE_ALPHAS = {"MLSM_parallel": {"27": 1e-2, "12": 1e-6, "default": 1e-2}, "MF_MLSM": {"default": 1e-6}}
REFERENCE_SETTINGS = ((180.0, 27.0), (180.0, 12.0), (144.0, 27.0), (144.0, 12.0), (93.6, 27.0))
TABLE_SETTINGS = REFERENCE_SETTINGS[:4]


def snr_key(snr) -> str:
    return "inf" if snr is None else format(float(snr), "g")


@dataclass(frozen=True)
class Run:
    method: str
    aperture_deg: float
    snr_db: float | None
    alpha: float | None  # None -> choose by L-curve

    @property
    def label(self) -> str:
        return f"{self.method}_ap{self.aperture_deg:g}_snr{snr_key(self.snr_db)}"


@dataclass
class ExperimentSpec:
    scene: SceneConfig = field(default_factory=SceneConfig)
    methods: tuple[str, ...] = ("MLSM_parallel", "MF_MLSM")
    alphas: dict = field(default_factory=lambda: json.loads(json.dumps(REFERENCE_ALPHAS)))
    apertures: tuple[float, ...] = (180.0, 144.0, 93.6)
    snrs: tuple = (27.0, 12.0)
    settings: tuple | None = REFERENCE_SETTINGS
    solver: str = "series"
    seed: int = 0
    threshold: str = "otsu"
    mf_mode: str = "per_frequency"
    normalize: bool = True
    out_dir: str = "results"

    def validate(self) -> "ExperimentSpec":
        errs = []
        if not self.methods:
            errs.append("methods list is empty")
        for m in self.methods:
            try:
                inversion.canonical_method(m)
            except ValueError as exc:
                errs.append(str(exc))
        if self.solver not in forward.SOLVERS:
            errs.append(f"unknown solver {self.solver!r}")
        if self.mf_mode not in inversion.MF_MODES:
            errs.append(f"unknown mf_mode {self.mf_mode!r}")
        try:
            metrics.parse_threshold(self.threshold)
        except ValueError as exc:
            errs.append(str(exc))
        for ap, _ in self.cells():
            try:
                ApertureSelection.from_degrees(ap, self.scene.ring.count)
            except SceneValidationError as exc:
                errs.extend(exc.errors)
        if errs:
            raise SceneValidationError(errs)
        self.methods = tuple(inversion.canonical_method(m) for m in self.methods)
        return self

    def cells(self):
        if self.settings is not None:
            return [(float(a), None if s is None else float(s)) for a, s in self.settings]
        return [(float(a), None if s is None else float(s)) for a in self.apertures for s in self.snrs]

    def alpha_for(self, method: str, snr) -> float | None:
        if self.scene.alpha_policy == "l_curve":
            return None
        table = self.alphas.get(method, self.alphas.get(_short(method)))
        if table is None:
            raise SceneValidationError([f"no alpha configured for {method}"])
        if isinstance(table, (int, float)):
            return float(table)
        key = snr_key(snr)
        return float(table.get(key, table.get("default")))

    def runs(self) -> list[Run]:
        out = []
        for ap, snr in self.cells():
            for m in self.methods:
                out.append(Run(m, ap, snr, self.alpha_for(m, snr)))
        return out

    def to_dict(self) -> dict:
        return {
            "scene": scene_to_dict(self.scene),
            "methods": list(self.methods),
            "alphas": self.alphas,
            "apertures": list(self.apertures),
            "snrs": [None if s is None else s for s in self.snrs],
            "settings": None if self.settings is None else [list(c) for c in self.settings],
            "solver": self.solver,
            "seed": self.seed,
            "threshold": self.threshold,
            "mf_mode": self.mf_mode,
            "normalize": self.normalize,
            "out_dir": self.out_dir,
        }

    def run_id(self, run: Run) -> str:
        doc = self.to_dict()
        doc.pop("out_dir")
        doc["run"] = [run.method, run.aperture_deg, run.snr_db, run.alpha]
        blob = json.dumps(doc, sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:12]


def _short(method):
    return {"MLSM_parallel": "MLSM", "LSM_single": "LSM"}.get(method, method)


def spec_from_dict(doc: dict) -> ExperimentSpec:
    known = set(ExperimentSpec().to_dict())
    unknown = set(doc) - known
    if unknown:
        raise SceneValidationError([f"unknown experiment field {k!r}" for k in sorted(unknown)])
    base = ExperimentSpec()
    scene_doc = doc.get("scene", {})
    scene = scene_from_dict(scene_doc) if scene_doc else base.scene
    alphas = doc.get("alphas", base.alphas)
    alphas = {inversion.canonical_method(k) if k not in ("default",) else k: v for k, v in alphas.items()}
    settings = doc.get("settings", base.settings if "apertures" not in doc and "snrs" not in doc else None)
    spec = ExperimentSpec(
        scene=scene,
        methods=tuple(doc.get("methods", base.methods)),
        alphas=alphas,
        apertures=tuple(float(a) for a in doc.get("apertures", base.apertures)),
        snrs=tuple(None if s is None else float(s) for s in doc.get("snrs", base.snrs)),
        settings=None if settings is None else tuple(tuple(c) for c in settings),
        solver=doc.get("solver", base.solver),
        seed=int(doc.get("seed", scene.rng_seed if scene_doc else base.seed)),
        threshold=str(doc.get("threshold", base.threshold)),
        mf_mode=doc.get("mf_mode", base.mf_mode),
        normalize=bool(doc.get("normalize", base.normalize)),
        out_dir=doc.get("out_dir", base.out_dir),
    )
    return spec.validate()


def load_spec(path) -> ExperimentSpec:
    text = Path(path).read_text()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SceneValidationError([f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}"]) from exc
    return spec_from_dict(doc)


# ---- pipeline stages ----------------------------------------------------------


def dataset_name(snr) -> str:
    return "clean.lsmd" if snr is None else f"snr{snr_key(snr)}.lsmd"


def cmd_forward(spec: ExperimentSpec, out_dir=None) -> list[Path]:
    """Full-ring noiseless dataset plus one noisy copy per configured SNR."""
    out = Path(out_dir or spec.out_dir) / "data"
    full = spec.scene.with_aperture(ApertureSelection.full(spec.scene.ring.count))
    log.info("synthesising %d frequencies with the %s solver", len(full.frequencies), spec.solver)
    clean = forward.synthesize(full, spec.solver)
    written = [forward.write_dataset(out / dataset_name(None), clean)]
    for snr in sorted({s for _, s in spec.cells() if s is not None}, reverse=True):
        noisy = forward.add_awgn(clean, snr, spec.seed)
        written.append(forward.write_dataset(out / dataset_name(snr), noisy))
    return written


def _write_map(base: Path, imap: inversion.IndicatorMap, extra: dict):
    # labels may contain a dot (93.6), so append suffixes instead of replacing
    atomic_write_text(base.parent / (base.name + ".csv"), imap.to_csv())
    atomic_write_bytes(base.parent / (base.name + ".pgm"), imap.to_pgm())
    meta = imap.metadata()
    meta.update(extra)
    atomic_write_text(base.parent / (base.name + ".json"), json.dumps(meta, indent=2, sort_keys=True))


def cmd_invert(spec: ExperimentSpec, data_dir=None, out_dir=None, runs=None, workers: int = 1):
    """Run every configured cell; returns a list of (Run, IndicatorMap)."""
    out = Path(out_dir or spec.out_dir)
    data_dir = Path(data_dir or out / "data")
    cache = {}
    results = []
    for run in runs or spec.runs():
        if run.snr_db not in cache:
            cache[run.snr_db] = forward.read_dataset(data_dir / dataset_name(run.snr_db))
        ds = cache[run.snr_db]
        scene = spec.scene.with_aperture(ApertureSelection.from_degrees(run.aperture_deg, spec.scene.ring.count))
        alpha = run.alpha
        if alpha is None:
            alpha = inversion.select_alpha(ds, scene, run.method, normalize=spec.normalize).alpha
            log.info("%s: L-curve alpha %.3g", run.label, alpha)
        imap = inversion.run_method(
            ds, scene, run.method, alpha, mf_mode=spec.mf_mode, normalize=spec.normalize, workers=workers
        )
        rid = spec.run_id(run)
        _write_map(
            out / "maps" / f"{run.label}_{rid}",
            imap,
            {"run_id": rid, "aperture_deg": run.aperture_deg, "label": run.label},
        )
        log.info("%s done (alpha=%.3g)", run.label, alpha)
        results.append((run, imap))
    return results


def load_maps(maps_dir) -> list[inversion.IndicatorMap]:
    maps = []
    for meta_path in sorted(Path(maps_dir).glob("*.json")):
        meta = json.loads(meta_path.read_text())
        img = np.loadtxt(meta_path.parent / (meta_path.name[: -len(".json")] + ".csv"), delimiter=",", ndmin=2)
        maps.append(
            inversion.IndicatorMap(
                values=img[::-1, :].T.copy(),
                method=meta["method"],
                alpha=meta["alpha"],
                frequencies=tuple(meta["frequencies_hz"]),
                rx_indices=tuple(meta["rx_indices"]),
                snr_db=meta["snr_db"],
                seed=meta["seed"],
                meta={k: meta[k] for k in ("aperture_deg", "run_id", "label", "mf_mode") if k in meta},
            )
        )
    return maps


def score(spec: ExperimentSpec, maps) -> list[metrics.ReconstructionReport]:
    truth = ground_truth_mask(spec.scene.grid, spec.scene.scatterers)
    out = []
    for m in maps:
        scen = {"aperture_deg": m.meta.get("aperture_deg"), "snr_db": m.snr_db, "alpha": m.alpha}
        out.append(metrics.evaluate(m, truth, spec.threshold, scen))
    order = {mth: i for i, mth in enumerate(inversion.METHODS)}
    out.sort(key=lambda r: (-r.scenario["aperture_deg"], -(r.scenario["snr_db"] or np.inf), order[r.method]))
    return out


def table_rows(reports):
    """Rows 'setting, MLSM, MF-MLSM' for every (aperture, snr) with both methods."""
    cells = {}
    for r in reports:
        key = (r.scenario["aperture_deg"], r.scenario["snr_db"])
        cells.setdefault(key, {})[r.method] = r.coverage_percent
    rows = []
    for (ap, snr), vals in cells.items():
        if "MLSM_parallel" in vals and "MF_MLSM" in vals:
            rows.append((ap, snr, vals["MLSM_parallel"], vals["MF_MLSM"]))
    return rows


def format_table(rows) -> str:
    lines = [f"{'Setting':<34}{'MLSM(%)':>10}{'MF-MLSM(%)':>13}"]
    for ap, snr, a, b in rows:
        lines.append(f"{f'Aperture {ap:g} deg, SNR = {snr_key(snr)} dB':<34}{a:>10.2f}{b:>13.2f}")
    return "\n".join(lines)


def cmd_report(spec: ExperimentSpec, maps, out_dir=None):
    """Write coverage CSV/JSON (all runs and the coverage-table subset); return reports."""
    out = Path(out_dir or spec.out_dir) / "report"
    reports = score(spec, maps)
    table_cells = {(a, s) for a, s in TABLE_SETTINGS}
    t1 = [r for r in reports if (r.scenario["aperture_deg"], r.scenario["snr_db"]) in table_cells]
    atomic_write_text(out / "coverage_all.csv", metrics.reports_to_csv(reports))
    atomic_write_text(out / "coverage_table_long.csv", metrics.reports_to_csv(t1))
    rows = table_rows(t1)
    lines = ["setting,aperture_deg,snr_db,mlsm_percent,mf_mlsm_percent"]
    for ap, snr, a, b in rows:
        lines.append(f"Aperture {ap:g} deg SNR {snr_key(snr)} dB,{ap:g},{snr_key(snr)},{a:.2f},{b:.2f}")
    atomic_write_text(out / "coverage_table.csv", "\n".join(lines) + "\n")
    atomic_write_text(out / "reports.json", metrics.reports_to_json(reports))
    return reports


def cmd_reproduce(spec: ExperimentSpec | None = None, out_dir=None, figures: bool = True, workers: int = 1):
    """forward -> invert -> report (-> figures) for the reference settings."""
    spec = (spec or ExperimentSpec()).validate()
    out = Path(out_dir or spec.out_dir)
    spec = replace(spec, out_dir=str(out))
    atomic_write_text(out / "experiment.json", json.dumps(spec.to_dict(), indent=2, sort_keys=True))
    cmd_forward(spec, out)
    results = cmd_invert(spec, out / "data", out, workers=workers)
    reports = cmd_report(spec, [m for _, m in results], out)
    if figures:
        from . import plotting

        plotting.render_panels(spec, results, out / "figures")
    return reports
