"""Pipeline command line: one subcommand per stage plus an end-to-end run.

Contract: the success stream carries exactly one machine-readable JSON line
per invocation; all logging goes to stderr.  Exit codes are 0 on success,
1 on usage errors, 2 on data errors.  The effective configuration of every
run is echoed to ``<output_dir>/config.json`` so results are reproducible
from the artifacts alone.  ``run-all`` is a plain composition of the stage
functions, so its artifacts match stage-by-stage runs byte for byte.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import os
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import aoi as aoi_mod
from . import mission, sonar, spectral, synthlab
from .errors import DataError
from .geo import LocalProjection
from .geotiff import read_geotiff, write_geotiff
from .kmeans import KMeansConfig
from .vector import LakeBoundary, boundary_to_geojson, parse_boundary, rasterize_mask

logger = logging.getLogger("lakeweed")

OUTPUT_DIR_ENV = "LAKEWEED_OUT"


@dataclass
class PipelineConfig:
    """Tunable pipeline parameters; defaults follow the surveyed field setup."""

    seed: int = 0
    intensity_classes: int = 5
    aoi_clusters: int = 15
    min_members: int = 1
    ndwi_threshold: float = 0.0
    gate_upper_m: float = 1.0
    gate_lower_m: float = 5.0
    grid_resolution_m: float = 0.1
    swath_aperture_deg: float = 150.0
    survey_speed_kn: float = 3.0
    nominal_depth_m: float = 2.5
    overlap_frac: float = 0.1
    ping_spacing_m: float = 2.0
    hard_target_db: float = 25.0
    band_dir: str | None = None
    boundary_path: str | None = None
    output_dir: str = "out"

    @property
    def survey_speed_mps(self) -> float:
        return mission.knots_to_mps(self.survey_speed_kn)

    def kmeans_cfg(self, k: int) -> KMeansConfig:
        return KMeansConfig(k=k, seed=self.seed)


_CONFIG_FIELDS = {f.name for f in dataclasses.fields(PipelineConfig)}


def _load_config(args: argparse.Namespace) -> PipelineConfig:
    values: dict = {}
    if getattr(args, "config", None):
        try:
            doc = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise DataError(f"cannot read config {args.config}: {exc}") from exc
        unknown = set(doc) - _CONFIG_FIELDS
        if unknown:
            raise DataError(f"unknown config keys: {sorted(unknown)}")
        values.update(doc)
    for name in _CONFIG_FIELDS:
        flag = getattr(args, name, None)
        if flag is not None:
            values[name] = flag
    if "output_dir" not in values and OUTPUT_DIR_ENV in os.environ:
        values["output_dir"] = os.environ[OUTPUT_DIR_ENV]
    return PipelineConfig(**values)


def _outdir(cfg: PipelineConfig) -> Path:
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _echo_config(cfg: PipelineConfig, out: Path) -> None:
    (out / "config.json").write_text(
        json.dumps(dataclasses.asdict(cfg), indent=2) + "\n", encoding="utf-8"
    )


def _read_boundary(path) -> LakeBoundary:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot read boundary {path}: {exc}") from exc
    return parse_boundary(text)


def _emit(summary: dict) -> None:
    print(json.dumps(summary, sort_keys=True))


# ---------------------------------------------------------------------------
# Stage implementations (shared by subcommands and run-all)
# ---------------------------------------------------------------------------


def stage_synth(cfg: PipelineConfig, scenario_path, plans_path=None) -> dict:
    out = _outdir(cfg)
    scenario = synthlab.load_scenario(scenario_path)
    summary: dict = {"command": "synth", "seed": scenario.seed}

    if plans_path is None:
        bands, boundary = synthlab.generate_bands(scenario)
        band_dir = out / "bands"
        band_dir.mkdir(exist_ok=True)
        for role, band_id in spectral.DEFAULT_BAND_IDS.items():
            write_geotiff(getattr(bands, role), band_dir / f"{band_id}.tif")
        (out / "boundary.geojson").write_text(
            json.dumps(boundary_to_geojson(boundary), indent=2) + "\n",
            encoding="utf-8",
        )
        synthlab.write_truth(scenario, out / "truth.json")
        (out / "scenario.json").write_text(
            json.dumps(synthlab.scenario_to_dict(scenario), indent=2) + "\n",
            encoding="utf-8",
        )
        summary.update(
            band_dir=str(band_dir),
            boundary=str(out / "boundary.geojson"),
            truth=str(out / "truth.json"),
            raster_size=[bands.grid.width, bands.grid.height],
        )
    else:
        plans = mission.load_plans(plans_path)
        sounding_dir = out / "soundings"
        sounding_dir.mkdir(exist_ok=True)
        written = []
        for plan in plans:
            if plan.degenerate:
                logger.warning("skipping degenerate plan for AOI %d", plan.aoi_id)
                continue
            for harvested, tag in ((False, "before"), (True, "after")):
                scan = synthlab.scan_plan(
                    scenario, plan, cfg.ping_spacing_m, harvested=harvested
                )
                path = sounding_dir / f"aoi_{plan.aoi_id:02d}_{tag}.csv"
                sonar.write_soundings(scan, path)
                written.append({"path": str(path), "soundings": len(scan)})
        summary.update(command="synth", scans=written)
    return summary


def stage_apa(cfg: PipelineConfig, band_dir, boundary_path) -> dict:
    out = _outdir(cfg)
    provider = spectral.DirectoryBandProvider(band_dir)
    bands = spectral.load_bands(provider)
    boundary = _read_boundary(boundary_path)

    index = spectral.sav_index(bands)
    water = spectral.water_mask(bands, threshold=cfg.ndwi_threshold)
    lake = rasterize_mask(boundary, bands.grid)
    masked = spectral.apply_masks(index, water, lake)

    artifacts = {
        "sav_raw": index.raw,
        "sav_scaled": index.scaled,
        "water_mask": water,
        "lake_mask": lake,
        "sav_raw_masked": masked.raw,
        "sav_scaled_masked": masked.scaled,
    }
    for name, raster in artifacts.items():
        write_geotiff(raster, out / f"{name}.tif")

    valid = int(masked.valid_mask().sum())
    return {
        "command": "apa",
        "raster_size": [bands.grid.width, bands.grid.height],
        "water_pixels": int((water.samples == 1).sum()),
        "lake_pixels": int((lake.samples == 1).sum()),
        "index_valid_pixels": valid,
        "artifacts": {name: str(out / f"{name}.tif") for name in artifacts},
    }


def stage_aoi(cfg: PipelineConfig, apa_dir, boundary_path) -> dict:
    out = _outdir(cfg)
    apa_dir = Path(apa_dir)
    raw = read_geotiff(apa_dir / "sav_raw_masked.tif")
    scaled = read_geotiff(apa_dir / "sav_scaled_masked.tif")
    index = spectral.SavIndexRaster(raw=raw, scaled=scaled)
    boundary = _read_boundary(boundary_path)
    lon0, lat0 = boundary.centroid()
    proj = LocalProjection(lon0, lat0)

    class_map = aoi_mod.classify_intensity(index, cfg.kmeans_cfg(cfg.intensity_classes))
    write_geotiff(class_map.classes, out / "intensity_classes.tif")

    aois = aoi_mod.extract_aois(
        class_map, proj, cfg.kmeans_cfg(cfg.aoi_clusters), min_members=cfg.min_members
    )
    aoi_mod.export_aois(aois, out / "aois.geojson", local_frame=proj)
    return {
        "command": "aoi",
        "class_centroids": [float(c) for c in class_map.centroids],
        "class_counts": {str(k): v for k, v in sorted(class_map.label_counts().items())},
        "aoi_count": len(aois),
        "aois": [
            {
                "id": a.id,
                "centroid": list(a.centroid_lonlat),
                "member_count": a.member_count,
                "area_m2": a.area_m2,
            }
            for a in aois
        ],
        "artifacts": {
            "intensity_classes": str(out / "intensity_classes.tif"),
            "aois": str(out / "aois.geojson"),
        },
    }


def stage_plan(cfg: PipelineConfig, aois_path) -> dict:
    out = _outdir(cfg)
    features, frame = aoi_mod.load_aois(aois_path)
    if frame is None:
        raise DataError(f"{aois_path} carries no local_frame reference")
    plans = []
    for feature in features:
        props = feature["properties"]
        ring = np.asarray(feature["geometry"]["coordinates"][0], dtype=np.float64)
        hull_open = ring[:-1]
        area = aoi_mod.AreaOfInterest(
            id=int(props["id"]),
            centroid_lonlat=tuple(props["centroid"]),
            member_pixels=np.zeros((int(props["member_count"]), 2), dtype=np.int64),
            member_centers_lonlat=hull_open,
            hull_lonlat=ring,
            area_m2=float(props["area_m2"]),
            class_counts=dict(props.get("class_counts", {})),
        )
        plans.append(
            mission.plan_survey(
                area,
                frame,
                nominal_depth_m=cfg.nominal_depth_m,
                aperture_deg=cfg.swath_aperture_deg,
                overlap_frac=cfg.overlap_frac,
                survey_speed_mps=cfg.survey_speed_mps,
            )
        )
    mission.export_plans(plans, out / "plans.geojson")
    return {
        "command": "plan",
        "plan_count": len(plans),
        "plans": [
            {
                "aoi_id": p.aoi_id,
                "legs": p.leg_count,
                "total_length_m": p.total_length_m,
                "est_duration_s": p.est_duration_s,
            }
            for p in plans
        ],
        "artifacts": {"plans": str(out / "plans.geojson")},
    }


def stage_sonar_grid(cfg: PipelineConfig, soundings_path, svp_path=None,
                     frame: tuple[float, float] | None = None) -> dict:
    out = _outdir(cfg)
    soundings = sonar.read_soundings(soundings_path)
    if soundings.mode == "twtt":
        svp = (
            sonar.read_velocity_profile(svp_path)
            if svp_path
            else sonar.SoundVelocityProfile(samples=((0.0, 1500.0),))
        )
        soundings = sonar.svp_correct(soundings, svp)
    gates = sonar.GateConfig(upper_m=cfg.gate_upper_m, lower_m=cfg.gate_lower_m)
    kept, dropped = sonar.gate_filter(soundings, gates)
    proj = (
        LocalProjection(frame[0], frame[1]) if frame else _grid_projection(soundings)
    )
    grid = sonar.build_span_grid(kept, proj, cfg.grid_resolution_m)

    write_geotiff(sonar.span_layer(grid), out / "span.tif")
    write_geotiff(sonar.bathy_layer(grid), out / "bathy.tif")
    write_geotiff(sonar.backscatter_layer(grid), out / "backscatter.tif")
    targets = sonar.flag_hard_targets(grid, cfg.hard_target_db)
    (out / "hard_targets.json").write_text(
        json.dumps(
            {
                "threshold_db": cfg.hard_target_db,
                "cells": [t._asdict() for t in targets],
            },
            indent=2,
        )
        + "\n",
        encoding="utf-8",
    )

    occupied = int(grid.occupied().sum())
    span = grid.depth_max - grid.depth_min
    return {
        "command": "sonar-grid",
        "soundings": len(soundings),
        "kept": len(kept),
        "dropped_above": dropped.above,
        "dropped_below": dropped.below,
        "grid_shape": list(grid.shape),
        "occupied_cells": occupied,
        "mean_span_m": float(np.nanmean(span[grid.occupied()])) if occupied else None,
        "hard_target_cells": len(targets),
        "local_frame": {"lon0": grid.proj.lon0, "lat0": grid.proj.lat0},
        "artifacts": {
            "span": str(out / "span.tif"),
            "bathy": str(out / "bathy.tif"),
            "backscatter": str(out / "backscatter.tif"),
            "hard_targets": str(out / "hard_targets.json"),
        },
    }


def _grid_projection(soundings: sonar.SoundingSet) -> LocalProjection:
    """Local frame anchored at the scan's south-west corner position.

    The minimum is insensitive to how many returns each footprint produced,
    so repeat scans along the same track grid into the same frame and their
    span layers stay cell-comparable.  Surveys with different tracks should
    pin a frame explicitly (``--frame``).
    """
    lon0 = round(float(np.min(soundings.lon)), 6)
    lat0 = round(float(np.min(soundings.lat)), 6)
    return LocalProjection(lon0, lat0)


def stage_diff(cfg: PipelineConfig, before_path, after_path, boundary_path=None,
               frame: tuple[float, float] | None = None) -> dict:
    out = _outdir(cfg)
    before = read_geotiff(before_path)
    after = read_geotiff(after_path)
    region = _read_boundary(boundary_path) if boundary_path else None
    proj = LocalProjection(frame[0], frame[1]) if frame else None
    report = mission.harvest_diff(before, after, region=region, proj=proj)
    (out / "harvest_report.json").write_text(
        json.dumps(report.to_dict(), indent=2) + "\n", encoding="utf-8"
    )
    summary = {"command": "diff", "artifacts": {"report": str(out / "harvest_report.json")}}
    summary.update(report.to_dict())
    return summary


def stage_run_all(cfg: PipelineConfig, scenario_path) -> dict:
    out = _outdir(cfg)
    synth_summary = stage_synth(cfg, scenario_path)
    apa_summary = stage_apa(cfg, out / "bands", out / "boundary.geojson")
    aoi_summary = stage_aoi(cfg, out, out / "boundary.geojson")
    plan_summary = stage_plan(cfg, out / "aois.geojson")
    sound_summary = stage_synth(cfg, scenario_path, plans_path=out / "plans.geojson")

    reports = []
    for scan in sound_summary["scans"]:
        path = Path(scan["path"])
        if not path.name.endswith("_before.csv"):
            continue
        stem = path.name[: -len("_before.csv")]
        after_csv = path.with_name(f"{stem}_after.csv")
        grid_cfg_before = dataclasses.replace(
            cfg, output_dir=str(out / "grids" / f"{stem}_before")
        )
        grid_cfg_after = dataclasses.replace(
            cfg, output_dir=str(out / "grids" / f"{stem}_after")
        )
        before_summary = stage_sonar_grid(grid_cfg_before, path)
        stage_sonar_grid(grid_cfg_after, after_csv)
        diff_cfg = dataclasses.replace(cfg, output_dir=str(out / "reports" / stem))
        diff_summary = stage_diff(
            diff_cfg,
            Path(grid_cfg_before.output_dir) / "span.tif",
            Path(grid_cfg_after.output_dir) / "span.tif",
        )
        reports.append(
            {
                "scan": stem,
                "mean_diff_m": diff_summary["mean_diff_m"],
                "valid_cell_count": diff_summary["valid_cell_count"],
                "compared_area_m2": diff_summary["compared_area_m2"],
                "hard_target_cells": before_summary["hard_target_cells"],
            }
        )

    total_cells = sum(r["valid_cell_count"] for r in reports)
    mean_diff = (
        sum(r["mean_diff_m"] * r["valid_cell_count"] for r in reports) / total_cells
        if total_cells
        else None
    )
    summary = {
        "command": "run-all",
        "aoi_count": aoi_summary["aoi_count"],
        "aois": aoi_summary["aois"],
        "plan_count": plan_summary["plan_count"],
        "index_valid_pixels": apa_summary["index_valid_pixels"],
        "scans": len(reports),
        "mean_diff_m": mean_diff,
        "reports": reports,
        "synth": {"raster_size": synth_summary["raster_size"]},
        "output_dir": str(out),
    }
    (out / "run_summary.json").write_text(
        json.dumps(summary, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    return summary


# ---------------------------------------------------------------------------
# Argument parsing
# ---------------------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    """argparse exits with 2 on usage errors; the pipeline contract wants 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _add_config_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="JSON config file (flags override it)")
    parser.add_argument("--out", dest="output_dir", help="output directory")
    parser.add_argument("--seed", type=int, help="clustering seed")
    parser.add_argument("--intensity-classes", dest="intensity_classes", type=int,
                        help="number of density classes (default 5)")
    parser.add_argument("--aoi-clusters", dest="aoi_clusters", type=int,
                        help="number of spatial clusters (default 15)")
    parser.add_argument("--min-members", dest="min_members", type=int,
                        help="drop AOIs with fewer member pixels (default 1)")
    parser.add_argument("--ndwi-threshold", dest="ndwi_threshold", type=float,
                        help="water mask cut (default 0.0)")
    parser.add_argument("--gate-upper", dest="gate_upper_m", type=float,
                        help="upper depth gate in m (default 1.0)")
    parser.add_argument("--gate-lower", dest="gate_lower_m", type=float,
                        help="lower depth gate in m (default 5.0)")
    parser.add_argument("--grid-res", dest="grid_resolution_m", type=float,
                        help="span grid cell size in m (default 0.1)")
    parser.add_argument("--aperture", dest="swath_aperture_deg", type=float,
                        help="sonar swath aperture in degrees (default 150)")
    parser.add_argument("--speed-kn", dest="survey_speed_kn", type=float,
                        help="survey speed in knots (default 3)")
    parser.add_argument("--nominal-depth", dest="nominal_depth_m", type=float,
                        help="planning depth in m (default 2.5)")
    parser.add_argument("--overlap", dest="overlap_frac", type=float,
                        help="swath overlap fraction (default 0.1)")
    parser.add_argument("--ping-spacing", dest="ping_spacing_m", type=float,
                        help="simulated ping spacing in m (default 2.0)")
    parser.add_argument("--hard-target-db", dest="hard_target_db", type=float,
                        help="hard-target advisory threshold in dB (default 25)")


def build_parser() -> _Parser:
    parser = _Parser(prog="lakeweed", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", parents=[], help="generate a synthetic scenario")
    p.add_argument("--scenario", required=True, help="scenario JSON file")
    p.add_argument("--plans", help="survey plans; when given, emit sounding CSVs")
    _add_config_flags(p)

    p = sub.add_parser("apa", help="compute the vegetation index and masks")
    p.add_argument("--bands", required=True, dest="band_dir", help="band directory")
    p.add_argument("--boundary", required=True, dest="boundary_path",
                   help="lake boundary GeoJSON")
    _add_config_flags(p)

    p = sub.add_parser("aoi", help="classify intensities and extract AOIs")
    p.add_argument("--apa-dir", required=True, help="directory with apa artifacts")
    p.add_argument("--boundary", required=True, dest="boundary_path",
                   help="lake boundary GeoJSON")
    _add_config_flags(p)

    p = sub.add_parser("plan", help="generate survey plans for AOIs")
    p.add_argument("--aois", required=True, help="aois.geojson from the aoi stage")
    _add_config_flags(p)

    p = sub.add_parser("sonar-grid", help="grid soundings into span/bathy layers")
    p.add_argument("--soundings", required=True, help="sounding CSV")
    p.add_argument("--svp", help="sound velocity profile CSV (twtt mode)")
    p.add_argument("--frame", nargs=2, type=float, metavar=("LON0", "LAT0"),
                   help="pin the local metric frame instead of deriving it")
    _add_config_flags(p)

    p = sub.add_parser("diff", help="compare two span rasters")
    p.add_argument("--before", required=True, help="pre-harvest span GeoTIFF")
    p.add_argument("--after", required=True, help="post-harvest span GeoTIFF")
    p.add_argument("--boundary", dest="boundary_path", help="optional region filter")
    p.add_argument("--frame", nargs=2, type=float, metavar=("LON0", "LAT0"),
                   help="local frame reference for metric rasters with --boundary")
    _add_config_flags(p)

    p = sub.add_parser("run-all", help="full synthetic pipeline")
    p.add_argument("--scenario", required=True, help="scenario JSON file")
    _add_config_flags(p)

    return parser


def main(argv=None) -> int:
    logging.basicConfig(
        stream=sys.stderr, level=logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    parser = build_parser()
    args = parser.parse_args(argv)

    try:
        cfg = _load_config(args)
        out = _outdir(cfg)
        _echo_config(cfg, out)
        if args.command == "synth":
            summary = stage_synth(cfg, args.scenario, plans_path=args.plans)
        elif args.command == "apa":
            summary = stage_apa(cfg, args.band_dir, args.boundary_path)
        elif args.command == "aoi":
            summary = stage_aoi(cfg, args.apa_dir, args.boundary_path)
        elif args.command == "plan":
            summary = stage_plan(cfg, args.aois)
        elif args.command == "sonar-grid":
            summary = stage_sonar_grid(
                cfg, args.soundings, svp_path=args.svp,
                frame=tuple(args.frame) if args.frame else None,
            )
        elif args.command == "diff":
            summary = stage_diff(
                cfg, args.before, args.after,
                boundary_path=args.boundary_path,
                frame=tuple(args.frame) if args.frame else None,
            )
        elif args.command == "run-all":
            summary = stage_run_all(cfg, args.scenario)
        else:  # pragma: no cover - argparse enforces the choices
            parser.error(f"unknown command {args.command}")
            return 1
    except DataError as exc:
        logger.error("%s", exc)
        return 2
    except OSError as exc:
        logger.error("%s", exc)
        return 2

    _emit(summary)
    return 0


if __name__ == "__main__":
    sys.exit(main())
