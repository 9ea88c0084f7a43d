"""Config-driven batch generation: one JSON config in, dataset + manifest out.

Every job resolves its config against documented defaults, validates it
against a published JSON schema, fans a single seed out into per-replicate
streams (replicate i uses stream_id i), and writes a manifest listing every
artifact with its sha256.  Manifests contain no timestamps or machine state,
so re-running a job with the same config and seed reproduces them bit for
bit; wall-clock runtimes appear only in score tables, which the manifest
lists as unhashed reports.
"""

from __future__ import annotations

import argparse
import copy
import csv
import hashlib
import json
import math
import os
import sys
import time

import jsonschema
import numpy as np

from . import __version__
from .boolean import (GrainSpec, expected_coverage, sample_boolean,
                      sample_cox_boolean_spheres, voxelize_grains,
                      write_grains_csv)
from .crack import (assign_widths_multiscale, assign_widths_random_walk,
                    blend_into_volume, brownian_crack, estimate_air_gray_model,
                    min_cut_crack, voxelize_crack)
from .errors import ConfigError, FormatError, GenerationError, MicroforgeError
from .grid import GrayModel, LabelMask, VoxelVolume
from .metrics import dice, separation_check, thickness_stats
from .milling import (MODEL_NOTE as MILLING_NOTE, MillingConfig,
                      autocorrelation_eccentricity, generate_tool_path,
                      height_map_rgb, imprint_rings, save_height_map,
                      shade_preview)
from .points import Box, PointPattern, SizeDist, sample_force_biased_packing, \
    sample_matern_cluster, sample_poisson
from .riesz import riesz1  # noqa: F401  (re-exported for scripting contexts)
from .rng import RandomStream
from .segment import (PercolationParams, hessian_percolation, multiscale_apply,
                      percolation_segment, riesz_crackness)
from .sem import MODEL_NOTE as SEM_NOTE, SemConfig, match_histogram, \
    simulate_sem_stack
from .tessellation import build_voronoi
from .volio import (gray_to_png, load_png_gray, read_mask, read_volume,
                    save_png, write_mask, write_volume)

MANIFEST_SCHEMA_ID = "microforge.manifest.v1"
VOXEL_BUDGET = 10**9

_NUM_POS = {"type": "number", "exclusiveMinimum": 0}
_NUM_NONNEG = {"type": "number", "minimum": 0}
_PROB = {"type": "number", "minimum": 0, "maximum": 1}

_SIZE_DIST = {
    "type": "object",
    "properties": {
        "kind": {"enum": ["constant", "uniform", "lognormal"]},
        "value": _NUM_POS,
        "lo": _NUM_POS,
        "hi": _NUM_POS,
        "median": _NUM_POS,
        "sigma_log": _NUM_NONNEG,
        "cap": _NUM_POS,
    },
    "required": ["kind"],
    "additionalProperties": False,
}

_GERMS = {
    "type": "object",
    "properties": {
        "model": {"enum": ["poisson", "matern", "packing"]},
        "count": {"type": "integer", "minimum": 0},
        "parents": _NUM_NONNEG,
        "mean_per_cluster": _NUM_NONNEG,
        "cluster_radius": _NUM_POS,
        "radius": _SIZE_DIST,
    },
    "required": ["model"],
    "additionalProperties": False,
}

_DIMS = {
    "type": "array",
    "items": {"type": "integer", "minimum": 8},
    "minItems": 3,
    "maxItems": 3,
}

_PERC_PARAMS = {
    "type": "object",
    "properties": {
        "smoothing_sigma_vox": _NUM_POS,
        "planarity_threshold": _PROB,
        "grow_threshold": _PROB,
        "min_component_vox": {"type": "integer", "minimum": 0},
    },
    "additionalProperties": False,
}

_CRACK_PARAMS = {
    "type": "object",
    "properties": {
        "dims": _DIMS,
        "spacing_um": _NUM_POS,
        "axis": {"enum": ["x", "y", "z"]},
        "surface": {"enum": ["min-cut", "brownian"]},
        "germs": _GERMS,
        "widths": {
            "type": "object",
            "properties": {
                "mode": {"enum": ["constant", "walk", "multiscale"]},
                "w0": {"type": "integer", "minimum": 1},
                "p": {"type": "number", "minimum": 0, "exclusiveMaximum": 0.5},
                "w_min": {"type": "integer", "minimum": 1},
                "w_max": {"type": ["integer", "null"], "minimum": 1},
                "scales": {"type": "array",
                           "items": {"type": "integer", "minimum": 1},
                           "minItems": 1},
            },
            "additionalProperties": False,
        },
        "brownian": {
            "type": "object",
            "properties": {
                "hurst": {"type": "number", "exclusiveMinimum": 0,
                          "exclusiveMaximum": 1},
                "amplitude_vox": _NUM_NONNEG,
                "width": {"type": "integer", "minimum": 1},
            },
            "additionalProperties": False,
        },
        "background": {
            "type": ["object", "null"],
            "properties": {
                "path": {"type": "string"},
                "phantom": {
                    "type": "object",
                    "properties": {"mean": _PROB, "sigma": _NUM_NONNEG},
                    "additionalProperties": False,
                },
            },
            "additionalProperties": False,
        },
        "gray_model": {
            "type": "object",
            "properties": {
                "kind": {"enum": ["gaussian", "estimate"]},
                "mean": _PROB,
                "stddev": _NUM_NONNEG,
                "air_threshold": _PROB,
            },
            "additionalProperties": False,
        },
        "pv_sigma_vox": _NUM_NONNEG,
    },
    "required": ["dims"],
    "additionalProperties": False,
}

_BOOLEAN_PARAMS = {
    "type": "object",
    "properties": {
        "dims": _DIMS,
        "spacing_um": _NUM_POS,
        "model": {"enum": ["boolean", "cox"]},
        "shape": {"enum": ["sphere", "cylinder", "cube"]},
        "size": _SIZE_DIST,
        "height": _SIZE_DIST,
        "orientation": {"enum": ["uniform", "fixed"]},
        "intensity": _NUM_NONNEG,
        "target_fraction": {"type": "number", "exclusiveMinimum": 0,
                            "exclusiveMaximum": 1},
        "cox": {
            "type": "object",
            "properties": {
                "parents": _NUM_NONNEG,
                "mean_per_cluster": _NUM_NONNEG,
                "cluster_radius": _NUM_POS,
            },
            "additionalProperties": False,
        },
    },
    "required": ["dims"],
    "additionalProperties": False,
}

_SEM_PARAMS = {
    "type": "object",
    "properties": {
        "input_mask": {"type": "string"},
        "config": {
            "type": "object",
            "properties": {
                "slice_thickness_vox": {"type": "integer", "minimum": 1},
                "attenuation_depth_vox": _NUM_POS,
                "solid_intensity": _PROB,
                "background_intensity": _PROB,
                "noise_sigma": _NUM_NONNEG,
                "poisson_scaling": {"type": "boolean"},
                "edge_gain": _NUM_NONNEG,
                "edge_sigma_vox": _NUM_POS,
            },
            "additionalProperties": False,
        },
        "match_histogram": {"type": ["string", "null"]},
    },
    "required": ["input_mask"],
    "additionalProperties": False,
}

_MILLING_PARAMS = {
    "type": "object",
    "properties": {
        "head_diameter_mm": _NUM_POS,
        "tilt_deg": _NUM_NONNEG,
        "blade_width_um": _NUM_POS,
        "feed_rate_mm_per_min": _NUM_POS,
        "spindle_speed_rpm": _NUM_POS,
        "lateral_cutting_depth_mm": _NUM_POS,
        "path": {"enum": ["parallel", "spiral"]},
        "surface_size_mm": {"type": "array", "items": _NUM_POS,
                            "minItems": 2, "maxItems": 2},
        "grid_resolution_um": _NUM_POS,
        "depth_scale_um": _NUM_POS,
        "depth_jitter_sigma": _NUM_NONNEG,
        "radius_jitter_um": _NUM_NONNEG,
        "max_cut_depth_um": _NUM_POS,
        "light_direction": {"type": "array", "items": {"type": "number"},
                            "minItems": 3, "maxItems": 3},
    },
    "additionalProperties": False,
}

_SEGMENT_PARAMS = {
    "type": "object",
    "properties": {
        "input_volume": {"type": "string"},
        "method": {"enum": ["hessian", "riesz"]},
        "params": _PERC_PARAMS,
        "n_scales": {"type": "integer", "minimum": 1, "maximum": 6},
    },
    "required": ["input_volume"],
    "additionalProperties": False,
}

_EVAL_PARAMS = {
    "type": "object",
    "properties": {
        "pred_mask": {"type": "string"},
        "truth_mask": {"type": "string"},
        "separation_axis": {"enum": ["x", "y", "z", None]},
    },
    "required": ["pred_mask", "truth_mask"],
    "additionalProperties": False,
}

_PIPELINE_PARAMS = {
    "type": "object",
    "properties": {
        "generate": _CRACK_PARAMS,
        "segment": {
            "type": "object",
            "properties": {
                "method": {"enum": ["hessian", "riesz", "oracle"]},
                "params": _PERC_PARAMS,
                "n_scales": {"type": "integer", "minimum": 1, "maximum": 6},
            },
            "additionalProperties": False,
        },
    },
    "required": ["generate"],
    "additionalProperties": False,
}

PARAM_SCHEMAS = {
    "crack": _CRACK_PARAMS,
    "boolean": _BOOLEAN_PARAMS,
    "sem": _SEM_PARAMS,
    "milling": _MILLING_PARAMS,
    "segment": _SEGMENT_PARAMS,
    "eval": _EVAL_PARAMS,
    "pipeline": _PIPELINE_PARAMS,
}

CONFIG_SCHEMA = {
    "type": "object",
    "properties": {
        "task": {"enum": sorted(PARAM_SCHEMAS)},
        "seed": {"type": "integer", "minimum": 0, "maximum": 2**64 - 1},
        "replicates": {"type": "integer", "minimum": 1, "maximum": 100000},
        "params": {"type": "object"},
    },
    "required": ["task", "params"],
    "additionalProperties": False,
}

PARAM_DEFAULTS = {
    "crack": {
        "spacing_um": 1.0,
        "axis": "z",
        "surface": "min-cut",
        "germs": {"model": "poisson", "count": 150},
        "widths": {"mode": "walk", "w0": 3, "p": 0.01, "w_min": 1,
                   "w_max": None, "scales": [3]},
        "brownian": {"hurst": 0.8, "amplitude_vox": 8.0, "width": 1},
        "background": None,
        "gray_model": {"kind": "gaussian", "mean": 0.1, "stddev": 0.03,
                       "air_threshold": 0.2},
        "pv_sigma_vox": 0.7,
    },
    "boolean": {
        "spacing_um": 1.0,
        "model": "boolean",
        "shape": "sphere",
        "size": {"kind": "constant", "value": 10.0},
        "orientation": "uniform",
        "target_fraction": 0.3,
        "cox": {"parents": 20.0, "mean_per_cluster": 10.0,
                "cluster_radius": 20.0},
    },
    "sem": {
        "config": {"slice_thickness_vox": 1, "attenuation_depth_vox": 10.0,
                   "solid_intensity": 0.8, "background_intensity": 0.2,
                   "noise_sigma": 0.03, "poisson_scaling": False,
                   "edge_gain": 0.2, "edge_sigma_vox": 1.0},
        "match_histogram": None,
    },
    "milling": {
        "head_diameter_mm": 20.0,
        "tilt_deg": 0.15,
        "blade_width_um": 600.0,
        "feed_rate_mm_per_min": 300.0,
        "spindle_speed_rpm": 6000.0,
        "lateral_cutting_depth_mm": 2.0,
        "path": "parallel",
        "surface_size_mm": [30.72, 30.72],
        "grid_resolution_um": 30.0,
        "depth_scale_um": 4.0,
        "depth_jitter_sigma": 0.25,
        "radius_jitter_um": 15.0,
        "max_cut_depth_um": 50.0,
        "light_direction": [0.3, 0.3, 0.9055385138137417],
    },
    "segment": {
        "method": "hessian",
        "params": {"smoothing_sigma_vox": 1.5, "planarity_threshold": 0.5,
                   "grow_threshold": 0.2, "min_component_vox": 27},
        "n_scales": 1,
    },
    "eval": {"separation_axis": None},
    "pipeline": {
        "segment": {"method": "hessian",
                    "params": {"smoothing_sigma_vox": 1.5,
                               "planarity_threshold": 0.5,
                               "grow_threshold": 0.2,
                               "min_component_vox": 27},
                    "n_scales": 1},
    },
}


def _deep_merge(defaults, given):
    if isinstance(defaults, dict) and isinstance(given, dict):
        out = copy.deepcopy(defaults)
        for k, v in given.items():
            out[k] = _deep_merge(defaults.get(k), v)
        return out
    return copy.deepcopy(given)


def load_config(path: str) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            cfg = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
    return resolve_config(cfg)


def resolve_config(cfg: dict) -> dict:
    try:
        jsonschema.validate(cfg, CONFIG_SCHEMA)
        task = cfg["task"]
        params = _deep_merge(PARAM_DEFAULTS.get(task, {}), cfg.get("params", {}))
        if task == "pipeline":
            params["generate"] = _deep_merge(PARAM_DEFAULTS["crack"],
                                             cfg["params"].get("generate", {}))
        jsonschema.validate(params, PARAM_SCHEMAS[task])
    except jsonschema.ValidationError as exc:
        raise ConfigError(f"config schema violation: {exc.message}") from exc
    out = dict(cfg)
    out.setdefault("replicates", 1)
    out["params"] = params
    return out


def _size_dist(cfg: dict) -> SizeDist:
    kind = cfg["kind"]
    if kind == "constant":
        if "value" not in cfg:
            raise ConfigError("constant size distribution needs 'value'")
        return SizeDist.constant(cfg["value"])
    if kind == "uniform":
        if "lo" not in cfg or "hi" not in cfg:
            raise ConfigError("uniform size distribution needs 'lo' and 'hi'")
        return SizeDist.uniform(cfg["lo"], cfg["hi"])
    for key in ("median", "sigma_log", "cap"):
        if key not in cfg:
            raise ConfigError(f"lognormal size distribution needs {key!r}")
    return SizeDist.lognormal(cfg["median"], cfg["sigma_log"], cfg["cap"])


def _sample_germs(cfg: dict, window: Box, rng: RandomStream) -> PointPattern:
    model = cfg["model"]
    if model == "poisson":
        count = cfg.get("count", 150)
        return sample_poisson(count / window.volume, window, rng)
    if model == "matern":
        parents = cfg.get("parents", 20.0)
        return sample_matern_cluster(parents / window.volume,
                                     cfg.get("mean_per_cluster", 8.0),
                                     cfg.get("cluster_radius",
                                             0.15 * float(min(window.extent))),
                                     window, rng)
    radius = _size_dist(cfg.get("radius", {"kind": "constant", "value": 1.0}))
    return sample_force_biased_packing(cfg.get("count", 150), radius, window, rng)


def _check_voxel_budget(n_voxels: int, force_large: bool) -> None:
    if n_voxels > VOXEL_BUDGET and not force_large:
        raise ConfigError(
            f"job asks for {n_voxels} voxels (> {VOXEL_BUDGET}); "
            "pass --force-large to proceed")


def _sha256(path: str) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _write_json(obj, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _thickness_csv(mask: LabelMask, path: str) -> None:
    stats = thickness_stats(mask)
    counts, edges = stats.histogram(1.0)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["statistic", "value"])
        writer.writerow(["mean", repr(stats.mean)])
        writer.writerow(["median", repr(stats.median)])
        writer.writerow(["min", repr(stats.min)])
        writer.writerow(["max", repr(stats.max)])
        writer.writerow([])
        writer.writerow(["bin_lo", "bin_hi", "count"])
        for i, c in enumerate(counts):
            writer.writerow([repr(float(edges[i])), repr(float(edges[i + 1])),
                             int(c)])


def _crack_gray_model(cfg: dict, background: VoxelVolume) -> GrayModel:
    if cfg["kind"] == "estimate":
        return estimate_air_gray_model(background,
                                       air_threshold=cfg.get("air_threshold", 0.2))
    return GrayModel.gaussian(cfg["mean"], cfg["stddev"])


def _load_background(cfg, dims, spacing, rng: RandomStream):
    if cfg is None:
        return None
    if "path" in cfg and "phantom" in cfg:
        raise ConfigError("background: give either 'path' or 'phantom', not both")
    if "path" in cfg:
        vol = read_volume(cfg["path"])
        if vol.dims != tuple(dims):
            raise ConfigError(f"background dims {vol.dims} != job dims {tuple(dims)}")
        return vol
    if "phantom" in cfg:
        ph = cfg["phantom"]
        gen = rng.generator()
        data = gen.normal(ph.get("mean", 0.5), ph.get("sigma", 0.03),
                          size=tuple(dims))
        return VoxelVolume(np.clip(data, 0.0, 1.0).astype(np.float32), spacing)
    raise ConfigError("background needs 'path' or 'phantom'")


def _run_crack_replicate(params: dict, seed: int, rep: int, rep_dir: str):
    rng = RandomStream(seed, rep)
    dims = tuple(params["dims"])
    spacing = (params["spacing_um"],) * 3
    axis = params["axis"]
    window = Box.from_dims(dims)
    artifacts = []
    prov = {"task": "crack", "seed": seed, "stream_id": rep,
            "version": __version__, "params": params}
    if params["surface"] == "min-cut":
        germs = _sample_germs(params["germs"], window, rng.child("germs"))
        tess = build_voronoi(germs)
        surface = min_cut_crack(tess, axis)
        wcfg = params["widths"]
        if wcfg["mode"] == "constant":
            widths = {fid: wcfg["w0"] for fid in surface.facet_ids}
        elif wcfg["mode"] == "walk":
            widths = assign_widths_random_walk(
                tess, surface.facet_ids, rng.child("widths"),
                start_width=wcfg["w0"], change_prob=wcfg["p"],
                w_min=wcfg["w_min"], w_max=wcfg["w_max"])
        else:
            widths = assign_widths_multiscale(tess, surface.facet_ids,
                                              wcfg["scales"], rng.child("widths"))
        mask = voxelize_crack(tess, surface.facet_ids, widths, dims)
        prov["n_germs"] = len(germs)
        prov["n_cut_facets"] = len(surface.facet_ids)
        prov["cut_weight"] = surface.weight
    else:
        b = params["brownian"]
        mask = brownian_crack(dims, rng.child("surface"), hurst=b["hurst"],
                              amplitude=b["amplitude_vox"], width=b["width"],
                              axis=axis)
    sep = separation_check(mask, axis)
    prov["separated"] = bool(sep.separated)
    mask_path = os.path.join(rep_dir, "mask.raw")
    write_mask(mask, mask_path, spacing)
    artifacts += [mask_path, mask_path + ".json"]
    background = _load_background(params["background"], dims, spacing,
                                  rng.child("background"))
    if background is not None:
        model = _crack_gray_model(params["gray_model"], background)
        volume, _ = blend_into_volume(background, mask, model,
                                      rng.child("blend"),
                                      smooth_sigma=params["pv_sigma_vox"])
        vol_path = os.path.join(rep_dir, "volume.raw")
        write_volume(volume.quantized_u16(), vol_path)
        artifacts += [vol_path, vol_path + ".json"]
    th_path = os.path.join(rep_dir, "thickness.csv")
    _thickness_csv(mask, th_path)
    artifacts.append(th_path)
    prov_path = os.path.join(rep_dir, "provenance.json")
    _write_json(prov, prov_path)
    artifacts.append(prov_path)
    return artifacts, []


def _run_boolean_replicate(params: dict, seed: int, rep: int, rep_dir: str):
    rng = RandomStream(seed, rep)
    dims = tuple(params["dims"])
    spacing = (params["spacing_um"],) * 3
    window = Box.from_dims(dims)
    prov = {"task": "boolean", "seed": seed, "stream_id": rep,
            "version": __version__, "params": params}
    if params["model"] == "cox":
        cox = params["cox"]
        grains = sample_cox_boolean_spheres(
            cox["parents"] / window.volume, cox["mean_per_cluster"],
            cox["cluster_radius"], _size_dist(params["size"]), window, rng)
    else:
        height = _size_dist(params["height"]) if "height" in params else None
        spec = GrainSpec(params["shape"], _size_dist(params["size"]),
                         height, params["orientation"])
        if "intensity" in params:
            intensity = params["intensity"]
        else:
            intensity = -math.log1p(-params["target_fraction"]) / spec.mean_volume
        grains = sample_boolean(spec, intensity, window, rng)
        prov["intensity"] = intensity
        prov["expected_fraction"] = expected_coverage(spec, intensity)
    mask = voxelize_grains(grains, dims)
    prov["n_grains"] = len(grains)
    prov["measured_fraction"] = mask.count / mask.data.size
    artifacts = []
    mask_path = os.path.join(rep_dir, "mask.raw")
    write_mask(mask, mask_path, spacing)
    artifacts += [mask_path, mask_path + ".json"]
    grains_path = os.path.join(rep_dir, "grains.csv")
    write_grains_csv(grains, grains_path)
    artifacts.append(grains_path)
    prov_path = os.path.join(rep_dir, "provenance.json")
    _write_json(prov, prov_path)
    artifacts.append(prov_path)
    return artifacts, []


def _run_sem_replicate(params: dict, seed: int, rep: int, rep_dir: str):
    rng = RandomStream(seed, rep)
    mask = read_mask(params["input_mask"])
    cfg = SemConfig(**params["config"])
    stack = simulate_sem_stack(mask, cfg, rng)
    images = stack.images
    if params.get("match_histogram"):
        ref = load_png_gray(params["match_histogram"])
        images = np.stack([match_histogram(im, ref) for im in images])
    artifacts = []
    for k in range(images.shape[0]):
        img_path = os.path.join(rep_dir, f"slice_{k:04d}.png")
        gray_to_png(images[k], img_path, window=(0.0, 1.0))
        truth_path = os.path.join(rep_dir, f"truth_{k:04d}.png")
        save_png((stack.truths[k].T.astype(np.uint8) * 255), truth_path)
        artifacts += [img_path, truth_path]
    prov = {"task": "sem", "seed": seed, "stream_id": rep,
            "version": __version__, "params": params,
            "planes": list(stack.planes), "model_note": SEM_NOTE}
    prov_path = os.path.join(rep_dir, "provenance.json")
    _write_json(prov, prov_path)
    artifacts.append(prov_path)
    return artifacts, []


def _run_milling_replicate(params: dict, seed: int, rep: int, rep_dir: str):
    rng = RandomStream(seed, rep)
    light = params.pop("light_direction")
    cfg = MillingConfig(**{k: (tuple(v) if k == "surface_size_mm" else v)
                           for k, v in params.items()})
    params["light_direction"] = light
    nx, ny = cfg.grid_dims
    path = generate_tool_path(cfg)
    hm = imprint_rings(path, cfg, rng)
    artifacts = []
    hm_path = os.path.join(rep_dir, "heightmap.raw")
    save_height_map(hm, hm_path)
    artifacts += [hm_path, hm_path + ".json"]
    rgb_path = os.path.join(rep_dir, "heightmap.png")
    save_png(np.transpose(height_map_rgb(hm, v_lo=-cfg.max_cut_depth_um),
                          (1, 0, 2)).copy(), rgb_path)
    artifacts.append(rgb_path)
    preview_path = os.path.join(rep_dir, "preview.png")
    gray_to_png(shade_preview(hm, np.asarray(light) / np.linalg.norm(light)),
                preview_path)
    artifacts.append(preview_path)
    prov = {"task": "milling", "seed": seed, "stream_id": rep,
            "version": __version__, "params": params,
            "n_rings": len(path), "grid_dims": [nx, ny],
            "feed_per_rev_mm": cfg.feed_per_rev_mm,
            "acf_eccentricity": autocorrelation_eccentricity(hm),
            "model_note": MILLING_NOTE}
    prov_path = os.path.join(rep_dir, "provenance.json")
    _write_json(prov, prov_path)
    artifacts.append(prov_path)
    return artifacts, []


def _segment_volume(volume: VoxelVolume, method: str,
                    params: PercolationParams, n_scales: int) -> LabelMask:
    if method == "hessian":
        return hessian_percolation(volume, params, n_scales)
    arr = volume.as_float01().astype(np.float64)

    def op(a):
        return riesz_crackness(a, sigma=params.smoothing_sigma_vox)

    score = multiscale_apply(arr, op, n_scales)
    return percolation_segment(score, params)


def _run_segment_replicate(params: dict, seed: int, rep: int, rep_dir: str):
    volume = read_volume(params["input_volume"])
    pp = PercolationParams(**params["params"])
    mask = _segment_volume(volume, params["method"], pp, params["n_scales"])
    artifacts = []
    mask_path = os.path.join(rep_dir, "mask.raw")
    write_mask(mask, mask_path, volume.spacing_um)
    artifacts += [mask_path, mask_path + ".json"]
    prov = {"task": "segment", "seed": seed, "stream_id": rep,
            "version": __version__, "params": params,
            "n_predicted_vox": mask.count}
    prov_path = os.path.join(rep_dir, "provenance.json")
    _write_json(prov, prov_path)
    artifacts.append(prov_path)
    return artifacts, []


def _run_eval_replicate(params: dict, seed: int, rep: int, rep_dir: str):
    pred = read_mask(params["pred_mask"])
    truth = read_mask(params["truth_mask"])
    scores = dice(pred, truth)
    result = {"dice": scores.dice, "precision": scores.precision,
              "recall": scores.recall, "tp": scores.tp, "fp": scores.fp,
              "fn": scores.fn, "tn": scores.tn}
    if params.get("separation_axis"):
        sep = separation_check(pred, params["separation_axis"])
        result["separated"] = bool(sep.separated)
    artifacts = []
    json_path = os.path.join(rep_dir, "scores.json")
    _write_json(result, json_path)
    artifacts.append(json_path)
    csv_path = os.path.join(rep_dir, "scores.csv")
    with open(csv_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(sorted(result))
        writer.writerow([result[k] for k in sorted(result)])
    artifacts.append(csv_path)
    return artifacts, []


def _run_pipeline(config: dict, seed: int, outdir: str, force_large: bool):
    params = config["params"]
    gen_params = params["generate"]
    seg_cfg = params["segment"]
    if gen_params.get("background") is None:
        raise ConfigError("pipeline generate step needs a background "
                          "(phantom or path) so there is a volume to segment")
    _check_voxel_budget(int(np.prod(gen_params["dims"])) * config["replicates"],
                        force_large)
    artifacts, reports = [], []
    rows = []
    for rep in range(config["replicates"]):
        rep_dir = os.path.join(outdir, f"rep_{rep:03d}")
        os.makedirs(rep_dir, exist_ok=True)
        t0 = time.perf_counter()
        rep_art, _ = _run_crack_replicate(gen_params, seed, rep, rep_dir)
        artifacts += rep_art
        truth = read_mask(os.path.join(rep_dir, "mask.raw"))
        volume = read_volume(os.path.join(rep_dir, "volume.raw"))
        if seg_cfg["method"] == "oracle":
            pred = truth
        else:
            pred = _segment_volume(volume, seg_cfg["method"],
                                   PercolationParams(**seg_cfg["params"]),
                                   seg_cfg["n_scales"])
        pred_path = os.path.join(rep_dir, "pred_mask.raw")
        write_mask(pred, pred_path, volume.spacing_um)
        artifacts += [pred_path, pred_path + ".json"]
        scores = dice(pred, truth)
        runtime = time.perf_counter() - t0
        rows.append([rep, seed, scores.dice, scores.precision, scores.recall,
                     round(runtime, 3)])
    csv_path = os.path.join(outdir, "scores.csv")
    with open(csv_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["replicate", "seed", "dice", "precision", "recall",
                         "runtime_s"])
        writer.writerows(rows)
    reports.append(csv_path)
    return artifacts, reports


_REPLICATE_RUNNERS = {
    "crack": _run_crack_replicate,
    "boolean": _run_boolean_replicate,
    "sem": _run_sem_replicate,
    "milling": _run_milling_replicate,
    "segment": _run_segment_replicate,
    "eval": _run_eval_replicate,
}

_TASK_NOTES = {
    "sem": [SEM_NOTE],
    "milling": [MILLING_NOTE],
}


def run_job(config: dict, outdir: str, seed: int | None = None,
            force_large: bool = False) -> dict:
    """Run a resolved job config; returns (and writes) the manifest."""
    config = resolve_config(config)
    task = config["task"]
    if seed is None:
        seed = config.get("seed")
    if seed is None:
        raise ConfigError("no seed: pass --seed or put 'seed' in the config")
    if not 0 <= int(seed) < 2**64:
        raise ConfigError("seed must fit in an unsigned 64-bit integer")
    seed = int(seed)
    os.makedirs(outdir, exist_ok=True)
    if task in ("crack", "boolean"):
        _check_voxel_budget(int(np.prod(config["params"]["dims"]))
                            * config["replicates"], force_large)
    if task == "milling":
        cfg = config["params"]
        nx_ny = MillingConfig(**{k: (tuple(v) if k == "surface_size_mm" else v)
                                 for k, v in cfg.items()
                                 if k != "light_direction"}).grid_dims
        _check_voxel_budget(nx_ny[0] * nx_ny[1] * config["replicates"],
                            force_large)
    if task == "pipeline":
        artifacts, reports = _run_pipeline(config, seed, outdir, force_large)
    else:
        runner = _REPLICATE_RUNNERS[task]
        artifacts, reports = [], []
        for rep in range(config["replicates"]):
            rep_dir = os.path.join(outdir, f"rep_{rep:03d}")
            os.makedirs(rep_dir, exist_ok=True)
            rep_art, rep_rep = runner(config["params"], seed, rep, rep_dir)
            artifacts += rep_art
            reports += rep_rep
    manifest = {
        "schema": MANIFEST_SCHEMA_ID,
        "version": __version__,
        "task": task,
        "seed": seed,
        "replicates": config["replicates"],
        "config": config["params"],
        "artifacts": [{"path": os.path.relpath(p, outdir), "sha256": _sha256(p)}
                      for p in artifacts],
        "reports": [os.path.relpath(p, outdir) for p in reports],
        "notes": _TASK_NOTES.get(task, []),
    }
    _write_json(manifest, os.path.join(outdir, "manifest.json"))
    return manifest


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="microforge",
        description="Synthetic microstructure generation and segmentation "
                    "baselines: cracks, Boolean models, SEM stacks, milled "
                    "surfaces.")
    sub = parser.add_subparsers(dest="task", required=True)
    for task in sorted(PARAM_SCHEMAS):
        art = "an" if task[0] in "aeiou" else "a"
        sp = sub.add_parser(task, help=f"run {art} {task} job from a JSON config")
        sp.add_argument("--config", required=True, help="JSON job config")
        sp.add_argument("--seed", type=int, default=None,
                        help="unsigned 64-bit seed (overrides the config)")
        sp.add_argument("--out", required=True, help="output directory")
        sp.add_argument("--threads", type=int, default=1,
                        help="accepted for interface compatibility; outputs "
                             "are bit-identical for any value")
        sp.add_argument("--force-large", action="store_true",
                        help="allow jobs above the 1e9 voxel budget")
        if task == "sem":
            sp.add_argument("--match-histogram", default=None,
                            help="PNG whose gray histogram the slices adopt")
    schema_parser = sub.add_parser("schema", help="print a task's JSON schema")
    schema_parser.add_argument("schema_task", choices=sorted(PARAM_SCHEMAS))
    args = parser.parse_args(argv)

    if args.task == "schema":
        full = dict(CONFIG_SCHEMA)
        full = copy.deepcopy(full)
        full["properties"]["task"] = {"const": args.schema_task}
        full["properties"]["params"] = PARAM_SCHEMAS[args.schema_task]
        json.dump(full, sys.stdout, indent=2, sort_keys=True)
        sys.stdout.write("\n")
        return 0

    try:
        config = load_config(args.config)
        if config["task"] != args.task:
            raise ConfigError(f"config is for task {config['task']!r}, "
                              f"but the {args.task!r} subcommand was invoked")
        if args.task == "sem" and getattr(args, "match_histogram", None):
            config["params"]["match_histogram"] = args.match_histogram
        run_job(config, args.out, seed=args.seed,
                force_large=args.force_large)
        return 0
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except GenerationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (FormatError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4
    except MicroforgeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
