"""Command-line pipeline: simulate data, reconstruct, conditioning study.

    ctinr simulate|reconstruct|cond --config <file> [--out <dir>] [--seed <int>]
          [--desk-scale|--paper-scale] [--overwrite] [--timing]

Configs are YAML with a fixed schema (unknown keys are rejected); the two
presets provide complete configurations that a config file may partially
override. Every command is reproducible: identical config and seeds give
byte-identical rasters and CSVs (pass --timing to record wall times in
the training CSV, which breaks byte-identity on purpose).

Exit codes: 0 success, 2 configuration error, 3 numerical failure.
"""

import argparse
import copy
import json
import sys
from pathlib import Path

import numpy as np
import yaml

from .estimators import (
    ADMMReconstructor,
    FBPReconstructor,
    INRReconstructor,
    TVReconstructor,
)
from .geometry import GridSpec, make_fan_geometry
from .inr import config_from_dict
from .io_formats import (
    export_png,
    read_raster,
    write_condition_csv,
    write_raster,
    write_residual_csv,
    write_train_log_csv,
)
from .optim import NonFiniteError
from .phantom import (
    NoiseConfig,
    add_poisson_noise,
    default_phantom_config,
    downsample_image,
    generate_phantom,
    simulate_sinogram,
)
from .recon import TrainLog, TrainRecord, condition_ratio_experiment, mse
from .validation import as_image


class ConfigError(Exception):
    pass


METHODS = ("fbp", "tv", "inr-ls", "inr-fls", "inr-admm")

DESK_PRESET = {
    "seed": 0,
    "out_dir": "runs/desk",
    "grid": {"n_side": 128, "fov": 100.0},
    "geometry": {"n_views": 64, "n_det": 256},
    "phantom": {"hi_factor": 4, "texture_amplitude": 0.15,
                "deformation_amplitude": 0.02},
    "noise": {"total_photons": 4.0e10},
    "method": "inr-fls",
    "inr": {"arch": "relu_fourier", "depth": 4, "width": 64, "k_max": 15,
            "omega0": 75.0, "log2_table_size": 12, "levels": 8,
            "features_per_entry": 2, "n_min": 16, "n_max": 64,
            "mlp_depth": 4, "mlp_width": 64},
    "optimizer": {"iters": 300, "drop_at": 150},
    "admm": {"outer": 6, "adam_iters": 50, "cgls_iters": 50},
    "tv": {"iters": 200},
    "cond": {"n_seeds": 20, "seed0": 0, "n_side": 32, "n_views": 24,
             "n_det": 64, "max_dense_elements": 5_000_000},
    "png_window": [0.0, 0.03],
}

PAPER_PRESET = {
    "seed": 0,
    "out_dir": "runs/paper",
    "grid": {"n_side": 512, "fov": 100.0},
    "geometry": {"n_views": 128, "n_det": 1024},
    "phantom": {"hi_factor": 4, "texture_amplitude": 0.15,
                "deformation_amplitude": 0.02},
    "noise": {"total_photons": 32.0e10},
    "method": "inr-fls",
    "inr": {"arch": "relu_fourier", "depth": 6, "width": 256, "k_max": 15,
            "omega0": 75.0, "log2_table_size": 23, "levels": 16,
            "features_per_entry": 2, "n_min": 16, "n_max": 256,
            "mlp_depth": 6, "mlp_width": 128},
    "optimizer": {"iters": 1000, "drop_at": 500},
    "admm": {"outer": 20, "adam_iters": 50, "cgls_iters": 50},
    "tv": {"iters": 500},
    "cond": {"n_seeds": 100, "n_side": 512, "n_views": 128, "n_det": 1024,
             "max_dense_elements": 200_000_000},
    "png_window": [0.0, 0.03],
}

_NUMBER = (int, float)

# section -> {key: required types}; None means any scalar list handled ad hoc.
SCHEMA = {
    "seed": int,
    "out_dir": str,
    "method": str,
    "png_window": list,
    "grid": {"n_side": int, "fov": _NUMBER},
    "geometry": {"n_views": int, "n_det": int, "source_to_iso": _NUMBER,
                 "source_to_det": _NUMBER, "det_spacing": _NUMBER},
    "phantom": {"seed": int, "hi_factor": int, "texture_amplitude": _NUMBER,
                "deformation_amplitude": _NUMBER, "breast_radius": _NUMBER,
                "skin_thickness": _NUMBER, "skin_value": _NUMBER,
                "adipose_value": _NUMBER},
    "noise": {"total_photons": _NUMBER, "seed": int},
    "inr": {"arch": str, "seed": int, "depth": int, "width": int, "k_max": int,
            "omega0": _NUMBER, "log2_table_size": int, "levels": int,
            "features_per_entry": int, "n_min": int, "n_max": int,
            "mlp_depth": int, "mlp_width": int},
    "optimizer": {"iters": int, "tau0": _NUMBER, "drop_at": int},
    "admm": {"mu": _NUMBER, "outer": int, "adam_iters": int, "cgls_iters": int,
             "adam_lr": _NUMBER},
    "tv": {"lam": _NUMBER, "lambdas": list, "iters": int},
    "cond": {"n_seeds": int, "seed0": int, "n_side": int, "n_views": int,
             "n_det": int, "max_dense_elements": int},
    "inputs": {"sinogram": str, "ground_truth": str},
}


def _validate(config: dict) -> None:
    for key, value in config.items():
        if key not in SCHEMA:
            raise ConfigError(f"unknown config key: {key!r}")
        spec = SCHEMA[key]
        if isinstance(spec, dict):
            if not isinstance(value, dict):
                raise ConfigError(f"section {key!r} must be a mapping")
            for sub, sub_value in value.items():
                if sub not in spec:
                    raise ConfigError(f"unknown config key: {key}.{sub}")
                if not isinstance(sub_value, spec[sub]) or isinstance(sub_value, bool):
                    raise ConfigError(
                        f"config key {key}.{sub} has wrong type "
                        f"({type(sub_value).__name__})"
                    )
        elif not isinstance(value, spec) or isinstance(value, bool):
            raise ConfigError(f"config key {key!r} has wrong type")
    method = config.get("method")
    if method is not None and method not in METHODS:
        raise ConfigError(f"unknown method {method!r}; expected one of {METHODS}")
    window = config.get("png_window")
    if window is not None:
        if len(window) != 2 or not all(isinstance(w, _NUMBER) for w in window):
            raise ConfigError("png_window must be [lo, hi]")


def _deep_merge(base: dict, override: dict) -> dict:
    merged = copy.deepcopy(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = _deep_merge(merged[key], value)
        else:
            merged[key] = copy.deepcopy(value)
    return merged


def resolve_config(args) -> dict:
    if args.desk_scale and args.paper_scale:
        raise ConfigError("choose at most one of --desk-scale / --paper-scale")
    config: dict = {}
    if args.desk_scale:
        config = copy.deepcopy(DESK_PRESET)
    elif args.paper_scale:
        config = copy.deepcopy(PAPER_PRESET)
    if args.config is not None:
        path = Path(args.config)
        if not path.exists():
            raise ConfigError(f"config file not found: {path}")
        try:
            loaded = yaml.safe_load(path.read_text())
        except yaml.YAMLError as exc:
            raise ConfigError(f"cannot parse {path}: {exc}") from exc
        if loaded is None:
            loaded = {}
        if not isinstance(loaded, dict):
            raise ConfigError("config file must contain a mapping")
        config = _deep_merge(config, loaded)
    if not config:
        raise ConfigError("provide --config and/or a preset flag")
    if args.out is not None:
        config["out_dir"] = args.out
    if args.seed is not None:
        config["seed"] = args.seed
    _validate(config)
    return config


# Seed derivation when sections do not pin their own seed.
def _derived_seeds(config: dict) -> dict:
    master = int(config.get("seed", 0))
    return {
        "phantom": config.get("phantom", {}).get("seed", master + 1),
        "noise": config.get("noise", {}).get("seed", master + 2),
        "inr": config.get("inr", {}).get("seed", master),
    }


def _build_grid(config) -> GridSpec:
    grid = config.get("grid")
    if grid is None or "n_side" not in grid or "fov" not in grid:
        raise ConfigError("config must define grid.n_side and grid.fov")
    return GridSpec(grid["n_side"], float(grid["fov"]))


def _build_geometry(config, grid: GridSpec):
    geo = config.get("geometry")
    if geo is None or "n_views" not in geo or "n_det" not in geo:
        raise ConfigError("config must define geometry.n_views and geometry.n_det")
    return make_fan_geometry(
        geo["n_views"], geo["n_det"], grid,
        source_to_iso=geo.get("source_to_iso"),
        source_to_det=geo.get("source_to_det"),
        det_spacing=geo.get("det_spacing"),
    )


def _arch_options(config) -> tuple:
    inr = dict(config.get("inr", {}))
    arch = inr.pop("arch", "relu_fourier")
    inr.pop("seed", None)
    if arch == "relu_fourier":
        keys = ("depth", "width", "k_max")
    elif arch == "siren":
        keys = ("depth", "width", "omega0")
    elif arch == "hash":
        keys = ("log2_table_size", "levels", "features_per_entry",
                "n_min", "n_max", "mlp_depth", "mlp_width")
    else:
        raise ConfigError(f"unknown architecture {arch!r}")
    return arch, {k: inr[k] for k in keys if k in inr}


def _check_manifest(out_dir: Path, name: str, payload: dict, overwrite: bool):
    path = out_dir / name
    blob = json.dumps(payload, sort_keys=True, indent=2) + "\n"
    if path.exists() and path.read_text() != blob and not overwrite:
        raise ConfigError(
            f"{path} exists with a different configuration; "
            "pass --overwrite to replace it"
        )
    path.write_text(blob)


def _ensure_out_dir(config) -> Path:
    out = config.get("out_dir")
    if not out:
        raise ConfigError("config must define out_dir (or pass --out)")
    path = Path(out)
    try:
        path.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ConfigError(f"cannot create output directory {path}: {exc}") from exc
    return path


def cmd_simulate(config: dict, overwrite: bool) -> int:
    out = _ensure_out_dir(config)
    seeds = _derived_seeds(config)
    _check_manifest(out, "manifest_simulate.json",
                    {"command": "simulate", "config": config, "seeds": seeds},
                    overwrite)
    grid = _build_grid(config)
    geom = _build_geometry(config, grid)
    ph_cfg = dict(config.get("phantom", {}))
    ph_cfg.pop("seed", None)
    factor = ph_cfg.pop("hi_factor", 4)
    if factor < 2:
        raise ConfigError("phantom.hi_factor must be >= 2")
    phantom_cfg = default_phantom_config(
        seed=seeds["phantom"], n_hi=grid.n_side * factor, fov=grid.fov, **ph_cfg
    )
    noise_cfg = NoiseConfig(
        total_photons=float(config.get("noise", {}).get("total_photons", 32e10)),
        seed=seeds["noise"],
    )
    phantom_hi = generate_phantom(phantom_cfg)
    ground_truth = downsample_image(phantom_hi, factor)
    clean = simulate_sinogram(phantom_hi, geom)
    noisy = add_poisson_noise(clean, noise_cfg)
    write_raster(out / "phantom_hi.raster", phantom_hi)
    write_raster(out / "ground_truth.raster", ground_truth)
    write_raster(out / "sinogram_clean.raster", clean)
    write_raster(out / "sinogram_noisy.raster", noisy)
    print(f"simulate: wrote 4 rasters to {out}")
    return 0


def _load_reconstruct_inputs(config, out: Path, geom):
    inputs = config.get("inputs", {})
    sino_path = Path(inputs.get("sinogram", out / "sinogram_noisy.raster"))
    if not sino_path.exists():
        raise ConfigError(f"sinogram file not found: {sino_path}")
    from .io_formats import RasterFormatError

    try:
        sino = read_raster(sino_path, geom=geom)
    except RasterFormatError as exc:
        raise ConfigError(str(exc)) from exc
    truth = None
    truth_path = inputs.get("ground_truth", out / "ground_truth.raster")
    truth_path = Path(truth_path)
    if truth_path.exists():
        try:
            truth = read_raster(truth_path, grid=geom.grid)
        except RasterFormatError as exc:
            raise ConfigError(str(exc)) from exc
    return sino, truth


def cmd_reconstruct(config: dict, overwrite: bool, timing: bool) -> int:
    out = _ensure_out_dir(config)
    method = config.get("method")
    if method not in METHODS:
        raise ConfigError(f"config must set method to one of {METHODS}")
    _check_manifest(out, f"manifest_reconstruct_{method}.json",
                    {"command": "reconstruct", "config": config,
                     "seeds": _derived_seeds(config)}, overwrite)
    grid = _build_grid(config)
    geom = _build_geometry(config, grid)
    sino, truth = _load_reconstruct_inputs(config, out, geom)
    seeds = _derived_seeds(config)
    opt = config.get("optimizer", {})
    admm = config.get("admm", {})
    tv = config.get("tv", {})
    arch, options = _arch_options(config)

    state = None
    if method == "fbp":
        est = FBPReconstructor(geom).fit(sino)
        log = _single_record_log(est.image_, truth, geom)
    elif method == "tv":
        lambdas = tv.get("lambdas")
        est = TVReconstructor(geom, lam=tv.get("lam"),
                              lambdas=None if lambdas is None else tuple(lambdas),
                              iters=tv.get("iters", 200))
        try:
            est.fit(sino, truth)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        log = _single_record_log(est.image_, truth, geom,
                                 iteration=tv.get("iters", 200))
    elif method in ("inr-ls", "inr-fls"):
        est = INRReconstructor(
            geom, arch=arch, loss=method.split("-")[1],
            iters=opt.get("iters", 1000), tau0=opt.get("tau0"),
            drop_at=opt.get("drop_at"), seed=seeds["inr"], arch_options=options,
        ).fit(sino, truth)
        log = est.log_
    else:
        est = ADMMReconstructor(
            geom, arch=arch, mu=admm.get("mu"), outer=admm.get("outer", 20),
            adam_iters=admm.get("adam_iters", 50),
            cgls_iters=admm.get("cgls_iters", 50), adam_lr=admm.get("adam_lr"),
            seed=seeds["inr"], arch_options=options,
        ).fit(sino, truth)
        log = est.log_
        state = est.state_

    write_raster(out / f"recon_{method}.raster", est.image_)
    lo, hi = config.get("png_window", [0.0, 0.03])
    export_png(out / f"recon_{method}.png", est.image_, (float(lo), float(hi)))
    write_train_log_csv(out / f"log_{method}.csv", log, include_timing=timing)
    if state is not None:
        write_residual_csv(out / f"residuals_{method}.csv", state)
    if truth is not None:
        final = mse(as_image(est.image_, grid), truth)
        print(f"reconstruct[{method}]: final MSE {final:.6e}")
    else:
        print(f"reconstruct[{method}]: done (no ground truth for MSE)")
    return 0


def _single_record_log(image, truth, geom, iteration: int = 1) -> TrainLog:
    log = TrainLog()
    err = float("nan")
    if truth is not None:
        err = mse(as_image(image, geom.grid), truth)
    log.append(TrainRecord(iteration=iteration, loss=float("nan"),
                           mse=err, seconds=0.0))
    return log


def cmd_cond(config: dict, overwrite: bool) -> int:
    out = _ensure_out_dir(config)
    cond = config.get("cond", {})
    n_seeds = cond.get("n_seeds", 20)
    if n_seeds < 1:
        raise ConfigError("cond.n_seeds must be >= 1")
    grid_side = cond.get("n_side", config.get("grid", {}).get("n_side"))
    if grid_side is None:
        raise ConfigError("cond needs n_side (cond.n_side or grid.n_side)")
    fov = float(config.get("grid", {}).get("fov", 100.0))
    grid = GridSpec(grid_side, fov)
    n_views = cond.get("n_views", config.get("geometry", {}).get("n_views"))
    n_det = cond.get("n_det", config.get("geometry", {}).get("n_det"))
    if n_views is None or n_det is None:
        raise ConfigError("cond needs n_views/n_det (cond.* or geometry.*)")
    geom = make_fan_geometry(n_views, n_det, grid)
    arch, options = _arch_options(config)
    inr_config = config_from_dict(arch, options)
    width = options.get("width", options.get("mlp_width", 256))
    cap = cond.get("max_dense_elements", 5_000_000)
    dense = grid.n_pixels * width
    if dense > cap:
        raise ConfigError(
            f"conditioning scale n*W = {dense} exceeds the cap "
            f"max_dense_elements = {cap}; no output written"
        )
    _check_manifest(out, "manifest_cond.json",
                    {"command": "cond", "config": config}, overwrite)
    report = condition_ratio_experiment(arch, inr_config, geom, n_seeds,
                                        seed0=cond.get("seed0", 0))
    write_condition_csv(out / "condition_report.csv", report)
    print(
        f"cond[{arch}]: mean ratio {report.mean_ratio:.4e} "
        f"± {report.std_ratio:.4e} over {n_seeds - report.n_excluded} seeds "
        f"({report.n_excluded} rank-deficient excluded); "
        f"Gram-convention ratio {report.mean_ratio_gram:.4e} "
        f"± {report.std_ratio_gram:.4e}"
    )
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="ctinr",
        description="Sparse-view fan-beam CT reconstruction with coordinate networks.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("simulate", "reconstruct", "cond"):
        p = sub.add_parser(name)
        p.add_argument("--config", help="YAML configuration file")
        p.add_argument("--out", help="output directory (overrides out_dir)")
        p.add_argument("--seed", type=int, help="master seed override")
        p.add_argument("--desk-scale", action="store_true",
                       help="start from the reduced desk-scale preset")
        p.add_argument("--paper-scale", action="store_true",
                       help="start from the full-scale preset")
        p.add_argument("--overwrite", action="store_true",
                       help="allow replacing a differing manifest")
        p.add_argument("--timing", action="store_true",
                       help="record wall times in the training CSV")
    args = parser.parse_args(argv)
    try:
        config = resolve_config(args)
        if args.command == "simulate":
            return cmd_simulate(config, args.overwrite)
        if args.command == "reconstruct":
            return cmd_reconstruct(config, args.overwrite, args.timing)
        return cmd_cond(config, args.overwrite)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except NonFiniteError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
