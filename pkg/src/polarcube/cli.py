"""Command-line frontend for the pipeline.

Every subcommand resolves a full configuration (built-in defaults, then
an optional JSON config file, then command-line flags, flags winning),
prints it as one JSON line before doing any work, and ends with a JSON
summary line.  Exit codes: 0 success, 2 configuration problems, 3 I/O
problems, 4 numerical failures.

Heavy imports happen after argument parsing so that ``--threads`` (or
the POLARCUBE_THREADS environment variable) can pin the BLAS thread
count before numpy is loaded.
"""

from __future__ import annotations

import argparse
import copy
import json
import os
import sys

EXIT_OK, EXIT_CONFIG, EXIT_IO, EXIT_NUMERICAL = 0, 2, 3, 4

DEFAULTS = {
    "seed": None,
    "threads": None,
    "camera": {
        "kind": "hyperspectral",
        "height": 64,
        "width": 64,
        "channels": 21,
        "qwp_angles_deg": [30.0, -45.0, 60.0, -90.0],
        "lp_angle_deg": 0.0,
        "exposure": 1.0,
    },
    "noise": {
        "sigma": 0.0,
        "shot_gain": 0.0,
        "saturation": 1.0,
        "black": 0.0,
    },
    "scene": {"kind": "smooth", "rho_max": 0.8},
    "solver": {"dop_tol": 1e-3},
    "pca": {"patch_size": 10, "bases": 40},
    "inr": {
        "layers": 4,
        "width": 64,
        "steps": 2000,
        "lr": 1e-3,
        "batch": None,
        "k_spatial": 10,
        "k_channel": 1,
    },
    "stats": {"bins": 201},
}

STAT_FEATURES = ("s0", "s1", "s2", "s3", "s1n", "s2n", "s3n", "dolp", "docp",
                 "aolp", "cop", "rho")


class _ConfigError(Exception):
    pass


def _deep_update(base: dict, override: dict, path: str = ""):
    for key, value in override.items():
        here = f"{path}.{key}" if path else key
        if key not in base:
            raise _ConfigError(f"unknown config key {here!r}")
        if isinstance(base[key], dict):
            if not isinstance(value, dict):
                raise _ConfigError(f"config key {here!r} must be a table")
            _deep_update(base[key], value, here)
        else:
            base[key] = value


def _resolve_config(args) -> dict:
    cfg = copy.deepcopy(DEFAULTS)
    if getattr(args, "config", None):
        try:
            with open(args.config) as fh:
                loaded = json.load(fh)
        except OSError as exc:
            raise _ConfigError(f"cannot read config file: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise _ConfigError(f"config file is not valid JSON: {exc}") from exc
        if not isinstance(loaded, dict):
            raise _ConfigError("config file must hold a JSON object")
        _deep_update(cfg, loaded)
    if getattr(args, "seed", None) is not None:
        cfg["seed"] = args.seed
    if getattr(args, "threads", None) is not None:
        cfg["threads"] = args.threads
    elif cfg["threads"] is None and os.environ.get("POLARCUBE_THREADS"):
        try:
            cfg["threads"] = int(os.environ["POLARCUBE_THREADS"])
        except ValueError as exc:
            raise _ConfigError("POLARCUBE_THREADS must be an integer") from exc
    for flag, target in (
        ("camera", ("camera", "kind")),
        ("height", ("camera", "height")),
        ("width", ("camera", "width")),
        ("channels", ("camera", "channels")),
        ("noise", ("noise", "sigma")),
        ("patch", ("pca", "patch_size")),
        ("bases", ("pca", "bases")),
        ("layers", ("inr", "layers")),
        ("net_width", ("inr", "width")),
        ("steps", ("inr", "steps")),
        ("lr", ("inr", "lr")),
        ("batch", ("inr", "batch")),
        ("bins", ("stats", "bins")),
    ):
        value = getattr(args, flag, None)
        if value is not None:
            cfg[target[0]][target[1]] = value
    return cfg


def _apply_threads(threads):
    if threads is None:
        return
    for var in ("OPENBLAS_NUM_THREADS", "OMP_NUM_THREADS", "MKL_NUM_THREADS"):
        os.environ[var] = str(threads)


def _require_seed(cfg, why):
    if cfg["seed"] is None:
        raise _ConfigError(f"--seed is required for {why}")
    return int(cfg["seed"])


def _api():
    import numpy as np  # noqa: F401  (imported after thread pinning)

    import polarcube

    return polarcube


def _require_out(args):
    if not getattr(args, "out", None):
        raise _ConfigError("--out is required for this command")
    return args.out


def _load_cube(pc, path):
    obj = pc.read_spsi(path)
    if not isinstance(obj, pc.StokesImage):
        raise _ConfigError(f"{path} does not hold a Stokes cube")
    return obj


def _make_scene(pc, cfg, seed):
    import numpy as np

    cam = cfg["camera"]
    channels = 3 if cam["kind"] == "trichromatic" else int(cam["channels"])
    rng = np.random.default_rng(seed)
    kind = cfg["scene"]["kind"]
    if kind == "smooth":
        return pc.smooth_scene(cam["height"], cam["width"], channels, rng,
                               rho_max=cfg["scene"]["rho_max"])
    if kind == "random":
        return pc.random_scene(cam["height"], cam["width"], channels, rng,
                               rho_max=cfg["scene"]["rho_max"])
    if kind == "uniform":
        return pc.uniform_scene(cam["height"], cam["width"], channels)
    raise _ConfigError(f"unknown synthetic scene kind {kind!r}")


def _noise_model(pc, cfg, seed):
    n = cfg["noise"]
    if n["sigma"] == 0.0 and n["shot_gain"] == 0.0:
        return None
    return pc.NoiseModel(
        gaussian_sigma=n["sigma"],
        shot_gain=n["shot_gain"],
        saturation_level=n["saturation"],
        black_level=n["black"],
        rng_seed=seed,
    )


def _simulate(pc, cfg, scene, seed):
    import numpy as np

    cam = cfg["camera"]
    noise = _noise_model(pc, cfg, seed)
    if cam["kind"] == "hyperspectral":
        return pc.simulate_hyperspectral(
            scene,
            np.deg2rad(cam["qwp_angles_deg"]),
            lp_angle=float(np.deg2rad(cam["lp_angle_deg"])),
            noise=noise,
            exposure=cam["exposure"],
        )
    if cam["kind"] == "trichromatic":
        return pc.simulate_trichromatic(scene, noise=noise, exposure=cam["exposure"])
    raise _ConfigError(f"unknown camera kind {cam['kind']!r}")


# ---------------------------------------------------------------------------
# subcommands


def cmd_simulate(cfg, args):
    pc = _api()
    out = _require_out(args)
    if args.scene:
        scene = _load_cube(pc, args.scene)
        seed = cfg["seed"]
        if cfg["noise"]["sigma"] > 0 or cfg["noise"]["shot_gain"] > 0:
            seed = _require_seed(cfg, "noisy simulation")
        seed = 0 if seed is None else int(seed)
    else:
        seed = _require_seed(cfg, "synthetic scene generation")
        scene = _make_scene(pc, cfg, seed)
    raw = _simulate(pc, cfg, scene, seed)
    pc.write_spsi(out, raw)
    return {"frames": int(raw.frames.shape[0]), "height": raw.height,
            "width": raw.width, "out": out}


def cmd_reconstruct(cfg, args):
    pc = _api()
    out = _require_out(args)
    raw = pc.read_spsi(args.input)
    if not isinstance(raw, pc.RawCapture):
        raise _ConfigError(f"{args.input} does not hold a raw capture")
    cube = pc.reconstruct_image(raw, dop_tol=cfg["solver"]["dop_tol"])
    pc.write_spsi(out, cube)
    return {"out": out, "valid_fraction": cube.valid_fraction(),
            "channels": cube.channels}


def cmd_features(cfg, args):
    import numpy as np

    pc = _api()
    out = _require_out(args)
    cube = _load_cube(pc, args.input)
    summary = {}
    for feature in ("rho", "dolp", "docp", "aolp", "cop"):
        values, valid = pc.feature_plane(cube, feature)
        hist = pc.Histogram.from_samples(values[valid], bins=cfg["stats"]["bins"],
                                         label=feature)
        path = f"{out}{feature}.csv"
        pc.export_csv(hist, path)
        summary[feature] = {"mean": float(np.mean(values[valid])), "csv": path}
    return summary


def cmd_decompose(cfg, args):
    import numpy as np

    pc = _api()
    out = _require_out(args)
    cube = _load_cube(pc, args.input)
    valid = cube.mask & pc.is_valid(cube.data, cfg["solver"]["dop_tol"])
    pol = np.linalg.norm(cube.data[..., 1:], axis=-1)
    unpol = cube.data[..., 0] - pol
    pc.write_spsi(f"{out}polarized.spsi", pc.ScalarCube(pol, cube.wavelengths, valid))
    pc.write_spsi(f"{out}unpolarized.spsi", pc.ScalarCube(unpol, cube.wavelengths, valid))
    hist_p, hist_u = pc.pol_unpol_histograms([cube], bins=cfg["stats"]["bins"])
    pc.export_csv(hist_p, f"{out}polarized_hist.csv")
    pc.export_csv(hist_u, f"{out}unpolarized_hist.csv")
    return {
        "polarized_mean": float(np.mean(pol[valid])),
        "unpolarized_mean": float(np.mean(unpol[valid])),
        "outputs": [f"{out}polarized.spsi", f"{out}unpolarized.spsi"],
    }


def cmd_validate(cfg, args):
    pc = _api()
    cube = _load_cube(pc, args.input)
    ok = cube.mask & pc.is_valid(cube.data, cfg["solver"]["dop_tol"])
    return {"valid_fraction": float(ok.sum()) / ok.size,
            "masked_fraction": 1.0 - cube.valid_fraction()}


def cmd_denoise(cfg, args):
    import numpy as np

    pc = _api()
    out = _require_out(args)
    if args.burst:
        raws = [pc.read_spsi(p) for p in [args.input] + args.burst]
        if not all(isinstance(r, pc.RawCapture) for r in raws):
            raise _ConfigError("burst inputs must be raw captures")
        frames = pc.burst_average([r.frames for r in raws])
        first = raws[0]
        result = pc.RawCapture(frames, first.config, tags=first.tags, layout=first.layout,
                               wavelengths=first.wavelengths,
                               saturation_level=first.saturation_level,
                               black_level=first.black_level)
        pc.write_spsi(out, result)
        return {"out": out, "averaged": len(raws)}
    raw = pc.read_spsi(args.input)
    if not isinstance(raw, pc.RawCapture):
        raise _ConfigError(f"{args.input} does not hold a raw capture")
    k = args.median
    frames = np.stack([pc.median_filter(f, k) for f in raw.frames])
    result = pc.RawCapture(frames, raw.config, tags=raw.tags, layout=raw.layout,
                           wavelengths=raw.wavelengths,
                           saturation_level=raw.saturation_level,
                           black_level=raw.black_level)
    pc.write_spsi(out, result)
    return {"out": out, "median_window": k}


def cmd_pca_fit(cfg, args):
    pc = _api()
    out = _require_out(args)
    cube = _load_cube(pc, args.input)
    codebook = pc.pca_fit_image(cube, cfg["pca"]["patch_size"], cfg["pca"]["bases"])
    pc.write_spsi(out, codebook)
    spectrum = pc.variance_spectrum(codebook)
    return {"out": out, "bases": codebook.n_bases, "dimension": codebook.dimension,
            "top_variance_fraction": float(spectrum[0])}


def cmd_pca_code(cfg, args):
    import numpy as np

    pc = _api()
    out = _require_out(args)
    cube = _load_cube(pc, args.input)
    artifact = pc.read_spsi(args.codebook)
    codebook = artifact.codebook if isinstance(artifact, pc.PcaEncoding) else artifact
    if not isinstance(codebook, pc.PcaCodebook):
        raise _ConfigError(f"{args.codebook} does not hold a codec basis")
    if args.bases:
        codebook = pc.truncate_codebook(codebook, args.bases)
    enc = pc.pca_encode(cube, codebook)
    decoded = pc.pca_decode(enc)
    covered = decoded.mask
    err = decoded.data[covered] - cube.data[covered]
    mse = float(np.mean(err * err))
    pc.write_spsi(out, decoded)
    return {
        "out": out,
        "mse": mse,
        "bpp_coefficients": pc.bpp(enc.stored_bits(False), cube.width, cube.height),
        "bpp_with_codebook": pc.bpp(enc.stored_bits(True), cube.width, cube.height),
    }


def cmd_inr_fit(cfg, args):
    pc = _api()
    out = _require_out(args)
    seed = _require_seed(cfg, "network initialization")
    cube = _load_cube(pc, args.input)
    inr = cfg["inr"]
    model = pc.inr_init(inr["layers"], inr["width"], seed,
                        k_spatial=inr["k_spatial"], k_channel=inr["k_channel"])
    model, report = pc.inr_train(model, cube, inr["steps"], lr=inr["lr"],
                                 batch_size=inr["batch"], seed=seed)
    pc.write_spsi(out, model)
    if args.loss_csv:
        curve = pc.Curve(columns=["step", "mse", "learning_rate"],
                         rows=[(s, m, lr) for (s, m), (_, lr)
                               in zip(report.loss_curve, report.lr_curve)])
        pc.export_csv(curve, args.loss_csv)
    return {"out": out, "final_mse": report.final_mse, "final_psnr": report.final_psnr,
            "steps": report.steps, "parameters": pc.parameter_count(model)}


def cmd_inr_code(cfg, args):
    pc = _api()
    out = _require_out(args)
    model = pc.read_spsi(args.input)
    if not isinstance(model, pc.InrModel):
        raise _ConfigError(f"{args.input} does not hold a network artifact")
    decoded = pc.inr_decode(model)
    summary = {"out": out, "height": decoded.height, "width": decoded.width,
               "channels": decoded.channels}
    if args.reference:
        cube = _load_cube(pc, args.reference)
        decoded.wavelengths = cube.wavelengths
        report = pc.quality(cube, decoded)
        summary["psnr"] = report.psnr
        summary["mse"] = report.mse
    pc.write_spsi(out, decoded)
    return summary


def cmd_stats(cfg, args):
    pc = _api()
    out = _require_out(args)
    cubes = [_load_cube(pc, p) for p in [args.input] + (args.extra or [])]
    bins = cfg["stats"]["bins"]
    feature = args.feature
    if feature == "pol-unpol":
        hist_p, hist_u = pc.pol_unpol_histograms(cubes, bins=bins)
        pc.export_csv(hist_p, f"{out}polarized.csv")
        pc.export_csv(hist_u, f"{out}unpolarized.csv")
        return {"outputs": [f"{out}polarized.csv", f"{out}unpolarized.csv"]}
    if feature in ("poincare-s1s2", "poincare-s1s3"):
        plane = "s1-s2" if feature.endswith("s1s2") else "s1-s3"
        grid = pc.poincare_density(cubes, plane=plane, grid=bins)
        pc.export_csv(grid, out)
        return {"out": out, "occupied_cells": int((grid.counts > 0).sum())}
    if feature.endswith("-gradient"):
        base = feature[: -len("-gradient")]
        if base not in STAT_FEATURES:
            raise _ConfigError(f"unknown gradient feature {base!r}")
        hist = pc.feature_gradient_histograms(cubes, base, bins=bins)
    elif feature in ("s0", "s1", "s2", "s3", "s1n", "s2n", "s3n"):
        hist = pc.stokes_histograms(cubes, feature, bins=bins)
    elif feature == "docp":
        hist = pc.docp_distribution(cubes, bins=bins)
    elif feature in STAT_FEATURES:
        import numpy as np

        samples = []
        for cube in cubes:
            values, valid = pc.feature_plane(cube, feature)
            samples.append(values[valid])
        hist = pc.Histogram.from_samples(np.concatenate(samples), bins=bins, label=feature)
    else:
        raise _ConfigError(f"unknown stats feature {feature!r}")
    pc.export_csv(hist, out)
    return {"out": out, "samples": hist.total,
            "support": [float(hist.edges[0]), float(hist.edges[-1])]}


def cmd_sfp_stats(cfg, args):
    import numpy as np

    pc = _api()
    out = _require_out(args)
    stack = pc.read_spsi(args.input)
    if not isinstance(stack, pc.NormalMapStack):
        raise _ConfigError(f"{args.input} does not hold a normal-map stack")
    report = pc.normal_spectral_stddev(stack, bins=cfg["stats"]["bins"])
    outputs = {}
    for name, hist in report.histograms.items():
        path = f"{out}{name}.csv"
        pc.export_csv(hist, path)
        outputs[name] = path
    return {
        "outputs": outputs,
        "mean_std_x": float(np.mean(report.std_x)),
        "mean_std_y": float(np.mean(report.std_y)),
        "mean_std_z": float(np.mean(report.std_z)),
        "mean_std_azimuth": float(np.mean(report.std_azimuth)),
        "mean_std_elevation": float(np.mean(report.std_elevation)),
    }


def cmd_roundtrip(cfg, args):
    import time

    import numpy as np

    pc = _api()
    seed = _require_seed(cfg, "the round-trip scene")
    scene = _make_scene(pc, cfg, seed)
    start = time.perf_counter()
    raw = _simulate(pc, cfg, scene, seed)
    cube = pc.reconstruct_image(raw, dop_tol=cfg["solver"]["dop_tol"])
    elapsed = time.perf_counter() - start
    report = pc.quality(scene, cube)
    max_rel = float(np.max(np.abs(cube.data - scene.data)) / scene.data[..., 0].max())
    if args.out:
        pc.write_spsi(args.out, cube)
    return {
        "max_rel_error": max_rel,
        "mse": report.mse,
        "psnr": report.psnr,
        "valid_fraction": report.valid_fraction,
        "seconds": elapsed,
    }


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file")
    common.add_argument("--seed", type=int, help="RNG seed (required for stochastic stages)")
    common.add_argument("--threads", type=int,
                        help="BLAS thread count (env POLARCUBE_THREADS as fallback)")
    common.add_argument("--out", help="output path or prefix")

    parser = argparse.ArgumentParser(prog="polarcube",
                                     description="spectro-polarimetric pipeline")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", parents=[common], help="forward-simulate a capture")
    p.add_argument("--camera", choices=["hyperspectral", "trichromatic"])
    p.add_argument("--scene", help="input Stokes cube (synthetic scene if omitted)")
    p.add_argument("--height", type=int)
    p.add_argument("--width", type=int)
    p.add_argument("--channels", type=int)
    p.add_argument("--noise", type=float, help="Gaussian sigma")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("reconstruct", parents=[common], help="invert a raw capture")
    p.add_argument("input")
    p.set_defaults(func=cmd_reconstruct)

    p = sub.add_parser("features", parents=[common], help="polarimetric feature histograms")
    p.add_argument("input")
    p.add_argument("--bins", type=int)
    p.set_defaults(func=cmd_features)

    p = sub.add_parser("decompose", parents=[common],
                       help="polarized/unpolarized intensity split")
    p.add_argument("input")
    p.add_argument("--bins", type=int)
    p.set_defaults(func=cmd_decompose)

    p = sub.add_parser("validate", parents=[common], help="validity census of a cube")
    p.add_argument("input")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("denoise", parents=[common], help="median filter or burst average")
    p.add_argument("input")
    p.add_argument("--median", type=int, default=3, help="odd window size")
    p.add_argument("--burst", nargs="*", help="further raw captures to average with")
    p.set_defaults(func=cmd_denoise)

    p = sub.add_parser("pca-fit", parents=[common], help="fit a patch basis")
    p.add_argument("input")
    p.add_argument("--patch", type=int)
    p.add_argument("--bases", type=int)
    p.set_defaults(func=cmd_pca_fit)

    p = sub.add_parser("pca-code", parents=[common], help="encode + decode through a basis")
    p.add_argument("input")
    p.add_argument("--codebook", required=True)
    p.add_argument("--bases", type=int, help="truncate the basis to this count")
    p.set_defaults(func=cmd_pca_code)

    p = sub.add_parser("inr-fit", parents=[common], help="fit the coordinate network")
    p.add_argument("input")
    p.add_argument("--layers", type=int)
    p.add_argument("--net-width", dest="net_width", type=int)
    p.add_argument("--steps", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--batch", type=int)
    p.add_argument("--loss-csv", dest="loss_csv", help="write the loss curve here")
    p.set_defaults(func=cmd_inr_fit)

    p = sub.add_parser("inr-code", parents=[common], help="decode a fitted network")
    p.add_argument("input")
    p.add_argument("--reference", help="cube to score the decode against")
    p.set_defaults(func=cmd_inr_code)

    p = sub.add_parser("stats", parents=[common], help="dataset statistics to CSV")
    p.add_argument("input")
    p.add_argument("extra", nargs="*", help="additional cubes to pool")
    p.add_argument("--feature", required=True,
                   help="s0..s3, s1n..s3n, dolp, docp, aolp, cop, rho, "
                        "<feature>-gradient, pol-unpol, poincare-s1s2, poincare-s1s3")
    p.add_argument("--bins", type=int)
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("sfp-stats", parents=[common],
                       help="spectral spread of normal maps")
    p.add_argument("input")
    p.add_argument("--bins", type=int)
    p.set_defaults(func=cmd_sfp_stats)

    p = sub.add_parser("roundtrip", parents=[common],
                       help="simulate, reconstruct, and score in one go")
    p.add_argument("--camera", choices=["hyperspectral", "trichromatic"])
    p.add_argument("--height", type=int)
    p.add_argument("--width", type=int)
    p.add_argument("--size", type=int, help="square scene size (sets height and width)")
    p.add_argument("--channels", type=int)
    p.add_argument("--noise", type=float)
    p.set_defaults(func=cmd_roundtrip)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if getattr(args, "size", None):
            args.height = args.width = args.size
        cfg = _resolve_config(args)
        _apply_threads(cfg["threads"])
        print(json.dumps({"config": cfg}, sort_keys=True), flush=True)
        summary = args.func(cfg, args)
        print(json.dumps({"summary": summary}, sort_keys=True))
        return EXIT_OK
    except _ConfigError as exc:
        print(json.dumps({"error": str(exc), "class": "config"}), file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(json.dumps({"error": str(exc), "class": "io"}), file=sys.stderr)
        return EXIT_IO
    except Exception as exc:  # numerical / domain failures
        from polarcube.errors import ContainerError, LabelSchemaError, PolarcubeError

        if isinstance(exc, (ContainerError, LabelSchemaError)):
            print(json.dumps({"error": str(exc), "class": "io"}), file=sys.stderr)
            return EXIT_IO
        if isinstance(exc, (PolarcubeError, ValueError, ArithmeticError)):
            print(json.dumps({"error": str(exc), "class": "numerical"}), file=sys.stderr)
            return EXIT_NUMERICAL
        raise


if __name__ == "__main__":
    sys.exit(main())
