"""``stochdt`` command line: transforms, matching, segmentation and experiment presets."""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import __version__
from ._accel import set_threads
from .edt import write_distance_csv, write_distance_raw
from .experiments import DEFAULT_SEED, PRESETS, preset, run_preset, write_results
from .imaging import (ImageFormatError, add_gaussian_noise, read_binary, threshold, write_binary,
                      write_image)
from .matching import analyze_minima, match_template
from .scenes import blob_scene, shapes_scene
from .sdt import BACKENDS, SdtParams, distance_map, load_config
from .watershed import SEED_RULES, segment

SCENES = ("blobs", "shapes")


class CliError(Exception):
    pass


def _params_parent() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    g = p.add_argument_group("transform parameters")
    g.add_argument("--rho", type=float, help="uncertainty factor in [0, 1]")
    g.add_argument("--dmax", type=float, help="saturation distance (default: ceil of the image diagonal)")
    g.add_argument("--n", type=int, help="Monte Carlo realizations (default 400)")
    g.add_argument("--mass", type=float, help="probability mass covered by the k nearest points (default 0.999)")
    g.add_argument("--k", type=int, help="number of nearest points, overrides --mass")
    g.add_argument("--config", type=Path, help="key = value file with rho, dmax, n, mass, k")
    r = p.add_argument_group("run control")
    r.add_argument("--seed", type=int, default=DEFAULT_SEED, help=f"master seed (default {DEFAULT_SEED})")
    r.add_argument("--threads", type=int, help="cap on worker threads; results do not depend on it")
    r.add_argument("--force", action="store_true", help="overwrite existing output files")
    return p


def _io_parent() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--backend", choices=BACKENDS, default="det-sdt", help="distance backend (default det-sdt)")
    p.add_argument("--threshold", type=float, default=0.5,
                   help="grey level at or above which an input pixel is foreground (default 0.5)")
    p.add_argument("-o", "--output", type=Path, required=True, help="output prefix")
    return p


def _sdt_params(args, **fallback) -> SdtParams:
    """Flags override the config file, which overrides ``fallback`` and the defaults."""
    kw = dict(fallback)
    if args.config is not None:
        try:
            kw.update(load_config(args.config).__dict__)
        except OSError as exc:
            raise CliError(f"cannot read config: {exc}") from exc
    for flag, key in (("rho", "rho"), ("dmax", "d_max"), ("n", "n_realizations"),
                      ("mass", "mass"), ("k", "k_override")):
        if getattr(args, flag) is not None:
            kw[key] = getattr(args, flag)
    return SdtParams(**kw)


def _claim(paths, force: bool) -> None:
    if not force:
        for p in paths:
            if Path(p).exists():
                raise CliError(f"{p} exists (use --force to overwrite)")
    for p in paths:
        Path(p).parent.mkdir(parents=True, exist_ok=True)


def _with_suffix(prefix: Path, tail: str) -> Path:
    return prefix.with_name(prefix.name + tail)


def cmd_transform(args) -> int:
    img = read_binary(args.input, args.threshold)
    params = _sdt_params(args)
    if args.complement:
        img = img.complement()
    dmap = distance_map(img, params, args.backend, np.random.default_rng(args.seed))
    out_csv, out_raw = _with_suffix(args.output, ".csv"), _with_suffix(args.output, ".raw")
    _claim([out_csv, out_raw], args.force)
    write_distance_csv(out_csv, dmap)
    write_distance_raw(out_raw, dmap)
    print(f"wrote {out_csv} and {out_raw}")
    return 0


def cmd_match(args) -> int:
    img = read_binary(args.input, args.threshold)
    tmpl = read_binary(args.template, args.threshold)
    params = _sdt_params(args)
    field = match_template(img, tmpl, params, args.backend, np.random.default_rng(args.seed))
    report = analyze_minima(field)
    outs = [_with_suffix(args.output, s) for s in ("_field.csv", "_minima.csv", "_cb.pgm")]
    _claim(outs, args.force)
    field.to_csv(outs[0])
    report.to_csv(outs[1])
    report.write_cb_pgm(outs[2])
    (x, y), value = report.global_min
    print(f"global minimum at offset ({x}, {y}) value {value!r}; "
          f"{report.nom} minima; basin {100 * report.cb_fraction:.2f}% of offsets")
    return 0


def cmd_segment(args) -> int:
    img = read_binary(args.input, args.threshold)
    params = _sdt_params(args)
    res = segment(img, params, args.backend, args.h, np.random.default_rng(args.seed), args.seed_rule)
    outs = [_with_suffix(args.output, s) for s in ("_labels.pgm", "_segments.csv")]
    _claim(outs, args.force)
    res.write_pgm(outs[0])
    res.to_csv(outs[1])
    print(f"{res.segment_count} segments")
    return 0


def cmd_experiment(args) -> int:
    overrides = dict(reps=args.reps, seed=args.seed, noise_p=args.p, sigma=args.sigma,
                     threshold=args.threshold, seed_h=args.h, seed_rule=args.seed_rule,
                     min_area=args.min_area, delta_steps=args.delta_steps)
    if args.backend:
        overrides["backends"] = tuple(dict.fromkeys(args.backend))
    if args.rho_sweep:
        overrides["rho_sweep"] = tuple(args.rho_sweep)
    base = preset(args.preset)
    params = _sdt_params(args, rho=base.rho, d_max=base.d_max, n_realizations=base.n_realizations,
                         mass=base.mass, k_override=base.k_override)
    overrides.update(rho=params.rho, d_max=params.d_max, n_realizations=params.n_realizations,
                     mass=params.mass, k_override=params.k_override)
    cfg = preset(args.preset, **overrides)
    outdir = args.outdir
    names = [outdir / f"{cfg.name}_{b}.csv" for b in cfg.backends] + [outdir / f"{cfg.name}_manifest.txt"]
    _claim(names, args.force)  # fail before a long run, not after
    tables = run_preset(cfg)
    for p in write_results(cfg, tables, outdir, force=True):
        print(f"wrote {p}")
    return 0


def cmd_scene(args) -> int:
    if args.name == "blobs":
        img = blob_scene(args.size or 128)[0]
    else:
        img = shapes_scene(args.size or 96)
    if args.sigma:
        # same stream as repetition ``rep`` of the template and watershed-demo presets
        rng = np.random.default_rng(np.random.SeedSequence(args.seed, spawn_key=(0, args.rep)))
        img = add_gaussian_noise(img, args.sigma, rng)
    _claim([args.output], args.force)
    if args.binarize is not None:
        write_binary(args.output, threshold(img, args.binarize))
    else:
        write_image(args.output, img)
    print(f"wrote {args.output}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    params, io = _params_parent(), _io_parent()
    ap = argparse.ArgumentParser(prog="stochdt", description=__doc__)
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True, metavar="COMMAND")

    t = sub.add_parser("transform", parents=[io, params],
                       help="distance map of a binary image (writes PREFIX.csv and PREFIX.raw)")
    t.add_argument("input", type=Path, help="PGM or PNG image")
    t.add_argument("--complement", action="store_true", help="measure distance to the background instead")
    t.set_defaults(func=cmd_transform)

    m = sub.add_parser("match", parents=[io, params],
                       help="template matching field and minima analysis "
                            "(writes PREFIX_field.csv, PREFIX_minima.csv, PREFIX_cb.pgm)")
    m.add_argument("input", type=Path, help="image to search")
    m.add_argument("template", type=Path, help="template image, no larger than the input")
    m.set_defaults(func=cmd_match)

    s = sub.add_parser("segment", parents=[io, params],
                       help="seeded watershed on the internal distance map "
                            "(writes PREFIX_labels.pgm, PREFIX_segments.csv)")
    s.add_argument("input", type=Path)
    s.add_argument("--h", type=float, default=0.5, help="maxima with a dynamic of at most h are merged (default 0.5)")
    s.add_argument("--seed-rule", choices=SEED_RULES, default="regional",
                   help="regional: plateaus with no higher 4-neighbour; local: pixels no 8-neighbour exceeds")
    s.set_defaults(func=cmd_segment)

    e = sub.add_parser("experiment", parents=[params],
                       help="run a preset and write one CSV per backend plus a manifest")
    e.add_argument("preset", choices=PRESETS)
    e.add_argument("--outdir", type=Path, default=Path("results"), help="output directory (default ./results)")
    e.add_argument("--backend", action="append", choices=BACKENDS,
                   help="restrict to this backend; repeatable (default: preset's backends)")
    e.add_argument("--reps", type=int, help="repetitions (accuracy 100, template 50, disks 200, watershed-demo 1)")
    e.add_argument("--p", type=float, help="accuracy: noise point probability (default 0.001)")
    e.add_argument("--sigma", type=float, help="template, watershed-demo: Gaussian noise SD (default 0.1)")
    e.add_argument("--threshold", type=float,
                   help="template, watershed-demo: binarisation level (defaults 0.5 and 0.35)")
    e.add_argument("--rho-sweep", type=float, nargs="+", metavar="RHO",
                   help="template: rho values to sweep (default 0, 0.025, ..., 0.975, 0.99)")
    e.add_argument("--h", type=float, help="disks, watershed-demo: seed dynamic threshold (defaults 0 and 0.5)")
    e.add_argument("--seed-rule", choices=SEED_RULES, help="disks, watershed-demo: seeding rule")
    e.add_argument("--delta-steps", type=int, help="disks: number of centre distances (default 40)")
    e.add_argument("--min-area", type=int, help="watershed-demo: smallest counted segment (default 5)")
    e.set_defaults(func=cmd_experiment)

    sc = sub.add_parser("scene", help="write one of the bundled synthetic scenes as PGM")
    sc.add_argument("name", choices=SCENES)
    sc.add_argument("-o", "--output", type=Path, required=True)
    sc.add_argument("--size", type=int, help="side length (default blobs 128, shapes 96)")
    sc.add_argument("--sigma", type=float, default=0.0, help="add Gaussian noise with this SD")
    sc.add_argument("--binarize", type=float, metavar="T", help="threshold at T and write a binary image")
    sc.add_argument("--seed", type=int, default=DEFAULT_SEED)
    sc.add_argument("--rep", type=int, default=0, help="noise of this experiment repetition (default 0)")
    sc.add_argument("--force", action="store_true")
    sc.set_defaults(func=cmd_scene, threads=None)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    set_threads(args.threads)
    try:
        return args.func(args)
    except (CliError, ImageFormatError, ValueError, FileExistsError, OSError) as exc:
        print(f"stochdt: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
