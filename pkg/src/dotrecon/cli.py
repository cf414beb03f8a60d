"""Command-line front end.

Subcommands: synthesize (write measurement CSV), reconstruct (run the
configured inversion, write history.csv, field grids, snapshots and
report figures), verify (built-in oracle suite), phantom (export
ground-truth grids).  Exit codes: 0 success, 1 usage/validation error,
2 solver or check failure.
"""

import argparse
import os
import sys

import numpy as np

from . import config as cfgmod
from . import fem, io, phantoms, reconstruct as rec
from .config import ConfigError
from .fem import SolverError
from .levelset import (LevelSetPair, classify, init_paraboloid,
                       init_shallow_background, levelset_from_mask)
from .mesh import build_uniform_mesh


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on usage errors; the contract here is exit 1
    def error(self, message):
        self.print_usage(sys.stderr)
        raise SystemExit(1)


def _load_config(args):
    if getattr(args, "config", None):
        try:
            with open(args.config) as fh:
                text = fh.read()
        except OSError as exc:
            raise ConfigError(f"cannot read config file {args.config}: {exc}")
    else:
        text = ""
    cfg = cfgmod.parse_config(text)
    overrides = {}
    for key in ("phantom", "mode", "delta", "seed", "eps", "alpha",
                "refine", "out_dir", "data_file"):
        value = getattr(args, key, None)
        if value is not None:
            overrides[key] = value
    if getattr(args, "max_iter", None) is not None:
        overrides["schedule.max_iter"] = args.max_iter
    if overrides:
        cfg = cfgmod.apply_overrides(cfg, overrides)
    return cfg


def _setup_problem(cfg):
    mesh = build_uniform_mesh(cfg.nx, cfg.ny, cfg.rect)
    phantom = phantoms.make_phantom(cfg.phantom, mesh, cfg.levels)
    return mesh, phantom


def _initial_levelset(mesh, phantom, cfg):
    def build(spec, truth_field, level1):
        if spec.type == "paraboloid":
            return init_paraboloid(mesh, spec.center, spec.radius)
        if spec.type == "background":
            return -np.ones(mesh.n_nodes)
        if spec.type == "shallow":
            return init_shallow_background(mesh, cfg.eps, spec.depth)
        return levelset_from_mask(truth_field == level1)

    phi_a = build(cfg.init_a, phantom.a_true, cfg.levels.a1)
    phi_c = build(cfg.init_c, phantom.c_true, cfg.levels.c1)
    return LevelSetPair(phi_a=phi_a, phi_c=phi_c, levels=cfg.levels, eps=cfg.eps)


def _write_fields(mesh, named_fields, out_dir, tag, images):
    for name, field in named_fields.items():
        io.write_field_grid(mesh, field, os.path.join(out_dir, f"{name}_{tag}.csv"))
        if images:
            io.write_pgm(mesh, field, os.path.join(out_dir, f"{name}_{tag}.pgm"))


def cmd_synthesize(args):
    cfg = _load_config(args)
    mesh, phantom = _setup_problem(cfg)
    experiments = phantoms.synthesize_data(phantom, mesh, cfg.refine,
                                           cfg.delta, cfg.seed, cfg.solver)
    out = args.out or os.path.join(cfg.resolved_out_dir(), "measurements.csv")
    os.makedirs(os.path.dirname(out) or ".", exist_ok=True)
    io.write_measurements(mesh, experiments, out)
    print(f"wrote {len(experiments)} experiments to {out} "
          f"(phantom {cfg.phantom}, delta {cfg.delta}, seed {cfg.seed})")
    return 0


def cmd_reconstruct(args):
    cfg = _load_config(args)
    mesh, phantom = _setup_problem(cfg)
    out_dir = cfg.resolved_out_dir()
    os.makedirs(out_dir, exist_ok=True)

    if cfg.data_file:
        experiments = io.read_measurements(mesh, cfg.data_file)
        truth = None
    else:
        experiments = phantoms.synthesize_data(phantom, mesh, cfg.refine,
                                               cfg.delta, cfg.seed, cfg.solver)
        truth = (phantom.a_true, phantom.c_true)

    initial = _initial_levelset(mesh, phantom, cfg)
    alpha_a, alpha_c = cfg.alphas()
    itcfg = rec.IterationConfig(alpha_a=alpha_a, alpha_c=alpha_c,
                                beta_a=cfg.beta_a, beta_c=cfg.beta_c,
                                eta=cfg.eta, settings=cfg.solver, box=cfg.box)

    def snapshot(state):
        if state.iter % cfg.snapshot_every == 0:
            a, c = classify(state.ls)
            _write_fields(mesh, {"a": a, "c": c}, out_dir,
                          f"{state.iter:06d}", args.images)

    if cfg.mode == "three-stage":
        state, history = rec.run_three_stage(mesh, initial, experiments,
                                             cfg.schedule, itcfg, truth,
                                             on_iterate=snapshot)
    else:
        state, history = rec.run_fixed(mesh, initial, experiments, itcfg,
                                       cfg.mode, cfg.schedule.max_iter, truth,
                                       cfg.target_err,
                                       cfg.schedule.stag_window,
                                       cfg.schedule.stag_tol,
                                       on_iterate=snapshot)

    io.write_history(history, os.path.join(out_dir, "history.csv"))
    a, c = classify(state.ls)
    finals = {"a": a, "c": c, "phi_a": state.ls.phi_a, "phi_c": state.ls.phi_c}
    _write_fields(mesh, finals, out_dir, "final", args.images)

    last = history[-1]
    used_a, used_c = state.alphas
    print("alpha_a = {}, alpha_c = {}".format(
        "unused" if used_a is None else f"{used_a:.6g}",
        "unused" if used_c is None else f"{used_c:.6g}"))
    msg = (f"stopped after {state.iter} iterations ({state.stop_reason}); "
           f"misfit {last.misfit:.6e}")
    if last.err_a is not None:
        msg += (f"; rel errors a {last.err_a:.4e} (abs {last.err_a_abs:.4e}), "
                f"c {last.err_c:.4e} (abs {last.err_c_abs:.4e})")
    print(msg)

    if not args.no_figures:
        from . import figures
        figures.render_history(history,
                               os.path.join(out_dir, "error_evolution.png"),
                               title=f"{cfg.phantom} / {cfg.mode}")
        field_maps = {"a (final)": a, "c (final)": c}
        if truth is not None:
            field_maps["a (exact)"] = phantom.a_true
            field_maps["c (exact)"] = phantom.c_true
        figures.render_fields(mesh, field_maps,
                              os.path.join(out_dir, "fields_final.png"))
    return 0


def cmd_verify(args):
    from . import verify
    return 0 if verify.run_all(verbose=True) else 2


def cmd_phantom(args):
    cfg = _load_config(args)
    if args.name:
        cfg = cfgmod.apply_overrides(cfg, {"phantom": args.name})
    mesh, phantom = _setup_problem(cfg)
    out_dir = cfg.resolved_out_dir()
    os.makedirs(out_dir, exist_ok=True)
    _write_fields(mesh, {"a_true": phantom.a_true, "c_true": phantom.c_true},
                  out_dir, cfg.phantom, args.images)
    if not args.no_figures:
        from . import figures
        figures.render_fields(mesh, {"a (exact)": phantom.a_true,
                                     "c (exact)": phantom.c_true},
                              os.path.join(out_dir, f"phantom_{cfg.phantom}.png"))
    print(f"wrote phantom {cfg.phantom} grids to {out_dir}")
    return 0


def _add_common(parser):
    parser.add_argument("--config", help="JSON config file")
    parser.add_argument("--out-dir", dest="out_dir", help="output directory")
    parser.add_argument("--phantom", help="phantom name")
    parser.add_argument("--delta", type=float, help="noise level")
    parser.add_argument("--seed", type=int, help="noise seed")
    parser.add_argument("--eps", type=float, help="Heaviside smoothing width")
    parser.add_argument("--refine", type=int, help="data-generation refinement")
    parser.add_argument("--images", action="store_true",
                        help="also write PGM images next to field CSVs")
    parser.add_argument("--no-figures", action="store_true",
                        help="skip matplotlib report figures")


def build_parser():
    parser = _Parser(prog="dotrecon",
                     description="Level-set reconstruction of piecewise "
                                 "constant diffusion/absorption coefficients")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synthesize", parents=[], help="write measurement CSV")
    _add_common(p)
    p.add_argument("--out", help="measurement CSV path")
    p.set_defaults(fn=cmd_synthesize)

    p = sub.add_parser("reconstruct", help="run the configured inversion")
    _add_common(p)
    p.add_argument("--mode", choices=cfgmod.MODES, help="iteration mode")
    p.add_argument("--alpha", type=float, help="fixed step scaling")
    p.add_argument("--max-iter", dest="max_iter", type=int, help="iteration cap")
    p.add_argument("--data-file", dest="data_file",
                   help="measurement CSV (skips synthetic data generation)")
    p.set_defaults(fn=cmd_reconstruct)

    p = sub.add_parser("verify", help="run the built-in oracle suite")
    p.set_defaults(fn=cmd_verify)

    p = sub.add_parser("phantom", help="export ground-truth grids")
    _add_common(p)
    p.add_argument("--name", help="phantom name (same as --phantom)")
    p.set_defaults(fn=cmd_phantom)
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 1
    try:
        return args.fn(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (SolverError, RuntimeError) as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
