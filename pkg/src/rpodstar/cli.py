"""Command-line front end.

Exit codes: 0 success, 2 configuration error, 3 numerical error,
4 ROM-size selection failure.  Failures print one ``error: <Kind>: <reason>``
line on stderr.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from .config import ExperimentConfig, load_config
from .errors import ConfigError, RpodError
from .serialize import load_rom, save_system, write_yaml

log = logging.getLogger("rpodstar")


def _threads(args):
    n = 1 if args.single_thread else args.threads
    if n is None:
        return None
    from threadpoolctl import threadpool_limits

    return threadpool_limits(limits=n)


def _out_dir(args, cfg: ExperimentConfig | None, default: str) -> Path:
    if args.out:
        return Path(args.out)
    if cfg is not None and cfg.output:
        return Path(cfg.output)
    return Path(default)


def _with_seed(cfg: ExperimentConfig, seed: int | None) -> ExperimentConfig:
    """Override the experiment seed (and every method seed) from the command line."""
    if seed is None:
        return cfg
    raw = dict(cfg.raw, seed=seed)
    for key in ("method", "methods"):
        if key in raw:
            items = raw[key] if key == "methods" else [raw[key]]
            items = [dict(m, seed=seed) for m in items]
            raw[key] = items if key == "methods" else items[0]
    if raw.get("sweep"):
        raw["sweep"] = dict(raw["sweep"], seed=seed)
    base = Path(cfg.source).parent if cfg.source else None
    return ExperimentConfig.from_dict(raw, base=base, source=cfg.source)


def cmd_run(args, *, compare=False) -> int:
    from .runner import run_experiment, run_sweep

    cfg = _with_seed(load_config(args.config), args.seed)
    out = _out_dir(args, cfg, "results")
    if cfg.sweep is not None and cfg.model is None:
        res = run_sweep(cfg, out)
        for eps, merr, sig in res["rows"]:
            print(f"eps={eps:.3g} markov_error={merr:.6g} sigma_next={sig:.6g}")
        print("slopes: " + " ".join(f"{k}={v:.4f}" for k, v in res["slopes"].items()))
        return 0
    if not compare and len(cfg.methods) > 1:
        raise ConfigError("run takes a single method; use 'compare' for several")
    res = run_experiment(cfg, out)
    rep = res["report"]
    for tag, rom in res["roms"].items():
        fre = f" e_fre_max={np.max(rep.e_fre[tag]):.6g}" if tag in rep.e_fre else ""
        print(f"{tag}: order={rom.order} e_output={rep.e_output[tag]:.6g}{fre} "
              f"hankel={rep.hankel_dims[tag][0]}x{rep.hankel_dims[tag][1]}")
    print(f"artifacts written to {out}")
    return 0


def cmd_gen_synthetic(args) -> int:
    from .synthetic import gen_synthetic

    syn = gen_synthetic(args.kind, args.N, args.l, eps=args.eps, seed=args.seed or 0,
                        p=args.p, q=args.q)
    out = Path(args.out or f"synthetic-{args.kind}-N{args.N}-l{args.l}")
    save_system(syn.system, out)
    write_yaml(out / "truth.yaml", syn.manifest)
    print(f"{args.kind} system N={args.N} l={args.l} written to {out}")
    return 0


def cmd_build_model(args) -> int:
    from .runner import build_model

    if args.config:
        cfg = load_config(args.config)
        if cfg.model is None:
            raise ConfigError("config has no model section")
        model = cfg.model
    else:
        model = {"kind": args.kind, "preset": args.preset or ("benchmark" if args.kind == "heat" else "desk")}
    sys_ = build_model(model)
    out = Path(args.out or f"model-{model['kind']}")
    save_system(sys_, out)
    print(f"{sys_!r} written to {out}")
    return 0


def cmd_inspect_rom(args) -> int:
    rom = load_rom(args.path)
    prov = rom.provenance
    print(f"method: {rom.method}")
    print(f"order: {rom.order}  inputs: {rom.p}  outputs: {rom.q}")
    lam = np.diag(rom.A) if prov.get("modal") else np.linalg.eigvals(rom.A)
    lam = lam[np.argsort(-np.abs(lam), kind="stable")]
    print("eigenvalues (|lambda|, re, im):")
    for z in lam:
        print(f"  {abs(z):.10g}  {z.real:.10g}  {z.imag:.10g}")
    sig = prov.get("sigma")
    if sig:
        shown = sig[: args.n_sigma]
        print(f"hankel singular values (first {len(shown)} of {len(sig)}):")
        for i, s in enumerate(shown, 1):
            print(f"  {i:4d}  {s:.10g}")
    for w in prov.get("warnings", []):
        print(f"warning: {w}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", help="output directory")
    common.add_argument("--seed", type=int, help="override the experiment seed")
    common.add_argument("--single-thread", action="store_true",
                        help="limit BLAS to one thread for bit-exact reruns")
    common.add_argument("--threads", type=int, help="BLAS thread count")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="rpodstar", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", parents=[common], help="run one method (or an epsilon sweep)")
    r.add_argument("--config", required=True)
    r.set_defaults(func=cmd_run)

    c = sub.add_parser("compare", parents=[common], help="run several methods on one model")
    c.add_argument("--config", required=True)
    c.set_defaults(func=lambda a: cmd_run(a, compare=True))

    g = sub.add_parser("gen-synthetic", parents=[common], help="write a synthetic system")
    g.add_argument("--kind", choices=("a3-exact", "a4-perturbed"), default="a3-exact")
    g.add_argument("--N", type=int, default=20)
    g.add_argument("--l", type=int, default=3)
    g.add_argument("--eps", type=float, default=0.0)
    g.add_argument("--p", type=int, default=2)
    g.add_argument("--q", type=int, default=2)
    g.set_defaults(func=cmd_gen_synthetic)

    b = sub.add_parser("build-model", parents=[common], help="discretize a benchmark and export it")
    b.add_argument("--config")
    b.add_argument("--kind", choices=("heat", "dispersion"), default="heat")
    b.add_argument("--preset")
    b.set_defaults(func=cmd_build_model)

    i = sub.add_parser("inspect-rom", parents=[common], help="print a saved ROM's spectrum")
    i.add_argument("path")
    i.add_argument("--n-sigma", type=int, default=20)
    i.set_defaults(func=cmd_inspect_rom)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.threads is not None and args.threads < 1:
        print("error: ConfigError: --threads must be >= 1", file=sys.stderr)
        return ConfigError.exit_code
    limiter = None
    try:
        limiter = _threads(args)
        return args.func(args)
    except RpodError as exc:
        reason = " ".join(str(exc).split())
        print(f"error: {type(exc).__name__}: {reason}", file=sys.stderr)
        return exc.exit_code
    finally:
        if limiter is not None:
            limiter.restore_original_limits()


if __name__ == "__main__":
    sys.exit(main())
