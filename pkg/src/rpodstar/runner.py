"""End-to-end experiment execution behind the command line."""

from __future__ import annotations

import dataclasses
import logging
import platform
import warnings
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .config import ExperimentConfig, MethodSpec
from .discretize import (
    DispersionConfig,
    HeatConfig,
    build_advection_diffusion_3d,
    build_heat_1d,
    dispersion_desk_config,
    dispersion_paper_config,
    heat_benchmark_config,
)
from .errors import ConfigError
from .evaluate import (
    EvaluationReport,
    default_omega_grid,
    fmt,
    frequency_response,
    gaussian_excitation,
    markov_error,
    output_relative_error,
    simulate_outputs,
    timing_report,
)
from .linsys import markov_parameters
from .rom import bpod, bpod_output_projection, modalize, rpod_star
from .serialize import load_system, save_rom, write_yaml
from .snapshots import default_spacing, estimate_settling_time
from .synthetic import gen_synthetic

log = logging.getLogger(__name__)

__all__ = ["build_model", "check_method", "run_method", "run_experiment", "run_sweep", "loglog_slope"]


def _override(base, params: dict):
    names = {f.name for f in dataclasses.fields(base)}
    bad = set(params) - names
    if bad:
        raise ConfigError(f"unknown model parameters {sorted(bad)}")
    fixed = {}
    for k, v in params.items():
        if isinstance(v, list):
            v = tuple(tuple(x) if isinstance(x, list) else x for x in v)
        fixed[k] = v
    return dataclasses.replace(base, **fixed)


def build_model(model: dict):
    """Instantiate the system described by a validated ``model`` section."""
    kind = model["kind"]
    params = model.get("params") or {}
    if kind == "heat":
        base = heat_benchmark_config() if model.get("preset") == "benchmark" else HeatConfig()
        return build_heat_1d(_override(base, params))
    if kind == "dispersion":
        preset = model.get("preset", "desk")
        base = {"desk": dispersion_desk_config, "paper": dispersion_paper_config}.get(
            preset, DispersionConfig
        )()
        return build_advection_diffusion_3d(_override(base, params))
    if kind == "matrix-market":
        return load_system(model["path"])
    if kind == "synthetic":
        return gen_synthetic(**(model.get("synthetic") or {})).system
    raise ConfigError(f"unknown model kind {kind!r}")


def check_method(sys, spec: MethodSpec) -> None:
    """Preconditions that need the model dimensions."""
    if spec.name == "output-projection" and spec.s > sys.q:
        raise ConfigError(f"method[{spec.tag}]: s={spec.s} exceeds the number of outputs q={sys.q}")
    if spec.name in ("bpod", "bpod-modal", "output-projection") and isinstance(spec.l, int):
        rows = (spec.s if spec.name == "output-projection" else sys.q) * spec.adjoint_snapshots
        cols = sys.p * spec.primal_snapshots
        if spec.l > min(rows, cols):
            raise ConfigError(f"method[{spec.tag}]: l={spec.l} exceeds Hankel size {rows}x{cols}")


def run_method(sys, spec: MethodSpec, t_ss: int):
    """Build one ROM; returns ``(rom, notes)`` with captured warnings."""
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        if spec.name == "rpod-star":
            dp = spec.dT_primal or default_spacing(t_ss, spec.m)
            da = spec.dT_adjoint or default_spacing(t_ss, spec.n)
            rom, _, _ = rpod_star(
                sys, spec.m, spec.n, dp, da, spec.l, seed=spec.seed,
                t_ss=t_ss, noise_scale=spec.noise_scale,
            )
        elif spec.name == "output-projection":
            rom, _ = bpod_output_projection(
                sys, range(spec.primal_snapshots), range(spec.adjoint_snapshots), spec.s, spec.l
            )
        else:
            rom, bases = bpod(sys, range(spec.primal_snapshots), range(spec.adjoint_snapshots), spec.l)
            if spec.name == "bpod-modal":
                timings = rom.provenance["timings"]
                rom, _ = modalize(rom, bases, sys)
                rom.provenance["timings"] = timings
    notes = sorted({str(w.message) for w in caught})
    for n in notes:
        log.warning("%s: %s", spec.tag, n)
    return rom, notes


def run_experiment(cfg: ExperimentConfig, out_dir) -> dict:
    """Build the model, run every method, evaluate and write artifacts."""
    out = Path(out_dir)
    sys = build_model(cfg.model)
    for spec in cfg.methods:
        check_method(sys, spec)
    ev = cfg.evaluation
    t_ss = ev.get("t_ss")
    if t_ss is None:
        t_ss = estimate_settling_time(sys, seed=cfg.seed).t_ss
    horizon = ev.get("horizon", 200)
    exc = ev.get("excitation") or {}
    K = exc.get("length") or 2 * t_ss
    exc_seed = exc.get("seed", cfg.seed)
    U = gaussian_excitation(sys.p, K, exc_seed, float(exc.get("scale", 1.0)))
    Y = simulate_outputs(sys, U)
    truth = markov_parameters(sys, horizon)

    report = EvaluationReport()
    report.markov_norm["full"] = [np.linalg.norm(m, 2) for m in truth]
    do_freq = ev.get("frequency", True)
    if do_freq:
        om = ev.get("omega") or {}
        report.freq_grid = default_omega_grid(om.get("n", 60), om.get("lo", 1e-3), om.get("hi", np.pi))
        full_freq = frequency_response(sys, report.freq_grid)
        report.freq_response["full"] = full_freq

    roms, notes, traces = {}, {}, {}
    for spec in cfg.methods:
        log.info("running %s", spec.tag)
        rom, nt = run_method(sys, spec, t_ss)
        roms[spec.tag], notes[spec.tag] = rom, nt
        err = markov_error(sys, rom, horizon, truth=truth)
        report.markov_error[spec.tag] = err
        red = markov_parameters(rom, horizon)
        report.markov_norm[spec.tag] = [np.linalg.norm(np.real(m), 2) for m in red]
        report.e_output[spec.tag] = output_relative_error(sys, rom, U, truth=Y)
        if do_freq:
            fr = frequency_response(rom, report.freq_grid)
            report.freq_response[spec.tag] = fr
            report.e_fre[spec.tag] = np.abs(full_freq - fr)
        report.hankel_dims[spec.tag] = tuple(rom.provenance["hankel_shape"])
        traces[spec.tag] = rom.provenance.get("timings", {})
        save_rom(rom, out / "roms" / spec.tag)
    report.timings = timing_report(traces)
    report.write(out)
    with (out / "e_output.csv").open("w") as fh:
        fh.write("method,e_output,order\n")
        for tag, v in report.e_output.items():
            fh.write(f"{tag},{fmt(v)},{roms[tag].order}\n")

    manifest = {
        "config_sha256": cfg.digest(),
        "config_source": cfg.source,
        "config": cfg.raw,
        "version": __version__,
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "python": platform.python_version(),
        "t_ss": int(t_ss),
        "excitation": {"seed": exc_seed, "length": int(K)},
        "methods": {
            tag: {
                "seed": spec.seed,
                "order": roms[tag].order,
                "hankel": list(report.hankel_dims[tag]),
                "sigma_next": roms[tag].provenance.get("sigma_next"),
                "warnings": notes[tag],
            }
            for tag, spec in zip(roms, cfg.methods)
        },
    }
    write_yaml(out / "manifest.yaml", manifest)
    return {"report": report, "roms": roms, "system": sys, "t_ss": t_ss, "manifest": manifest}


def loglog_slope(x, y) -> float:
    """Least-squares slope of ``log y`` against ``log x``."""
    return float(np.polyfit(np.log10(x), np.log10(y), 1)[0])


def run_sweep(cfg: ExperimentConfig, out_dir) -> dict:
    """RPOD* on a4-perturbed synthetics across coupling magnitudes."""
    sw = cfg.sweep
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    N, l = sw.get("N", 30), sw.get("l", 4)
    seed = sw.get("seed", cfg.seed)
    m, dT, horizon = sw.get("m", 40), sw.get("dT", 10), sw.get("horizon", 50)
    rows = []
    for eps in sw["eps"]:
        syn = gen_synthetic("a4-perturbed", N, l, eps=eps, seed=seed)
        rom, _, svd = rpod_star(syn.system, m, m, dT, dT, l, seed=seed)
        err = markov_error(syn.system, rom, horizon)
        rows.append((eps, float(err.max()), svd.sigma_next))
    eps_, merr, sig = (np.array(c) for c in zip(*rows))
    slopes = {"markov_error": loglog_slope(eps_, merr), "sigma_next": loglog_slope(eps_, sig)}
    with (out / "sweep.csv").open("w") as fh:
        fh.write("eps,markov_error,sigma_next\n")
        for r in rows:
            fh.write(",".join(fmt(v) for v in r) + "\n")
    write_yaml(out / "manifest.yaml", {
        "config_sha256": cfg.digest(), "config": cfg.raw, "version": __version__,
        "slopes": slopes,
    })
    return {"rows": rows, "slopes": slopes}

