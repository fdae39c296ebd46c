"""Experiment configuration: YAML in, validated dataclasses out.

Schema (all sections but ``model`` optional)::

    model:
      kind: heat | dispersion | matrix-market | synthetic
      preset: benchmark | desk | paper     # heat/dispersion starting point
      params: {...}                        # overrides of HeatConfig / DispersionConfig
      path: some/dir                       # matrix-market: directory with manifest.yaml
      synthetic: {kind: a3-exact, N: 20, l: 3, eps: 0.0, seed: 0}
    methods:                               # or a single ``method:`` mapping
      - name: rpod-star                    # bpod | bpod-modal | output-projection | rpod-star
        m: 80
        n: 80
        dT: 40                             # or dT_primal / dT_adjoint
        l: 70                              # integer, null (numerical rank) or "select"
        seed: 0
      - name: output-projection
        primal_snapshots: 400
        adjoint_snapshots: 400
        s: 40
        l: 50
    evaluation:
      horizon: 200
      omega: {n: 60, lo: 0.001, hi: 3.141592653589793}
      excitation: {seed: 1, length: null, scale: 1.0}   # length null -> 2 t_ss
      t_ss: null                                         # null -> estimated
      frequency: true
    sweep:                                 # epsilon sweep on a4-perturbed synthetics
      eps: [0.01, 0.0001, 0.000001]
      N: 30
      l: 4
      seed: 0
      m: 40
      dT: 10
    output: results/heat
    seed: 0
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .errors import ConfigError

__all__ = ["MethodSpec", "ExperimentConfig", "load_config", "METHODS", "MODEL_KINDS"]

METHODS = ("bpod", "bpod-modal", "output-projection", "rpod-star")
MODEL_KINDS = ("heat", "dispersion", "matrix-market", "synthetic")


def _pos_int(d, key, where, default=None, allow_none=False):
    v = d.get(key, default)
    if v is None and allow_none:
        return None
    if isinstance(v, bool) or not isinstance(v, int) or v < 1:
        raise ConfigError(f"{where}.{key} must be a positive integer, got {v!r}")
    return v


@dataclass(frozen=True)
class MethodSpec:
    name: str
    m: int | None = None
    n: int | None = None
    dT_primal: int | None = None
    dT_adjoint: int | None = None
    l: int | str | None = None
    s: int | None = None
    primal_snapshots: int | None = None
    adjoint_snapshots: int | None = None
    seed: int = 0
    noise_scale: float = 1.0
    label: str | None = None

    @property
    def tag(self) -> str:
        return self.label or self.name

    @classmethod
    def from_dict(cls, d: dict, default_seed: int = 0) -> "MethodSpec":
        if not isinstance(d, dict) or "name" not in d:
            raise ConfigError("each method needs a 'name'")
        name = d["name"]
        where = f"method[{name}]"
        if name not in METHODS:
            raise ConfigError(f"unknown method {name!r}; expected one of {METHODS}")
        known = {"name", "m", "n", "dT", "dT_primal", "dT_adjoint", "l", "s", "primal_snapshots",
                 "adjoint_snapshots", "seed", "noise_scale", "label"}
        extra = set(d) - known
        if extra:
            raise ConfigError(f"{where}: unknown keys {sorted(extra)}")
        l = d.get("l")
        if not (l is None or l == "select" or (isinstance(l, int) and not isinstance(l, bool) and l >= 1)):
            raise ConfigError(f"{where}.l must be a positive integer, null or 'select', got {l!r}")
        seed = d.get("seed", default_seed)
        if isinstance(seed, bool) or not isinstance(seed, int) or seed < 0:
            raise ConfigError(f"{where}.seed must be a non-negative integer")
        kw = dict(name=name, l=l, seed=seed, label=d.get("label"))
        if name == "rpod-star":
            kw["m"] = _pos_int(d, "m", where)
            kw["n"] = _pos_int(d, "n", where, default=kw["m"])
            dT = d.get("dT")
            kw["dT_primal"] = _pos_int(d, "dT_primal", where, default=dT, allow_none=True)
            kw["dT_adjoint"] = _pos_int(d, "dT_adjoint", where, default=dT, allow_none=True)
            scale = d.get("noise_scale", 1.0)
            if not isinstance(scale, (int, float)) or scale <= 0:
                raise ConfigError(f"{where}.noise_scale must be positive")
            kw["noise_scale"] = float(scale)
            if isinstance(l, int) and l > min(kw["m"], kw["n"]):
                raise ConfigError(f"{where}: l={l} exceeds min(m, n)={min(kw['m'], kw['n'])}")
        else:
            if l == "select":
                raise ConfigError(f"{where}: l='select' is only available for rpod-star")
            kw["primal_snapshots"] = _pos_int(d, "primal_snapshots", where)
            kw["adjoint_snapshots"] = _pos_int(d, "adjoint_snapshots", where, default=kw["primal_snapshots"])
            if name == "output-projection":
                kw["s"] = _pos_int(d, "s", where)
            elif "s" in d:
                raise ConfigError(f"{where}: 's' only applies to output-projection")
        return cls(**kw)


@dataclass(frozen=True)
class ExperimentConfig:
    model: dict
    methods: tuple = ()
    evaluation: dict = field(default_factory=dict)
    sweep: dict | None = None
    output: str | None = None
    seed: int = 0
    source: str | None = None
    raw: dict = field(default_factory=dict, repr=False)

    def digest(self) -> str:
        """SHA-256 of the canonical YAML dump of the raw configuration."""
        text = yaml.safe_dump(self.raw, sort_keys=True)
        return hashlib.sha256(text.encode()).hexdigest()

    @classmethod
    def from_dict(cls, raw: dict, *, base: Path | None = None, source: str | None = None) -> "ExperimentConfig":
        if not isinstance(raw, dict):
            raise ConfigError("configuration must be a mapping")
        extra = set(raw) - {"model", "method", "methods", "evaluation", "sweep", "output", "seed"}
        if extra:
            raise ConfigError(f"unknown top-level keys {sorted(extra)}")
        seed = raw.get("seed", 0)
        if isinstance(seed, bool) or not isinstance(seed, int) or seed < 0:
            raise ConfigError("seed must be a non-negative integer")

        sweep = raw.get("sweep")
        model = raw.get("model")
        if model is None and sweep is None:
            raise ConfigError("configuration needs a 'model' section")
        if model is not None:
            model = _validate_model(dict(model), base)

        if "method" in raw and "methods" in raw:
            raise ConfigError("give either 'method' or 'methods', not both")
        items = raw.get("methods", [raw["method"]] if "method" in raw else [])
        if not isinstance(items, list):
            raise ConfigError("'methods' must be a list")
        methods = tuple(MethodSpec.from_dict(m, seed) for m in items)
        tags = [m.tag for m in methods]
        if len(set(tags)) != len(tags):
            raise ConfigError(f"duplicate method labels {tags}; set 'label' to distinguish them")
        if model is not None and not methods:
            raise ConfigError("configuration lists no methods")

        ev = dict(raw.get("evaluation") or {})
        _validate_evaluation(ev)
        if sweep is not None:
            sweep = _validate_sweep(dict(sweep))
        return cls(model=model, methods=methods, evaluation=ev, sweep=sweep,
                   output=raw.get("output"), seed=seed, source=source, raw=raw)


def _validate_model(model: dict, base: Path | None) -> dict:
    kind = model.get("kind")
    if kind not in MODEL_KINDS:
        raise ConfigError(f"model.kind must be one of {MODEL_KINDS}, got {kind!r}")
    if kind == "matrix-market":
        if "path" not in model:
            raise ConfigError("model.path is required for matrix-market models")
        path = Path(model["path"])
        if base is not None and not path.is_absolute():
            path = base / path
        if not (path / "manifest.yaml").is_file():
            raise ConfigError(f"model.path {path} has no manifest.yaml")
        model["path"] = str(path)
    if kind in ("heat", "dispersion"):
        preset = model.get("preset", "benchmark" if kind == "heat" else "desk")
        allowed = ("benchmark", "default") if kind == "heat" else ("desk", "paper", "default")
        if preset not in allowed:
            raise ConfigError(f"model.preset for {kind} must be one of {allowed}")
        model["preset"] = preset
        if not isinstance(model.get("params", {}), dict):
            raise ConfigError("model.params must be a mapping")
    if kind == "synthetic" and not isinstance(model.get("synthetic", {}), dict):
        raise ConfigError("model.synthetic must be a mapping")
    return model


def _validate_evaluation(ev: dict) -> None:
    extra = set(ev) - {"horizon", "omega", "excitation", "t_ss", "frequency"}
    if extra:
        raise ConfigError(f"evaluation: unknown keys {sorted(extra)}")
    _pos_int(ev, "horizon", "evaluation", default=200)
    _pos_int(ev, "t_ss", "evaluation", default=None, allow_none=True)
    om = ev.get("omega") or {}
    if not isinstance(om, dict):
        raise ConfigError("evaluation.omega must be a mapping")
    _pos_int(om, "n", "evaluation.omega", default=60)
    lo, hi = float(om.get("lo", 1e-3)), float(om.get("hi", 3.141592653589793))
    if not 0 < lo < hi:
        raise ConfigError("evaluation.omega needs 0 < lo < hi")
    exc = ev.get("excitation") or {}
    if not isinstance(exc, dict):
        raise ConfigError("evaluation.excitation must be a mapping")
    _pos_int(exc, "length", "evaluation.excitation", default=None, allow_none=True)
    if float(exc.get("scale", 1.0)) <= 0:
        raise ConfigError("evaluation.excitation.scale must be positive")


def _validate_sweep(sw: dict) -> dict:
    eps = sw.get("eps")
    if not isinstance(eps, list) or len(eps) < 2 or any(float(e) <= 0 for e in eps):
        raise ConfigError("sweep.eps needs at least two positive values")
    sw["eps"] = [float(e) for e in eps]
    N = _pos_int(sw, "N", "sweep", default=30)
    l = _pos_int(sw, "l", "sweep", default=4)
    if l >= N:
        raise ConfigError("sweep needs l < N")
    _pos_int(sw, "m", "sweep", default=40)
    _pos_int(sw, "dT", "sweep", default=10)
    _pos_int(sw, "horizon", "sweep", default=50)
    return sw


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    try:
        raw = yaml.safe_load(path.read_text())
    except yaml.YAMLError as exc:
        raise ConfigError(f"config {path} is not valid YAML: {exc}".replace("\n", " "))
    return ExperimentConfig.from_dict(raw, base=path.parent, source=str(path))
