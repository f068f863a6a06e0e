"""Command-line entry point: ``otabc <validate|run> --config <path>``.

The run configuration is a YAML file; unknown keys are rejected and every
violation is reported at once. ``run`` writes ``run.json`` and ``draws.csv``
plus experiment-specific artifacts (``convergence.csv``; ``bounds.json``,
``t_map.csv`` and ``exceedance.csv``) into the output directory.

Exit codes: 0 success, 1 runtime error, 2 invalid configuration, 3 no draw
accepted.
"""

import argparse
import copy
import csv
import json
import math
import sys
import warnings
from pathlib import Path
from typing import Literal

import numpy as np
import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError

from . import _random
from .abc import (
    AbcRun,
    ZeroAcceptanceWarning,
    deviation_from_discrepancy,
    epsilon_from_quantile,
    save_run,
    simulate_draws,
)
from .asymptotics import bounds_pipeline, convergence_contract, convergence_experiment
from .exceptions import InvalidInput, NoPosterior, OTABCError
from .models import MODELS, Prior, make_model
from .transport import Discrepancy

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_CONFIG = 2
EXIT_ZERO_ACCEPTANCE = 3

_FMT = ".17g"


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", protected_namespaces=())


class ModelBlock(_Strict):
    name: str
    params: dict[str, float] = Field(default_factory=dict)


class PriorBlock(_Strict):
    kind: Literal["uniform", "gaussian", "truncated_gaussian"]
    mean: float | list[float] | None = None
    sd: float | list[float] | None = None
    low: float | list[float] | None = None
    high: float | list[float] | None = None


class DiscrepancyBlock(_Strict):
    kind: Literal["wasserstein", "sliced_wasserstein", "radon"] = "wasserstein"
    p: float = 1.0
    n_projections: int = 50


class SimulateBlock(_Strict):
    theta: float | list[float]
    n: int
    seed: int
    model: ModelBlock | None = None


class DataBlock(_Strict):
    inline: list[float] | list[list[float]] | None = None
    csv: str | None = None
    simulate: SimulateBlock | None = None


class GridBlock(_Strict):
    low: float
    high: float
    step: float


class BoundsBlock(_Strict):
    eps: float
    m: int = 100_000
    mc_reps: int = 200
    tau_eps: list[float] | None = None
    n_values: list[int] | None = None
    zeta_values: list[float] | None = None
    sigma: float | None = None


class RunConfig(_Strict):
    experiment: Literal["abc", "convergence", "bounds"]
    seed: int
    model: ModelBlock
    prior: PriorBlock
    discrepancy: DiscrepancyBlock = Field(default_factory=DiscrepancyBlock)
    data: DataBlock
    n_draws: int = 100_000
    epsilon: float | None = None
    epsilon_quantile: float | None = None
    schedule: list[float] | None = None
    regions: list[list[float]] | None = None
    grid: GridBlock | None = None
    bounds: BoundsBlock | None = None
    threads: int = 1
    output: str = "otabc-out"


class ConfigError(OTABCError):
    """Invalid run configuration; ``errors`` lists every violation."""

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


def _semantic_errors(cfg, base_dir):
    errs = []
    if cfg.seed < 0:
        errs.append("seed: must be a nonnegative integer")
    if cfg.n_draws < 1:
        errs.append("n_draws: must be >= 1")
    if cfg.threads < 1:
        errs.append("threads: must be >= 1")
    if cfg.model.name not in MODELS:
        errs.append(f"model.name: unknown model {cfg.model.name!r} (choose from {sorted(MODELS)})")
    else:
        try:
            model = make_model(cfg.model.name, **cfg.model.params)
        except (TypeError, InvalidInput) as exc:
            errs.append(f"model.params: {exc}")
            model = None
    try:
        prior = Prior.from_dict(cfg.prior.model_dump(exclude_none=True))
    except InvalidInput as exc:
        errs.append(f"prior: {exc}")
        prior = None
    else:
        if cfg.model.name in MODELS and model is not None and not prior.contained_in(model.parameter_space):
            errs.append(f"prior: support is outside the parameter space {model.parameter_space.bounds}")
    try:
        Discrepancy(cfg.discrepancy.kind, cfg.discrepancy.p, cfg.discrepancy.n_projections, cfg.seed)
    except InvalidInput as exc:
        errs.append(f"discrepancy: {exc}")

    sources = [k for k in ("inline", "csv", "simulate") if getattr(cfg.data, k) is not None]
    if len(sources) != 1:
        errs.append("data: give exactly one of inline, csv, simulate")
    if cfg.data.inline is not None and len(cfg.data.inline) == 0:
        errs.append("data.inline: must be nonempty")
    if cfg.data.csv is not None and not _resolve(cfg.data.csv, base_dir).is_file():
        errs.append(f"data.csv: file not found: {cfg.data.csv}")
    if cfg.data.simulate is not None:
        sim = cfg.data.simulate
        if sim.n < 1:
            errs.append("data.simulate.n: must be >= 1")
        if sim.seed < 0:
            errs.append("data.simulate.seed: must be a nonnegative integer")
        if sim.model is not None and sim.model.name not in MODELS:
            errs.append(f"data.simulate.model.name: unknown model {sim.model.name!r}")

    if cfg.experiment == "abc":
        if (cfg.epsilon is None) == (cfg.epsilon_quantile is None):
            errs.append("epsilon: give exactly one of epsilon and epsilon_quantile")
        if cfg.epsilon is not None and not (cfg.epsilon > 0 and math.isfinite(cfg.epsilon)):
            errs.append("epsilon: must be a finite positive number")
        if cfg.epsilon_quantile is not None and not 0 < cfg.epsilon_quantile <= 1:
            errs.append("epsilon_quantile: must lie in ]0, 1]")
    elif cfg.experiment == "convergence":
        if not cfg.schedule:
            errs.append("schedule: required for the convergence experiment")
        else:
            s = np.asarray(cfg.schedule, dtype=float)
            if np.any(np.diff(s) >= 0):
                errs.append("schedule: schedule must be strictly decreasing")
            if np.any(s <= 0):
                errs.append("schedule: thresholds must be positive")
        if not cfg.regions:
            errs.append("regions: at least one [low, high] region is required")
        else:
            for i, r in enumerate(cfg.regions):
                if len(r) != 2 or not r[0] <= r[1]:
                    errs.append(f"regions.{i}: expected [low, high] with low <= high")
        if cfg.model.name != "normal_location":
            errs.append("model.name: the convergence experiment needs normal_location")
        if cfg.prior.kind != "gaussian":
            errs.append("prior.kind: the convergence experiment needs a gaussian prior")
    elif cfg.experiment == "bounds":
        if cfg.grid is None:
            errs.append("grid: required for the bounds experiment")
        elif not (cfg.grid.step > 0 and cfg.grid.high > cfg.grid.low):
            errs.append("grid: need low < high and step > 0")
        if cfg.bounds is None:
            errs.append("bounds: required for the bounds experiment")
        else:
            b = cfg.bounds
            if not b.eps > 0:
                errs.append("bounds.eps: must be positive")
            if b.m < 1:
                errs.append("bounds.m: must be >= 1")
            if b.mc_reps < 100:
                errs.append("bounds.mc_reps: must be >= 100")
            if b.n_values is not None and (len(b.n_values) == 0 or np.any(np.diff(b.n_values) <= 0)):
                errs.append("bounds.n_values: must be strictly increasing")
            if b.zeta_values is not None and any(not 0 < z <= b.eps for z in b.zeta_values):
                errs.append("bounds.zeta_values: must lie in ]0, eps]")
            if b.sigma is not None and not 0 <= b.sigma < 1:
                errs.append("bounds.sigma: must lie in [0, 1[")
    return errs


def _resolve(path, base_dir):
    p = Path(path)
    return p if p.is_absolute() or base_dir is None else Path(base_dir) / p


def _drop(tree, loc):
    for key in loc[:-1]:
        tree = tree[key]
    tree.pop(loc[-1], None)


def parse_config(raw, base_dir=None):
    """Validate a parsed YAML mapping; raises :class:`ConfigError` listing every problem."""
    if not isinstance(raw, dict):
        raise ConfigError(["<root>: expected a mapping of configuration keys"])
    try:
        cfg = RunConfig.model_validate(raw)
    except ValidationError as exc:
        errs = []
        stripped = copy.deepcopy(raw)
        only_extra = True
        for e in exc.errors():
            loc = ".".join(str(x) for x in e["loc"]) or "<root>"
            if e["type"] == "extra_forbidden":
                errs.append(f"{loc}: unknown field")
                _drop(stripped, e["loc"])
            else:
                errs.append(f"{loc}: {e['msg']}")
                only_extra = False
        if only_extra:
            # report semantic problems alongside the unknown keys
            try:
                errs += _semantic_errors(RunConfig.model_validate(stripped), base_dir)
            except ValidationError:
                pass
        raise ConfigError(errs) from None
    errs = _semantic_errors(cfg, base_dir)
    if errs:
        raise ConfigError(errs)
    if cfg.data.csv is not None:
        cfg.data.csv = str(_resolve(cfg.data.csv, base_dir).resolve())
    return cfg


def validate_config(path):
    """Read and validate a configuration file, returning the resolved :class:`RunConfig`."""
    path = Path(path)
    try:
        raw = yaml.safe_load(path.read_text())
    except OSError as exc:
        raise ConfigError([f"<file>: cannot read {path}: {exc}"]) from None
    except yaml.YAMLError as exc:
        raise ConfigError([f"<file>: parse error: {exc}"]) from None
    return parse_config(raw, base_dir=path.parent)


def read_samples_csv(path):
    """Observations from CSV, one row each; a non-numeric first row is a header."""
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    if rows:
        try:
            [float(c) for c in rows[0]]
        except ValueError:
            rows = rows[1:]
    if not rows:
        raise InvalidInput(f"{path}: no observations")
    try:
        arr = np.array([[float(c) for c in r] for r in rows])
    except ValueError as exc:
        raise InvalidInput(f"{path}: {exc}") from None
    return arr[:, 0] if arr.shape[1] == 1 else arr


def load_data(cfg, model):
    if cfg.data.inline is not None:
        return np.asarray(cfg.data.inline, dtype=float)
    if cfg.data.csv is not None:
        return read_samples_csv(cfg.data.csv)
    sim = cfg.data.simulate
    gen = make_model(sim.model.name, **sim.model.params) if sim.model is not None else model
    return gen.simulate(sim.theta, sim.n, _random.stream(sim.seed, _random.DATA))


def _write_rows(path, header, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([format(v, _FMT) if isinstance(v, float) else v for v in row])


def _dump_json(path, obj):
    path.write_text(json.dumps(obj, indent=2, sort_keys=True, default=_json_default) + "\n")


def _json_default(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def _sanitize(obj):
    # JSON has no inf/nan
    if isinstance(obj, float) and not math.isfinite(obj):
        return None if math.isnan(obj) else ("inf" if obj > 0 else "-inf")
    if isinstance(obj, dict):
        return {k: _sanitize(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_sanitize(v) for v in obj]
    return obj


def run_experiment(cfg, out_dir=None, threads=None, log=print):
    """Execute a validated configuration; returns the process exit code."""
    out = Path(out_dir or cfg.output)
    out.mkdir(parents=True, exist_ok=True)
    n_jobs = threads or cfg.threads
    model = make_model(cfg.model.name, **cfg.model.params)
    prior = Prior.from_dict(cfg.prior.model_dump(exclude_none=True))
    disc = Discrepancy(cfg.discrepancy.kind, cfg.discrepancy.p, cfg.discrepancy.n_projections, cfg.seed)
    dev = deviation_from_discrepancy(disc)
    data = load_data(cfg, model)
    meta = {"config": _sanitize(cfg.model_dump()), "experiment": cfg.experiment,
            "model": model.describe(), "prior": prior.describe(), "discrepancy": dev.describe(),
            "n_observations": int(np.asarray(data).shape[0])}

    if cfg.experiment == "abc":
        thetas, d = simulate_draws(model, prior, data, dev, cfg.n_draws, cfg.seed, n_jobs)
        eps = cfg.epsilon if cfg.epsilon is not None else epsilon_from_quantile(d, cfg.epsilon_quantile)
        if eps <= 0:
            log("error: the quantile threshold is zero; raise epsilon_quantile", file=sys.stderr)
            return EXIT_ZERO_ACCEPTANCE
        run = AbcRun(thetas, d, eps, cfg.seed, metadata=meta)
        save_run(run, out)
        if run.zero_acceptance:
            return _zero_acceptance(run, log)
        log(f"accepted {run.n_accepted} of {run.n_draws} draws at epsilon={run.epsilon:.6g}")
        return EXIT_OK

    if cfg.experiment == "convergence":
        regions = [tuple(r) for r in cfg.regions]
        rows, run = convergence_experiment(model, prior, data, dev, cfg.schedule, cfg.n_draws, regions, cfg.seed,
                                           n_jobs, return_run=True)
        run = AbcRun(run.thetas, run.discrepancies, run.epsilon, cfg.seed, metadata=meta)
        contract = convergence_contract(rows)
        save_run(run, out, extra={"contract": contract})
        _write_rows(out / "convergence.csv",
                    ["epsilon", "region", "abc_estimate", "oracle_value", "abs_error", "mc_stderr"],
                    [(r.epsilon, r.region, r.abc_estimate, r.oracle_value, r.abs_error, r.mc_stderr) for r in rows])
        if all(r.n_accepted == 0 for r in rows if math.isfinite(r.epsilon)):
            return _zero_acceptance(run, log)
        for region, c in contract.items():
            log(f"region {region}: final error {c['final_error']} at epsilon={c['final_epsilon']} "
                f"({'ok' if c['final_ok'] else 'FAIL'})")
        return EXIT_OK

    b = cfg.bounds
    g = cfg.grid
    grid = np.linspace(g.low, g.high, int(round((g.high - g.low) / g.step)) + 1)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ZeroAcceptanceWarning)
        try:
            res = bounds_pipeline(model, prior, data, disc, grid, b.eps, cfg.n_draws, cfg.seed, m=b.m,
                                  zeta_values=b.zeta_values, tau_eps=b.tau_eps, tau_n_values=b.n_values,
                                  mc_reps=b.mc_reps, sigma_override=b.sigma, n_jobs=n_jobs)
        except NoPosterior as exc:
            log(f"error: {exc}; increase bounds.eps or n_draws", file=sys.stderr)
            return EXIT_ZERO_ACCEPTANCE
    save_run(res.run, out, extra=meta)
    _dump_json(out / "bounds.json", _sanitize(res.report))
    _write_rows(out / "t_map.csv", ["theta", "T_hat"],
                [(float(t), float(v)) for t, v in zip(res.estimates.grid_1d, res.estimates.T_theta)])
    _write_rows(out / "exceedance.csv", ["theta", "eps", "n", "exceedance"],
                [(float(r["theta"][0]), r["eps"], r["n"], r["exceedance"]) for r in res.report["exceedance"]["rows"]])
    log(f"eps_star={res.estimates.eps_star:.6g} theta_star={res.estimates.theta_star[0]:.6g} "
        f"all bounds {'pass' if res.report['all_pass'] else 'FAIL'}")
    return EXIT_OK


def _zero_acceptance(run, log):
    log(f"error: no draw accepted at epsilon={run.epsilon:.6g}; use a larger epsilon or "
        "set epsilon_quantile (threshold from the simulated discrepancies)", file=sys.stderr)
    return EXIT_ZERO_ACCEPTANCE


def main(argv=None):
    parser = argparse.ArgumentParser(prog="otabc", description="ABC with optimal-transport discrepancies")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_ in (("validate", "check a configuration file"), ("run", "run an experiment")):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--config", required=True, help="YAML run configuration")
        if name == "run":
            p.add_argument("--out", help="output directory (overrides the config)")
            p.add_argument("--threads", type=int, help="worker threads (overrides the config)")
    args = parser.parse_args(argv)

    try:
        cfg = validate_config(args.config)
    except ConfigError as exc:
        for err in exc.errors:
            print(f"config error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    if args.command == "validate":
        print(json.dumps(_sanitize(cfg.model_dump()), indent=2, sort_keys=True))
        return EXIT_OK
    if args.threads is not None and args.threads < 1:
        print("error: --threads must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return run_experiment(cfg, args.out, args.threads)
    except OTABCError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
