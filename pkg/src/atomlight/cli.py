"""Command-line front end: run scenarios, sweep parameters, dump eigenmodes.

Subcommands
  run       execute one scenario from a YAML config
  sweep     repeat a scenario over a parameter axis (detuning, intensity,
            angle, or a seeded configuration ensemble) and aggregate
  modes     dump the collective eigenmode set of the configured geometry
  validate  schema-check a config and exit

Exit codes: 0 success, 2 configuration/schema error, 3 solver capability
violation, 4 numerical failure, 1 anything else.  Result CSVs are
deterministic for a fixed config and seed; wall-clock timestamps only ever
appear in the metadata file.
"""

import argparse
import csv
import json
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from importlib import resources
from pathlib import Path

import numpy as np
import yaml

from . import __version__, observables, scenarios
from .errors import (AtomLightError, CapabilityError, InvalidArgument,
                     NumericalFailure)
from .kernel import coupling_set

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_CAPABILITY = 3
EXIT_NUMERICAL = 4


class ConfigError(AtomLightError):
    pass


def load_schema():
    with resources.files("atomlight").joinpath("config_schema.json").open() as fh:
        return json.load(fh)


def load_config(path):
    try:
        with open(path) as fh:
            config = yaml.safe_load(fh)
    except OSError as err:
        raise ConfigError(f"cannot read config: {err}") from err
    except yaml.YAMLError as err:
        raise ConfigError(f"config is not valid YAML: {err}") from err
    if not isinstance(config, dict):
        raise ConfigError("config root must be a mapping")
    validate_config(config)
    config.setdefault("seed", 0)
    return config


def validate_config(config):
    import jsonschema

    try:
        jsonschema.validate(config, load_schema())
    except jsonschema.ValidationError as err:
        field = "/".join(str(p) for p in err.absolute_path) or "<root>"
        raise ConfigError(f"config field '{field}': {err.message}") from err


def write_csv(path, columns):
    """One header row naming columns (units in the name); complex values are
    split into paired _re/_im columns; UTF-8, LF, '.' decimals."""
    names = []
    arrays = []
    for name, arr in columns.items():
        arr = np.asarray(arr)
        if np.iscomplexobj(arr):
            names.extend([f"{name}_re", f"{name}_im"])
            arrays.extend([arr.real, arr.imag])
        else:
            names.append(name)
            arrays.append(arr)
    length = max(a.shape[0] for a in arrays)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(names)
        for i in range(length):
            writer.writerow([repr(float(a[i])) if i < a.shape[0] else ""
                             for a in arrays])


def write_metadata(path, config, meta):
    doc = {
        "config": config,
        "package_version": __version__,
        "timestamp": time.strftime("%Y-%m-%dT%H:%M:%S"),
        "results": _plainify(meta),
    }
    with open(path, "w", encoding="utf-8") as fh:
        yaml.safe_dump(doc, fh, sort_keys=True)


def _plainify(obj):
    if isinstance(obj, dict):
        return {k: _plainify(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plainify(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    return obj


def _outputs(config, out_dir, tables, meta):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    prefix = config.get("output", {}).get("prefix", config["scenario"])
    for name, columns in tables.items():
        write_csv(out / f"{prefix}_{name}.csv", columns)
    write_metadata(out / f"{prefix}_metadata.yaml", config, meta)
    return out / f"{prefix}_metadata.yaml"


def cmd_run(config, out_dir):
    tables, meta = scenarios.run_scenario(config)
    _outputs(config, out_dir, tables, meta)
    return EXIT_OK


def _ensemble_member(args):
    config, seed = args
    try:
        tables, meta = scenarios.run_collective_shift(config, seed=seed)
        return seed, tables["shift"]["mean_excitation"], meta, None
    except AtomLightError as err:
        return seed, None, None, f"{type(err).__name__}: {err}"


def cmd_sweep(config, out_dir, workers):
    axis = config["sweep"]["axis"]
    if axis == "configuration-ensemble":
        return _sweep_ensemble(config, out_dir, workers)
    values = config["sweep"].get("values")
    if not values:
        raise ConfigError("sweep.values is required for this axis")
    if axis == "angle":
        # detection angles share one steady state; delegate to a single run
        member = _override(config, ("detection", "angles_pi"), list(values))
        tables, meta = scenarios.run_scenario(member)
        _outputs(config, out_dir, tables, meta)
        return EXIT_OK
    rows = []
    metas = {}
    for value in values:
        if axis == "detuning":
            member = _override(config, ("drive", "detuning"), value)
            tables, meta = scenarios.run_scenario(member)
        elif axis == "intensity":
            # values are I/I_sat = 2 Omega^2 / Gamma^2
            omega = float(np.sqrt(value / 2.0))
            tables, meta = scenarios.run_normal_mode(config, omega=omega)
        else:
            raise ConfigError(f"unknown sweep axis {axis!r}")
        rows.append((value, tables))
        metas[f"{axis}_{value:g}"] = meta
    merged = _merge_rows(axis, rows)
    _outputs(config, out_dir, merged, {"members": metas})
    return EXIT_OK


def _override(config, path, value):
    member = json.loads(json.dumps(config))
    node = member
    for key in path[:-1]:
        node = node.setdefault(key, {})
    node[path[-1]] = value
    return member


def _merge_rows(axis, rows):
    """Stack single-row member tables into one row-per-value table.

    Only scalar (one-entry) columns are aggregated; curve-valued outputs stay
    with scenarios that emit them directly.
    """
    merged = {}
    for value, tables in rows:
        for name, columns in tables.items():
            if any(np.asarray(arr).size != 1 for arr in columns.values()):
                continue
            tgt = merged.setdefault(name, {})
            tgt.setdefault(f"sweep_{axis}", []).append(float(value))
            for col, arr in columns.items():
                tgt.setdefault(col, []).append(np.asarray(arr).item())
    return {name: {k: np.asarray(v) for k, v in cols.items()}
            for name, cols in merged.items()}


def _sweep_ensemble(config, out_dir, workers):
    n_configs = config["sweep"].get("n_configs")
    if not n_configs:
        raise ConfigError("sweep.n_configs is required for configuration-ensemble")
    detunings = np.asarray(config["sweep"]["values"], dtype=float)
    base_seed = config.get("seed", 0)
    seeds = [base_seed + i for i in range(n_configs)]
    jobs = [(config, s) for s in seeds]
    results = []
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_ensemble_member, jobs))
    else:
        results = [_ensemble_member(j) for j in jobs]
    results.sort(key=lambda r: r[0])
    curves = [r[1] for r in results if r[1] is not None]
    failures = {r[0]: r[3] for r in results if r[3] is not None}
    if not curves:
        raise NumericalFailure("every ensemble member failed")
    stack = np.array(curves)
    mean = stack.mean(axis=0)
    se = (stack.std(axis=0, ddof=1) / np.sqrt(stack.shape[0])
          if stack.shape[0] > 1 else np.zeros_like(mean))
    tables = {"shift": {
        "detuning_gamma": detunings,
        "mean_excitation_mean": mean,
        "mean_excitation_se": se,
    }}
    meta = {
        "n_configs_requested": n_configs,
        "n_configs_ok": int(stack.shape[0]),
        "failures": failures,
        "member_atoms": [r[2]["n_atoms"] for r in results if r[2] is not None],
    }
    fit = observables.lorentzian_fit(detunings, mean)
    meta["lorentzian_fit"] = {
        "center_gamma": fit.center, "width_gamma": fit.width,
        "amplitude": fit.amplitude, "offset": fit.offset,
        "residual_rms": fit.residual_rms,
    }
    _outputs(config, out_dir, tables, meta)
    return EXIT_OK


def cmd_modes(config, out_dir):
    array = scenarios.build_geometry(config)
    modes = observables.eigenmodes(coupling_set(array))
    cols = {
        "mode_index": np.arange(modes.eigenvalues.size),
        "eigenvalue_gamma": modes.eigenvalues,
        "decay_rate_gamma": modes.decay_rates,
    }
    for n in range(array.n_atoms):
        cols[f"u_atom{n}"] = modes.modes[:, n]
    _outputs(config, out_dir, {"modes": cols}, {"n_atoms": array.n_atoms})
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(
        prog="atomlight",
        description="Collective light scattering from two-level atom arrays.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("run", "sweep", "modes", "validate"):
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="YAML scenario config")
        if name != "validate":
            p.add_argument("--out", default="results", help="output directory")
            p.add_argument("--seed", type=int, default=None,
                           help="override the config seed")
            p.add_argument("--solver", default=None,
                           help="override the config solver")
        if name == "sweep":
            p.add_argument("--workers", type=int, default=1,
                           help="parallel ensemble workers")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        config = load_config(args.config)
        if getattr(args, "seed", None) is not None:
            config["seed"] = args.seed
        if getattr(args, "solver", None) is not None:
            config["solver"] = args.solver
            validate_config(config)
        if args.command == "validate":
            print("config OK")
            return EXIT_OK
        if args.command == "run":
            return cmd_run(config, args.out)
        if args.command == "sweep":
            return cmd_sweep(config, args.out, args.workers)
        if args.command == "modes":
            return cmd_modes(config, args.out)
        raise InvalidArgument(f"unknown command {args.command}")
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except CapabilityError as err:
        print(f"capability error: {err}", file=sys.stderr)
        return EXIT_CAPABILITY
    except NumericalFailure as err:
        print(f"numerical failure: {type(err).__name__}: {err}", file=sys.stderr)
        return EXIT_NUMERICAL
    except InvalidArgument as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
