"""Command-line entry point.

Every subcommand takes ``--config FILE`` (JSON) plus one ``--<key>`` flag per
config key; flags win over the file. Each run writes ``metadata.json`` into
the output directory with the fully resolved configuration and SHA-256
hashes of the outputs. Passing that file back as ``--config`` repeats the run
bit for bit.

Exit codes: 0 success, 2 invalid configuration, 3 numerical failure, 4 I/O
or malformed input data.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import sys
import warnings
from pathlib import Path

import numpy as np

from . import __version__, cj, estimation, gss, montecarlo, oracle
from .kernels import ExpKernel, PowerLawKernel
from .signals import OuSignal

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_IO = 0, 2, 3, 4

DEFAULT_SCENARIOS = [[-0.5, 1.0], [0.0, 1.0], [0.5, 1.0], [-0.5, 2.5], [0.0, 2.5], [0.5, 2.5]]

DEFAULTS = {
    "gss-solve": {
        "x0": 10.0, "T": 10.0, "kappa": 0.1, "gamma": 0.9, "sigma": 0.0,
        "scenarios": DEFAULT_SCENARIOS, "n_points": 1001, "verify": False, "verify_N": 2000,
    },
    "gss-oracle": {
        "x0": 10.0, "T": 10.0, "kappa": 0.1, "gamma": 0.9, "sigma": 0.0, "phi": 0.0,
        "scenarios": DEFAULT_SCENARIOS, "Ns": [125, 250, 500, 1000, 2000],
        "kernel": "exp", "ell": 1.0, "alpha": 0.5,
    },
    "cj-simulate": {
        "kappa": 0.5, "phi": 0.1, "varrho": 10.0, "fuel": False, "T": 10.0, "x0": 10.0,
        "gamma": 0.1, "sigma": 0.1, "iota": 0.0, "n_paths": 1000, "n_steps": 1000,
        "output_every": 10, "seed": 20240101,
        "iota_min": -0.5, "iota_max": 0.5, "n_iota": 41, "x_min": 0.25, "x_max": 10.0, "n_x": 41,
    },
    "cj-surface": {
        "kappa": 0.5, "phi": 0.1, "varrho": 10.0, "T": 10.0, "gamma": 0.1, "sigma": 0.1,
        "t": 0.0, "iota_min": -0.5, "iota_max": 0.5, "n_iota": 41,
        "x_min": 0.25, "x_max": 10.0, "n_x": 41,
    },
    "estimate": {
        "input": None, "lags": [3, 5, 7, 10, 100], "horizons": [10],
        "interval": 600.0, "n_bins": 21,
    },
    "synth-data": {
        "n": 100000, "seed": 7, "kappa": 0.005, "spread": 0.05, "impact_noise": 0.01,
        "imbalance_model": "ar", "ar_q": 0.9, "ar_s": 0.2,
        "followers": ["HFPT"], "blind": ["IB", "GIB", "HFMM"],
    },
}


class ConfigError(ValueError):
    pass


def _json_arg(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text  # bare strings such as --imbalance_model uniform


def resolve_config(command: str, file_cfg: dict | None, overrides: dict) -> dict:
    """Merge defaults, file values and flag values (in increasing priority)."""
    cfg = dict(DEFAULTS[command])
    for src in (file_cfg or {}, overrides):
        unknown = set(src) - set(cfg)
        if unknown:
            raise ConfigError(f"unknown config keys for {command}: {sorted(unknown)}")
        cfg.update(src)
    return cfg


def _load_config(path) -> dict:
    try:
        with open(path) as fh:
            data = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: not valid JSON ({exc})") from None
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be an object")
    # a metadata file from a previous run carries its config under "config"
    if "config" in data and "command" in data:
        return data["config"]
    return data


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _label(iota, rho) -> str:
    return f"iota{float(iota):+g}_rho{float(rho):g}"


def _scenarios(cfg):
    sc = cfg["scenarios"]
    if not isinstance(sc, list) or not sc or not all(isinstance(s, list) and len(s) == 2 for s in sc):
        raise ConfigError("scenarios must be a non-empty list of [iota, rho] pairs")
    return [(float(a), float(b)) for a, b in sc]


def _gss_problem(cfg, iota, rho, kernel="exp"):
    sig = OuSignal(cfg["gamma"], cfg["sigma"], iota)
    if kernel == "exp":
        k = ExpKernel(cfg["kappa"], rho)
    elif kernel == "power":
        k = PowerLawKernel(cfg["kappa"], cfg["ell"], cfg["alpha"])
    else:
        raise ConfigError(f"unknown kernel {kernel!r}")
    return gss.GssProblem(cfg["x0"], cfg["T"], sig, k, phi=cfg.get("phi", 0.0))


def _write_rows(path, header, rows):
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for r in rows:
            fh.write(",".join(repr(float(v)) if isinstance(v, (float, np.floating)) else str(v)
                              for v in r) + "\n")


# ---------------------------------------------------------------- commands

def cmd_gss_solve(cfg, out: Path) -> list[Path]:
    files, rows = [], []
    for iota, rho in _scenarios(cfg):
        p = _gss_problem(cfg, iota, rho)
        f = out / f"strategy_{_label(iota, rho)}.csv"
        consts, s = gss.export_strategy_csv(f, p, int(cfg["n_points"]))
        files.append(f)
        grid = np.linspace(0.0, p.T, int(cfg["n_points"]))
        rep = gss.check_optimality_condition(p, s, grid)
        mono, first = gss.monotonicity_diagnostic(s, grid)
        row = [_label(iota, rho), iota, rho, consts.A, consts.B, consts.C, consts.D, consts.lam,
               rep.lambda_est, rep.max_deviation, gss.cost(p, s), int(mono), s.fuel_residual()]
        if cfg["verify"]:
            strat, lam = oracle.solve_qp(oracle.build_qp(p, int(cfg["verify_N"])))
            cg, sg, lg, *_ = oracle.compare_to_closed_form(p, strat, lam)
            row += [int(cfg["verify_N"]), cg, sg, lg]
        rows.append(row)
    header = ["scenario", "iota", "rho", "A", "B", "C", "D", "lambda", "lambda_est",
              "max_deviation", "cost", "monotone", "fuel_residual"]
    if cfg["verify"]:
        header += ["oracle_N", "cost_gap", "strategy_gap", "lambda_gap"]
    f = out / "report.csv"
    _write_rows(f, header, rows)
    return files + [f]


def cmd_gss_oracle(cfg, out: Path) -> list[Path]:
    files = []
    Ns = [int(n) for n in cfg["Ns"]]
    if len(Ns) < 1 or min(Ns) < 2:
        raise ConfigError("Ns must be a non-empty list of integers >= 2")
    for iota, rho in _scenarios(cfg):
        p = _gss_problem(cfg, iota, rho, cfg["kernel"])
        strat, lam = oracle.solve_qp(oracle.build_qp(p, max(Ns)))
        f = out / f"qp_{_label(iota, rho)}.csv"
        _write_rows(f, ["t", "increment", "holding"],
                    zip(strat.grid, strat.increments, strat.holdings))
        files.append(f)
        if cfg["kernel"] == "exp" and p.phi == 0:
            rows = oracle.convergence_study(p, Ns)
            f = out / f"convergence_{_label(iota, rho)}.csv"
            oracle.write_convergence_csv(f, rows)
            files.append(f)
    return files


def _cj_problem(cfg, iota=None):
    varrho = math.inf if cfg.get("fuel") else cfg["varrho"]
    sig = OuSignal(cfg["gamma"], cfg["sigma"], cfg.get("iota", 0.0) if iota is None else iota)
    return cj.CjProblem(cfg["kappa"], cfg["phi"], varrho, cfg["T"], sig, x0=cfg.get("x0", 0.0))


def _surface(cfg, out: Path) -> Path:
    p = _cj_problem(cfg)
    iotas = np.linspace(cfg["iota_min"], cfg["iota_max"], int(cfg["n_iota"]))
    xs = np.linspace(cfg["x_min"], cfg["x_max"], int(cfg["n_x"]))
    vals = montecarlo.value_surface_grid(p, iotas, xs, float(cfg.get("t", 0.0)))
    f = out / "surface.csv"
    montecarlo.write_surface_csv(f, iotas, xs, vals)
    return f


def cmd_cj_simulate(cfg, out: Path) -> list[Path]:
    p = _cj_problem(cfg)
    spec = montecarlo.ScenarioSpec("cj", p, n_paths=int(cfg["n_paths"]), n_steps=int(cfg["n_steps"]),
                                   seed=int(cfg["seed"]), output_every=int(cfg["output_every"]))
    b = montecarlo.run_cj_paths(spec, fuel=bool(cfg["fuel"]))
    ft, fq = out / "trajectories.csv", out / "quantiles.csv"
    montecarlo.write_trajectories_csv(ft, b)
    montecarlo.write_quantiles_csv(fq, b)
    files = [ft, fq]
    if not cfg["fuel"]:
        files.append(_surface(cfg, out))
    return files


def cmd_cj_surface(cfg, out: Path) -> list[Path]:
    return [_surface(cfg, out)]


def cmd_estimate(cfg, out: Path) -> list[Path]:
    if not cfg["input"]:
        raise ConfigError("estimate needs an input CSV (--input)")
    trades = estimation.read_trades_csv(cfg["input"])
    imb = trades.imbalance
    fits, skipped = [], []
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", estimation.UnitRootWarning)
        for dn in cfg["lags"]:
            if imb.size < 100 * int(dn):
                skipped.append(int(dn))
                continue
            fits.append(estimation.fit_ou(imb, int(dn)))
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    for dn in skipped:
        print(f"warning: lag {dn} skipped, needs {100 * dn} trades", file=sys.stderr)
    files = [out / "ou_fits.csv", out / "kappa.csv", out / "price_moves.csv",
             out / "conditioned_rates.csv"]
    estimation.write_ou_table(files[0], fits)
    estimation.write_kappa_table(files[1], estimation.estimate_kappa(trades))
    estimation.write_move_table(files[2], [estimation.price_move_regression(trades, int(h))
                                           for h in cfg["horizons"]])
    estimation.write_rates_table(files[3], estimation.conditioned_rates(
        trades, float(cfg["interval"]), int(cfg["n_bins"])))
    return files


def cmd_synth_data(cfg, out: Path) -> list[Path]:
    kw = {k: cfg[k] for k in ("kappa", "spread", "impact_noise", "imbalance_model", "ar_q", "ar_s")}
    t = estimation.synth_trades(int(cfg["n"]), int(cfg["seed"]), followers=tuple(cfg["followers"]),
                                blind=tuple(cfg["blind"]), **kw)
    f = out / "trades.csv"
    estimation.write_trades_csv(f, t)
    return [f]


COMMANDS = {
    "gss-solve": (cmd_gss_solve, "closed-form transient-impact strategies per (iota, rho) scenario"),
    "gss-oracle": (cmd_gss_oracle, "discretised QP solutions and convergence to the closed form"),
    "cj-simulate": (cmd_cj_simulate, "simulated inventory paths, quantiles and value surface"),
    "cj-surface": (cmd_cj_surface, "value surface over an (iota, x) grid"),
    "estimate": (cmd_estimate, "OU fits, impact, price moves and conditioned rates from trades"),
    "synth-data": (cmd_synth_data, "synthetic trade stream CSV"),
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="optexec", description=__doc__.split("\n")[0])
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)
    for name, (_, helptext) in COMMANDS.items():
        sp = sub.add_parser(name, help=helptext)
        sp.add_argument("--config", help="JSON config (or metadata.json of an earlier run)")
        sp.add_argument("--out", default="out", help="output directory (default: out)")
        for key in DEFAULTS[name]:
            sp.add_argument(f"--{key}", dest=f"opt_{key}", type=_json_arg, default=None,
                            metavar="VALUE", help="JSON value overriding the config")
    return ap


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    fn = COMMANDS[args.command][0]
    overrides = {k[4:]: v for k, v in vars(args).items() if k.startswith("opt_") and v is not None}
    try:
        file_cfg = _load_config(args.config) if args.config else None
        cfg = resolve_config(args.command, file_cfg, overrides)
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        files = fn(cfg, out)
        meta = {
            "command": args.command,
            "config": cfg,
            "outputs": {f.name: _sha256(f) for f in files},
            "version": __version__,
        }
        if cfg.get("input"):
            meta["input_sha256"] = _sha256(Path(cfg["input"]))
        montecarlo.write_metadata(out / "metadata.json", meta)
    except estimation.TradeParseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (np.linalg.LinAlgError, FloatingPointError, ArithmeticError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ConfigError, ValueError, TypeError, KeyError) as exc:
        print(f"invalid configuration: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    for f in files:
        print(f)
    return EXIT_OK


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
