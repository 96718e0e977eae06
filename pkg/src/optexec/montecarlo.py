"""Scenario runs: deterministic transient-impact strategies, stochastic
instantaneous-impact inventory fans, and value-function surfaces."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field

import numpy as np

from . import cj, gss
from .signals import RNG_NAME, OuSignal, simulate_paths

__all__ = [
    "ScenarioSpec",
    "TrajectoryBundle",
    "path_seeds",
    "run_gss_scenarios",
    "run_cj_paths",
    "value_surface_grid",
    "write_trajectories_csv",
    "write_quantiles_csv",
    "write_surface_csv",
    "write_metadata",
    "QUANTILE_LEVELS",
]

QUANTILE_LEVELS = (0.10, 0.25, 0.50, 0.75, 0.90)


@dataclass(frozen=True)
class ScenarioSpec:
    """What to simulate and at which resolution.

    ``scenarios`` holds ``(iota, rho)`` pairs for the transient-impact
    framework and is ignored for the instantaneous-impact one, where the
    signal start is the problem's ``iota``. ``n_steps`` is the number of
    grid cells of the output time grid.
    """

    framework: str
    problem: gss.GssProblem | cj.CjProblem
    scenarios: tuple = ()
    n_paths: int = 1
    n_steps: int = 1000
    seed: int = 0
    output_every: int = 1

    def __post_init__(self):
        if self.framework not in ("gss", "cj"):
            raise ValueError("framework must be 'gss' or 'cj'")
        if self.n_paths < 1:
            raise ValueError("n_paths must be >= 1")
        if self.n_steps < 1:
            raise ValueError("grid needs at least two points")
        if self.output_every < 1 or self.n_steps % self.output_every:
            raise ValueError("output_every must be a positive divisor of n_steps")
        want = gss.GssProblem if self.framework == "gss" else cj.CjProblem
        if not isinstance(self.problem, want):
            raise TypeError(f"{self.framework} framework needs a {want.__name__}")

    def as_dict(self) -> dict:
        return {
            "framework": self.framework,
            "problem": self.problem.as_dict(),
            "scenarios": [list(s) for s in self.scenarios],
            "n_paths": self.n_paths,
            "n_steps": self.n_steps,
            "seed": self.seed,
            "output_every": self.output_every,
        }


@dataclass
class TrajectoryBundle:
    times: np.ndarray
    inventory: np.ndarray  # (n_paths, n_times)
    rate: np.ndarray
    signal: np.ndarray
    labels: list = field(default_factory=list)
    reference: np.ndarray | None = None  # sigma = 0 inventory, when meaningful

    def __post_init__(self):
        n = self.times.size
        for name in ("inventory", "rate", "signal"):
            a = getattr(self, name)
            if a.ndim != 2 or a.shape[1] != n:
                raise ValueError(f"{name} must have shape (n_paths, {n})")
        if not self.labels:
            self.labels = [str(i) for i in range(self.inventory.shape[0])]

    @property
    def n_paths(self) -> int:
        return self.inventory.shape[0]

    def quantiles(self, levels=QUANTILE_LEVELS) -> dict:
        """Pointwise inventory quantiles plus mean and standard error."""
        q = np.quantile(self.inventory, levels, axis=0)
        # interpolated quantiles can break order by one ulp; enforce it
        q = np.maximum.accumulate(q, axis=0)
        out = {f"q{round(100 * lv)}": q[i] for i, lv in enumerate(levels)}
        out["mean"] = self.inventory.mean(axis=0)
        n = self.n_paths
        out["se"] = self.inventory.std(axis=0, ddof=1) / np.sqrt(n) if n > 1 else np.zeros(self.times.size)
        return out


def path_seeds(master: int, n: int):
    """Independent per-path seeds; path ``i`` does not depend on ``n``."""
    return np.random.SeedSequence(master).spawn(n)


def run_gss_scenarios(spec: ScenarioSpec) -> TrajectoryBundle:
    """Closed-form strategy for each ``(iota, rho)`` pair on a common grid.

    Inventory is reported right-continuously so the initial block trade shows
    at ``t = 0`` and the terminal one at ``t = T`` (where it is 0).
    """
    if spec.framework != "gss":
        raise ValueError("run_gss_scenarios needs the gss framework")
    base = spec.problem
    if base.phi != 0:
        raise ValueError("scenario runs use the closed form, which needs phi == 0")
    t = np.linspace(0.0, base.T, spec.n_steps + 1)
    scen = spec.scenarios or ((base.iota, base.kernel.rho),)
    inv, rate, sig, labels = [], [], [], []
    for iota, rho in scen:
        p = base.replace(signal=base.signal.restarted(float(iota)),
                         kernel=type(base.kernel)(base.kernel.kappa, float(rho)))
        _, s = gss.solve_closed_form(p)
        x = np.atleast_1d(gss.inventory_at(s, np.nextafter(t, np.inf)))
        x[-1] = s.x0 + s.total_traded()
        inv.append(x)
        rate.append(np.atleast_1d(gss.rate_at(s, t)))
        sig.append(np.asarray(p.signal.conditional_mean(t), dtype=float))
        labels.append(f"iota={float(iota):g},rho={float(rho):g}")
    return TrajectoryBundle(t, np.array(inv), np.array(rate), np.array(sig), labels)


def run_cj_paths(spec: ScenarioSpec, fuel: bool = False) -> TrajectoryBundle:
    """Simulate the signal exactly and integrate the feedback inventory per path.

    Signals are drawn on the half-step grid that the integrator needs; the
    bundle reports every other point. Also stores the ``sigma = 0``
    reference trajectory. Only every ``output_every``-th grid point is kept.
    """
    if spec.framework != "cj":
        raise ValueError("run_cj_paths needs the cj framework")
    p = spec.problem
    n = spec.n_steps
    half = np.linspace(0.0, p.T, 2 * n + 1)
    I = simulate_paths(p.signal, half, path_seeds(spec.seed, spec.n_paths))
    t, X, r = cj.integrate_inventory(p, n, I, fuel=fuel)
    ref_p = p.replace(signal=OuSignal(p.signal.gamma, 0.0, p.signal.iota))
    _, ref, _ = cj.deterministic_trajectory(ref_p, n, fuel=fuel)
    k = spec.output_every
    return TrajectoryBundle(t[::k], X[:, ::k], r[:, ::k], I[:, ::2 * k], reference=ref[::k])


def value_surface_grid(p: cj.CjProblem, iotas, xs, t: float = 0.0) -> np.ndarray:
    """Table of ``v0 + x v1 + x^2 v2`` with rows indexed by ``iota``."""
    iotas, xs = np.asarray(iotas, dtype=float), np.asarray(xs, dtype=float)
    return np.asarray(cj.value_surface(p, t, iotas[:, None], xs[None, :]))


def _fmt(v) -> str:
    return repr(float(v))


def write_trajectories_csv(path, b: TrajectoryBundle):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["path_id", "t", "X", "r", "I"])
        for i in range(b.n_paths):
            for j in range(b.times.size):
                w.writerow([b.labels[i], _fmt(b.times[j]), _fmt(b.inventory[i, j]),
                            _fmt(b.rate[i, j]), _fmt(b.signal[i, j])])


def write_quantiles_csv(path, b: TrajectoryBundle):
    q = b.quantiles()
    cols = ["q10", "q25", "q50", "q75", "q90", "mean"]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t"] + cols + (["reference"] if b.reference is not None else []))
        for j in range(b.times.size):
            row = [_fmt(b.times[j])] + [_fmt(q[c][j]) for c in cols]
            if b.reference is not None:
                row.append(_fmt(b.reference[j]))
            w.writerow(row)


def write_surface_csv(path, iotas, xs, values):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["iota", "x", "value"])
        for i, a in enumerate(iotas):
            for j, x in enumerate(xs):
                w.writerow([_fmt(a), _fmt(x), _fmt(values[i, j])])


def write_metadata(path, payload: dict):
    """JSON sidecar; the RNG identity is always recorded."""
    payload = {**payload, "rng": RNG_NAME, "numpy": np.__version__}
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True, default=_json_default)
        fh.write("\n")


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"cannot serialise {type(o).__name__}")
