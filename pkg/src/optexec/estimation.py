"""Order-book imbalance statistics in trade time.

Covers the imbalance itself, discrete OU identification from lagged AR(1)
regressions, the per-trade impact estimate, imbalance-conditioned trading
rates per participant class, and forward price-move regressions. Synthetic
generators for every estimator live at the bottom of the module.
"""

from __future__ import annotations

import csv
import enum
import math
import warnings
from dataclasses import dataclass, field, fields

import numpy as np
from scipy.signal import lfilter
from scipy.stats import norm
from statsmodels.regression.linear_model import OLS

__all__ = [
    "Participant",
    "TradeRecord",
    "TradeTable",
    "TradeParseError",
    "UnitRootWarning",
    "read_trades_csv",
    "write_trades_csv",
    "imbalance",
    "OuFit",
    "fit_ou",
    "KappaEstimate",
    "estimate_kappa",
    "ConditionedRates",
    "conditioned_rates",
    "level_index",
    "MoveRegression",
    "price_move_regression",
    "ar1_for_lag_targets",
    "simulate_ar1",
    "synth_trades",
    "synth_impact_trades",
    "synth_price_move_trades",
    "write_ou_table",
    "write_kappa_table",
    "write_move_table",
    "write_rates_table",
]

COLUMNS = ("timestamp", "price", "signed_qty", "best_bid_qty", "best_ask_qty",
           "participant_class", "mid_before", "mid_after")


class Participant(str, enum.Enum):
    GIB = "GIB"    # global investment bank
    IB = "IB"      # institutional broker
    HFMM = "HFMM"  # high-frequency market maker
    HFPT = "HFPT"  # high-frequency proprietary trader
    OTHER = "OTHER"


class TradeParseError(ValueError):
    """Malformed trade input; the message starts with the offending line."""


class UnitRootWarning(RuntimeWarning):
    """AR coefficient at or above one: the OU identification does not apply."""


@dataclass(frozen=True)
class TradeRecord:
    timestamp: float
    price: float
    signed_qty: float
    best_bid_qty: float
    best_ask_qty: float
    participant_class: Participant
    mid_before: float
    mid_after: float

    def __post_init__(self):
        if self.best_bid_qty < 0 or self.best_ask_qty < 0:
            raise ValueError("queue sizes must be non-negative")
        if self.best_bid_qty + self.best_ask_qty <= 0:
            raise ValueError("empty book: best bid and ask queues are both zero")


@dataclass
class TradeTable:
    """Columnar view of a trade stream (one array per CSV column)."""

    timestamp: np.ndarray
    price: np.ndarray
    signed_qty: np.ndarray
    best_bid_qty: np.ndarray
    best_ask_qty: np.ndarray
    participant_class: np.ndarray  # str codes
    mid_before: np.ndarray
    mid_after: np.ndarray

    def __len__(self):
        return self.timestamp.size

    @classmethod
    def from_records(cls, records) -> "TradeTable":
        records = list(records)
        cols = {}
        for f in fields(cls):
            vals = [getattr(r, f.name) for r in records]
            if f.name == "participant_class":
                cols[f.name] = np.array([Participant(v).value for v in vals], dtype=object)
            else:
                cols[f.name] = np.asarray(vals, dtype=float)
        return cls(**cols)

    def records(self) -> list[TradeRecord]:
        return [TradeRecord(*(getattr(self, c)[i] for c in COLUMNS[:5]),
                            Participant(self.participant_class[i]),
                            self.mid_before[i], self.mid_after[i]) for i in range(len(self))]

    @property
    def direction(self) -> np.ndarray:
        return np.sign(self.signed_qty)

    @property
    def imbalance(self) -> np.ndarray:
        return imbalance(self.best_bid_qty, self.best_ask_qty)


def _as_table(trades) -> TradeTable:
    return trades if isinstance(trades, TradeTable) else TradeTable.from_records(trades)


def read_trades_csv(path) -> TradeTable:
    """Stream a trade CSV with the exact column set and a header row.

    Raises
    ------
    TradeParseError
        With the 1-based line number for any malformed row, or for an empty file.
    """
    cols = {c: [] for c in COLUMNS}
    last_ts = -math.inf
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise TradeParseError("line 1: empty file, expected a header row") from None
        if tuple(h.strip() for h in header) != COLUMNS:
            raise TradeParseError(f"line 1: header must be {','.join(COLUMNS)}")
        for row in reader:
            ln = reader.line_num
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(COLUMNS):
                raise TradeParseError(f"line {ln}: expected {len(COLUMNS)} fields, got {len(row)}")
            try:
                vals = [float(v) for v in row[:5]] + [None] + [float(v) for v in row[6:]]
            except ValueError as exc:
                raise TradeParseError(f"line {ln}: {exc}") from None
            try:
                vals[5] = Participant(row[5].strip()).value
            except ValueError:
                raise TradeParseError(f"line {ln}: unknown participant class {row[5]!r}") from None
            if not all(math.isfinite(v) for i, v in enumerate(vals) if i != 5):
                raise TradeParseError(f"line {ln}: non-finite value")
            if vals[3] < 0 or vals[4] < 0 or vals[3] + vals[4] <= 0:
                raise TradeParseError(f"line {ln}: queue sizes must be >= 0 with a positive sum")
            if vals[0] < last_ts:
                raise TradeParseError(f"line {ln}: timestamps must be non-decreasing")
            last_ts = vals[0]
            for c, v in zip(COLUMNS, vals):
                cols[c].append(v)
    if not cols["timestamp"]:
        raise TradeParseError("line 2: no trades after the header")
    return TradeTable(**{c: (np.array(v, dtype=object) if c == "participant_class"
                             else np.asarray(v, dtype=float)) for c, v in cols.items()})


def write_trades_csv(path, trades):
    t = _as_table(trades)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(COLUMNS)
        for i in range(len(t)):
            w.writerow([repr(float(t.timestamp[i])), repr(float(t.price[i])),
                        repr(float(t.signed_qty[i])), repr(float(t.best_bid_qty[i])),
                        repr(float(t.best_ask_qty[i])), t.participant_class[i],
                        repr(float(t.mid_before[i])), repr(float(t.mid_after[i]))])


def imbalance(q_bid, q_ask):
    """``(Q_B - Q_A) / (Q_B + Q_A)``; rejects an empty book."""
    qb, qa = np.asarray(q_bid, dtype=float), np.asarray(q_ask, dtype=float)
    tot = qb + qa
    if np.any(tot <= 0) or np.any(qb < 0) or np.any(qa < 0):
        raise ValueError("queue sizes must be non-negative with a positive sum")
    out = (qb - qa) / tot
    return float(out) if out.ndim == 0 else out


# ---------------------------------------------------------------- OU fit

@dataclass(frozen=True)
class OuFit:
    """AR(1) fit at lag ``dn`` and the implied per-trade OU parameters.

    ``gamma_hat = (1 - a_dn) / dn`` is the mean-reversion speed per trade;
    ``persistence = 1 - gamma_hat`` is the per-trade retention, which is the
    quantity usually tabulated next to the lag.
    """

    dn: int
    a_dn: float
    sigma_tilde: float
    gamma_hat: float
    sigma_hat: float
    n: int
    a_se: float = math.nan
    sigma_tilde_se: float = math.nan
    level: float = 0.95
    unit_root: bool = False

    @property
    def persistence(self) -> float:
        return 1.0 - self.gamma_hat

    @property
    def gamma_se(self) -> float:
        return self.a_se / self.dn

    @property
    def sigma_se(self) -> float:
        return self.sigma_tilde_se / math.sqrt(self.dn)

    def _z(self):
        return float(norm.ppf(0.5 + self.level / 2))

    @property
    def gamma_ci(self) -> tuple[float, float]:
        z = self._z()
        return self.gamma_hat - z * self.gamma_se, self.gamma_hat + z * self.gamma_se

    @property
    def sigma_ci(self) -> tuple[float, float]:
        z = self._z()
        return self.sigma_hat - z * self.sigma_se, self.sigma_hat + z * self.sigma_se


def fit_ou(series, dn: int, *, intercept: bool = False, hac_lags: int | None = None,
           level: float = 0.95) -> OuFit:
    """Regress ``I_{n+dn}`` on ``I_n`` over all overlapping pairs.

    Standard errors are Newey-West with ``2 dn`` lags by default, since
    overlapping ``dn``-step residuals are serially correlated. The residual
    scale's error comes from the long-run variance of ``e^2`` and the delta
    method.

    Parameters
    ----------
    series : array
        Imbalance (or any signal) sampled in trade time.
    dn : int
        Lag in trades; the series must have at least ``100 dn`` points.
    intercept : bool
        Add a constant to the regression (diagnostic; off by default).
    """
    x = np.asarray(series, dtype=float)
    dn = int(dn)
    if dn < 1:
        raise ValueError("dn must be >= 1")
    if x.ndim != 1 or x.size < 100 * dn:
        raise ValueError(f"series needs at least {100 * dn} points for lag {dn}")
    if not np.all(np.isfinite(x)):
        raise ValueError("series contains non-finite values")
    y, z = x[dn:], x[:-dn]
    X = np.column_stack([z, np.ones_like(z)]) if intercept else z[:, None]
    lags = 2 * dn if hac_lags is None else int(hac_lags)
    if not np.any(z):
        raise ValueError("series is identically zero")
    res = OLS(y, X).fit()
    a = float(res.params[0])
    e = res.resid
    s2 = float(np.dot(e, e) / (e.size - X.shape[1]))
    s = math.sqrt(s2)
    if s2 > 0:
        a_se = float(np.sqrt(res.get_robustcov_results("HAC", maxlags=lags).cov_params()[0, 0]))
        e2 = e * e - s2
        v = OLS(e2, np.ones_like(e2)).fit(cov_type="HAC", cov_kwds={"maxlags": lags})
        s_se = math.sqrt(float(v.cov_params()[0, 0])) / (2.0 * s)
    else:
        a_se = s_se = 0.0

    unit_root = a >= 1.0
    if unit_root:
        warnings.warn(f"AR coefficient {a:.6f} >= 1 at lag {dn}: no mean reversion, "
                      "gamma_hat is not meaningful", UnitRootWarning, stacklevel=2)
    return OuFit(dn, a, s, (1.0 - a) / dn, s / math.sqrt(dn), int(y.size),
                 a_se, s_se, level, unit_root)


# ---------------------------------------------------------------- impact

@dataclass(frozen=True)
class KappaEstimate:
    kappa: float
    se: float
    mean_spread: float
    n: int

    @property
    def kappa_over_spread(self) -> float:
        return self.kappa / self.mean_spread if self.mean_spread > 0 else math.nan


def _spread(t: TradeTable) -> np.ndarray:
    # trades hit the touch, so the half-spread is the price-to-mid distance
    return 2.0 * np.abs(t.price - t.mid_before)


def estimate_kappa(trades) -> KappaEstimate:
    """Mean of ``sign(trade) * (mid_after - mid_before)``."""
    t = _as_table(trades)
    if len(t) == 0:
        raise ValueError("no trades")
    m = t.direction * (t.mid_after - t.mid_before)
    se = float(m.std(ddof=1) / math.sqrt(m.size)) if m.size > 1 else math.nan
    return KappaEstimate(float(m.mean()), se, float(_spread(t).mean()), int(m.size))


# ---------------------------------------------------------------- conditioned rates

def level_index(imb, n_bins: int = 21) -> np.ndarray:
    """Index of ``|imb|`` among the ``(n_bins + 1) // 2`` levels.

    The signed bins are centred on ``n_bins`` equally spaced points of
    ``[-1, 1]``; folding them by sign gives levels ``0, 1/m, ..., 1``.
    """
    if n_bins < 3 or n_bins % 2 == 0:
        raise ValueError("n_bins must be odd and >= 3")
    m = (n_bins - 1) // 2
    return np.rint(np.abs(np.asarray(imb, dtype=float)) * m).astype(int)


@dataclass
class ConditionedRates:
    """Imbalance-conditioned rates for every participant class.

    Arrays are indexed ``[class, level]``; unpopulated cells are NaN.
    ``partition`` holds ``sum_P (R+ + R-) / A`` per ``(interval, level)``.
    """

    classes: list
    levels: np.ndarray
    n_trades: np.ndarray
    r_plus: np.ndarray
    r_minus: np.ndarray
    r_plus_se: np.ndarray
    r_minus_se: np.ndarray
    partition: np.ndarray = field(repr=False)

    @property
    def r_hat_plus(self) -> np.ndarray:
        return self.r_plus / self.r_plus[:, :1]

    @property
    def r_hat_minus(self) -> np.ndarray:
        return self.r_minus / self.r_minus[:, :1]

    def row(self, cls) -> dict:
        i = self.classes.index(Participant(cls).value)
        return {k: getattr(self, k)[i] for k in
                ("n_trades", "r_plus", "r_minus", "r_plus_se", "r_minus_se",
                 "r_hat_plus", "r_hat_minus")}


def conditioned_rates(trades, interval: float = 600.0, n_bins: int = 21,
                      classes=None) -> ConditionedRates:
    """Per-class share of in- and against-imbalance volume, by ``|Imb|`` level.

    Within each time interval and level, ``R+`` (``R-``) of a class is its
    volume traded in (against) the imbalance direction divided by its number
    of trades there; trades at exactly zero imbalance count in that number
    but in neither volume. ``A`` is the sum over classes of ``R+ + R-`` and
    the class rates are ``R+/A`` and ``R-/A`` averaged over the intervals
    where ``A > 0``.
    """
    t = _as_table(trades)
    if len(t) == 0:
        raise ValueError("no trades")
    if not interval > 0:
        raise ValueError("interval must be positive")
    classes = [Participant(c).value for c in (classes or [p.value for p in Participant])]
    m = (n_bins - 1) // 2
    lv = level_index(t.imbalance, n_bins)
    cmap = {c: i for i, c in enumerate(classes)}
    keep = np.array([c in cmap for c in t.participant_class])
    ci = np.array([cmap.get(c, -1) for c in t.participant_class])[keep]
    iv = np.floor((t.timestamp - t.timestamp[0]) / interval).astype(np.int64)[keep]
    lv = lv[keep]
    s = (t.direction * np.sign(t.imbalance))[keep]
    vol = np.abs(t.signed_qty)[keep]

    n_iv, n_c, n_l = int(iv.max()) + 1 if iv.size else 0, len(classes), m + 1
    shape = (n_iv, n_c, n_l)
    flat = np.ravel_multi_index((iv, ci, lv), shape)
    size = n_iv * n_c * n_l
    N = np.bincount(flat, minlength=size).reshape(shape)
    Vp = np.bincount(flat, weights=vol * (s > 0), minlength=size).reshape(shape)
    Vm = np.bincount(flat, weights=vol * (s < 0), minlength=size).reshape(shape)
    with np.errstate(invalid="ignore", divide="ignore"):
        Rp = np.where(N > 0, Vp / N, 0.0)  # an absent class contributes nothing
        Rm = np.where(N > 0, Vm / N, 0.0)
        A = (Rp + Rm).sum(axis=1)  # (interval, level)
        ok = A > 0
        sp = np.where(ok[:, None, :], Rp / A[:, None, :], np.nan)
        sm = np.where(ok[:, None, :], Rm / A[:, None, :], np.nan)
        partition = np.where(ok, (sp + sm).sum(axis=1), np.nan)

        cnt = ok.sum(axis=0)  # intervals with A > 0, per level
        def avg(v):
            mu = np.nansum(v, axis=0) / cnt
            var = np.nansum((v - mu) ** 2, axis=0) / (cnt - 1)
            return (np.where(cnt > 0, mu, np.nan),
                    np.where(cnt > 1, np.sqrt(var / cnt), np.nan))
        rp, rp_se = avg(sp)
        rm, rm_se = avg(sm)
    n_tr = N.sum(axis=0)
    # a class never seen at a level is missing there, not zero
    for arr in (rp, rp_se, rm, rm_se):
        arr[n_tr == 0] = np.nan
    return ConditionedRates(classes, np.arange(n_l) / m, n_tr, rp, rm, rp_se, rm_se, partition)


# ---------------------------------------------------------------- price moves

@dataclass(frozen=True)
class MoveRegression:
    horizon: int
    slope: float
    slope_se: float
    intercept: float
    r_squared: float
    n: int


def price_move_regression(trades, horizon: int = 10) -> MoveRegression:
    """OLS (with intercept) of the spread-normalised mid move over the next
    ``horizon`` trades on the imbalance just before the first of them."""
    t = _as_table(trades)
    horizon = int(horizon)
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    n = len(t) - horizon + 1
    if n < 3:
        raise ValueError("not enough trades for this horizon")
    spread = float(_spread(t).mean())
    if not spread > 0:
        raise ValueError("mean spread is zero; cannot normalise moves")
    move = (t.mid_after[horizon - 1:] - t.mid_before[:n]) / spread
    imb = t.imbalance[:n]
    res = OLS(move, np.column_stack([np.ones(n), imb])).fit()
    return MoveRegression(horizon, float(res.params[1]), float(res.bse[1]),
                          float(res.params[0]), float(res.rsquared), n)


# ---------------------------------------------------------------- synthetic data

def ar1_for_lag_targets(gamma_hat: float, sigma_hat: float, dn: int) -> tuple[float, float]:
    """Per-trade AR(1) ``(q, s)`` whose exact lag-``dn`` regression has
    ``(1 - a_dn)/dn == gamma_hat`` and ``sigma_tilde/sqrt(dn) == sigma_hat``."""
    a = 1.0 - gamma_hat * dn
    if not 0 < a < 1:
        raise ValueError("targets imply a lag coefficient outside (0, 1)")
    q = a ** (1.0 / dn)
    resid_var = sigma_hat**2 * dn
    s = math.sqrt(resid_var * (1 - q * q) / (1 - a * a))
    return q, s


def simulate_ar1(n: int, q: float, s: float, seed=None, x0: float | None = None) -> np.ndarray:
    """``x_{k+1} = q x_k + s eps_k``, started from the stationary law by default."""
    rng = np.random.default_rng(seed)
    if x0 is None:
        x0 = rng.standard_normal() * s / math.sqrt(1 - q * q) if abs(q) < 1 else 0.0
    eps = rng.standard_normal(n - 1) * s
    out = np.empty(n)
    out[0] = x0
    out[1:], _ = lfilter([1.0], [1.0, -q], eps, zi=[q * x0])
    return out


def synth_trades(n: int, seed=None, *, kappa: float = 0.005, spread: float = 0.05,
                 impact_noise: float = 0.01, size: float = 100.0,
                 imbalance_model: str = "ar", ar_q: float = 0.9, ar_s: float = 0.2,
                 followers=("HFPT",), blind=("IB", "GIB", "HFMM"),
                 trade_spacing: float = 1.0, mid0: float = 100.0) -> TradeTable:
    """Synthetic trade stream with known behaviour.

    Imbalance is a clipped AR(1) in trade time (``imbalance_model="ar"``) or
    i.i.d. uniform on ``[-1, 1]`` (``"uniform"``). Follower classes trade in
    the imbalance direction with probability ``(1 + |Imb|)/2``; blind classes
    pick a side at random. Every trade moves the mid by ``kappa`` in its
    direction plus Gaussian noise, and executes half a spread from the mid.
    """
    rng = np.random.default_rng(seed)
    if imbalance_model == "ar":
        imb = np.clip(simulate_ar1(n, ar_q, ar_s, rng.integers(2**63)), -1.0, 1.0)
    elif imbalance_model == "uniform":
        imb = rng.uniform(-1.0, 1.0, n)
    else:
        raise ValueError(f"unknown imbalance model {imbalance_model!r}")
    qb, qa = 500.0 * (1.0 + imb), 500.0 * (1.0 - imb)

    pool = list(followers) + list(blind)
    cls = np.array([Participant(c).value for c in pool], dtype=object)[rng.integers(len(pool), size=n)]
    follow = np.isin(cls, [Participant(c).value for c in followers])
    sgn = np.sign(imbalance(qb, qa))
    coin = np.where(rng.random(n) < 0.5, 1.0, -1.0)
    with_flow = rng.random(n) < 0.5 * (1.0 + np.abs(imb))
    eps = np.where(follow & (sgn != 0), np.where(with_flow, sgn, -sgn), coin)

    jumps = kappa * eps + impact_noise * rng.standard_normal(n)
    mid_after = mid0 + np.cumsum(jumps)
    mid_before = np.concatenate([[mid0], mid_after[:-1]])
    return TradeTable(np.arange(n) * trade_spacing, mid_before + 0.5 * spread * eps,
                      eps * size, qb, qa, cls, mid_before, mid_after)


def synth_impact_trades(n: int, kappa: float, noise_sd: float | None = None, seed=None,
                        spread: float = 0.05) -> TradeTable:
    """Linear-impact stream: each trade moves the mid by ``kappa * sign`` plus noise."""
    noise_sd = 2.0 * kappa if noise_sd is None else noise_sd
    return synth_trades(n, seed, kappa=kappa, impact_noise=noise_sd, spread=spread)


def synth_price_move_trades(n: int, horizon: int, slope: float, noise_sd: float = 0.0,
                            seed=None, spread: float = 0.05) -> TradeTable:
    """Stream whose forward mid move over ``horizon`` trades, in spreads, is
    exactly ``slope * Imb + noise`` for every starting trade.

    Quotes may move between trades here, so the per-trade mid changes carry
    no impact information; use it for the move regression only.
    """
    rng = np.random.default_rng(seed)
    imb = rng.uniform(-1.0, 1.0, n)
    eps = np.where(rng.random(n) < 0.5, 1.0, -1.0)
    mid0 = 100.0
    mid_before = np.full(n, mid0)
    move = spread * (slope * imb + noise_sd * rng.standard_normal(n))
    mid_after = np.full(n, mid0)
    mid_after[horizon - 1:] = mid0 + move[: n - horizon + 1]
    cls = np.full(n, Participant.OTHER.value, dtype=object)
    return TradeTable(np.arange(n, dtype=float), mid_before + 0.5 * spread * eps, 100.0 * eps,
                      500.0 * (1 + imb), 500.0 * (1 - imb), cls, mid_before, mid_after)


# ---------------------------------------------------------------- tables

def _w(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for r in rows:
            w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in r])


def write_ou_table(path, fits: list[OuFit]):
    """One row per lag: AR coefficient, per-trade OU parameters and their CIs."""
    rows = []
    for f in fits:
        g0, g1 = f.gamma_ci
        s0, s1 = f.sigma_ci
        rows.append([f.dn, f.n, f.a_dn, f.a_se, f.sigma_tilde, f.gamma_hat, g0, g1,
                     f.persistence, f.sigma_hat, s0, s1, int(f.unit_root)])
    _w(path, ["dn", "n", "a_dn", "a_se", "sigma_tilde", "gamma_hat", "gamma_lo", "gamma_hi",
              "persistence", "sigma_hat", "sigma_lo", "sigma_hi", "unit_root"], rows)


def write_kappa_table(path, k: KappaEstimate):
    _w(path, ["kappa", "kappa_se", "mean_spread", "kappa_over_spread", "n"],
       [[k.kappa, k.se, k.mean_spread, k.kappa_over_spread, k.n]])


def write_move_table(path, regs: list[MoveRegression]):
    _w(path, ["horizon", "slope", "slope_se", "intercept", "r_squared", "n"],
       [[r.horizon, r.slope, r.slope_se, r.intercept, r.r_squared, r.n] for r in regs])


def write_rates_table(path, cr: ConditionedRates):
    rows = []
    for i, c in enumerate(cr.classes):
        for j, lv in enumerate(cr.levels):
            rows.append([c, float(lv), int(cr.n_trades[i, j]), cr.r_plus[i, j], cr.r_minus[i, j],
                         cr.r_plus_se[i, j], cr.r_minus_se[i, j],
                         cr.r_hat_plus[i, j], cr.r_hat_minus[i, j]])
    _w(path, ["participant", "level", "n_trades", "r_plus", "r_minus", "r_plus_se",
              "r_minus_se", "r_hat_plus", "r_hat_minus"], rows)
