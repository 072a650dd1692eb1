"""Experiment harness: coherence sweeps, Gram histograms and CS recovery curves.

Every random draw is seeded from a hash of the master seed and the cell
coordinates (method, point shape, repeat, trial), so a cell's result does not
depend on which other cells run or in what order.
"""

import csv
from dataclasses import asdict, dataclass, field, fields, replace
import hashlib
import json
import logging
import math
import os
import time

import numpy as np
import yaml

from . import baselines
from .dmcm import ContinuationSchedule, dmcm_continuation, random_unit_matrix
from .dmcmp import AmSchedule, Dictionary, dmcmp_continuation
from .errors import CoherenceError, ConfigError
from .matcore import coherence_of, gram_abs_histogram, normalize_columns, welch_bound
from .recovery import DEFAULT_THRESHOLD, gen_sparse_signal, omp, recon_error

log = logging.getLogger(__name__)

METHODS = ("dmcm", "dmcm-p", "elad", "xu", "duarte", "random")
WELCH_SLACK = 1e-12


class CellError(CoherenceError):
    """A solver failure, tagged with the experiment cell it happened in."""

    def __init__(self, method, point, repeat, cause):
        self.method, self.point, self.repeat, self.cause = method, point, repeat, cause
        super().__init__(f"{method} failed at (m, n, d) = {point}, repeat {repeat}: {cause}")


def derive_seed(master_seed, *key):
    """64-bit seed from ``master_seed`` and a tuple of cell coordinates."""
    text = "|".join(str(k) for k in (master_seed,) + key)
    return int.from_bytes(hashlib.sha256(text.encode()).digest()[:8], "little")


@dataclass
class ExperimentConfig:
    scheme: list
    methods: list = field(default_factory=lambda: list(METHODS))
    repeats: int = 10
    trials_per_point: int = 200
    sparsity: list = field(default_factory=lambda: [2])
    success_threshold: float = DEFAULT_THRESHOLD
    master_seed: int = 0
    # "gaussian": random d x n dictionary per (shape, repeat); "identity": D = I_n.
    dictionary: str = "gaussian"
    dmcm: ContinuationSchedule = field(default_factory=ContinuationSchedule)
    dmcmp: AmSchedule = field(default_factory=AmSchedule)
    elad: list = field(default_factory=lambda: [baselines.EladParams()])
    xu: baselines.XuParams = field(default_factory=baselines.XuParams)
    histogram: dict = None

    def __post_init__(self):
        pts = []
        for p in self.scheme:
            try:
                m, n, d = (int(v) for v in p)
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"scheme entries must be (m, n, d) triples, got {p!r}") from exc
            if self.dictionary == "identity":
                d = n
            if not (1 <= m <= d <= n and n >= 2):
                raise ConfigError(f"scheme point {(m, n, d)} violates m <= d <= n")
            if self.dictionary == "gaussian" and d == n and "dmcm-p" in self.methods:
                raise ConfigError(f"dmcm-p needs d < n, got point {(m, n, d)}")
            pts.append((m, n, d))
        if not pts:
            raise ConfigError("scheme is empty")
        self.scheme = pts
        unknown = set(self.methods) - set(METHODS)
        if unknown:
            raise ConfigError(f"unknown methods {sorted(unknown)}; choose from {METHODS}")
        if self.dictionary not in ("gaussian", "identity"):
            raise ConfigError(f"dictionary must be 'gaussian' or 'identity', got {self.dictionary!r}")
        if int(self.repeats) < 1 or int(self.trials_per_point) < 0:
            raise ConfigError("repeats must be >= 1 and trials_per_point >= 0")
        if not self.success_threshold > 0:
            raise ConfigError("success_threshold must be positive")
        self.sparsity = [int(t) for t in self.sparsity]
        if any(t < 0 for t in self.sparsity):
            raise ConfigError("sparsity levels must be nonnegative")


# -- config files -------------------------------------------------------------

_SCHEDULE_KEYS = {f.name for f in fields(ContinuationSchedule)}
_AM_KEYS = {f.name for f in fields(AmSchedule)}


def _block(cls, raw, allowed, name):
    raw = dict(raw or {})
    extra = set(raw) - allowed
    if extra:
        raise ConfigError(f"unknown keys in {name} block: {sorted(extra)}")
    try:
        return cls(**raw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad {name} block: {exc}") from exc


def config_from_dict(raw):
    """Build an :class:`ExperimentConfig` from plain data (as loaded from YAML)."""
    raw = dict(raw)
    known = {f.name for f in fields(ExperimentConfig)}
    extra = set(raw) - known
    if extra:
        raise ConfigError(f"unknown config keys: {sorted(extra)}")
    if "scheme" not in raw:
        raise ConfigError("config needs a 'scheme' list of [m, n, d] triples")
    if "dmcm" in raw:
        raw["dmcm"] = _block(ContinuationSchedule, raw["dmcm"], _SCHEDULE_KEYS, "dmcm")
    if "dmcmp" in raw:
        raw["dmcmp"] = _block(AmSchedule, raw["dmcmp"], _AM_KEYS, "dmcmp")
    if "elad" in raw:
        blocks = raw["elad"] if isinstance(raw["elad"], list) else [raw["elad"]]
        raw["elad"] = [_block(baselines.EladParams, b, {"t", "down_scale", "iters"}, "elad")
                       for b in blocks]
    if "xu" in raw:
        raw["xu"] = _block(baselines.XuParams, raw["xu"], {"iters"}, "xu")
    try:
        return ExperimentConfig(**raw)
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from exc


def load_config(path):
    try:
        with open(path) as fh:
            raw = yaml.safe_load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"config {path} is not valid YAML: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError(f"config {path} must be a mapping")
    return config_from_dict(raw)


# -- records ------------------------------------------------------------------

@dataclass
class TrialRecord:
    method: str
    params: str
    m: int
    n: int
    d: int
    T: int
    repeat: int
    trial: int
    seed: int
    coherence: float
    welch: float
    recon_error: float = math.nan
    success: bool = None
    seconds: float = field(default=math.nan, compare=False)


# ``seconds`` is kept out of the raw table so reruns are byte-identical.
RAW_COLUMNS = [f.name for f in fields(TrialRecord) if f.name != "seconds"]
AGG_COLUMNS = ["method", "params", "m", "n", "d", "T", "count", "coherence_mean",
               "coherence_std", "error_mean", "error_std", "failure_rate", "welch"]


def _tag(method, cfg, elad_params=None):
    if method == "elad":
        return f"t={elad_params.t:g};down_scale={elad_params.down_scale:g};iters={elad_params.iters}"
    if method == "xu":
        return f"iters={cfg.xu.iters}"
    if method == "dmcm":
        s = cfg.dmcm
        return f"rho0={s.rho0:g};eta={s.eta:g};T={s.outer_iters};K={s.inner_iters};rho_t={s.rho_floor:g}"
    if method == "dmcm-p":
        s = cfg.dmcmp
        return (f"rho0={s.rho0:g};beta0={s.beta0:g};eta={s.eta:g};T={s.outer_iters};"
                f"K={s.inner_iters};rho_t={s.rho_floor:g};beta_t={s.beta_floor:g}")
    return ""


def _variants(cfg):
    """Expand the method list into ``(method, params, elad_params)`` cells."""
    out = []
    for method in cfg.methods:
        if method == "elad":
            out.extend(("elad", _tag("elad", cfg, p), p) for p in cfg.elad)
        else:
            out.append((method, _tag(method, cfg), None))
    return out


def _dictionary(cfg, point, repeat):
    m, n, d = point
    if cfg.dictionary == "identity":
        return Dictionary.identity(n)
    return Dictionary.gaussian(d, n, derive_seed(cfg.master_seed, "dictionary", n, d, repeat))


def design(method, point, D, cfg, seed, elad_params=None):
    """Run one design method. Returns the effective dictionary ``M`` (m x n, unnormalized).

    For ``dmcm`` this is the optimized unit-column matrix itself; for every
    other method it is ``P D``.
    """
    m, n, d = point
    if method == "dmcm":
        M, _ = dmcm_continuation(random_unit_matrix(m, n, seed), cfg.dmcm)
        return M
    if method == "dmcm-p":
        _, P, _ = dmcmp_continuation(D, m, cfg.dmcmp, seed=seed)
    elif method == "elad":
        P = baselines.elad_projection(D, m, elad_params, seed)
    elif method == "xu":
        P = baselines.xu_projection(D, m, cfg.xu, seed)
    elif method == "duarte":
        P = baselines.duarte_projection(D, m, seed=seed)
    elif method == "random":
        P = baselines.random_projection(m, D.d, seed)
    else:
        raise ConfigError(f"unknown method {method!r}")
    return P @ D.matrix


def _design_cell(method, params, elad_params, point, repeat, D, cfg):
    seed = derive_seed(cfg.master_seed, method, params, *point, repeat)
    t0 = time.perf_counter()
    try:
        M = design(method, point, D, cfg, seed, elad_params)
    except CoherenceError as exc:
        raise CellError(method, point, repeat, exc) from exc
    return M, seed, time.perf_counter() - t0


def run_coherence_experiment(cfg):
    """One record per (point, method variant, repeat) with the achieved coherence."""
    records = []
    for point in cfg.scheme:
        m, n, d = point
        wb = welch_bound(m, n)
        for repeat in range(int(cfg.repeats)):
            D = _dictionary(cfg, point, repeat)
            for method, params, ep in _variants(cfg):
                M, seed, secs = _design_cell(method, params, ep, point, repeat, D, cfg)
                mu = coherence_of(M)
                records.append(TrialRecord(method, params, m, n, d, 0, repeat, 0, seed,
                                           mu, wb, seconds=secs))
                log.info("%s %s repeat %d: mu=%.4f (welch %.4f)", method, point, repeat, mu, wb)
    return records


def run_cs_experiment(cfg):
    """Monte Carlo OMP recovery for every (point, sparsity, method variant).

    ``trials_per_point`` signals are drawn per (point, T); trial ``i`` is
    measured with the design built for repeat ``i % repeats``. Signals are
    shared across methods so comparisons are paired. Designs depend only on
    (method, shape, repeat), so they are reused across sparsity levels.
    """
    if "dmcm" in cfg.methods:
        raise ConfigError("dmcm designs an M without a projection; use dmcm-p for CS runs")
    records = []
    cache = {}
    R = int(cfg.repeats)
    for point in cfg.scheme:
        m, n, d = point
        wb = welch_bound(m, n)
        dicts = {}
        for T in cfg.sparsity:
            if T > m:
                raise ConfigError(f"sparsity {T} exceeds m = {m}")
            for method, params, ep in _variants(cfg):
                for trial in range(int(cfg.trials_per_point)):
                    repeat = trial % R
                    if repeat not in dicts:
                        dicts[repeat] = _dictionary(cfg, point, repeat)
                    D = dicts[repeat]
                    key = (method, params, point, repeat)
                    if key not in cache:
                        M, seed, secs = _design_cell(method, params, ep, point, repeat, D, cfg)
                        norms = np.linalg.norm(M, axis=0)
                        cache[key] = (normalize_columns(M), norms, coherence_of(M), seed, secs)
                    Mn, norms, mu, seed, secs = cache[key]
                    sig_seed = derive_seed(cfg.master_seed, "signal", *point, T, trial)
                    alpha = gen_sparse_signal(n, T, sig_seed)
                    y = Mn @ (alpha.dense() * norms)
                    res = omp(Mn, y, T)
                    alpha_hat = res.estimate / norms
                    err = recon_error(D, alpha, alpha_hat)
                    records.append(TrialRecord(
                        method, params, m, n, d, T, repeat, trial, sig_seed, mu, wb,
                        recon_error=err, success=bool(err * err < cfg.success_threshold),
                        seconds=secs if trial < R else 0.0))
        log.info("cs point %s done", point)
    return records


def run_histogram_experiment(cfg, bins=20):
    """Gram-magnitude histograms for the point in ``cfg.histogram`` (repeat 0).

    Returns ``{method tag: (edges, counts)}``.
    """
    spec = cfg.histogram or {}
    point = tuple(int(v) for v in spec.get("point", cfg.scheme[0]))
    bins = int(spec.get("bins", bins))
    edges = np.linspace(0.0, 1.0, bins + 1)
    D = _dictionary(cfg, point, 0)
    out = {}
    for method, params, ep in _variants(cfg):
        M, _, _ = _design_cell(method, params, ep, point, 0, D, cfg)
        label = method if method != "elad" else f"elad[{params}]"
        out[label] = (edges, gram_abs_histogram(normalize_columns(M), edges))
    return point, out


def check_welch(records):
    """Records whose coherence falls below their Welch bound (should be empty)."""
    return [r for r in records if r.coherence < r.welch - WELCH_SLACK]


# -- aggregation & output -----------------------------------------------------

def _std(vals):
    return float(np.std(vals, ddof=1)) if len(vals) > 1 else 0.0


def aggregate(records):
    """Per (method, params, m, n, d, T) summary rows, sorted by key.

    The coherence statistics are over distinct designs (one per repeat);
    error statistics and the failure rate are over all trials, failures
    included.
    """
    groups = {}
    for r in records:
        groups.setdefault((r.method, r.params, r.m, r.n, r.d, r.T), []).append(r)
    rows = []
    for key in sorted(groups):
        grp = sorted(groups[key], key=lambda r: (r.repeat, r.trial))
        mus = [r.coherence for r in {r.repeat: r for r in grp}.values()]
        errs = [r.recon_error for r in grp if not math.isnan(r.recon_error)]
        succ = [r.success for r in grp if r.success is not None]
        rows.append(dict(zip(AGG_COLUMNS, (
            *key, len(grp), float(np.mean(mus)), _std(mus),
            float(np.mean(errs)) if errs else math.nan, _std(errs) if errs else math.nan,
            (1.0 - float(np.mean(succ))) if succ else math.nan, grp[0].welch))))
    return rows


def _fmt(v):
    if isinstance(v, bool) or v is None:
        return "" if v is None else str(int(v))
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _jsonable(v):
    if isinstance(v, float) and not math.isfinite(v):
        return None
    return v


def write_csv(path, columns, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([_fmt(row[c]) for c in columns])


def write_json(path, rows):
    with open(path, "w") as fh:
        json.dump([{k: _jsonable(v) for k, v in row.items()} for row in rows], fh, indent=1)
        fh.write("\n")


def write_dat(path, columns, rows):
    """Whitespace table with a ``#`` header line, readable by gnuplot."""
    with open(path, "w") as fh:
        fh.write("# " + " ".join(columns) + "\n")
        for row in rows:
            fh.write(" ".join(_fmt(row[c]).replace(" ", "_") or "nan" for c in columns) + "\n")


def _raw_rows(records):
    return [{c: getattr(r, c) for c in RAW_COLUMNS} for r in records]


def emit_results(records, fmt, out_dir, prefix="", histograms=None):
    """Write the raw and aggregated tables (plus optional histograms) to ``out_dir``.

    ``fmt`` is ``"csv"``, ``"json"`` or ``"dat"``. Files written:
    ``<prefix>raw.<ext>``, ``<prefix>aggregate.<ext>``, ``<prefix>timings.csv``
    and, when ``histograms`` is given, one ``<prefix>hist_<method>.<ext>`` per
    method. Returns the list of paths.
    """
    if not records:
        raise ValueError("no records to emit")
    if fmt not in ("csv", "json", "dat"):
        raise ValueError(f"unknown format {fmt!r}")
    paths = []
    try:
        os.makedirs(out_dir, exist_ok=True)

        def put(name, columns, rows):
            path = os.path.join(out_dir, f"{prefix}{name}.{fmt}")
            if fmt == "csv":
                write_csv(path, columns, rows)
            elif fmt == "json":
                write_json(path, rows)
            else:
                write_dat(path, columns, rows)
            paths.append(path)

        put("raw", RAW_COLUMNS, _raw_rows(records))
        put("aggregate", AGG_COLUMNS, aggregate(records))
        for label, (edges, counts) in (histograms or {}).items():
            rows = [dict(bin_lower=float(lo), bin_upper=float(hi), count=int(c))
                    for lo, hi, c in zip(edges[:-1], edges[1:], counts)]
            safe = "".join(ch if ch.isalnum() or ch in "-_" else "_" for ch in label)
            put(f"hist_{safe}", ["bin_lower", "bin_upper", "count"], rows)
        tpath = os.path.join(out_dir, f"{prefix}timings.csv")
        write_csv(tpath, ["method", "params", "m", "n", "d", "T", "repeat", "trial", "seconds"],
                  [asdict(r) for r in records])
        paths.append(tpath)
    except OSError as exc:
        raise OSError(exc.errno, f"cannot write results: {exc.strerror}", exc.filename) from exc
    return paths


_INT_COLS = {"m", "n", "d", "T", "repeat", "trial", "seed"}
_FLOAT_COLS = {"coherence", "welch", "recon_error"}


def read_raw_csv(path):
    """Parse a raw table written by :func:`emit_results` back into records."""
    out = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            kw = {}
            for k, v in row.items():
                if k in _INT_COLS:
                    kw[k] = int(v)
                elif k in _FLOAT_COLS:
                    kw[k] = float(v)
                elif k == "success":
                    kw[k] = None if v == "" else bool(int(v))
                else:
                    kw[k] = v
            out.append(TrialRecord(**kw))
    return out


def with_overrides(cfg, **kw):
    """Copy of ``cfg`` with fields replaced (re-validated)."""
    return replace(cfg, **kw)
