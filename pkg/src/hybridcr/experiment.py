"""Experiment configuration, parameter sweeps and CSV/plot emission."""

from __future__ import annotations

import csv
import dataclasses
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from statistics import NormalDist

import numpy as np

from .belief import OutageModel, RewardTable, build_reward_table
from .channel import (
    ChannelModel,
    ChannelParams,
    InvalidParamsError,
    ModelInvalidError,
    db_to_linear,
    doppler_frequency,
)
from .sim import LinkBudget, Metrics, Mode, RunConfig, run

CSV_HEADER = ("mode", "lambda_p", "alpha", "su_throughput", "su_ci95", "pu_throughput", "mean_qp")
Z95 = NormalDist().inv_cdf(0.975)


class ConfigParseError(ValueError):
    def __init__(self, message: str, line: int | None = None, key: str | None = None):
        where = []
        if line is not None:
            where.append(f"line {line}")
        if key is not None:
            where.append(f"key {key!r}")
        super().__init__(f"{', '.join(where)}: {message}" if where else message)
        self.line = line
        self.key = key


class ConfigValidationError(ValueError):
    def __init__(self, problems: list[str]):
        super().__init__("invalid configuration:\n  " + "\n  ".join(problems))
        self.problems = list(problems)


def default_lambda_grid() -> tuple[float, ...]:
    return parse_grid("0:1:0.05")


@dataclass(frozen=True)
class ExperimentConfig:
    # channel, natural units; SNRs in dB
    bandwidth_hz: float = 6e6
    eta_bps: float = 3e6
    levels: int = 8
    gamma_op_db: float = 15.0
    gamma_os_db: float = 45.0
    gamma_ops_db: float = 20.0
    gamma_spd_db: float = 45.0
    gamma_sp_int_db: float = 10.0
    gamma_psd_db: float = 10.0
    carrier_hz: float = 50e6
    speed_mps: float = 2.0
    tau_s: float = 0.1
    rate_p: float = 3.5
    rate_s: float = 3.5
    reward_coop: tuple[float, ...] = (1.0,)
    reward_underlay: tuple[float, ...] = (1.0,)
    # sweep
    modes: tuple[Mode, ...] = (Mode.NONCOOP, Mode.COOP, Mode.HYBRID)
    lambda_grid: tuple[float, ...] = field(default_factory=default_lambda_grid)
    alphas: tuple[float, ...] = (0.2,)
    slots: int = 200_000
    seeds: int = 10
    master_seed: int = 20170101
    output: str = "throughput.csv"
    figure: str = "fig3"

    def __post_init__(self):
        problems = validate(self)
        if problems:
            raise ConfigValidationError(problems)

    @property
    def gamma_pd(self) -> float:
        return db_to_linear(self.gamma_op_db)

    @property
    def fdopp(self) -> float:
        return doppler_frequency(self.speed_mps, self.carrier_hz)

    def channel_params(self) -> ChannelParams:
        return ChannelParams(
            K=self.levels,
            eta=self.eta_bps,
            B=self.bandwidth_hz,
            gamma0=self.gamma_pd,
            fdopp=self.fdopp,
            tau_pkt=self.tau_s,
        )

    def outage(self) -> OutageModel:
        return OutageModel(self.rate_p, self.rate_s)

    def links(self, alpha: float) -> LinkBudget:
        return LinkBudget(
            gamma_pd=self.gamma_pd,
            gamma_ps=db_to_linear(self.gamma_ops_db),
            gamma_sd=db_to_linear(self.gamma_os_db),
            gamma_spd=db_to_linear(self.gamma_spd_db),
            gamma_sp_int=db_to_linear(self.gamma_sp_int_db),
            gamma_psd=db_to_linear(self.gamma_psd_db),
            alpha=alpha,
        )

    def build(self) -> tuple[ChannelModel, RewardTable]:
        """Channel model and reward table; ModelInvalidError names the config."""
        try:
            model = ChannelModel.from_params(self.channel_params())
        except ModelInvalidError as exc:
            raise ModelInvalidError(
                f"{exc} [levels={self.levels}, tau_s={self.tau_s}, speed_mps={self.speed_mps}, "
                f"carrier_hz={self.carrier_hz}, gamma_op_db={self.gamma_op_db}]",
                level=exc.level,
            ) from exc
        table = build_reward_table(
            model.bounds, self.outage(), model.params.gamma0, self.reward_coop, self.reward_underlay
        )
        return model, table


def validate(cfg: ExperimentConfig) -> list[str]:
    problems = []
    try:
        cfg.channel_params()
    except InvalidParamsError as exc:
        problems.append(str(exc))
    for name in ("carrier_hz", "speed_mps"):
        if getattr(cfg, name) < 0:
            problems.append(f"{name} must be >= 0")
    for name in ("rate_p", "rate_s"):
        if not getattr(cfg, name) > 0:
            problems.append(f"{name} must be > 0")
    for name in ("reward_coop", "reward_underlay"):
        vals = getattr(cfg, name)
        if len(vals) not in (1, cfg.levels):
            problems.append(f"{name} needs 1 or {cfg.levels} values (got {len(vals)})")
        if any(v < 0 for v in vals):
            problems.append(f"{name} values must be non-negative")
    if not cfg.modes:
        problems.append("modes must not be empty")
    grid = cfg.lambda_grid
    if not grid:
        problems.append("lambda_grid must not be empty")
    elif any(not 0.0 <= x <= 1.0 for x in grid):
        problems.append("lambda_grid values must lie in [0, 1]")
    elif any(b <= a for a, b in zip(grid, grid[1:])):
        problems.append("lambda_grid must be strictly increasing")
    if not cfg.alphas:
        problems.append("alphas must not be empty")
    elif any(not 0.0 < a <= 1.0 for a in cfg.alphas):
        problems.append("alpha values must lie in (0, 1]")
    if cfg.slots < 1:
        problems.append("slots must be >= 1")
    if cfg.seeds < 1:
        problems.append("seeds must be >= 1")
    if cfg.master_seed < 0:
        problems.append("master_seed must be >= 0")
    if cfg.figure not in ("fig3", "fig4"):
        problems.append("figure must be fig3 or fig4")
    return problems


def parse_grid(text: str) -> tuple[float, ...]:
    """``start:stop:step`` (inclusive of stop) or a comma-separated list."""
    text = text.strip()
    if not text:
        return ()
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise ValueError(f"grid {text!r} is not start:stop:step")
        start, stop, step = (float(p) for p in parts)
        if not step > 0:
            raise ValueError("grid step must be > 0")
        n = int(math.floor((stop - start) / step + 1e-9)) + 1
        return tuple(round(start + i * step, 12) for i in range(max(n, 0)))
    return tuple(float(p) for p in text.split(",") if p.strip())


def _parse_floats(text: str) -> tuple[float, ...]:
    return tuple(float(p) for p in text.split(",") if p.strip())


def _parse_modes(text: str) -> tuple[Mode, ...]:
    return tuple(Mode.parse(p) for p in text.split(",") if p.strip())


def _parse_int(text: str) -> int:
    value = float(text)
    if value != int(value):
        raise ValueError(f"{text!r} is not an integer")
    return int(value)


_CONVERTERS = {
    "bandwidth_hz": float,
    "eta_bps": float,
    "levels": _parse_int,
    "gamma_op_db": float,
    "gamma_os_db": float,
    "gamma_ops_db": float,
    "gamma_spd_db": float,
    "gamma_sp_int_db": float,
    "gamma_psd_db": float,
    "carrier_hz": float,
    "speed_mps": float,
    "tau_s": float,
    "rate_p": float,
    "rate_s": float,
    "reward_coop": _parse_floats,
    "reward_underlay": _parse_floats,
    "modes": _parse_modes,
    "lambda_grid": parse_grid,
    "alphas": _parse_floats,
    "slots": _parse_int,
    "seeds": _parse_int,
    "master_seed": _parse_int,
    "output": str,
    "figure": str,
}


def parse_config_text(text: str) -> ExperimentConfig:
    """Parse flat ``key = value`` lines; ``#`` starts a comment."""
    values = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigParseError("expected 'key = value'", line=lineno)
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in _CONVERTERS:
            raise ConfigParseError("unknown key", line=lineno, key=key)
        if key in values:
            raise ConfigParseError("duplicate key", line=lineno, key=key)
        try:
            values[key] = _CONVERTERS[key](value)
        except ValueError as exc:
            raise ConfigParseError(str(exc), line=lineno, key=key) from None
    return ExperimentConfig(**values)


def parse_config(path) -> ExperimentConfig:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigParseError(f"cannot read {path}: {exc.strerror}") from None
    return parse_config_text(text)


def with_overrides(cfg: ExperimentConfig, **changes) -> ExperimentConfig:
    """Copy of ``cfg`` with non-None ``changes`` applied and re-validated."""
    changes = {k: v for k, v in changes.items() if v is not None}
    return dataclasses.replace(cfg, **changes)


# -- sweep ------------------------------------------------------------------

@dataclass(frozen=True)
class CurveRow:
    mode: str
    lambda_p: float
    alpha: float
    su_throughput: float
    su_ci95: float
    pu_throughput: float
    mean_qp: float


@dataclass
class ThroughputCurve:
    rows: list[CurveRow]
    # per-seed SU throughput keyed by (mode, lambda_p, alpha), in seed order
    samples: dict = field(default_factory=dict, repr=False)

    def __len__(self):
        return len(self.rows)

    def row(self, mode, lambda_p: float, alpha: float) -> CurveRow:
        label = Mode.parse(mode).label
        for r in self.rows:
            if r.mode == label and math.isclose(r.lambda_p, lambda_p) and math.isclose(r.alpha, alpha):
                return r
        raise KeyError((label, lambda_p, alpha))

    def per_seed(self, mode, lambda_p: float, alpha: float) -> np.ndarray:
        r = self.row(mode, lambda_p, alpha)
        return self.samples[(r.mode, r.lambda_p, r.alpha)]


def tuple_seed(master_seed: int, mode: Mode, lambda_index: int, alpha_index: int,
               seed_index: int) -> np.random.SeedSequence:
    """Seed of one run, derived from the master seed and the run's coordinates."""
    return np.random.SeedSequence(
        master_seed, spawn_key=(int(mode), lambda_index, alpha_index, seed_index)
    )


def ci95_halfwidth(values) -> float:
    values = np.asarray(values, dtype=np.float64)
    if values.size < 2:
        return 0.0
    return float(Z95 * values.std(ddof=1) / math.sqrt(values.size))


def _run_job(job):
    cfg, mode, li, ai, si = job
    model, table = cfg.build()
    out = cfg.outage()
    return run(RunConfig(
        mode=mode,
        lambda_p=cfg.lambda_grid[li],
        links=cfg.links(cfg.alphas[ai]),
        model=model,
        policy=table,
        rho_p=out.rho_p,
        rho_s=out.rho_s,
        slots=cfg.slots,
        seed=tuple_seed(cfg.master_seed, mode, li, ai, si),
    ))


def sweep(cfg: ExperimentConfig, workers: int = 1, progress=None) -> ThroughputCurve:
    """Run every (mode, lambda_p, alpha, seed) tuple and aggregate over seeds.

    Output rows are ordered by (mode, lambda_p, alpha) regardless of
    ``workers``; every run's seed depends only on its own coordinates.
    """
    model, table = cfg.build()
    out = cfg.outage()
    modes = sorted(set(cfg.modes))
    keys = [
        (mode, li, ai)
        for mode in modes
        for li in range(len(cfg.lambda_grid))
        for ai in range(len(cfg.alphas))
    ]
    results: dict = {}
    if workers > 1:
        jobs = [(cfg, m, li, ai, si) for (m, li, ai) in keys for si in range(cfg.seeds)]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for job, metrics in zip(jobs, pool.map(_run_job, jobs, chunksize=4)):
                results[job[1:]] = metrics
                if progress:
                    progress()
    else:
        for mode, li, ai in keys:
            links = cfg.links(cfg.alphas[ai])
            for si in range(cfg.seeds):
                results[(mode, li, ai, si)] = run(RunConfig(
                    mode=mode, lambda_p=cfg.lambda_grid[li], links=links, model=model,
                    policy=table, rho_p=out.rho_p, rho_s=out.rho_s, slots=cfg.slots,
                    seed=tuple_seed(cfg.master_seed, mode, li, ai, si),
                ))
                if progress:
                    progress()

    rows, samples = [], {}
    for mode, li, ai in keys:
        runs: list[Metrics] = [results[(mode, li, ai, si)] for si in range(cfg.seeds)]
        su = np.array([m.su_throughput for m in runs])
        lam, alpha = cfg.lambda_grid[li], cfg.alphas[ai]
        rows.append(CurveRow(
            mode=mode.label,
            lambda_p=lam,
            alpha=alpha,
            su_throughput=float(np.mean(su)),
            su_ci95=ci95_halfwidth(su),
            pu_throughput=float(np.mean([m.pu_throughput for m in runs])),
            mean_qp=float(np.mean([m.mean_qp for m in runs])),
        ))
        samples[(mode.label, lam, alpha)] = su
    return ThroughputCurve(rows, samples)


# -- output -----------------------------------------------------------------

def _fmt(x: float) -> str:
    return format(x, ".10g")


def emit_csv(curve: ThroughputCurve, path, figure: str | None = None) -> Path:
    """Write the curve as CSV plus a sibling gnuplot script; returns the script path."""
    if not curve.rows:
        raise ValueError("refusing to write an empty throughput curve")
    path = Path(path)
    with path.open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for r in curve.rows:
            writer.writerow([r.mode, _fmt(r.lambda_p), _fmt(r.alpha), _fmt(r.su_throughput),
                             _fmt(r.su_ci95), _fmt(r.pu_throughput), _fmt(r.mean_qp)])
    if figure is None:
        figure = "fig4" if len({r.alpha for r in curve.rows}) > 1 else "fig3"
    script = path.with_suffix(".gp")
    script.write_text(_gnuplot_script(curve, path.name, figure), encoding="utf-8")
    return script


def read_csv(path) -> ThroughputCurve:
    rows = []
    with Path(path).open(encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        for rec in reader:
            rows.append(CurveRow(
                mode=rec["mode"],
                **{k: float(rec[k]) for k in CSV_HEADER[1:]},
            ))
    return ThroughputCurve(rows)


def _gnuplot_script(curve: ThroughputCurve, csv_name: str, figure: str) -> str:
    lines = [
        "# gnuplot script; run: gnuplot -p " + Path(csv_name).with_suffix(".gp").name,
        "set datafile separator ','",
        "set key top right",
        "set xlabel 'PU arrival rate lambda_p (packets/slot)'",
        "set ylabel 'SU throughput (packets/slot)'",
        "set yrange [0:1.05]",
        "set grid",
    ]
    series = []
    if figure == "fig4":
        lines.insert(1, "set title 'SU throughput for different underlay power fractions'")
        for mode in dict.fromkeys(r.mode for r in curve.rows):
            for alpha in dict.fromkeys(r.alpha for r in curve.rows if r.mode == mode):
                series.append(
                    f"'{csv_name}' using 2:((strcol(1) eq '{mode}' && abs($3-{_fmt(alpha)})<1e-9) ? $4 : 1/0)"
                    f" with linespoints title '{mode}, alpha={_fmt(alpha)}'"
                )
    else:
        lines.insert(1, "set title 'SU throughput versus PU arrival rate'")
        alpha = curve.rows[0].alpha
        for mode in dict.fromkeys(r.mode for r in curve.rows):
            series.append(
                f"'{csv_name}' using 2:((strcol(1) eq '{mode}' && abs($3-{_fmt(alpha)})<1e-9) ? $4 : 1/0)"
                f" with linespoints title '{mode}'"
            )
    lines.append("plot " + ", \\\n     ".join(series))
    return "\n".join(lines) + "\n"


def default_workers() -> int:
    return max(1, os.cpu_count() or 1)
