"""Batch entry point: configuration, run modes, persistence and reports.

    python -m hallmhd <mode> [--config FILE] [--output DIR] [--override SECTION.KEY=VAL ...] [--seed N]

Exit status: 0 completed, 2 invalid configuration, 3 numerical abort.
"""

from __future__ import annotations

import argparse
import configparser
import itertools
import json
import math
import platform
import subprocess
import sys
import time
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
import scipy

from . import __version__
from .checks import (
    CheckResult,
    check_cancellations,
    check_commutators,
    check_delta_scaling,
    check_heat_decay,
    check_seed,
    check_solver,
    check_theorem_trend,
    prepare_run,
    theorem_run,
)
from .data import ConstraintError, PaperParams, check_annulus, verify_seed_properties
from .io import TimeSeriesWriter, load_state, read_time_series, save_snapshot, save_state
from .monitor import CANCELLATION_NAMES, DIAGNOSTIC_NAMES, PerturbationMonitor, bootstrap_check, master_inequality_residual
from .reference import prop21_decay_check, prop22_quantities, reference_state
from .solver import DivergenceError, NumericalAbort, SolverState, StepperConfig, StiffnessError, evolve
from .algebra import sobolev_norm

MODES = (
    "gen-data",
    "verify-seed",
    "reference-decay",
    "evolve",
    "verify-propositions",
    "commutator-suite",
    "full-report",
)

EXIT_OK, EXIT_INVALID, EXIT_ABORT = 0, 2, 3


class ConfigError(ValueError):
    pass


def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(x) for x in str(text).split(",") if x.strip())


def _ints(text: str) -> tuple[int, ...]:
    return tuple(int(x) for x in str(text).split(",") if x.strip())


@dataclass(frozen=True)
class RunSection:
    mode: str = "evolve"
    n: int = 64
    horizon: float = math.nan  # nan means 20 / min(nu, mu)
    samples: int = 20
    rng_seed: int = 0
    output_dir: str = "hallmhd-out"
    small_fraction: float = 0.25
    snapshot_every: int = 0  # 0: only the final state
    restart: str = ""


@dataclass(frozen=True)
class ChecksSection:
    seed_n: int = 64
    decay_n: int = 32
    delta_n: int = 128
    delta_m0: float = 16.0
    commutator_ns: str = "16,32"
    commutator_pairs: int = 200
    trend_n: int = 128
    trend_m0: str = "2,4,8"
    trend_dt_max: float = 0.05
    determinism_n: int = 32


@dataclass(frozen=True)
class RunConfig:
    params: PaperParams = field(default_factory=PaperParams)
    stepper: StepperConfig = field(default_factory=StepperConfig)
    run: RunSection = field(default_factory=RunSection)
    checks: ChecksSection = field(default_factory=ChecksSection)

    @property
    def horizon(self) -> float:
        h = self.run.horizon
        return 20.0 / min(self.params.nu, self.params.mu) if math.isnan(h) else h

    @property
    def output_dir(self) -> Path:
        return Path(self.run.output_dir)

    def as_dict(self) -> dict:
        return {
            "params": asdict(self.params),
            "stepper": asdict(self.stepper),
            "run": {**asdict(self.run), "horizon": self.horizon},
            "checks": asdict(self.checks),
        }


_SECTIONS = {"params": PaperParams, "stepper": StepperConfig, "run": RunSection, "checks": ChecksSection}


def _convert(cls, key: str, text: str):
    ftype = {f.name: f.type for f in fields(cls)}[key]
    ftype = ftype if isinstance(ftype, str) else getattr(ftype, "__name__", str(ftype))
    try:
        if ftype == "bool":
            low = text.strip().lower()
            if low not in ("true", "false", "1", "0", "yes", "no"):
                raise ValueError(text)
            return low in ("true", "1", "yes")
        if ftype == "int":
            return int(text)
        if ftype == "float":
            return float(text)
        return text.strip()
    except ValueError:
        raise ConfigError(f"{cls.__name__.lower()}.{key}: cannot parse {text!r} as {ftype}") from None


def _resolve_key(key: str) -> tuple[str, str]:
    if "." in key:
        section, name = key.split(".", 1)
        if section not in _SECTIONS:
            raise ConfigError(f"unknown section {section!r}")
        if name not in {f.name for f in fields(_SECTIONS[section])}:
            raise ConfigError(f"unknown key {key!r}")
        return section, name
    owners = [s for s, cls in _SECTIONS.items() if key in {f.name for f in fields(cls)}]
    if len(owners) != 1:
        raise ConfigError(f"unknown key {key!r}" if not owners else f"ambiguous key {key!r}; use section.key")
    return owners[0], key


def parse_config(path: Optional[str] = None, overrides: Sequence[str] = (), seed: Optional[int] = None) -> RunConfig:
    """Read an INI file (sections params, stepper, run, checks), apply KEY=VAL overrides and validate.

    Unknown sections or keys are rejected, as are parameter constraint
    violations and grids whose annulus holds no retained mode.
    """
    values: dict[str, dict[str, object]] = {s: {} for s in _SECTIONS}
    if path is not None:
        cp = configparser.ConfigParser(interpolation=None)
        cp.optionxform = str
        try:
            with open(path, encoding="utf-8") as fh:
                cp.read_file(fh)
        except (OSError, configparser.Error) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        for section in cp.sections():
            if section not in _SECTIONS:
                raise ConfigError(f"unknown section [{section}]")
            for key, text in cp.items(section):
                sec, name = _resolve_key(f"{section}.{key}")
                values[sec][name] = _convert(_SECTIONS[sec], name, text)
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not KEY=VAL")
        key, text = item.split("=", 1)
        sec, name = _resolve_key(key.strip())
        values[sec][name] = _convert(_SECTIONS[sec], name, text)
    if seed is not None:
        values["run"]["rng_seed"] = int(seed)
    try:
        cfg = RunConfig(
            params=PaperParams(**values["params"]),
            stepper=StepperConfig(**values["stepper"]),
            run=RunSection(**values["run"]),
            checks=ChecksSection(**values["checks"]),
        )
    except ConstraintError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    validate(cfg)
    return cfg


def validate(cfg: RunConfig) -> None:
    if cfg.run.mode not in MODES:
        raise ConfigError(f"unknown mode {cfg.run.mode!r}; choose from {', '.join(MODES)}")
    if cfg.run.samples < 3:
        raise ConfigError("run.samples must be at least 3")
    if not cfg.horizon > 0:
        raise ConfigError("run.horizon must be positive")
    if not 0 <= cfg.run.small_fraction <= 1:
        raise ConfigError("run.small_fraction must lie in [0, 1]")
    grid = cfg.params.grid(cfg.run.n)  # validates n
    check_annulus(grid, cfg.params.delta)
    if not 2 * cfg.params.m0 < grid.period / 2:
        raise ConfigError("cut-off support does not fit in the box")


# -- output helpers -------------------------------------------------------


def _versions() -> dict:
    return {"hallmhd": __version__, "python": platform.python_version(), "numpy": np.__version__, "scipy": scipy.__version__}


def write_manifest(cfg: RunConfig, out: Path, extra: Optional[dict] = None) -> None:
    manifest = {"config": cfg.as_dict(), "versions": _versions(), "rng_seed": cfg.run.rng_seed, **(extra or {})}
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True, default=str) + "\n")


class Report:
    def __init__(self, title: str):
        self.lines = [title, "=" * len(title)]
        self.results: list[CheckResult] = []

    def add(self, result: CheckResult) -> None:
        self.results.append(result)
        self.lines.append(result.line())

    def note(self, text: str) -> None:
        self.lines.append(text)

    def table(self) -> None:
        if not self.results:
            return
        width = max(len(r.name) for r in self.results)
        self.lines.append("")
        self.lines.append(f"{'check'.ljust(width)}  status  seconds")
        for r in self.results:
            self.lines.append(f"{r.name.ljust(width)}  {'PASS' if r.passed else 'FAIL'}    {r.runtime:7.1f}")

    def write(self, out: Path) -> str:
        text = "\n".join(self.lines) + "\n"
        (out / "report.txt").write_text(text)
        return text


SERIES_FIELDS = (
    "t",
    "step",
    "dt",
    "e_u",
    "e_b",
    "d_u",
    "d_b",
    "forcing_f",
    "forcing_g",
    "q2",
    "q3",
    "u_h3",
    "b_h3",
    *[f"cancel_{k}" for k in CANCELLATION_NAMES + DIAGNOSTIC_NAMES],
)


class SeriesObserver:
    """Writes one time-series record per sample; wall time goes to a separate file."""

    def __init__(self, monitor: PerturbationMonitor, writer: TimeSeriesWriter, timing_path: Path, cfg: RunConfig, out: Path):
        self.monitor = monitor
        self.writer = writer
        self.timing = open(timing_path, "w", encoding="utf-8")
        self.cfg = cfg
        self.out = out
        self.count = 0
        self._last = (time.perf_counter(), None)

    def __call__(self, state: SolverState) -> None:
        sample = self.monitor(state)
        rec = sample.as_dict()
        rec.update(step=state.step_count, dt=state.dt_last, u_h3=sobolev_norm(state.u_hat, 3), b_h3=sobolev_norm(state.b_hat, 3))
        self.writer.write(rec)
        now, prev_step = time.perf_counter(), self._last[1]
        steps = state.step_count - prev_step if prev_step is not None else 0
        wall = (now - self._last[0]) / steps if steps else 0.0
        self.timing.write(json.dumps({"t": state.t, "steps": steps, "wall_per_step": wall}) + "\n")
        self._last = (now, state.step_count)
        every = self.cfg.run.snapshot_every
        if every and self.count % every == 0:
            save_state(self.out / f"state_{self.count:05d}.snap", state, self.cfg.params, {"rng_seed": self.cfg.run.rng_seed})
        self.count += 1

    def close(self):
        self.timing.close()


# -- modes ----------------------------------------------------------------


def mode_gen_data(cfg: RunConfig, out: Path, report: Report) -> None:
    setup = prepare_run(cfg.params, cfg.run.n, cfg.run.rng_seed, cfg.run.small_fraction)
    meta = {"rng_seed": cfg.run.rng_seed, "params": asdict(cfg.params), "kind": "initial-data"}
    save_snapshot(out / "data.snap", {"v0": setup.seed.field, "u0": setup.data.u0, "b0": setup.data.b0}, meta)
    for k, v in setup.data.report.items():
        report.note(f"{k}: {v:.6g}")
    report.note(f"annulus modes (half spectrum): {len(setup.seed.mode_list)}")


def mode_verify_seed(cfg: RunConfig, out: Path, report: Report) -> None:
    report.add(check_seed(cfg.params, cfg.run.n, cfg.run.rng_seed))
    seed = prepare_run(cfg.params, cfg.run.n, cfg.run.rng_seed, 0.0).seed
    rep = verify_seed_properties(seed)

    def status(ok):
        return "PASS" if ok else "FAIL"

    report.note(f"[{status(rep.beltrami_residual < 1e-10)}] curl v0 = sqrt(-Lap) v0: relative residual {rep.beltrami_residual:.3g}")
    report.note(f"[{status(rep.support_exact)}] Fourier support inside the annulus: exact={rep.support_exact}")
    report.note(f"[{status(rep.l1_ok)}] L1-Fourier norm {rep.l1_fourier:.12g} <= M1={rep.m1:g}")
    report.note(f"[{status(rep.decay_ok)}] weighted decay max (1+|x|)|grad^k v0| <= M2={rep.m2:g}, k=0..5: "
                + ", ".join(f"{x:.4g}" for x in rep.decay_surrogate))
    report.note(f"divergence residual: {rep.divergence_residual:.3g}")


def mode_reference_decay(cfg: RunConfig, out: Path, report: Report) -> None:
    p = cfg.params
    setup = prepare_run(p, cfg.run.n, cfg.run.rng_seed, 0.0)
    times = np.linspace(0.0, 8.0 / p.nu, cfg.run.samples + 1)
    rep = prop21_decay_check(setup.seed, p, times)
    names = ["t"] + [f"D{k}_f" for k in range(6)] + [f"D{k}_g" for k in range(6)]
    names += ["l2_ratio_f", "l2_lower", "l2_upper", "q1", "q2", "q3", "env1", "env2", "ratio1", "ratio2"]
    with TimeSeriesWriter(out / "reference.jsonl", names, {"mode": "reference-decay"}) as w:
        for i, t in enumerate(times):
            q = prop22_quantities(reference_state(setup.seed, setup.cutoff, p, t), p)
            rec = {"t": t, "l2_ratio_f": rep.l2_ratio_f[i], "l2_lower": rep.l2_bounds_f[i, 0], "l2_upper": rep.l2_bounds_f[i, 1]}
            rec.update({f"D{k}_f": rep.d_f[i, k] for k in range(6)})
            rec.update({f"D{k}_g": rep.d_g[i, k] for k in range(6)})
            rec.update(q1=q.q1, q2=q.q2, q3=q.q3, env1=q.env1, env2=q.env2, ratio1=q.ratio1, ratio2=q.ratio2)
            w.write(rec)
    report.add(check_heat_decay(p, cfg.run.n, cfg.run.samples + 1, cfg.run.rng_seed))


def mode_evolve(cfg: RunConfig, out: Path, report: Report) -> None:
    p = cfg.params
    setup = prepare_run(p, cfg.run.n, cfg.run.rng_seed, cfg.run.small_fraction)
    if cfg.run.restart:
        state, header = load_state(cfg.run.restart)
        if state.grid != setup.grid:
            raise ConfigError("restart snapshot grid does not match the configuration")
    else:
        state = SolverState(setup.data.u0, setup.data.b0)
    monitor = PerturbationMonitor(setup.seed, setup.cutoff, p)
    # location-independent header, so identical runs give identical files
    physics = cfg.as_dict()
    for key in ("output_dir", "restart"):
        physics["run"].pop(key)
    header = {"mode": "evolve", "config": physics}
    with TimeSeriesWriter(out / "timeseries.jsonl", SERIES_FIELDS, header) as writer:
        obs = SeriesObserver(monitor, writer, out / "timing.jsonl", cfg, out)
        try:
            final = evolve(state, cfg.horizon, cfg.stepper, p, [obs], sample_interval=cfg.horizon / cfg.run.samples)
        except NumericalAbort as exc:
            if exc.last_good is not None:
                save_state(out / "abort.snap", exc.last_good, p, {"rng_seed": cfg.run.rng_seed})
            raise
        finally:
            obs.close()
    save_state(out / "final.snap", final, p, {"rng_seed": cfg.run.rng_seed})
    hist = monitor.history
    report.note(f"steps: {final.step_count}, final time: {final.t:.6g}")
    if len(hist) >= 3:
        fit = master_inequality_residual(hist, p)
        verdict = bootstrap_check(hist, p, fit.minimal_c)
        report.note(f"minimal constant in the differential inequality: {fit.minimal_c:.4g}")
        report.note(f"sup (|U|_H3 + |B|_H3): {verdict.sup_amplitude:.4g}; times M0^(1/2): {verdict.scaled_sup:.4g}")
        report.note(f"energy bounded by 4(E0 + forcing^2): {verdict.bounded}; threshold kept: {verdict.threshold_ok}")
        e = np.array([s.energy for s in hist])
        report.note(f"E(T) / max E = {e[-1] / e.max():.4g}")
    report.add(check_cancellations(hist))


def mode_verify_propositions(cfg: RunConfig, out: Path, report: Report) -> None:
    c = cfg.checks
    report.add(check_delta_scaling(c.delta_n, c.delta_m0, rng_seed=cfg.run.rng_seed, base=cfg.params))
    setup = prepare_run(cfg.params, cfg.run.n, cfg.run.rng_seed, 0.0)
    for t in np.linspace(0.0, 8.0 / min(cfg.params.nu, cfg.params.mu), 5):
        q = prop22_quantities(reference_state(setup.seed, setup.cutoff, cfg.params, t), cfg.params)
        report.note(f"t={t:.4g}: Q1={q.q1:.4g} (ratio {q.ratio1:.3g}), Q2={q.q2:.4g} (ratio {q.ratio2:.3g}), Q3={q.q3:.4g}")


def mode_commutator_suite(cfg: RunConfig, out: Path, report: Report) -> None:
    report.add(check_commutators(_ints(cfg.checks.commutator_ns), cfg.checks.commutator_pairs, 3, cfg.run.rng_seed))


def determinism_check(cfg: RunConfig, workdir: Path) -> CheckResult:
    """Run a short evolve twice and once more from a mid-run snapshot; compare bytes."""
    t0 = time.perf_counter()
    small = replace(
        cfg,
        params=replace(cfg.params, m0=2.0),
        run=replace(cfg.run, mode="evolve", n=cfg.checks.determinism_n, samples=4, snapshot_every=2, restart="", horizon=0.2),
        stepper=replace(cfg.stepper, dt_max=0.02),
    )
    dirs = [workdir / "det_a", workdir / "det_b", workdir / "det_c"]
    for d in dirs[:2]:
        d.mkdir(parents=True, exist_ok=True)
        mode_evolve(replace(small, run=replace(small.run, output_dir=str(d))), d, Report("determinism"))
    same = (dirs[0] / "timeseries.jsonl").read_bytes() == (dirs[1] / "timeseries.jsonl").read_bytes()
    dirs[2].mkdir(parents=True, exist_ok=True)
    restart = replace(small, run=replace(small.run, restart=str(dirs[0] / "state_00002.snap"), output_dir=str(dirs[2])))
    mode_evolve(restart, dirs[2], Report("restart"))
    _, rows_full = read_time_series(dirs[0] / "timeseries.jsonl")
    _, rows_rest = read_time_series(dirs[2] / "timeseries.jsonl")
    tail = rows_full[-len(rows_rest) :]
    restart_ok = tail == rows_rest
    fa, _ = load_state(dirs[0] / "final.snap")
    fc, _ = load_state(dirs[2] / "final.snap")
    bit_exact = bool(np.array_equal(fa.u_hat.coeffs, fc.u_hat.coeffs) and np.array_equal(fa.b_hat.coeffs, fc.b_hat.coeffs))
    return CheckResult(
        "determinism",
        same and restart_ok and bit_exact,
        {"series_identical": same, "restart_series_match": restart_ok, "restart_bit_exact": bit_exact},
        time.perf_counter() - t0,
    )


def mode_full_report(cfg: RunConfig, out: Path, report: Report) -> None:
    c = cfg.checks
    report.add(check_seed(cfg.params, c.seed_n, cfg.run.rng_seed))
    report.add(check_heat_decay(cfg.params, c.decay_n, rng_seed=cfg.run.rng_seed))
    report.add(check_delta_scaling(c.delta_n, c.delta_m0, rng_seed=cfg.run.rng_seed, base=cfg.params))
    report.add(check_solver())
    runs = {}
    stepper = replace(cfg.stepper, dt_max=c.trend_dt_max)
    t0 = time.perf_counter()
    for m0 in _floats(c.trend_m0):
        runs[m0] = theorem_run(replace(cfg.params, m0=m0), c.trend_n, stepper, rng_seed=cfg.run.rng_seed,
                               small_fraction=cfg.run.small_fraction)
    elapsed = time.perf_counter() - t0
    closest = min(runs, key=lambda m: abs(m - cfg.params.m0))
    ident = check_cancellations(runs[closest].history)
    report.add(ident)
    report.add(check_commutators(_ints(c.commutator_ns), c.commutator_pairs, 3, cfg.run.rng_seed))
    trend = check_theorem_trend(runs)
    trend.runtime = elapsed
    report.add(trend)
    report.add(determinism_check(cfg, out / "determinism"))
    report.table()


_DISPATCH = {
    "gen-data": mode_gen_data,
    "verify-seed": mode_verify_seed,
    "reference-decay": mode_reference_decay,
    "evolve": mode_evolve,
    "verify-propositions": mode_verify_propositions,
    "commutator-suite": mode_commutator_suite,
    "full-report": mode_full_report,
}


def run(cfg: RunConfig) -> int:
    out = cfg.output_dir
    out.mkdir(parents=True, exist_ok=True)
    write_manifest(cfg, out)
    report = Report(f"hallmhd {cfg.run.mode}")
    status = EXIT_OK
    try:
        _DISPATCH[cfg.run.mode](cfg, out, report)
    except (NumericalAbort, StiffnessError, DivergenceError) as exc:
        report.note(f"ABORTED: {type(exc).__name__}: {exc}")
        status = EXIT_ABORT
    text = report.write(out)
    print(text, end="")
    return status


# -- sweep ----------------------------------------------------------------


def sweep(args) -> int:
    """Launch one independent process per combination of --vary values."""
    axes = []
    for item in args.vary:
        if "=" not in item:
            raise ConfigError(f"--vary {item!r} is not KEY=V1,V2,...")
        key, vals = item.split("=", 1)
        _resolve_key(key)
        axes.append([(key, v) for v in vals.split(",") if v])
    base_out = Path(args.output or "hallmhd-sweep")
    base_out.mkdir(parents=True, exist_ok=True)
    procs = []
    for i, combo in enumerate(itertools.product(*axes)):
        cmd = [sys.executable, "-m", "hallmhd", args.sweep_mode, "--output", str(base_out / f"run_{i:03d}")]
        if args.config:
            cmd += ["--config", args.config]
        for o in list(args.override or []) + [f"{k}={v}" for k, v in combo]:
            cmd += ["--override", o]
        if args.seed is not None:
            cmd += ["--seed", str(args.seed)]
        procs.append((combo, subprocess.Popen(cmd, stdout=subprocess.DEVNULL)))
        if len(procs) >= args.jobs:
            procs[-args.jobs][1].wait()
    codes = []
    for combo, proc in procs:
        codes.append(proc.wait())
        print(f"{', '.join(f'{k}={v}' for k, v in combo)} -> exit {codes[-1]}")
    return max(codes) if codes else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hallmhd", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="INI configuration file")
        p.add_argument("--output", help="output directory (overrides run.output_dir)")
        p.add_argument("--override", action="append", default=[], metavar="KEY=VAL", help="set a config value")
        p.add_argument("--seed", type=int, help="random seed (overrides run.rng_seed)")

    for mode in MODES:
        common(sub.add_parser(mode))
    sp = sub.add_parser("sweep", help="run a mode over a parameter grid in separate processes")
    common(sp)
    sp.add_argument("--mode", dest="sweep_mode", default="evolve", choices=MODES)
    sp.add_argument("--vary", action="append", default=[], metavar="KEY=V1,V2", required=True)
    sp.add_argument("--jobs", type=int, default=1)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "sweep":
            return sweep(args)
        overrides = [f"run.mode={args.command}"] + list(args.override)
        if args.output:
            overrides.append(f"run.output_dir={args.output}")
        cfg = parse_config(args.config, overrides, args.seed)
    except (ConfigError, ConstraintError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    try:
        return run(cfg)
    except (ConfigError, ConstraintError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
