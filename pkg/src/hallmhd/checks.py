"""Composite verification checks, shared by the CLI report and the test suite.

Each check returns a :class:`CheckResult` holding the measured numbers, the
thresholds they were compared against and the wall time.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from .algebra import gradient_sobolev_norm_sq, hall_term, inner, l1_fourier_norm, sobolev_norm, sup_norm
from .data import (
    CutoffField,
    InitialData,
    PaperParams,
    annulus_mask,
    assemble_initial_data,
    beltrami_residual,
    build_beltrami_seed,
    build_cutoff,
    helical_wave_seed,
    random_small_field,
)
from .monitor import (
    CANCELLATION_NAMES,
    BootstrapVerdict,
    MasterFit,
    PerturbationMonitor,
    PerturbationSample,
    bootstrap_check,
    commutator_suite,
    master_inequality_residual,
)
from .reference import (
    cross_decay_integral,
    heat_flow,
    prop21_decay_check,
    prop22_quantities,
    reference_state,
)
from .solver import SolverState, StepperConfig, evolve
from .spectral import GridSpec, SpectralField


@dataclass
class CheckResult:
    name: str
    passed: bool
    metrics: dict = field(default_factory=dict)
    runtime: float = 0.0

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        shown = ", ".join(f"{k}={_fmt(v)}" for k, v in self.metrics.items())
        return f"[{status}] {self.name} ({self.runtime:.1f}s): {shown}"


def _fmt(v) -> str:
    if isinstance(v, bool):
        return str(v)
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.4g}"
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_fmt(x) for x in v) + "]"
    return str(v)


class _Timer:
    def __enter__(self):
        self.start = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.elapsed = time.perf_counter() - self.start


# -- data protocol --------------------------------------------------------


@dataclass
class RunSetup:
    params: PaperParams
    grid: GridSpec
    seed: object
    cutoff: CutoffField
    data: InitialData


def prepare_run(params: PaperParams, n: int, rng_seed: int = 0, small_fraction: float = 0.25, project: bool = True) -> RunSetup:
    """Seed, cut-off and initial data for a theorem-class run.

    The small parts u01, b01 each carry H^3 norm small_fraction * M0^(-1/2) / 2
    and live on the shell 1 <= |xi| <= 2; they draw from rng_seed + 1, + 2.
    """
    if not 0 <= small_fraction <= 1:
        raise ValueError("small_fraction must lie in [0, 1]")
    grid = params.grid(n)
    seed = build_beltrami_seed(params, grid, rng_seed=rng_seed)
    cutoff = build_cutoff(params, grid)
    size = 0.5 * small_fraction * params.m0**-0.5
    u01 = random_small_field(grid, size, rng_seed + 1)
    b01 = random_small_field(grid, size, rng_seed + 2)
    data = assemble_initial_data(params, seed, cutoff, u01, b01, project=project)
    return RunSetup(params, grid, seed, cutoff, data)


@dataclass
class TheoremRun:
    setup: RunSetup
    final: SolverState
    history: list[PerturbationSample]
    fit: MasterFit
    verdict: BootstrapVerdict

    @property
    def energies(self) -> np.ndarray:
        return np.array([s.energy for s in self.history])

    @property
    def decayed(self) -> bool:
        e = self.energies
        return bool(e[-1] < e.max() / 10)


def theorem_run(
    params: PaperParams,
    n: int,
    stepper: StepperConfig,
    horizon: Optional[float] = None,
    samples: int = 20,
    rng_seed: int = 0,
    small_fraction: float = 0.25,
    alphas: Sequence[Sequence[int]] = ((0, 0, 0), (2, 1, 0)),
    observers: Sequence = (),
) -> TheoremRun:
    """Evolve theorem-class data to ``horizon`` (default 20 / min(nu, mu)) with the perturbation monitor."""
    setup = prepare_run(params, n, rng_seed, small_fraction)
    T = 20.0 / min(params.nu, params.mu) if horizon is None else horizon
    monitor = PerturbationMonitor(setup.seed, setup.cutoff, params, alphas)
    state = SolverState(setup.data.u0, setup.data.b0)
    final = evolve(state, T, stepper, params, [monitor, *observers], sample_interval=T / samples)
    fit = master_inequality_residual(monitor.history, params)
    verdict = bootstrap_check(monitor.history, params, fit.minimal_c)
    return TheoremRun(setup, final, monitor.history, fit, verdict)


# -- individual checks ----------------------------------------------------


def check_seed(params: PaperParams = PaperParams(), n: int = 64, rng_seed: int = 0) -> CheckResult:
    with _Timer() as tm:
        grid = params.grid(n)
        seed = build_beltrami_seed(params, grid, rng_seed=rng_seed)
        res = beltrami_residual(seed.field)
        outside = ~annulus_mask(grid, params.delta)
        support = not np.any(seed.field.coeffs[:, outside])
        l1_err = abs(l1_fourier_norm(seed.field) - params.m1) / params.m1
    ok = res < 1e-10 and support and l1_err < 1e-9
    return CheckResult(
        "seed correctness", ok, {"beltrami_residual": res, "support_exact": support, "l1_rel_error": l1_err}, tm.elapsed
    )


def check_heat_decay(params: PaperParams = PaperParams(), n: int = 32, samples: int = 9, rng_seed: int = 0) -> CheckResult:
    with _Timer() as tm:
        seed = build_beltrami_seed(params, params.grid(n), rng_seed=rng_seed)
        times = np.linspace(0.0, 8.0 / params.nu, samples)
        rep = prop21_decay_check(seed, params, times)
        lo, hi = rep.l2_bounds_f[:, 0], rep.l2_bounds_f[:, 1]
        l2_excess = float(max(np.max(lo - rep.l2_ratio_f), np.max(rep.l2_ratio_f - hi), 0.0))
        worst_ripple = float(
            max(
                np.max(rep.d_f / np.minimum.accumulate(rep.d_f, axis=0)),
                np.max(rep.d_g / np.minimum.accumulate(rep.d_g, axis=0)),
            )
            - 1.0
        )
    ok = rep.monotone and rep.bounded and l2_excess <= 1e-12
    return CheckResult(
        "heat-flow decay",
        ok,
        {"worst_ripple": worst_ripple, "l2_bound_excess": l2_excess, "D_final_over_D0": list(rep.d_f[-1] / rep.d_f[0])},
        tm.elapsed,
    )


def check_delta_scaling(
    n: int = 128, m0: float = 16.0, deltas: Sequence[float] = (0.4, 0.3, 0.2), rng_seed: int = 0, base: PaperParams = PaperParams()
) -> CheckResult:
    """Cross-product integral ratio between the largest and smallest delta, and Q2 at t=0."""
    with _Timer() as tm:
        q2, integral = {}, {}
        for d in deltas:
            p = replace(base, delta=d, m0=m0)
            grid = p.grid(n)
            seed = build_beltrami_seed(p, grid, rng_seed=rng_seed)
            cutoff = build_cutoff(p, grid)
            q2[d] = prop22_quantities(reference_state(seed, cutoff, p, 0.0), p, with_w_inf=False).q2
            if d in (max(deltas), min(deltas)):
                integral[d] = cross_decay_integral(seed, cutoff, p).value
        ratio = integral[min(deltas)] / integral[max(deltas)]
        ordered = [q2[d] for d in sorted(deltas, reverse=True)]
        monotone = all(b < a for a, b in zip(ordered, ordered[1:]))
    ok = 0.3 <= ratio <= 0.8 and monotone
    return CheckResult("delta scaling", ok, {"integral_ratio": ratio, "q2_by_delta": ordered, "q2_decreasing": monotone}, tm.elapsed)


def _random_pair(grid, rng_seed, scale=0.5):
    u = random_small_field(grid, 1.0, rng_seed, 1.0, 3.0)
    b = random_small_field(grid, 1.0, rng_seed + 1000, 1.0, 3.0)
    return u * (scale / sup_norm(u)), b * (scale / sup_norm(b))


def check_solver(n: int = 16) -> CheckResult:
    """Pure diffusion, exact Beltrami decay, self-convergence, energy balance, Hall neutrality."""
    grid = GridSpec(n, 2 * math.pi)
    m = {}
    with _Timer() as tm:
        p = PaperParams(nu=0.05, mu=0.05, eta=0.05, m0=1.0)
        u, b = _random_pair(grid, 7)

        # pure diffusion
        cfg = StepperConfig(nonlinear=False, dt_max=1.0)
        s = evolve(SolverState(u, b), 1.0, cfg, p, fixed_dt=0.1)
        ref_u, ref_b = heat_flow(u, 1.0, p.nu), heat_flow(b, 1.0, p.mu)
        scale = max(np.abs(u.coeffs).max(), np.abs(b.coeffs).max())
        m["diffusion_error"] = float(
            max(np.abs(s.u_hat.coeffs - ref_u.coeffs).max(), np.abs(s.b_hat.coeffs - ref_b.coeffs).max()) / scale
        )

        # eta = 0, b = 0, single Beltrami mode
        pb = PaperParams(nu=0.3, mu=0.3, eta=0.05, m0=1.0, delta=0.5)
        wave = helical_wave_seed(pb, grid, [(1, 0, 0)]).field
        cfg = StepperConfig(hall=False, dt_max=0.05)
        worst = [0.0]

        def beltrami_obs(state):
            exact = heat_flow(wave, state.t, pb.nu) if state.t > 0 else wave
            err = sobolev_norm(state.u_hat - exact, 0) / sobolev_norm(exact, 0)
            worst[0] = max(worst[0], err)

        evolve(SolverState(wave, SpectralField.zeros(grid)), 1.0, cfg, pb, [beltrami_obs], sample_interval=0.1)
        m["beltrami_decay_error"] = worst[0]

        # self-convergence
        cfg = StepperConfig(dt_max=1.0)
        finals = [evolve(SolverState(u, b), 0.5, cfg, p, fixed_dt=dt) for dt in (0.02, 0.01, 0.005)]
        e1 = sobolev_norm(finals[0].u_hat - finals[1].u_hat, 0) + sobolev_norm(finals[0].b_hat - finals[1].b_hat, 0)
        e2 = sobolev_norm(finals[1].u_hat - finals[2].u_hat, 0) + sobolev_norm(finals[1].b_hat - finals[2].b_hat, 0)
        m["convergence_order"] = math.log2(e1 / e2)

        # energy balance over T = 5
        rec = []

        def energy_obs(state):
            e = 0.5 * (sobolev_norm(state.u_hat, 0) ** 2 + sobolev_norm(state.b_hat, 0) ** 2)
            d = p.nu * gradient_sobolev_norm_sq(state.u_hat, 0) + p.mu * gradient_sobolev_norm_sq(state.b_hat, 0)
            rec.append((state.t, e, d))

        dt = 0.0025
        evolve(SolverState(u, b), 5.0, cfg, p, [energy_obs], sample_interval=dt, fixed_dt=dt)
        t, e, d = map(np.array, zip(*rec))
        dissipated = float(np.sum(0.5 * (d[1:] + d[:-1]) * np.diff(t)))
        m["energy_residual"] = abs(e[-1] - e[0] + dissipated) / e[0]

        # Hall-term energy neutrality on 20 random fields
        worst_hall = 0.0
        for k in range(20):
            bf = random_small_field(grid, 1.0, 500 + k, 1.0, 4.0)
            hb = hall_term(bf)
            worst_hall = max(worst_hall, abs(inner(bf, hb)) / (sobolev_norm(bf, 0) * sobolev_norm(hb, 0)))
        m["hall_neutrality"] = worst_hall
    ok = (
        m["diffusion_error"] <= 1e-13
        and m["beltrami_decay_error"] <= 1e-8
        and m["convergence_order"] >= 1.9
        and m["energy_residual"] <= 1e-6
        and m["hall_neutrality"] <= 1e-10
    )
    return CheckResult("solver verification", ok, m, tm.elapsed)


def check_cancellations(history: Sequence[PerturbationSample], tol: float = 1e-8) -> CheckResult:
    worst = {k: max(s.cancellation_residuals.get(k, math.nan) for s in history) for k in CANCELLATION_NAMES}
    ok = all(v < tol for v in worst.values())
    return CheckResult("exact identities", ok, worst)


def check_commutators(ns: Sequence[int] = (16, 32), pairs: int = 200, m: int = 3, rng_seed: int = 0) -> CheckResult:
    with _Timer() as tm:
        maxima = [commutator_suite(n, pairs, m, rng_seed).max_ratio for n in ns]
    finite = all(math.isfinite(x) and x > 0 for x in maxima)
    spread = max(maxima) / min(maxima) if finite else math.inf
    ok = finite and spread <= 2.0
    return CheckResult("commutator bound", ok, {"max_ratio_by_n": maxima, "spread": spread}, tm.elapsed)


def check_theorem_trend(runs: dict[float, TheoremRun]) -> CheckResult:
    scaled = {m0: r.verdict.scaled_sup for m0, r in runs.items()}
    bounded = all(r.verdict.bounded and np.all(np.isfinite(r.energies)) for r in runs.values())
    decayed = all(r.decayed for r in runs.values())
    vals = list(scaled.values())
    spread = max(vals) / min(vals) if min(vals) > 0 else math.inf
    ok = bounded and decayed and spread < 2.0
    return CheckResult(
        "theorem trend",
        ok,
        {
            "scaled_sup_by_m0": [scaled[k] for k in sorted(scaled)],
            "spread": spread,
            "bounded": bounded,
            "final_over_max": [float(runs[k].energies[-1] / runs[k].energies.max()) for k in sorted(runs)],
        },
    )
