"""Time integration of the incompressible viscous resistive Hall-MHD system.

Integrating-factor midpoint scheme: diffusion is applied exactly through the
multipliers exp(-nu |xi|^2 dt), exp(-mu |xi|^2 dt); the projected nonlinear
terms are evaluated explicitly at the start and at the midpoint of each step.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable, Iterable, Optional

import numpy as np

from .algebra import _advect_real, _cross_real, _to_spectral_dealiased, real_gradient, sobolev_norm
from .data import PaperParams
from .spectral import SpectralField, _curl_coeffs, _leray_coeffs, divergence, symmetrize


class NumericalAbort(RuntimeError):
    """Non-finite coefficients appeared; ``last_good`` holds the previous state."""

    def __init__(self, message: str, last_good: "SolverState | None" = None):
        super().__init__(message)
        self.last_good = last_good


class StiffnessError(NumericalAbort):
    """The stable time step fell below ``dt_min``."""


class DivergenceError(AssertionError):
    pass


@dataclass(frozen=True)
class SolverState:
    u_hat: SpectralField
    b_hat: SpectralField
    t: float = 0.0
    step_count: int = 0
    dt_last: float = 0.0

    @property
    def grid(self):
        return self.u_hat.grid


_TINY = np.finfo(np.float64).tiny


@dataclass(frozen=True)
class StepperConfig:
    scheme: str = "if-midpoint"
    cfl_advective: float = 0.4
    cfl_whistler: float = 0.2
    dt_max: float = 1e-2
    dt_min: float = 1e-7
    nonlinear: bool = True
    hall: bool = True
    divergence_tol: float = 1e-9

    def __post_init__(self):
        if self.scheme != "if-midpoint":
            raise ValueError(f"unknown scheme {self.scheme!r}")
        if not (0 < self.cfl_advective <= 1 and 0 < self.cfl_whistler <= 1):
            raise ValueError("CFL numbers must lie in (0, 1]")
        if not 0 < self.dt_min < self.dt_max:
            raise ValueError("need 0 < dt_min < dt_max")


# -- right-hand side ------------------------------------------------------


def _nonlinear(u: SpectralField, b: SpectralField, eta: float, hall: bool):
    """Projected nonlinear tendencies and the sup norms of |u|, |b|."""
    g = u.grid
    u_r, b_r = u.real(), b.real()
    gu, gb = real_gradient(u), real_gradient(b)
    nu_real = _advect_real(b_r, gb) - _advect_real(u_r, gu)
    nb_real = _advect_real(b_r, gu) - _advect_real(u_r, gb)
    du = _leray_coeffs(g, _to_spectral_dealiased(nu_real, g))
    db = _to_spectral_dealiased(nb_real, g)
    if hall and eta != 0.0:
        j_r = np.stack([gb[1][2] - gb[2][1], gb[2][0] - gb[0][2], gb[0][1] - gb[1][0]])
        jxb = _to_spectral_dealiased(_cross_real(j_r, b_r), g)
        db -= eta * _curl_coeffs(g, jxb)
    umax = float(np.sqrt(np.max((u_r**2).sum(axis=0))))
    bmax = float(np.sqrt(np.max((b_r**2).sum(axis=0))))
    return SpectralField(g, du), SpectralField(g, db), umax, bmax


def _check_finite(*fields: SpectralField):
    for f in fields:
        if not np.all(np.isfinite(f.coeffs)):
            return False
    return True


def rhs(u_hat: SpectralField, b_hat: SpectralField, params: PaperParams, hall: bool = True):
    """Nonlinear tendencies (du, db); diffusion is left to the integrating factor.

    du = P[-u.grad u + b.grad b],  db = -u.grad b + b.grad u - eta curl((curl b) x b).
    """
    if not _check_finite(u_hat, b_hat):
        raise NumericalAbort("non-finite coefficients in rhs input")
    du, db, _, _ = _nonlinear(u_hat, b_hat, params.eta, hall)
    return du, db


# -- time step ------------------------------------------------------------


def _dt_bound(umax: float, bmax: float, grid, cfg: StepperConfig, params: PaperParams) -> float:
    dt = cfg.dt_max
    speed = umax + bmax
    if speed > 0:
        dt = min(dt, cfg.cfl_advective * grid.h / speed)
    if cfg.hall and cfg.nonlinear and bmax > 0:
        dt = min(dt, cfg.cfl_whistler / (params.eta * bmax * grid.k_max**2))
    return dt


def compute_dt(state: SolverState, cfg: StepperConfig, params: PaperParams) -> float:
    """min(dt_max, cfl_adv h / (|u|_inf + |b|_inf), cfl_whistler / (eta |b|_inf k_max^2))."""
    u_r, b_r = state.u_hat.real(), state.b_hat.real()
    umax = float(np.sqrt(np.max((u_r**2).sum(axis=0))))
    bmax = float(np.sqrt(np.max((b_r**2).sum(axis=0))))
    dt = _dt_bound(umax, bmax, state.grid, cfg, params)
    if dt < cfg.dt_min:
        raise StiffnessError(f"time step {dt:.3g} fell below dt_min={cfg.dt_min:.3g}", last_good=state)
    return dt


def divergence_residual(state: SolverState) -> float:
    """(||div u|| + ||div b||) / (||u||_H1 + ||b||_H1)."""
    num = sobolev_norm(divergence(state.u_hat), 0) + sobolev_norm(divergence(state.b_hat), 0)
    den = sobolev_norm(state.u_hat, 1) + sobolev_norm(state.b_hat, 1)
    return num / den if den else 0.0


def step(
    state: SolverState,
    cfg: StepperConfig,
    params: PaperParams,
    dt: Optional[float] = None,
    max_dt: Optional[float] = None,
) -> SolverState:
    """Advance one integrating-factor midpoint step.

    ``dt`` fixes the increment; otherwise the CFL bound is used, capped by
    ``max_dt`` (used to land exactly on sample times).
    """
    g = state.grid
    u, b = state.u_hat, state.b_hat
    if cfg.nonlinear:
        k1u, k1b, umax, bmax = _nonlinear(u, b, params.eta, cfg.hall)
    else:
        k1u = k1b = None
        umax = bmax = 0.0
    if dt is None:
        dt = _dt_bound(umax, bmax, g, cfg, params)
        if dt < cfg.dt_min:
            raise StiffnessError(f"time step {dt:.3g} fell below dt_min={cfg.dt_min:.3g}", last_good=state)
        if max_dt is not None:
            dt = min(dt, max_dt)

    half_u = np.exp(-0.5 * dt * params.nu * g.k2)
    half_b = np.exp(-0.5 * dt * params.mu * g.k2)
    full_u = half_u * half_u
    full_b = half_b * half_b
    if cfg.nonlinear:
        um = SpectralField(g, half_u * (u.coeffs + 0.5 * dt * k1u.coeffs))
        bm = SpectralField(g, half_b * (b.coeffs + 0.5 * dt * k1b.coeffs))
        k2u, k2b, _, _ = _nonlinear(um, bm, params.eta, cfg.hall)
        uc = full_u * u.coeffs + dt * half_u * k2u.coeffs
        bc = full_b * b.coeffs + dt * half_b * k2b.coeffs
    else:
        uc = np.exp(-dt * params.nu * g.k2) * u.coeffs
        bc = np.exp(-dt * params.mu * g.k2) * b.coeffs
    # decayed modes would otherwise sink into subnormal floats, which are slow
    for c in (uc, bc):
        c[np.abs(c) < _TINY] = 0.0
    mask = g.dealias_mask
    u_new = symmetrize(SpectralField(g, _leray_coeffs(g, uc * mask)))
    b_new = symmetrize(SpectralField(g, _leray_coeffs(g, bc * mask)))
    if not _check_finite(u_new, b_new):
        raise NumericalAbort(f"non-finite coefficients at step {state.step_count + 1}", last_good=state)
    new = SolverState(u_new, b_new, state.t + dt, state.step_count + 1, dt)
    res = divergence_residual(new)
    if res > cfg.divergence_tol:
        raise DivergenceError(f"divergence residual {res:.3g} exceeds {cfg.divergence_tol:.1g}")
    return new


Observer = Callable[[SolverState], None]


def _next_sample(t: float, interval: float) -> float:
    k = math.floor(t / interval + 1e-9)
    return (k + 1) * interval


def evolve(
    state: SolverState,
    horizon: float,
    cfg: StepperConfig,
    params: PaperParams,
    observers: Iterable[Observer] = (),
    sample_interval: Optional[float] = None,
    fixed_dt: Optional[float] = None,
) -> SolverState:
    """Step until ``horizon``, calling observers at t0, every sample time and the horizon.

    Sample times are absolute multiples of ``sample_interval``, and steps are
    shortened to land on them exactly, so a run resumed from a sample time
    follows the same step sequence as an uninterrupted one.
    """
    observers = list(observers)
    if horizon < state.t:
        raise ValueError(f"horizon {horizon} lies before the current time {state.t}")
    if horizon == state.t:
        return state
    interval = sample_interval if sample_interval is not None else horizon - state.t

    def notify(s):
        for obs in observers:
            obs(s)

    notify(state)
    while state.t < horizon:
        target = min(horizon, _next_sample(state.t, interval))
        remaining = target - state.t
        if fixed_dt is not None:
            dt = min(fixed_dt, remaining)
            if remaining - dt < 1e-12 * max(1.0, target):
                dt = remaining
            new = step(state, cfg, params, dt=dt)
        else:
            new = step(state, cfg, params, max_dt=remaining)
        if target - new.t < 1e-12 * max(1.0, target):
            new = replace(new, t=target)
            state = new
            notify(state)
        else:
            state = new
    return state
