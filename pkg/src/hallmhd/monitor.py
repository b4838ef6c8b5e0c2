"""Perturbation energy diagnostics around the reference pair (f~, g~).

U = u - f~ and B = b - g~ are tracked in H^3; the exact cancellations used in
the energy estimate are evaluated as discrete integrals, the unknown constant
of the differential inequality is fitted per run, and the commutator bound is
probed on random band-limited pairs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

from .algebra import (
    _cross_real,
    _to_spectral_dealiased,
    advect,
    cross,
    gradient_sobolev_norm_sq,
    real_gradient,
    sobolev_norm,
    sobolev_norm_sq,
)
from .data import BeltramiSeed, CutoffField, PaperParams
from .reference import ReferenceState, reference_state, self_interaction
from .solver import SolverState
from .spectral import (
    GridSpec,
    ScalarSpectralField,
    SpectralField,
    _curl_coeffs,
    _irfft,
    curl,
    gradient,
    leray_project,
    multi_indices,
    partial,
    resample,
    symmetrize,
)

CANCELLATION_NAMES = ("T1", "T2+T4", "I2_diagonal", "I32_structure", "hall_energy")
# reported alongside the identities but not an identity itself
DIAGNOSTIC_NAMES = ("I32_div_defect",)


@dataclass
class PerturbationSample:
    t: float
    e_u: float  # ||U||_H3^2
    e_b: float
    d_u: float  # ||grad U||_H3^2
    d_b: float
    forcing_f: float  # ||F||_H3
    forcing_g: float
    q2: float  # ||f~ x curl f~||_H3 + ||g~ x curl g~||_H3
    q3: float  # ||f~ x g~||_H3
    cancellation_residuals: dict = field(default_factory=dict)

    @property
    def energy(self) -> float:
        return self.e_u + self.e_b

    @property
    def amplitude(self) -> float:
        """||U||_H3 + ||B||_H3."""
        return math.sqrt(self.e_u) + math.sqrt(self.e_b)

    def as_dict(self) -> dict:
        out = {k: getattr(self, k) for k in ("t", "e_u", "e_b", "d_u", "d_b", "forcing_f", "forcing_g", "q2", "q3")}
        out.update({f"cancel_{k}": v for k, v in self.cancellation_residuals.items()})
        return out


def perturbations(state: SolverState, ref: ReferenceState) -> tuple[SpectralField, SpectralField]:
    if state.grid != ref.f.grid:
        raise ValueError("solver state and reference live on different grids")
    if abs(state.t - ref.t) > 1e-12 * max(1.0, abs(state.t)):
        raise ValueError(f"time mismatch: state at t={state.t!r}, reference at t={ref.t!r}")
    return state.u_hat - ref.f_tilde, state.b_hat - ref.g_tilde


# -- forcing --------------------------------------------------------------


def forcing_fields(ref: ReferenceState, cutoff: CutoffField, params: PaperParams) -> tuple[SpectralField, SpectralField]:
    """Source terms F, G of the perturbation system.

    F = f~ x curl f~ - g~ x curl g~ + nu (2 grad chi . grad f + f Lap chi)
    G = curl(f~ x g~) + mu (2 grad chi . grad g + g Lap chi)
        - chi f (grad chi . g) + chi g (grad chi . f)
    Gradient parts of F are left in place; only P F acts on U.
    """
    grid = ref.f.grid
    chi = cutoff.samples
    dchi = gradient(cutoff.values).real()
    lap_chi = _irfft(-grid.k2 * cutoff.values.coeffs, grid.n)
    f_r, g_r = ref.f.real(), ref.g.real()

    def boundary(v_r, grad_v, kappa):
        # 2 (grad chi . grad) v + v Lap chi
        return kappa * (2.0 * np.einsum("j...,ji...->i...", dchi, grad_v) + v_r * lap_chi)

    F_real = boundary(f_r, real_gradient(ref.f), params.nu)
    G_real = boundary(g_r, real_gradient(ref.g), params.mu)
    G_real += chi * (g_r * (dchi * f_r).sum(axis=0) - f_r * (dchi * g_r).sum(axis=0))
    F = SpectralField(grid, _to_spectral_dealiased(F_real, grid))
    G = SpectralField(grid, _to_spectral_dealiased(G_real, grid))
    F = F + cross(ref.f_tilde, curl(ref.f_tilde)) - cross(ref.g_tilde, curl(ref.g_tilde))
    G = G + curl(cross(ref.f_tilde, ref.g_tilde))
    return F, G


def energy_sample(
    U: SpectralField,
    B: SpectralField,
    ref: ReferenceState,
    params: PaperParams,
    cutoff: Optional[CutoffField] = None,
    cancellation_residuals: Optional[dict] = None,
) -> PerturbationSample:
    """H^3 energies, dissipations and forcing sizes at one time.

    Without ``cutoff`` the forcing norms are reported as nan.
    """
    if cutoff is not None:
        F, G = forcing_fields(ref, cutoff, params)
        ff, fg = sobolev_norm(F, 3), sobolev_norm(G, 3)
    else:
        ff = fg = math.nan
    return PerturbationSample(
        t=ref.t,
        e_u=sobolev_norm_sq(U, 3),
        e_b=sobolev_norm_sq(B, 3),
        d_u=gradient_sobolev_norm_sq(U, 3),
        d_b=gradient_sobolev_norm_sq(B, 3),
        forcing_f=ff,
        forcing_g=fg,
        q2=self_interaction(ref.f_tilde) + self_interaction(ref.g_tilde),
        q3=sobolev_norm(cross(ref.f_tilde, ref.g_tilde), 3),
        cancellation_residuals=dict(cancellation_residuals or {}),
    )


def energy_rate(history: Sequence[PerturbationSample]) -> np.ndarray:
    """dE/dt by second-order differences on the (possibly uneven) sample times."""
    t = np.array([s.t for s in history])
    e = np.array([s.energy for s in history])
    return np.gradient(e, t, edge_order=2)


# -- exact cancellations --------------------------------------------------


def _ratio(total: float, scale: float) -> float:
    return abs(total) / scale if scale > 0 else 0.0


def _norm(v: np.ndarray) -> np.ndarray:
    return np.sqrt((v**2).sum(axis=0))


def _grad_norm(gr: np.ndarray) -> np.ndarray:
    return np.sqrt((gr**2).sum(axis=(0, 1)))


def _transport(a_r: np.ndarray, grad_w: np.ndarray, z_r: np.ndarray) -> np.ndarray:
    """Pointwise (a . grad) w . z."""
    return np.einsum("j...,ji...,i...->...", a_r, grad_w, z_r)


def cancellation_checks(
    state: SolverState, ref: ReferenceState, alpha: Sequence[int], eta: float = 1.0
) -> dict[str, float]:
    """Relative residuals of the exact identities behind the energy estimate.

    Each integral is a grid sum of a product of fields band-limited to the
    dealiasing mask, hence an exact quadrature; residuals are |sum| divided by
    the sum of the pointwise magnitudes of the constituent factors.
    """
    if sum(alpha) > 3 or min(alpha) < 0:
        raise ValueError(f"derivative order must satisfy |alpha| <= 3, got {tuple(alpha)}")
    U, B = perturbations(state, ref)
    u_r, b_r = state.u_hat.real(), state.b_hat.real()
    dU, dB = partial(U, alpha), partial(B, alpha)
    dU_r, dB_r = dU.real(), dB.real()
    gdU, gdB = real_gradient(dU), real_gradient(dB)
    out = {}

    t1 = _transport(u_r, gdB, dB_r)
    out["T1"] = _ratio(t1.sum(), (_norm(u_r) * _grad_norm(gdB) * _norm(dB_r)).sum())

    t2 = _transport(b_r, gdU, dB_r)
    t4 = _transport(b_r, gdB, dU_r)
    scale = (_norm(b_r) * (_grad_norm(gdU) * _norm(dB_r) + _grad_norm(gdB) * _norm(dU_r))).sum()
    out["T2+T4"] = _ratio(t2.sum() + t4.sum(), scale)

    g_r = ref.g_tilde.real()
    a = curl(dB).real()
    i2 = (a * _cross_real(a, g_r)).sum(axis=0)
    out["I2_diagonal"] = _ratio(i2.sum(), (_norm(a) ** 2 * _norm(g_r)).sum())

    # I32 with a = d^alpha B, w = curl g~:
    #   -int a . curl(w x a) = -int (a.w) div a - int a . (a.grad) w + int a . (w.grad) a,
    # and the last term equals -1/2 int |a|^2 div w = 0.  B = b - chi g is not
    # solenoidal, so the div a term is kept and reported on its own.
    grid = state.grid
    w = curl(ref.g_tilde)
    w_r = w.real()
    wxa = _to_spectral_dealiased(_cross_real(w_r, dB_r), grid)
    direct = -(dB_r * _irfft(_curl_coeffs(grid, wxa), grid.n)).sum(axis=0)
    gw = real_gradient(w)
    div_a = np.einsum("jj...->...", gdB)
    defect = -(dB_r * w_r).sum(axis=0) * div_a
    reduced = -_transport(dB_r, gw, dB_r)
    transport = _transport(w_r, gdB, dB_r)
    mag_a, mag_w = _norm(dB_r), _norm(w_r)
    scale = (mag_a * mag_w * _grad_norm(gdB) + mag_a**2 * _grad_norm(gw)).sum()
    out["I32_structure"] = _ratio(direct.sum() - defect.sum() - reduced.sum() - transport.sum(), scale) + _ratio(
        transport.sum(), (mag_w * _grad_norm(gdB) * mag_a).sum()
    )
    out["I32_div_defect"] = _ratio(defect.sum(), scale)

    gb = real_gradient(state.b_hat)
    j_r = np.stack([gb[1][2] - gb[2][1], gb[2][0] - gb[0][2], gb[0][1] - gb[1][0]])
    jxb = _to_spectral_dealiased(_cross_real(j_r, b_r), grid)
    hall = (b_r * _irfft(_curl_coeffs(grid, jxb), grid.n)).sum(axis=0)
    out["hall_energy"] = _ratio(hall.sum(), (_norm(j_r) ** 2 * _norm(b_r)).sum())
    return out


def combined_residuals(state, ref, alphas: Iterable[Sequence[int]], eta: float = 1.0) -> dict[str, float]:
    """Worst residual of each identity over several derivative orders."""
    worst = dict.fromkeys(CANCELLATION_NAMES + DIAGNOSTIC_NAMES, 0.0)
    for alpha in alphas:
        for k, v in cancellation_checks(state, ref, alpha, eta).items():
            worst[k] = max(worst[k], v)
    return worst


def pressure_identity(u: SpectralField, b: SpectralField) -> tuple[float, float]:
    """(||grad p||, ||(I - P) N||) for N = -u.grad u + b.grad b.

    The pressure solves Lap p = div N and is built separately from the projection.
    """
    grid = u.grid
    N = advect(b, b) - advect(u, u)
    div_n = sum(1j * k * c for k, c in zip(grid.k_vec, N.coeffs))
    p = ScalarSpectralField(grid, -div_n * grid.inv_k2)
    grad_p = gradient(p)
    return sobolev_norm(grad_p, 0), sobolev_norm(N - leray_project(N), 0)


# -- differential inequality and bootstrap --------------------------------


@dataclass
class MasterFit:
    times: np.ndarray
    residual: np.ndarray
    minimal_c: float
    fitted_c: float


def _master_terms(history: Sequence[PerturbationSample], params: PaperParams):
    if len(history) < 3:
        raise ValueError("the differential inequality needs at least 3 samples")
    t = np.array([s.t for s in history])
    e = np.array([s.energy for s in history])
    d = np.array([s.d_u + s.d_b for s in history])
    amp = np.array([s.amplitude for s in history])
    decay = np.exp(-params.nu * t / 4) + np.exp(-params.mu * t / 4)
    floor = 1.0 / params.m0 + params.delta**2 * params.m0**3
    a = energy_rate(history) + 0.5 * min(params.nu, params.mu) * d
    b = amp * d + decay * (e + floor)
    return t, a, b


def master_inequality_residual(
    history: Sequence[PerturbationSample], params: PaperParams, fitted_c: Optional[float] = None
) -> MasterFit:
    """residual(t) = dE/dt + (min(nu,mu)/2 - C amp) D - C decay (E + 1/M0 + delta^2 M0^3).

    The residual is affine and decreasing in C, so the smallest C with
    residual <= 0 at every sample is max(0, max_t A/B) in closed form.
    """
    if fitted_c is not None and not fitted_c > 0:
        raise ValueError("fitted constant must be positive")
    t, a, b = _master_terms(history, params)
    with np.errstate(divide="ignore", invalid="ignore"):
        need = np.where(b > 0, a / b, np.where(a > 0, np.inf, 0.0))
    c_min = max(0.0, float(np.max(need)))
    c = c_min if fitted_c is None else fitted_c
    return MasterFit(t, a - c * b, c_min, c)


@dataclass
class BootstrapVerdict:
    threshold_ok: bool
    sup_amplitude: float
    scaled_sup: float  # sup amplitude * M0^(1/2)
    bounded: bool
    energy_bound: float
    sup_energy: float

    @property
    def passed(self) -> bool:
        return self.threshold_ok and self.bounded


def bootstrap_check(
    history: Sequence[PerturbationSample], params: PaperParams, fitted_c: float
) -> BootstrapVerdict:
    """Smallness threshold, M0-scaled amplitude and an empirical energy bound.

    The bound is 4 (E(0) + (int ||F|| + ||G|| dt)^2); forcing norms that were
    not computed count as zero.
    """
    t = np.array([s.t for s in history])
    e = np.array([s.energy for s in history])
    amp = np.array([s.amplitude for s in history])
    if not np.all(np.isfinite(e)):
        return BootstrapVerdict(False, math.inf, math.inf, False, math.nan, math.inf)
    threshold = min(params.mu, params.nu) / (4 * fitted_c) if fitted_c > 0 else math.inf
    forcing = np.nan_to_num(np.array([s.forcing_f + s.forcing_g for s in history]))
    integral = float(np.sum(0.5 * (forcing[1:] + forcing[:-1]) * np.diff(t))) if len(t) > 1 else 0.0
    bound = 4.0 * (e[0] + integral**2)
    sup_amp = float(amp.max())
    return BootstrapVerdict(
        threshold_ok=bool(np.all(e <= threshold)),
        sup_amplitude=sup_amp,
        scaled_sup=sup_amp * math.sqrt(params.m0),
        bounded=bool(e.max() <= bound),
        energy_bound=bound,
        sup_energy=float(e.max()),
    )


# -- solver observer ------------------------------------------------------


class PerturbationMonitor:
    """Solver observer that records a PerturbationSample at each call."""

    def __init__(
        self,
        seed: BeltramiSeed,
        cutoff: CutoffField,
        params: PaperParams,
        alphas: Sequence[Sequence[int]] = ((0, 0, 0), (2, 1, 0)),
        with_forcing: bool = True,
    ):
        self.seed = seed
        self.cutoff = cutoff
        self.params = params
        self.alphas = tuple(tuple(a) for a in alphas)
        self.with_forcing = with_forcing
        self.history: list[PerturbationSample] = []

    def __call__(self, state: SolverState) -> PerturbationSample:
        ref = reference_state(self.seed, self.cutoff, self.params, state.t)
        U, B = perturbations(state, ref)
        res = combined_residuals(state, ref, self.alphas, self.params.eta) if self.alphas else {}
        sample = energy_sample(U, B, ref, self.params, self.cutoff if self.with_forcing else None, res)
        self.history.append(sample)
        return sample


# -- commutator bound -----------------------------------------------------


@dataclass
class CommutatorReport:
    lhs: float
    rhs: float
    m: int

    @property
    def ratio(self) -> float:
        return self.lhs / self.rhs if self.rhs > 0 else (0.0 if self.lhs == 0 else math.inf)


def _sup(real: np.ndarray, vector: bool) -> float:
    return float(np.sqrt(np.max((real**2).sum(axis=0) if vector else real**2)))


def commutator_test(h: ScalarSpectralField, v, m: int) -> CommutatorReport:
    """sum_{|alpha|<=m} ||D^a(h v) - (D^a h) v|| against ||h||_{H^{m-1}} ||grad v||_inf + ||h||_inf ||v||_{H^m}.

    Products and sup norms are evaluated on the doubled grid, where products
    of mask-limited fields are alias free.
    """
    if not (isinstance(m, (int, np.integer)) and 1 <= m <= 3):
        raise ValueError(f"commutator order must be 1, 2 or 3, got {m!r}")
    if h.grid != v.grid:
        raise ValueError("fields live on different grids")
    fine = h.grid.refined()
    hf, vf = resample(h, fine), resample(v, fine)
    vector = isinstance(v, SpectralField)
    h_r, v_r = hf.real(), vf.real()
    hv = type(vf)(fine, np.fft.rfftn(h_r * v_r, axes=(-3, -2, -1), norm="forward"))
    lhs = 0.0
    for alpha in multi_indices(m):
        diff = partial(hv, alpha).real() - partial(hf, alpha).real() * v_r
        lhs += math.sqrt(float(np.sum(diff**2)) * fine.h**3)
    grad_v = real_gradient(vf) if vector else gradient(vf).real()
    grad_sup = float(np.sqrt(np.max((grad_v**2).sum(axis=(0, 1) if vector else 0))))
    rhs = sobolev_norm(h, m - 1) * grad_sup + _sup(h_r, False) * sobolev_norm(v, m)
    return CommutatorReport(lhs, rhs, int(m))


def random_band_limited_pair(
    grid: GridSpec, rng: np.random.Generator, vector: bool = False, kmax_index: Optional[int] = None, decay: float = 2.5
):
    """Random real (h, v) with |m_axis| <= kmax_index and amplitudes ~ (1 + |m|^2)^(-decay/2).

    ``kmax_index`` defaults to the largest index kept by the dealiasing mask.
    """
    k = grid.m_max if kmax_index is None else kmax_index
    if not 0 < k <= grid.m_max:
        raise ValueError(f"band limit must lie in [1, {grid.m_max}] on this grid, got {k}")
    m = np.abs(grid.lattice_index)
    box = (m[:, None, None] <= k) & (m[None, :, None] <= k) & (np.arange(grid.n // 2 + 1) <= k)
    amp = box * (1.0 + grid.k2 / grid.dk**2) ** (-decay / 2)

    def draw(lead):
        shape = lead + grid.spectral_shape
        return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) * amp

    h = symmetrize(ScalarSpectralField(grid, draw(())))
    v = symmetrize(SpectralField(grid, draw((3,))) if vector else ScalarSpectralField(grid, draw(())))
    return h, v


@dataclass
class CommutatorSuite:
    n: int
    m: int
    ratios: np.ndarray

    @property
    def max_ratio(self) -> float:
        return float(np.max(self.ratios))


def commutator_suite(
    n: int, pairs: int = 200, m: int = 3, rng_seed: int = 0, period: float = 2 * math.pi, vector: bool = False
) -> CommutatorSuite:
    """Commutator ratios over ``pairs`` random pairs filling the dealiasing band of an n-grid."""
    grid = GridSpec(n, period)
    rng = np.random.default_rng(rng_seed)
    ratios = [commutator_test(*random_band_limited_pair(grid, rng, vector), m).ratio for _ in range(pairs)]
    return CommutatorSuite(n, m, np.array(ratios))
