"""Experiment suites: the acceptance criteria, a smoke test and a convergence study.

Every suite maps an :class:`ExperimentConfig` to a list of
:class:`CheckRecord`.  Acceptance checks carry the number of the criterion
they serve; a criterion passes when all of its records pass.
"""

from __future__ import annotations

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .. import propagator as P
from ..covariant_algebra import (
    CovariantEnsemble,
    ModelEnsemble,
    apply_superpropagator,
    dagger,
    diamond_identities,
    k2_inner,
    norms,
    tuv_volume,
    tuv_with_error,
)
from ..lattice_model import (
    DisorderModel,
    FieldProfile,
    LatticeGeometry,
    TimeDependentHamiltonian,
    covariance_residual,
    gauge_identity_residual,
    verify_form_bound,
)
from ..liouville import (
    bath_residual,
    duhamel_rho,
    duhamel_rho_many,
    equilibrium_state,
    limit_rho,
    liouville_residual_study,
    zeta_t,
)
from .config import ExperimentConfig
from .report import CheckRecord, RunReport
from .seeding import realization_seeds

__all__ = ["SuiteContext", "run", "run_suite", "ACCEPTANCE", "build_models", "dictionary"]


@dataclass
class SuiteContext:
    config: ExperimentConfig
    workers: int = 1
    artifacts: dict = field(default_factory=dict)
    timing: dict = field(default_factory=dict)
    _models: Optional[ModelEnsemble] = None

    @property
    def models(self) -> ModelEnsemble:
        if self._models is None:
            self._models = build_models(
                self.config.geometry,
                self.config.disorder,
                self.config.profile,
                self.config.realizations,
                self.config.master_seed,
                self.workers,
            )
        return self._models

    def rng(self, stream: int) -> np.random.Generator:
        return np.random.default_rng([self.config.master_seed, 7919, stream])


def build_models(
    geometry: LatticeGeometry,
    disorder: DisorderModel,
    profile: FieldProfile,
    count: int,
    master_seed: int,
    workers: int = 1,
    window: str = "cell",
) -> ModelEnsemble:
    """Sample and diagonalise the realizations, optionally on a thread pool.

    Results come back in realization order, so every later reduction runs in
    the same order whatever the number of workers.
    """
    seeds = realization_seeds(master_seed, count)

    def make(seed):
        m = TimeDependentHamiltonian(disorder.sample(geometry, seed), profile)
        m.static.eigh
        return m

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            models = list(pool.map(make, seeds))
    else:
        models = [make(s) for s in seeds]
    return ModelEnsemble(models, window)


def _opnorm(A) -> float:
    return float(np.linalg.norm(A, 2))


def _bump(center: float, width: float) -> Callable:
    """Smooth bump supported on ``|e - center| < width``."""

    def f(e):
        u = (np.asarray(e, dtype=float) - center) / width
        out = np.zeros_like(u)
        inside = np.abs(u) < 1
        out[inside] = np.exp(1.0 - 1.0 / (1.0 - u[inside] ** 2))
        return out

    return f


def dictionary(models: ModelEnsemble, center: float, window: Optional[str] = None) -> dict:
    """Test operators: cell projectors, smooth functions of ``H`` and a smoothed position commutator."""
    geom = models.geometry
    N = geom.n_sites
    window = window or models.window

    def projector(label):
        P_ = np.zeros((N, N), dtype=complex)
        idx = geom.cell_sites(label)
        P_[idx, idx] = 1.0
        return models.ensemble(np.broadcast_to(P_, (models.M, N, N)).copy(), window)

    ref = geom.reference_cell
    other = tuple(max(c - 1, 0) for c in ref)
    g1 = models.function(_bump(center, 1.5)).with_window(window)
    g2 = models.function(_bump(center + 1.0, 1.0)).with_window(window)
    out = {"chi_0": projector(ref), "chi_a": projector(other), "f1(H)": g1, "f2(H)": g2}
    if geom.boundary == "open":
        x = geom.positions("center")[:, 0]
        comm = 1j * (x[None, :, None] * g1.matrices - g1.matrices * x[None, None, :])
        out["i[x,f1(H)]"] = g1.like(comm)
    return out


def _slopes(hs, values) -> np.ndarray:
    hs, values = np.asarray(hs), np.asarray(values)
    return np.log(values[:-1] / values[1:]) / np.log(hs[:-1] / hs[1:])


# ---------------------------------------------------------------------------
# acceptance criteria
# ---------------------------------------------------------------------------


def c1_axioms(ctx: SuiteContext) -> list:
    lo, hi = ctx.config.interval
    k = 64
    unit = comp = adj = 0.0
    span = hi - lo
    triples = [(hi, lo + 0.5 * span, lo), (lo + 0.85 * span, lo + 0.5 * span, lo + 0.15 * span),
               (lo + 0.15 * span, lo + 0.75 * span, lo + 0.6 * span)]
    for m in ctx.models.models:
        for t, r, s in triples:
            r = lo + round((r - lo) * k) / k  # a grid point
            Uts = P.build_uk(m, t, s, k, lo)
            Utr = P.build_uk(m, t, r, k, lo).U
            Urs = P.build_uk(m, r, s, k, lo).U
            Ust = P.build_uk(m, s, t, k, lo).U
            unit = max(unit, Uts.unitarity_defect)
            comp = max(comp, _opnorm(Utr @ Urs - Uts.U))
            adj = max(adj, _opnorm(Ust - Uts.U.conj().T))
    return [
        CheckRecord("C1.unitarity", unit, 1e-10, criterion=1),
        CheckRecord("C1.grid_composition", comp, 1e-12, criterion=1),
        CheckRecord("C1.adjoint", adj, 1e-12, criterion=1),
    ]


def c2_convergence(ctx: SuiteContext) -> list:
    cfg = ctx.config.raw["propagator"]
    lo, hi = ctx.config.interval
    worst_dev = 0.0
    worst_ratio = 0.0
    unconverged = 0
    ks = []
    for m in ctx.models.models:
        res = P.converge_propagator(m, hi, lo, cfg["tol"], cfg["k0"], cfg["cap"], anchor=lo)
        ref = P.reference_propagator(m, hi, lo)
        worst_dev = max(worst_dev, _opnorm(res.U - ref))
        g = np.asarray(res.gap_history)
        if len(g) > 1:
            worst_ratio = max(worst_ratio, float(np.max(g[1:] / g[:-1])))
        unconverged += int(not res.converged)
        ks.append(res.k)
    return [
        CheckRecord("C2.reference_deviation", worst_dev, 1e-5, criterion=2, note=f"final k {sorted(set(ks))}"),
        CheckRecord("C2.gap_ratio_max", worst_ratio, 1.0, criterion=2, note="< 1 means strictly decreasing gaps"),
        CheckRecord("C2.unconverged_runs", unconverged, 0, criterion=2),
    ]


def c3_wk_bound(ctx: SuiteContext) -> list:
    lo, hi = ctx.config.interval
    rng = ctx.rng(3)
    pairs = rng.uniform(lo, hi, size=(10, 2))
    worst = 0.0
    for m in ctx.models.models:
        M_hat = P.estimate_MI(m, P.grid_pairs((lo, hi), 16))
        for k in (8, 32, 128):
            for t, s in pairs:
                ratio = _opnorm(P.w_k(m, t, s, k, lo)) / P.w_k_bound(1.1 * M_hat, k, t, s)
                worst = max(worst, ratio)
    return [CheckRecord("C3.wk_over_bound", worst, 1.0, criterion=3, note="k in {8,32,128}, 10 pairs")]


def c4_dyson(ctx: SuiteContext) -> list:
    lo, hi = ctx.config.interval
    span = hi - lo
    pairs = [(lo + 0.25 * span, lo), (hi, hi - 0.5), (lo + 0.65 * span, lo + 0.45 * span),
             (lo + 0.4 * span, lo + 0.6 * span), (hi - 0.1, hi - 0.35)]
    pairs = [(t, s) for t, s in pairs if abs(t - s) <= 0.5 + 1e-12]
    recon = 0.0
    factorial = 0.0
    for m in ctx.models.models[:2]:
        M_hat = P.estimate_MI(m, P.grid_pairs((lo, hi), 16))
        for t, s in pairs:
            terms = P.dyson_terms(m, t, s, 6)
            W = m(t).sqrt @ P.reference_propagator(m, t, s) @ m(s).inv_sqrt
            recon = max(recon, _opnorm(sum(terms) - W))
            for j, T in enumerate(terms[1:], start=1):
                bound = (abs(t - s) * M_hat) ** j / math.factorial(j)
                factorial = max(factorial, _opnorm(T) / bound)
    return [
        CheckRecord("C4.reconstruction", recon, 1e-4, criterion=4),
        CheckRecord("C4.factorial_ratio", factorial, 1.1, criterion=4),
    ]


def c5_gamma(ctx: SuiteContext) -> list:
    lo, hi = ctx.config.interval
    m = ctx.models.models[0]
    zero = max(float(np.max(np.abs(P.gamma(m, t, t).matrix))) for t in np.linspace(lo, hi, 5))
    hs = [1e-2, 5e-3, 2.5e-3]
    slopes = []
    for u in (lo + 0.25 * (hi - lo), lo + 0.75 * (hi - lo)):
        raw = [_opnorm(P.gamma(m, u - h, u).matrix / h + P.gamma(m, u, u - h).matrix / h) for h in hs]
        slopes.extend(_slopes(hs, raw))
    dt = max(P.dunford_taylor_check(m, t, s, 64) for t, s in [(-0.2, -0.6), (lo, hi), (hi - 0.3, lo + 0.1)])
    cl = max(_opnorm(P.c_limit(m, s) - P.c_closed_form(m, s)) for s in (-0.5, lo + 0.5))
    return [
        CheckRecord("C5.gamma_diagonal", zero, 0.0, criterion=5),
        CheckRecord("C5.gamma_pair_slope", min(slopes), 0.9, "ge", criterion=5),
        CheckRecord("C5.dunford_taylor", dt, 1e-6, criterion=5, note="64 nodes"),
        CheckRecord("C5.c_limit", cl, 1e-5, criterion=5),
    ]


def c6_gauge(ctx: SuiteContext) -> list:
    worst = 0.0
    for m in ctx.models.models:
        H = m.static.norm
        for t in (-2.0, -1.0, 0.0, 1.5):
            worst = max(worst, gauge_identity_residual(m.geometry, m.realization, m.profile, t) / H)
    geom = LatticeGeometry((8,), boundary="periodic")
    cov = 0.0
    for seed in realization_seeds(ctx.config.master_seed, 4):
        real = ctx.config.disorder.sample(geom, seed)
        for a in (1, 3, 5):
            cov = max(cov, covariance_residual(real, (a,)))
    return [
        CheckRecord("C6.gauge_identity", worst, 1e-12, criterion=6, note="relative to ||H||"),
        CheckRecord("C6.covariance", cov, 1e-12, criterion=6, note="periodic L=8, shifts 1,3,5"),
    ]


def _random_ensemble(models: ModelEnsemble, rng, window: str) -> CovariantEnsemble:
    M, N = models.M, models.geometry.n_sites
    G = rng.normal(size=(M, N, N)) + 1j * rng.normal(size=(M, N, N))
    return models.ensemble(G / np.sqrt(N), window)


def c7_algebra(ctx: SuiteContext) -> list:
    models = ctx.models
    rng = ctx.rng(7)
    A = _random_ensemble(models, rng, "volume")
    B = _random_ensemble(models, rng, "volume")
    C = _random_ensemble(models, rng, "volume").matrices
    r = diamond_identities(A, B, C)
    lo, hi = ctx.config.interval
    U = models.propagators(lo, [hi], 256)[:, 0]
    UA = apply_superpropagator(U, A)
    iso = abs(norms(UA)[1] / norms(A)[1] - 1.0)
    dag = float(np.max(np.abs(dagger(UA).matrices - apply_superpropagator(U, dagger(A)).matrices)))
    dag /= norms(A)[2]
    return [
        CheckRecord("C7.diamond_vs_inner", r[0], 1e-12, criterion=7),
        CheckRecord("C7.diamond_symmetry", r[1], 1e-12, criterion=7),
        CheckRecord("C7.diamond_module", r[2], 1e-12, criterion=7),
        CheckRecord("C7.isometry", iso, 1e-10, criterion=7),
        CheckRecord("C7.dagger_compatibility", dag, 1e-12, criterion=7),
    ]


def _volume_models(ctx: SuiteContext) -> ModelEnsemble:
    m = ctx.models
    return ModelEnsemble(m.models, "volume", m.cell)


def c8_bath(ctx: SuiteContext) -> list:
    models = _volume_models(ctx)
    spec = ctx.config.equilibrium
    zeta = equilibrium_state(spec, models)
    dic = dictionary(models, spec.fermi_energy)
    worst = 0.0
    for t in ctx.config.raw["liouville"]["t_grid"]:
        zt = zeta_t(zeta, t, models)
        for A in dic.values():
            value, scale = bath_residual(A, zt, models, t)
            worst = max(worst, value / scale)
    return [CheckRecord("C8.bath_lemma", worst, 1e-8, criterion=8, note=f"{len(dic)} operators")]


def _liouville_kw(ctx: SuiteContext) -> dict:
    lv = ctx.config.raw["liouville"]
    return {"t_min": lv["t_min"], "quadrature_order": lv["quadrature_order"]}


def c9_liouville(ctx: SuiteContext) -> list:
    models = _volume_models(ctx)
    spec = ctx.config.equilibrium
    A = dictionary(models, spec.fermi_energy)["i[x,f1(H)]"]
    t = -0.5
    hs = [2e-2, 1e-2, 5e-3, 2.5e-3]
    kw = _liouville_kw(ctx)
    fine = liouville_residual_study(A, models, spec, t, hs, **kw)
    coarse = liouville_residual_study(
        A, models, spec, t, hs, k=2**11, **{**kw, "quadrature_order": kw["quadrature_order"] - 2}
    )
    noise = float(np.max(np.abs(fine - coarse)))
    slopes = _slopes(hs, fine)
    clean = [s for s, a, b in zip(slopes, fine[:-1], fine[1:]) if min(a, b) > 10 * noise]
    bound = duhamel_rho(models, spec, t, **kw).truncation_bound * norms(A)[1]
    lo_s = min(clean) if clean else float("nan")
    hi_s = max(clean) if clean else float("nan")
    note = "residuals " + ", ".join(f"{v:.3e}" for v in fine)
    return [
        CheckRecord("C9.slope_min", lo_s, [1.8, 2.2], "within", criterion=9, note=note),
        CheckRecord("C9.slope_max", hi_s, [1.8, 2.2], "within", criterion=9, note=f"{len(clean)} pairs above floor"),
        CheckRecord("C9.floor_vs_truncation", noise, bound, criterion=9, note="floor <= tail bound x ||A||_2"),
    ]


def c10_representations(ctx: SuiteContext) -> list:
    models = ctx.models
    spec = ctx.config.equilibrium
    eta = ctx.config.profile.eta
    kw = _liouville_kw(ctx)
    zeta = equilibrium_state(spec, models)
    d = duhamel_rho(models, spec, 0.0, zeta=zeta, **kw)
    d_half = duhamel_rho(models, spec, 0.0, zeta=zeta, k=2**11, **kw)
    s_list = [-2.0, -4.0, -6.0, -8.0]
    lim = limit_rho(models, spec, 0.0, s_list, zeta=zeta)
    q = math.exp(-eta * 2.0)
    b_lim = lim.gaps[-1] * q / (1 - q)
    b_num = norms(d.rho.ensemble - d_half.rho.ensemble)[1]
    budget = d.truncation_bound + b_lim + b_num
    diff = norms(d.rho.ensemble - lim.rho.ensemble)[1]
    diff_g = norms(d.rho.ensemble - lim.rho_gauged.ensemble)[1]
    ratios = np.asarray(lim.gap_ratios) / q
    ctx.artifacts["zeta"] = zeta.ensemble
    ctx.artifacts["rho_duhamel_0"] = d.rho.ensemble
    ctx.artifacts["rho_limit_0"] = lim.rho.ensemble
    note = f"duhamel tail {d.truncation_bound:.3e}, limit tail {b_lim:.3e}, numerics {b_num:.3e}"
    return [
        CheckRecord("C10.duhamel_vs_limit", diff, budget, criterion=10, note=note),
        CheckRecord("C10.duhamel_vs_gauged_limit", diff_g, budget, criterion=10),
        CheckRecord("C10.gap_rate_min", float(np.min(ratios)), [0.7, 1.3], "within", criterion=10),
        CheckRecord("C10.gap_rate_max", float(np.max(ratios)), [0.7, 1.3], "within", criterion=10),
    ]


def c11_fixed_points(ctx: SuiteContext) -> list:
    models = ctx.models
    spec = ctx.config.equilibrium
    eta = ctx.config.profile.eta
    zeta = equilibrium_state(spec, models)
    still = models.with_profile(FieldProfile(np.zeros(models.geometry.dimension), eta))
    fixed = 0.0
    for r in duhamel_rho_many(still, spec, [-4.0, 0.0, 2.0], zeta=zeta):
        fixed = max(fixed, float(np.max(np.abs(r.rho.matrices - zeta.matrices))))
    lim0 = limit_rho(still, spec, 0.0, zeta=zeta)
    fixed = max(fixed, float(np.max(np.abs(lim0.rho.matrices - zeta.matrices))))
    A = dictionary(models, spec.fermi_energy)["i[x,f1(H)]"]
    ts = [-4.0, -5.0, -6.0, -7.0, -8.0]
    base = k2_inner(A, zeta.ensemble)
    res = duhamel_rho_many(models, spec, ts, t_min=-20.0 / eta, zeta=zeta)
    Cs = np.array([abs(k2_inner(A, r.rho.ensemble) - base) * math.exp(-eta * t) for t, r in zip(ts, res)])
    spread = float((Cs.max() - Cs.min()) / Cs.mean())
    return [
        CheckRecord("C11.zero_field_fixed_point", fixed, 1e-12, criterion=11),
        CheckRecord("C11.tail_constant_spread", spread, 0.1, criterion=11, note=f"C ~ {Cs.mean():.4e}"),
    ]


def c12_birkhoff(ctx: SuiteContext) -> list:
    geom = LatticeGeometry((64,), boundary="periodic")
    profile = FieldProfile(np.zeros(1), ctx.config.profile.eta)
    models = build_models(geom, ctx.config.disorder, profile, 200, ctx.config.master_seed, ctx.workers)
    gamma = ctx.config.disorder.gamma(geom)
    center = 2.0 + gamma + 0.5 * ctx.config.disorder.v_plus_max
    F = models.function(_bump(center, 2.0))
    mean, se = tuv_with_error(F)
    vol, se_vol = tuv_volume(F.matrices[0], geom)
    combined = math.hypot(se, se_vol)
    return [
        CheckRecord(
            "C12.birkhoff_z",
            abs(mean - vol) / combined,
            3.0,
            criterion=12,
            note=f"ensemble {mean.real:.5f}+-{se:.1e}, volume {vol.real:.5f}+-{se_vol:.1e}",
        )
    ]


def c13_linear_response(ctx: SuiteContext) -> list:
    models = ctx.models
    spec = ctx.config.equilibrium
    eta = ctx.config.profile.eta
    zeta = equilibrium_state(spec, models)
    direction = np.asarray(ctx.config.profile.vector, dtype=float)
    direction = direction / np.linalg.norm(direction)
    Es = [1e-3, 2e-3, 4e-3, 1e-2]
    vals = []
    for E in Es:
        m = models.with_profile(FieldProfile(E * direction, eta))
        r = duhamel_rho(m, spec, 0.0, zeta=zeta, **_liouville_kw(ctx))
        vals.append(norms(r.rho.ensemble - zeta_t(zeta, 0.0, m).ensemble)[1])
    slope = float(np.polyfit(np.log(Es), np.log(vals), 1)[0])
    return [CheckRecord("C13.response_slope", slope, [0.9, 1.1], "within", criterion=13)]


ACCEPTANCE = [
    c1_axioms,
    c2_convergence,
    c3_wk_bound,
    c4_dyson,
    c5_gamma,
    c6_gauge,
    c7_algebra,
    c8_bath,
    c9_liouville,
    c10_representations,
    c11_fixed_points,
    c12_birkhoff,
    c13_linear_response,
]


# ---------------------------------------------------------------------------
# smoke and convergence suites
# ---------------------------------------------------------------------------


def smoke(ctx: SuiteContext) -> list:
    """Fast identity checks on whatever configuration is given."""
    models = ctx.models
    geom = models.geometry
    lo, hi = ctx.config.interval
    m = models.models[0]
    k = 32
    U = P.build_uk(m, hi, lo, k, lo)
    r = lo + round(0.5 * (hi - lo) * k) / k
    comp = _opnorm(P.build_uk(m, hi, r, k, lo).U @ P.build_uk(m, r, lo, k, lo).U - U.U)
    adj = _opnorm(P.build_uk(m, lo, hi, k, lo).U - U.U.conj().T)
    out = [
        CheckRecord("smoke.unitarity", U.unitarity_defect, 1e-10),
        CheckRecord("smoke.grid_composition", comp, 1e-12),
        CheckRecord("smoke.adjoint", adj, 1e-12),
    ]
    alpha = ctx.config.raw["disorder"]["form_bound_alpha"]
    beta = ctx.config.disorder.v_minus_max
    out.append(
        CheckRecord("smoke.form_bound_failures", sum(not verify_form_bound(x.realization, alpha, beta) for x in models.models), 0)
    )
    out.append(CheckRecord("smoke.min_eigenvalue", min(x.static.min_eigenvalue for x in models.models), 1.0, "ge"))
    if geom.boundary == "open":
        g = max(gauge_identity_residual(geom, x.realization, x.profile, 0.0) / x.static.norm for x in models.models)
        out.append(CheckRecord("smoke.gauge_identity", g, 1e-12))
    pgeom = LatticeGeometry(geom.shape, geom.spacing, "periodic") if min(geom.shape) >= 3 else None
    if pgeom is not None:
        real = ctx.config.disorder.sample(pgeom, models.seeds[0])
        out.append(CheckRecord("smoke.covariance", covariance_residual(real, (1,) * geom.dimension), 1e-12))
    vol = ModelEnsemble(models.models, "volume")
    rng = ctx.rng(1)
    A = _random_ensemble(vol, rng, "volume")
    B = _random_ensemble(vol, rng, "volume")
    r3 = diamond_identities(A, B, _random_ensemble(vol, rng, "volume").matrices)
    out.append(CheckRecord("smoke.diamond_identities", max(r3), 1e-12))
    Us = vol.propagators(lo, [hi], k)[:, 0]
    out.append(CheckRecord("smoke.isometry", abs(norms(apply_superpropagator(Us, A))[1] / norms(A)[1] - 1), 1e-10))
    if geom.boundary == "open":
        spec = ctx.config.equilibrium
        zeta = equilibrium_state(spec, vol)
        ctx.artifacts["zeta"] = zeta.ensemble
        A0 = dictionary(vol, spec.fermi_energy)["f1(H)"]
        zt = zeta_t(zeta, 0.0, vol)
        value, scale = bath_residual(A0, zt, vol, 0.0)
        out.append(CheckRecord("smoke.bath_lemma", value / max(scale, 1e-300), 1e-8))
        still = vol.with_profile(FieldProfile(np.zeros(geom.dimension), ctx.config.profile.eta))
        r0 = duhamel_rho(still, spec, 0.0, zeta=zeta, k=64)
        out.append(CheckRecord("smoke.zero_field_fixed_point", float(np.max(np.abs(r0.rho.matrices - zeta.matrices))), 1e-12))
        rho = duhamel_rho(vol, spec, -1.0, zeta=zeta, k=256, t_min=-4.0)
        out.append(CheckRecord("smoke.rho_hermitian", rho.rho.hermiticity_defect(), 1e-10))
    return out


def convergence(ctx: SuiteContext) -> list:
    """Empirical order of ``U_k`` and stabilisation of the ``M_I`` estimate."""
    lo, hi = ctx.config.interval
    m = ctx.models.models[0]
    ref = P.reference_propagator(m, hi, lo)
    ks = [4, 8, 16, 32, 64, 128]
    errs = [_opnorm(P.build_uk(m, hi, lo, k, lo).U - ref) for k in ks]
    order = float(-np.polyfit(np.log(ks), np.log(errs), 1)[0])
    m32 = P.estimate_MI(m, P.grid_pairs((lo, hi), 32))
    m64 = P.estimate_MI(m, P.grid_pairs((lo, hi), 64))
    return [
        CheckRecord("convergence.uk_order", order, [0.8, 1.2], "within", note=", ".join(f"{e:.2e}" for e in errs)),
        CheckRecord("convergence.MI_refinement", abs(m64 - m32) / m64 if m64 else 0.0, 0.05),
        CheckRecord("convergence.MI_monotone", m32 - m64, 1e-15, note="refining never lowers the estimate"),
    ]


SUITE_FUNCTIONS = {"smoke": [smoke], "acceptance": ACCEPTANCE, "convergence": [convergence]}


def run_suite(config: ExperimentConfig, suite: Optional[str] = None, workers: int = 1) -> tuple:
    """Run one suite; returns ``(RunReport, SuiteContext)``."""
    suite = suite or config.suite
    ctx = SuiteContext(config, workers)
    checks = []
    for fn in SUITE_FUNCTIONS[suite]:
        t0 = time.perf_counter()
        checks.extend(fn(ctx))
        ctx.timing[fn.__name__] = round(time.perf_counter() - t0, 3)
    return RunReport(config.raw, checks, suite, dict(ctx.timing)), ctx


def run(config: ExperimentConfig, suite: Optional[str] = None, out_dir=None, workers: int = 1) -> RunReport:
    """Run a suite and, with ``out_dir``, write the report and raw ensembles."""
    from .io import save_ensemble

    report, ctx = run_suite(config, suite, workers)
    if out_dir is not None:
        report.write(out_dir)
        for name, ens in ctx.artifacts.items():
            save_ensemble(ens, f"{out_dir}/raw/{name}.lle")
    return report
