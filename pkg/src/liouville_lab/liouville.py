"""Equilibrium states, the Duhamel density matrix and the Liouville forms.

The state at time ``t`` of a system prepared in equilibrium ``zeta = f(H)``
in the remote past and driven by the adiabatically switched field is

    rho(t) = zeta(t) - i int_{-inf}^t e^{eta r_-} U(t, r)([E.x, zeta(r)]) dr,

with ``zeta(t) = G(t) zeta G(t)*``.  It is also the limit of
``U(t, s)(zeta)`` as ``s -> -inf``.  Both representations are computed here
and compared against each other and against the Liouville equation in its
weak form ``i d/dt <<A, rho(t)>> = L_t(A, rho(t))``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from numpy.polynomial import legendre
from scipy.special import expit

from .covariant_algebra import (
    CovariantEnsemble,
    ModelEnsemble,
    apply_HL_sqrt,
    apply_HR_sqrt,
    apply_superpropagator,
    dagger,
    gauge_conjugate,
    k2_inner,
    norms,
)
from .lattice_model import UnsupportedOperation

__all__ = [
    "EquilibriumSpec",
    "DensityEnsemble",
    "DuhamelResult",
    "LimitResult",
    "UniquenessReport",
    "equilibrium_state",
    "zeta_t",
    "position_commutator",
    "field_commutator",
    "q0_check",
    "duhamel_rho",
    "duhamel_rho_many",
    "limit_rho",
    "form_HL_t",
    "form_HR_t",
    "form_L",
    "form_L_commutator",
    "bath_residual",
    "liouville_residual",
    "liouville_residual_study",
    "propagation_derivative_residual",
    "uniqueness_check",
]

FERMI_TIE = 1e-12
GAP_FLOOR = 1e-12
DEFAULT_K = 2**12
# second-order frozen-generator products keep the time-stepping floor far
# below the finite-difference and quadrature errors studied here
DEFAULT_RULE = "midpoint"


@dataclass(frozen=True)
class EquilibriumSpec:
    """Fermi-Dirac distribution at inverse temperature ``beta``.

    ``beta = inf`` selects the Fermi projection onto energies ``<= E_F``;
    eigenvalues within ``1e-12`` above ``E_F`` count as occupied.
    """

    beta: float
    fermi_energy: float

    def __post_init__(self):
        if not self.beta > 0:
            raise ValueError("beta must be positive")
        if not math.isfinite(self.fermi_energy):
            raise ValueError("fermi_energy must be finite")

    @property
    def zero_temperature(self) -> bool:
        return math.isinf(self.beta)

    def occupation(self, energies: np.ndarray) -> np.ndarray:
        energies = np.asarray(energies, dtype=float)
        if self.zero_temperature:
            return (energies <= self.fermi_energy + FERMI_TIE).astype(float)
        return expit(-self.beta * (energies - self.fermi_energy))


@dataclass(frozen=True, eq=False)
class DensityEnsemble:
    """A density matrix per realization, with its time stamp and origin."""

    ensemble: CovariantEnsemble
    t: Optional[float]
    provenance: str
    info: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.provenance not in ("equilibrium", "gauged", "duhamel", "limit"):
            raise ValueError(f"unknown provenance {self.provenance!r}")

    @property
    def matrices(self) -> np.ndarray:
        return self.ensemble.matrices

    def hermiticity_defect(self) -> float:
        A = self.matrices
        return float(np.max(np.abs(A - np.conj(np.swapaxes(A, 1, 2)))))


# ---------------------------------------------------------------------------
# equilibrium
# ---------------------------------------------------------------------------


def equilibrium_state(
    spec: EquilibriumSpec, models: ModelEnsemble, t: Optional[float] = None
) -> DensityEnsemble:
    """``zeta_omega = f(H_omega(t))`` from each spectral factorisation."""
    mats = np.stack([H.function(spec.occupation) for H in models.hamiltonians(t)])
    return DensityEnsemble(models.ensemble(mats), t, "equilibrium")


def zeta_t(zeta: DensityEnsemble, t: float, models: ModelEnsemble) -> DensityEnsemble:
    """``zeta(t) = G(t) zeta G(t)*``."""
    if models.geometry.boundary != "open":
        raise UnsupportedOperation("zeta(t) needs a globally defined position operator")
    return DensityEnsemble(gauge_conjugate(zeta.ensemble, models.gauge_stack(t)), t, "gauged")


def _centred_positions(geometry) -> np.ndarray:
    return geometry.positions("center")


def position_commutator(zeta, k: int) -> CovariantEnsemble:
    """``[x_k, zeta]`` with ``x`` measured from the centre of the box."""
    Z = zeta.ensemble if isinstance(zeta, DensityEnsemble) else zeta
    if Z.geometry.boundary != "open":
        raise UnsupportedOperation("the position operator is only global in open geometry")
    x = _centred_positions(Z.geometry)[:, k]
    return Z.like(x[None, :, None] * Z.matrices - Z.matrices * x[None, None, :])


def field_commutator(zeta, E: Sequence[float]) -> CovariantEnsemble:
    """``[E.x, zeta]``."""
    Z = zeta.ensemble if isinstance(zeta, DensityEnsemble) else zeta
    if Z.geometry.boundary != "open":
        raise UnsupportedOperation("the position operator is only global in open geometry")
    ex = _centred_positions(Z.geometry) @ np.asarray(E, dtype=float)
    return Z.like(ex[None, :, None] * Z.matrices - Z.matrices * ex[None, None, :])


def q0_check(zeta, models: ModelEnsemble, k: int = 0) -> tuple:
    """``(||H^{1/2} [x_k, zeta]||_2, E ||x_k^2 zeta chi_0||_2^2)``."""
    Z = zeta.ensemble if isinstance(zeta, DensityEnsemble) else zeta
    comm = position_commutator(Z, k)
    first = norms(apply_HL_sqrt(comm, models))[1]
    x2 = _centred_positions(Z.geometry)[:, k] ** 2
    X = Z.like(x2[None, :, None] * Z.matrices)
    second = k2_inner(X, X).real
    return float(first), float(second)


# ---------------------------------------------------------------------------
# Duhamel representation
# ---------------------------------------------------------------------------


@dataclass
class DuhamelResult:
    rho: DensityEnsemble
    truncation_bound: float
    t_min: float
    n_nodes: int
    k: int


def _panel_edges(t_min: float, t: float, width: float) -> np.ndarray:
    """Panel boundaries on ``[t_min, t]``: ``t_min + j*width``, plus ``0`` (the kink of ``E(r)``) and ``t``."""
    n = int(math.floor((t - t_min) / width + 1e-9))
    edges = list(t_min + width * np.arange(n + 1))
    if t_min < 0 < t:
        edges.append(0.0)
    edges.append(t)
    edges = np.unique(np.asarray(edges))
    keep = np.concatenate([[True], np.diff(edges) > 1e-12 * max(1.0, width)])
    return edges[keep]


def _nodes(t_min: float, t: float, width: float, order: int):
    x, w = legendre.leggauss(order)
    edges = _panel_edges(t_min, t, width)
    a, b = edges[:-1, None], edges[1:, None]
    nodes = (0.5 * (b - a) * x + 0.5 * (b + a)).ravel()
    weights = (0.5 * (b - a) * w).ravel()
    return nodes, weights


def duhamel_rho_many(
    models: ModelEnsemble,
    spec: EquilibriumSpec,
    times: Sequence[float],
    t_min: Optional[float] = None,
    quadrature_order: int = 8,
    panel_width: float = 0.25,
    k: int = DEFAULT_K,
    tolerance: Optional[float] = None,
    zeta: Optional[DensityEnsemble] = None,
    rule: str = DEFAULT_RULE,
) -> list:
    """Duhamel ``rho(t)`` at several times from one propagator sweep.

    The lower limit ``-inf`` is replaced by ``t_min`` (default ``-8/eta``);
    the neglected tail is bounded in ``K_2`` norm by
    ``e^{eta t_min} / eta * ||[E.x, zeta]||_2``, which is returned with each
    result and triggers a warning when it exceeds ``tolerance``.
    """
    profile = models.profile
    eta = profile.eta
    times = [float(t) for t in times]
    if t_min is None:
        t_min = -8.0 / eta
    if not t_min < min(min(times), 0.0):
        raise ValueError("t_min must lie below every requested time and below 0")
    if zeta is None:
        zeta = equilibrium_state(spec, models)
    X0 = field_commutator(zeta, profile.vector)
    bound = math.exp(eta * t_min) / eta * norms(X0)[1]
    if tolerance is not None and bound > tolerance:
        warnings.warn(
            f"t_min={t_min} too shallow: truncation bound {bound:.3e} exceeds {tolerance:.3e}",
            RuntimeWarning,
            stacklevel=2,
        )

    per_time = [_nodes(t_min, t, panel_width, quadrature_order) for t in times]
    all_nodes = np.unique(np.concatenate([n for n, _ in per_time] + [np.asarray(times)]))
    V = models.propagators(t_min, all_nodes, k, rule)  # U(r, t_min)
    Vh = np.conj(np.swapaxes(V, -1, -2))
    pos = {r: i for i, r in enumerate(all_nodes)}

    # V(r)* e^{eta r_-} [E.x, zeta(r)] V(r) at every node
    gauges = np.stack([models.models[0].gauge(r) for r in all_nodes])  # (R, N)
    damp = np.exp(eta * np.minimum(all_nodes, 0.0))
    Xr = damp[None, :, None, None] * (
        gauges[None, :, :, None] * X0.matrices[:, None] * gauges.conj()[None, :, None, :]
    )
    integrand = Vh @ Xr @ V

    results = []
    for t, (nodes, weights) in zip(times, per_time):
        idx = np.array([pos[r] for r in nodes])
        inner = np.einsum("r,mrij->mij", weights, integrand[:, idx])
        Vt = V[:, pos[t]]
        corr = Vt @ inner @ np.conj(np.swapaxes(Vt, -1, -2))
        zt = gauge_conjugate(zeta.ensemble, models.gauge_stack(t))
        rho = zt.like(zt.matrices - 1j * corr)
        info = {"truncation_bound": bound, "t_min": t_min, "k": k, "n_nodes": len(nodes)}
        results.append(DuhamelResult(DensityEnsemble(rho, t, "duhamel", info), bound, t_min, len(nodes), k))
    return results


def duhamel_rho(models: ModelEnsemble, spec: EquilibriumSpec, t: float, **kw) -> DuhamelResult:
    """Single-time version of :func:`duhamel_rho_many`."""
    return duhamel_rho_many(models, spec, [t], **kw)[0]


# ---------------------------------------------------------------------------
# limit representation
# ---------------------------------------------------------------------------


@dataclass
class LimitResult:
    rho: DensityEnsemble
    rho_gauged: DensityEnsemble
    s_list: list
    gaps: list
    gaps_gauged: list
    representation_gaps: list
    gap_ratios: list
    diverged: bool


def limit_rho(
    models: ModelEnsemble,
    spec: EquilibriumSpec,
    t: float,
    s_list: Sequence[float] = (-2.0, -4.0, -6.0, -8.0),
    k: int = DEFAULT_K,
    zeta: Optional[DensityEnsemble] = None,
    rule: str = DEFAULT_RULE,
) -> LimitResult:
    """``U(t, s)(zeta)`` and ``U(t, s)(zeta(s))`` along decreasing ``s``.

    Consecutive Cauchy gaps should shrink like ``e^{eta (s_{n+1} - s_n)}``;
    gaps that fail to decrease are reported through ``diverged`` and a warning.
    """
    s_list = [float(s) for s in s_list]
    if any(b >= a for a, b in zip(s_list, s_list[1:])):
        raise ValueError("s_list must be strictly decreasing")
    if s_list[0] > t:
        raise ValueError("every s must lie at or below t")
    if zeta is None:
        zeta = equilibrium_state(spec, models)
    s0 = s_list[-1]
    V = models.propagators(s0, s_list + [t], k, rule)
    Vt = V[:, -1]
    plain, gauged = [], []
    for i, s in enumerate(s_list):
        U = Vt @ np.conj(np.swapaxes(V[:, i], -1, -2))  # U(t, s)
        plain.append(apply_superpropagator(U, zeta.ensemble))
        gauged.append(apply_superpropagator(U, gauge_conjugate(zeta.ensemble, models.gauge_stack(s))))
    gaps = [norms(b - a)[1] for a, b in zip(plain, plain[1:])]
    gaps_g = [norms(b - a)[1] for a, b in zip(gauged, gauged[1:])]
    rep = [norms(a - b)[1] for a, b in zip(plain, gauged)]
    ratios = [b / a if a > 0 else float("nan") for a, b in zip(gaps, gaps[1:])]
    # gaps at rounding level carry no information about convergence
    floor = GAP_FLOOR * max(norms(zeta.ensemble)[1], 1.0)
    diverged = any(b >= a for a, b in zip(gaps, gaps[1:]) if a > floor)
    if diverged:
        warnings.warn(f"limit representation not contracting: gaps {gaps}", RuntimeWarning, stacklevel=2)
    info = {"s": s_list[-1], "gaps": gaps}
    return LimitResult(
        DensityEnsemble(plain[-1], t, "limit", info),
        DensityEnsemble(gauged[-1], t, "limit", info),
        s_list,
        gaps,
        gaps_g,
        rep,
        ratios,
        diverged,
    )


# ---------------------------------------------------------------------------
# quadratic forms
# ---------------------------------------------------------------------------


def _ens(A):
    return A.ensemble if isinstance(A, DensityEnsemble) else A


def form_HL_t(A, B, models: ModelEnsemble, t: Optional[float]) -> complex:
    """``<<H_L(t)^{1/2} A, H_L(t)^{1/2} B>>``."""
    A, B = _ens(A), _ens(B)
    return k2_inner(apply_HL_sqrt(A, models, t), apply_HL_sqrt(B, models, t))


def form_HR_t(A, B, models: ModelEnsemble, t: Optional[float]) -> complex:
    """``<<H_R(t)^{1/2} A, H_R(t)^{1/2} B>>``."""
    A, B = _ens(A), _ens(B)
    return k2_inner(apply_HR_sqrt(A, models, t), apply_HR_sqrt(B, models, t))


def form_L(A, B, models: ModelEnsemble, t: Optional[float]) -> complex:
    """``L_t(A, B) = H_{L,t}(A, B) - H_{R,t}(A, B)``."""
    return form_HL_t(A, B, models, t) - form_HR_t(A, B, models, t)


def form_L_commutator(A, B, models: ModelEnsemble, t: Optional[float]) -> complex:
    """``<<A, [H(t), B]>>``, equal to ``L_t(A, B)`` whenever the trace is cyclic."""
    A, B = _ens(A), _ens(B)
    H = np.stack([h.matrix for h in models.hamiltonians(t)])
    return k2_inner(A, B.like(H @ B.matrices - B.matrices @ H))


def bath_residual(A, zeta_t_ens, models: ModelEnsemble, t: float) -> tuple:
    """``(|L_t(A, zeta(t))|, ||H^{1/2} A||_2 ||H^{1/2} zeta(t)||_2)``."""
    A, Z = _ens(A), _ens(zeta_t_ens)
    value = abs(form_L(A, Z, models, t))
    scale = norms(apply_HL_sqrt(A, models, t))[1] * norms(apply_HL_sqrt(Z, models, t))[1]
    return float(value), float(scale)


def liouville_residual_study(
    A, models: ModelEnsemble, spec: EquilibriumSpec, t: float, hs: Sequence[float], **duhamel_kw
) -> np.ndarray:
    """``|i D_h <<A, rho>>(t) - L_t(A, rho(t))|`` for every ``h`` in ``hs``.

    ``D_h`` is the central difference; all Duhamel states come from one sweep.
    """
    A = _ens(A)
    hs = [float(h) for h in hs]
    if any(h <= 0 for h in hs):
        raise ValueError("h must be positive")
    times = [t] + [t + h for h in hs] + [t - h for h in hs]
    res = duhamel_rho_many(models, spec, times, **duhamel_kw)
    rho = {tt: r.rho.ensemble for tt, r in zip(times, res)}
    form = form_L(A, rho[t], models, t)
    out = []
    for h in hs:
        fd = (k2_inner(A, rho[t + h]) - k2_inner(A, rho[t - h])) / (2 * h)
        out.append(abs(1j * fd - form))
    return np.asarray(out)


def liouville_residual(A, models: ModelEnsemble, spec: EquilibriumSpec, t: float, h: float, **kw) -> float:
    return float(liouville_residual_study(A, models, spec, t, [h], **kw)[0])


def propagation_derivative_residual(
    A,
    B,
    models: ModelEnsemble,
    t: float,
    r: float,
    h: float,
    variable: str = "t",
    sign: float = 1.0,
    k: int = DEFAULT_K,
    rule: str = DEFAULT_RULE,
) -> float:
    """Finite-difference check of the time derivatives of ``<<A, U(t, r)(B)>>``.

    ``variable="t"``: ``i d/dt <<A, U(t,r)(B)>> = L_t(A, U(t,r)(B))``.
    ``variable="r"``: ``i d/dr <<A, U(t,r)(B)>> = -L_r(U(r,t)(A), B)``.
    ``sign=-1`` flips the form term, for sign-discrimination studies.
    """
    A, B = _ens(A), _ens(B)
    if not h > 0:
        raise ValueError("h must be positive")
    if variable == "t":
        V = models.propagators(r, [t - h, t, t + h], k, rule)  # U(tau, r)
        vals = [k2_inner(A, apply_superpropagator(V[:, i], B)) for i in (0, 2)]
        form = form_L(A, apply_superpropagator(V[:, 1], B), models, t)
    elif variable == "r":
        V = models.propagators(t, [r - h, r, r + h], k, rule)  # U(rho, t) = U(t, rho)*
        Vh = np.conj(np.swapaxes(V, -1, -2))
        vals = [k2_inner(A, apply_superpropagator(Vh[:, i], B)) for i in (0, 2)]
        form = -form_L(apply_superpropagator(V[:, 1], A), B, models, r)
    else:
        raise ValueError("variable must be 't' or 'r'")
    fd = (vals[1] - vals[0]) / (2 * h)
    return float(abs(1j * fd - sign * form))


# ---------------------------------------------------------------------------
# uniqueness
# ---------------------------------------------------------------------------


@dataclass
class UniquenessReport:
    zero_solution_norm: float
    constancy_deviation: float
    scale: float

    @property
    def value(self) -> float:
        return max(self.zero_solution_norm, self.constancy_deviation)


def uniqueness_check(
    models: ModelEnsemble,
    t_grid: Sequence[float],
    A: CovariantEnsemble,
    perturbation_scale: float = 1.0,
    seed: int = 0,
    k: int = DEFAULT_K,
    rule: str = DEFAULT_RULE,
) -> UniquenessReport:
    """Homogeneous solutions of the Liouville equation stay trivial.

    Zero data evolves to zero, and for a random Hermitian perturbation ``B``
    the pulled-back solution ``U(s0, t)(U(t, s0)(B))`` keeps
    ``<<A, .>>`` constant along ``t_grid`` (``s0 = t_grid[0]``).
    """
    t_grid = [float(t) for t in t_grid]
    s0 = t_grid[0]
    rng = np.random.default_rng(seed)
    M, N = models.M, models.geometry.n_sites
    G = rng.normal(size=(M, N, N)) + 1j * rng.normal(size=(M, N, N))
    B = models.ensemble(perturbation_scale * 0.5 * (G + np.conj(np.swapaxes(G, 1, 2))), A.window)
    V = models.propagators(s0, t_grid, k, rule)
    zero = B.like(np.zeros_like(B.matrices))
    zero_norm = 0.0
    ref = k2_inner(A, B)
    dev = 0.0
    for i in range(len(t_grid)):
        U = V[:, i]
        zero_norm = max(zero_norm, norms(apply_superpropagator(U, zero))[1])
        w = apply_superpropagator(U, B)
        back = apply_superpropagator(np.conj(np.swapaxes(U, -1, -2)), w)
        dev = max(dev, abs(k2_inner(A, back) - ref))
    scale = norms(A)[1] * norms(B)[1]
    return UniquenessReport(float(zero_norm), float(dev), float(scale))
