"""Unitary propagator of ``H(t)`` built from frozen-generator products.

``U_k(t, s)`` freezes the generator at one point of every grid cell of
width ``1/k`` and multiplies the exact exponentials.  The left end
(``rule="left"``) gives a first-order product; the cell midpoint
(``rule="midpoint"``) gives a second-order one.  ``U_k`` converges to
the propagator ``U(t, s)``; the operator calculus around it (``Gamma``, ``C``,
the Dyson terms ``W^(j)``) is provided here together with the quantitative
bounds that control the construction.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np
from numpy.polynomial import legendre
from scipy.integrate import solve_ivp

from .lattice_model import HermitianOperator, TimeDependentHamiltonian

__all__ = [
    "PropagatorSchedule",
    "PropagatorResult",
    "GammaOperator",
    "GammaLimitPair",
    "step_exponential",
    "build_uk",
    "propagate_grid",
    "converge_propagator",
    "reference_propagator",
    "gamma",
    "gamma_rate",
    "gamma_dunford_taylor",
    "gamma_limit_pair",
    "gamma1_quadrature",
    "gamma2_spectral",
    "estimate_MI",
    "grid_pairs",
    "w_k",
    "w_k_bound",
    "w_k_bound_check",
    "dyson_terms",
    "dyson_term",
    "dyson_series",
    "direct_w",
    "c_operator",
    "c_operator_field_form",
    "c_closed_form",
    "c_limit",
    "dunford_taylor_check",
    "resolvent_constant",
    "weak_derivative_residual",
    "richardson",
    "tan_squared_nodes",
]

_GRID_EPS = 1e-9
DEFAULT_CAP = 2**14


def _opnorm(A) -> float:
    return float(np.linalg.norm(A, 2))


# ---------------------------------------------------------------------------
# schedule and results
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PropagatorSchedule:
    """Closed interval ``I`` plus the refinement policy used on it.

    The frozen-generator grid is ``anchor + j/k``; the anchor defaults to the
    left end of ``I``.
    """

    interval: tuple
    k0: int = 4
    tol: float = 1e-6
    cap: int = DEFAULT_CAP
    anchor: Optional[float] = None

    def __post_init__(self):
        lo, hi = (float(v) for v in self.interval)
        if not lo < hi:
            raise ValueError("interval must satisfy lo < hi")
        object.__setattr__(self, "interval", (lo, hi))
        if self.k0 < 1:
            raise ValueError("k0 must be >= 1")
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.anchor is None:
            object.__setattr__(self, "anchor", lo)

    def grid(self, k: int) -> np.ndarray:
        lo, hi = self.interval
        n = int(math.floor((hi - self.anchor) * k + _GRID_EPS))
        j0 = int(math.ceil((lo - self.anchor) * k - _GRID_EPS))
        return self.anchor + np.arange(j0, n + 1) / k


@dataclass
class PropagatorResult:
    U: np.ndarray
    t: float
    s: float
    k: int
    gap: Optional[float] = None
    gap_history: list = field(default_factory=list)
    k_history: list = field(default_factory=list)
    converged: bool = True
    reference_deviation: Optional[float] = None

    @property
    def unitarity_defect(self) -> float:
        U = self.U
        return _opnorm(U.conj().T @ U - np.eye(len(U)))


@dataclass
class GammaOperator:
    matrix: np.ndarray
    t: float
    s: float


@dataclass
class GammaLimitPair:
    gamma1: np.ndarray
    gamma2: np.ndarray
    residual: float
    h: np.ndarray
    raw_residuals: np.ndarray


# ---------------------------------------------------------------------------
# U_k
# ---------------------------------------------------------------------------


def step_exponential(H: HermitianOperator, dt: float) -> np.ndarray:
    """``exp(-i dt H)`` from the cached eigendecomposition."""
    if dt == 0:
        return np.eye(H.shape[0], dtype=complex)
    return H.expm(dt)


def _cell_index(u: float, anchor: float, k: int) -> int:
    return int(math.floor((u - anchor) * k + _GRID_EPS))


RULES = {"left": 0.0, "midpoint": 0.5}


def _rule_offset(rule: str) -> float:
    try:
        return RULES[rule]
    except KeyError:
        raise ValueError(f"rule must be one of {sorted(RULES)}") from None


def _segments(t0: float, t1: float, k: int, anchor: float, rule: str = "left"):
    """Pieces of ``[t0, t1]`` cut at grid points, with each piece's frozen time.

    ``rule="left"`` freezes the generator at the left end of its grid cell;
    ``rule="midpoint"`` at the centre, which makes the product second order
    in ``1/k``.
    """
    off = _rule_offset(rule)
    j_lo = _cell_index(t0, anchor, k) + 1
    j_hi = int(math.ceil((t1 - anchor) * k - _GRID_EPS)) - 1
    inner = [anchor + j / k for j in range(j_lo, j_hi + 1)]
    points = [t0] + inner + [t1]
    out = []
    for a, b in zip(points[:-1], points[1:]):
        j = _cell_index(a, anchor, k)
        full = abs((b - a) - 1.0 / k) < _GRID_EPS / k
        out.append((anchor + (j + off) / k, 1.0 / k if full else b - a))
    return out


def build_uk(
    model: TimeDependentHamiltonian,
    t: float,
    s: float,
    k: int,
    anchor: float = 0.0,
    rule: str = "left",
) -> PropagatorResult:
    """Frozen-generator product ``U_k(t, s)`` on the grid ``anchor + Z/k``.

    For ``t < s`` the result is ``U_k(s, t)*``.  Because the frozen generator
    depends only on the grid cell, ``U_k(t, r) U_k(r, s) = U_k(t, s)`` holds
    for every ``r``, not only grid points.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    N = model.geometry.n_sites
    if t == s:
        return PropagatorResult(np.eye(N, dtype=complex), t, s, k)
    lo, hi = (s, t) if s < t else (t, s)
    U = np.eye(N, dtype=complex)
    if model.field_is_zero:
        U = step_exponential(model.static, hi - lo)
    else:
        for frozen, dt in _segments(lo, hi, k, anchor, rule):
            U = model.step(frozen, dt) @ U
    if t < s:
        U = U.conj().T
    return PropagatorResult(U, t, s, k)


def propagate_grid(
    models: Sequence[TimeDependentHamiltonian],
    s: float,
    times: Iterable[float],
    k: int,
    anchor: float = 0.0,
    rule: str = "left",
) -> np.ndarray:
    """``U_k(tau, s)`` for every ``tau`` in ``times`` and every model.

    One sweep over the grid serves all requested times.  Returns an array of
    shape ``(len(models), len(times), N, N)`` in the order of ``times``.
    """
    if isinstance(models, TimeDependentHamiltonian):
        models = [models]
    models = list(models)
    times = np.asarray(list(times), dtype=float)
    M = len(models)
    N = models[0].geometry.n_sites
    targets = np.unique(np.concatenate([times, [s]]))
    lo = targets[0]
    eye = np.broadcast_to(np.eye(N, dtype=complex), (M, N, N))

    zero_field = all(m.field_is_zero for m in models)
    open_mode = models[0].geometry.boundary == "open"
    if zero_field or open_mode:
        w = np.stack([m.static.eigh[0] for m in models])
        V = np.stack([m.static.eigh[1] for m in models])
        Vh = V.conj().transpose(0, 2, 1)
        x = models[0].geometry.positions()
        profile = models[0].profile

        def static_exp(dt):
            return (V * np.exp(-1j * dt * w)[:, None, :]) @ Vh

        if zero_field:
            # the generator is constant: one spectral exponential per target
            out = np.empty((M, len(times), N, N), dtype=complex)
            for i, tau in enumerate(times):
                out[:, i] = static_exp(tau - s)
            return out

        full = static_exp(1.0 / k)

        def step(U, frozen, dt):
            E = full if dt == 1.0 / k else static_exp(dt)
            g = np.exp(1j * (x @ profile.switching_integral(frozen)))
            return g[None, :, None] * (E @ (g.conj()[None, :, None] * U))

    else:

        def step(U, frozen, dt):
            return np.stack([m.step(frozen, dt) for m in models]) @ U

    snapshots = {}
    U = eye.copy()
    c = lo
    for tau in targets:
        if tau > c:
            for frozen, dt in _segments(c, tau, k, anchor, rule):
                U = step(U, frozen, dt)
            c = tau
        snapshots[tau] = U
    base = snapshots[targets[targets.searchsorted(s)]]
    base_h = base.conj().transpose(0, 2, 1)
    out = np.empty((M, len(times), N, N), dtype=complex)
    for i, tau in enumerate(times):
        out[:, i] = snapshots[tau] @ base_h
    return out


def reference_propagator(
    model: TimeDependentHamiltonian, t: float, s: float, rtol: float = 1e-12, atol: float = 1e-12
) -> np.ndarray:
    """``U(t, s)`` from an adaptive 8th-order Runge-Kutta solve of ``i Y' = H(t) Y``.

    The Hamiltonian is rebuilt from scratch at every right-hand-side call, so
    this path shares nothing with the frozen-generator products.
    """
    N = model.geometry.n_sites
    if t == s:
        return np.eye(N, dtype=complex)

    def rhs(tau, y):
        Y = y.view(complex).reshape(N, N)
        H = model.at_shift(model.profile.switching_integral(tau)).matrix
        return (-1j * (H @ Y)).reshape(-1).view(float)

    y0 = np.eye(N, dtype=complex).reshape(-1).view(float)
    sol = solve_ivp(rhs, (s, t), y0, method="DOP853", rtol=rtol, atol=atol)
    if not sol.success:
        raise RuntimeError(f"reference integrator failed: {sol.message}")
    return sol.y[:, -1].copy().view(complex).reshape(N, N)


def converge_propagator(
    model: TimeDependentHamiltonian,
    t: float,
    s: float,
    tol: float,
    k0: int = 4,
    cap: int = DEFAULT_CAP,
    anchor: float = 0.0,
    rule: str = "left",
) -> PropagatorResult:
    """Double ``k`` until ``||U_k - U_2k|| <= tol``.

    Hitting ``cap`` returns the last product with ``converged=False`` and a
    warning instead of raising.
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    k = k0
    prev = build_uk(model, t, s, k, anchor, rule).U
    gaps, ks = [], [k]
    while True:
        k2 = 2 * k
        if k2 > cap:
            warnings.warn(
                f"propagator not converged: k reached cap {cap}, gap history {gaps}",
                RuntimeWarning,
                stacklevel=2,
            )
            return PropagatorResult(prev, t, s, k, gaps[-1] if gaps else None, gaps, ks, False)
        cur = build_uk(model, t, s, k2, anchor, rule).U
        gap = _opnorm(cur - prev)
        gaps.append(gap)
        ks.append(k2)
        if gap <= tol:
            return PropagatorResult(cur, t, s, k2, gap, gaps, ks, True)
        k, prev = k2, cur


# ---------------------------------------------------------------------------
# Gamma and C
# ---------------------------------------------------------------------------


def gamma(model: TimeDependentHamiltonian, t: float, s: float) -> GammaOperator:
    """``Gamma(t, s) = H(t)^{1/2} H(s)^{-1/2} - I``."""
    N = model.geometry.n_sites
    if t == s:
        return GammaOperator(np.zeros((N, N), dtype=complex), t, s)
    G = model(t).sqrt @ model(s).inv_sqrt - np.eye(N)
    return GammaOperator(G, t, s)


def gamma_rate(model: TimeDependentHamiltonian, t: float, s: float) -> np.ndarray:
    if t == s:
        raise ValueError("gamma_rate needs t != s")
    return gamma(model, t, s).matrix / (t - s)


def tan_squared_nodes(n: int):
    """Nodes and weights for ``(1/pi) int_0^inf lambda^{-1/2} g(lambda) dlambda``.

    Uses ``lambda = tan(theta)^2`` and Gauss-Legendre in ``theta``; the weights
    absorb ``lambda^{-1/2} dlambda / pi = 2 sec(theta)^2 dtheta / pi``.
    """
    x, w = legendre.leggauss(n)
    theta = (x + 1) * np.pi / 4
    lam = np.tan(theta) ** 2
    weights = w * (np.pi / 4) * 2 / np.cos(theta) ** 2 / np.pi
    return lam, weights


def c_operator(model: TimeDependentHamiltonian, t: float, s: float) -> np.ndarray:
    """``C(t, s) = H(s)^{-1/2} (H(t) - H(s)) H(s)^{-1/2}``."""
    Hs = model(s)
    return Hs.inv_sqrt @ (model(t).matrix - Hs.matrix) @ Hs.inv_sqrt


def c_operator_field_form(model: TimeDependentHamiltonian, t: float, s: float) -> np.ndarray:
    """``C(t, s)`` from the field difference ``F(t) - F(s)``.

    On the Peierls lattice the kinetic change is exactly
    ``sum_j (cos(a dF_j) - 1) K_j(F(s)) + sin(a dF_j)/a J_j(F(s))`` with
    ``K_j = -(T_j + T_j*)/a^2`` and ``J_j = i (T_j - T_j*)/a``; the continuum
    ``dF^2 - 2 dF (D - F(s))`` is its small-``a`` limit.
    """
    a = model.geometry.spacing
    Fs = model.profile.switching_integral(s)
    dF = model.profile.switching_integral(t) - Fs
    N = model.geometry.n_sites
    diff = np.zeros((N, N), dtype=complex)
    for j, df in enumerate(dF):
        if df == 0:
            continue
        T = model.hopping(j, Fs)
        K = -(T + T.conj().T) / a**2
        J = 1j * (T - T.conj().T) / a
        diff += (math.cos(a * df) - 1.0) * K + (math.sin(a * df) / a) * J
    R = model(s).inv_sqrt
    return R @ diff @ R


def c_closed_form(model: TimeDependentHamiltonian, s: float) -> np.ndarray:
    """``C(s) = lim C(t, s)/(t - s)`` from ``F'(s)``, ``F(s)`` and ``D = Pi(0)``.

    ``Pi_j(F) = exp(-i a F_j) D_j - i (exp(-i a F_j) - 1)/a`` and
    ``dH/dF_j = -(Pi_j + Pi_j*)``, the lattice form of ``2 F - 2 D``.
    """
    a = model.geometry.spacing
    F = model.profile.switching_integral(s)
    dF = model.profile.electric_field(s)
    N = model.geometry.n_sites
    out = np.zeros((N, N), dtype=complex)
    for j in range(model.geometry.dimension):
        if dF[j] == 0:
            continue
        D = model.covariant_derivative(j)
        phase = np.exp(-1j * a * F[j])
        Pi = phase * D - 1j * (phase - 1.0) / a * np.eye(N)
        out += -dF[j] * (Pi + Pi.conj().T)
    R = model(s).inv_sqrt
    return R @ out @ R


def richardson(values: Sequence[np.ndarray], hs: Sequence[float], order: int = 1):
    """Neville-style Richardson tableau for ``f(h) = f0 + c1 h^order + c2 h^(2 order)...``.

    Assumes a geometric sequence ``hs``.  Returns the most extrapolated entry.
    """
    hs = np.asarray(hs, dtype=float)
    table = [np.asarray(v) for v in values]
    p = order
    while len(table) > 1:
        ratio = hs[0] / hs[1]
        factor = ratio**p
        table = [(factor * table[i + 1] - table[i]) / (factor - 1) for i in range(len(table) - 1)]
        p += order if order > 0 else 1
        hs = hs[1:]
    return table[0]


def c_limit(
    model: TimeDependentHamiltonian, s: float, h_sequence: Sequence[float] = (1e-2, 5e-3, 2.5e-3)
) -> np.ndarray:
    """Extrapolated one-sided limit of ``C(t, s)/(t - s)`` as ``t`` rises to ``s``."""
    vals = [c_operator(model, s - h, s) / (-h) for h in h_sequence]
    return richardson(vals, h_sequence)


def gamma_dunford_taylor(
    model: TimeDependentHamiltonian, t: float, s: float, n_nodes: int = 64
) -> np.ndarray:
    """``Gamma(t, s)`` as a resolvent integral of ``H(s)^{1/2} C(t, s) H(s)^{1/2}``."""
    Ht, Hs = model(t), model(s)
    X = Hs.sqrt @ c_operator(model, t, s) @ Hs.sqrt
    lam, wts = tan_squared_nodes(n_nodes)
    out = np.zeros_like(X)
    for l, w in zip(lam, wts):
        out += w * (Ht.sqrt @ Ht.resolvent(l) @ X @ Hs.resolvent(l))
    return out


def dunford_taylor_check(
    model: TimeDependentHamiltonian, t: float, s: float, n_nodes: int = 64
) -> float:
    """Norm distance between ``H(s)^{-1/2} - H(t)^{-1/2}`` and its resolvent integral."""
    if t == s:
        return 0.0
    Ht, Hs = model(t), model(s)
    X = Hs.sqrt @ c_operator(model, t, s) @ Hs.sqrt
    lam, wts = tan_squared_nodes(n_nodes)
    quad = np.zeros_like(X)
    for l, w in zip(lam, wts):
        quad += w * (Ht.resolvent(l) @ X @ Hs.resolvent(l))
    return _opnorm((Hs.inv_sqrt - Ht.inv_sqrt) - quad)


def resolvent_constant(model: TimeDependentHamiltonian, t: float, n_nodes: int = 64) -> float:
    """Smallest ``C0`` with ``||H(t)^{1/2} (H(t) + lambda)^{-1}|| <= C0 / (2 sqrt(lambda))``.

    Measured on the Dunford-Taylor nodes.  For each eigenvalue ``e`` the
    ratio is ``2 sqrt(lambda e) / (e + lambda)``, so the value never exceeds 1.
    """
    e = model(t).eigenvalues
    lam, _ = tan_squared_nodes(n_nodes)
    ratio = 2 * np.sqrt(np.outer(lam, e)) / (e[None, :] + lam[:, None])
    return float(ratio.max())


def gamma1_quadrature(model: TimeDependentHamiltonian, u: float, n_nodes: int = 64) -> np.ndarray:
    """``Gamma_1(u)`` from the resolvent integral of ``H^{1/2} C(u) H^{1/2}``."""
    H = model(u)
    X = H.sqrt @ c_closed_form(model, u) @ H.sqrt
    lam, wts = tan_squared_nodes(n_nodes)
    out = np.zeros_like(X)
    for l, w in zip(lam, wts):
        R = H.resolvent(l)
        out -= w * (H.sqrt @ R @ X @ R)
    return out


def gamma2_spectral(model: TimeDependentHamiltonian, u: float) -> np.ndarray:
    """``Gamma_2(u) = (d H^{1/2}/du) H^{-1/2}`` via divided differences in the eigenbasis."""
    H = model(u)
    w, V = H.eigh
    r = np.sqrt(w)
    Hp = V.conj().T @ model.derivative(u) @ V
    G = Hp / ((r[:, None] + r[None, :]) * r[None, :])
    return V @ G @ V.conj().T


def gamma_limit_pair(
    model: TimeDependentHamiltonian, u: float, h_sequence: Sequence[float] = (1e-2, 5e-3)
) -> GammaLimitPair:
    """One-sided limits ``Gamma_1(u)``, ``Gamma_2(u)`` and the defect of their sum."""
    hs = np.asarray(h_sequence, dtype=float)
    if np.any(np.diff(hs) >= 0) or np.any(hs <= 0):
        raise ValueError("h_sequence must be positive and strictly decreasing")
    g1 = [gamma(model, u - h, u).matrix / h for h in hs]
    g2 = [gamma(model, u, u - h).matrix / h for h in hs]
    raw = np.array([_opnorm(a + b) for a, b in zip(g1, g2)])
    G1 = richardson(g1, hs) if len(hs) > 1 else g1[0]
    G2 = richardson(g2, hs) if len(hs) > 1 else g2[0]
    return GammaLimitPair(G1, G2, _opnorm(G1 + G2), hs, raw)


def grid_pairs(interval: Sequence[float], n: int) -> list:
    """All ordered pairs ``t != s`` of an ``n``-point uniform grid on ``interval``."""
    pts = np.linspace(interval[0], interval[1], n)
    return [(a, b) for a in pts for b in pts if a != b]


def estimate_MI(model: TimeDependentHamiltonian, pairs: Iterable[tuple]) -> float:
    """Grid estimate of ``sup ||Gamma(t, s)|| / |t - s|``."""
    pairs = list(pairs)
    if not pairs:
        raise ValueError("need at least one (t, s) pair")
    best = 0.0
    for t, s in pairs:
        if t == s:
            continue
        best = max(best, _opnorm(gamma(model, t, s).matrix) / abs(t - s))
    return best


def w_k(model: TimeDependentHamiltonian, t: float, s: float, k: int, anchor: float = 0.0):
    """``W_k(t, s) = H(t)^{1/2} U_k(t, s) H(s)^{-1/2}``."""
    U = build_uk(model, t, s, k, anchor).U
    return model(t).sqrt @ U @ model(s).inv_sqrt


def w_k_bound(M: float, k: int, t: float, s: float) -> float:
    return (1 + M / k) ** 2 * math.exp(M * abs(t - s))


def w_k_bound_check(
    model: TimeDependentHamiltonian,
    t: float,
    s: float,
    k: int,
    M_hat: Optional[float] = None,
    interval: Optional[Sequence[float]] = None,
    inflate: float = 1.1,
    anchor: float = 0.0,
) -> bool:
    """Whether ``||W_k(t, s)|| <= (1 + M/k)^2 exp(M |t - s|)`` with ``M = inflate * M_hat``."""
    if M_hat is None:
        if interval is None:
            interval = (min(t, s), max(t, s))
        M_hat = estimate_MI(model, grid_pairs(interval, 16))
    M = inflate * M_hat
    return _opnorm(w_k(model, t, s, k, anchor)) <= w_k_bound(M, k, t, s)


# ---------------------------------------------------------------------------
# Dyson series
# ---------------------------------------------------------------------------


def _integration_matrix(n: int):
    """Gauss-Legendre nodes on [-1, 1], weights, and the matrix of ``int_{-1}^{x_i}``."""
    x, w = legendre.leggauss(n)
    V = legendre.legvander(x, n - 1)
    coeffs = np.linalg.inv(V)
    integ = legendre.legint(coeffs, lbnd=-1, axis=0)
    Q = legendre.legvander(x, n) @ integ
    return x, w, Q


def dyson_terms(
    model: TimeDependentHamiltonian,
    t: float,
    s: float,
    J: int,
    quadrature_order: int = 24,
    k: int = 2**12,
) -> list:
    """``[U, W^(1), ..., W^(J)]`` at ``(t, s)``.

    All iterated integrals share one set of Gauss-Legendre nodes on ``[s, t]``:
    ``W^(j)(u_i, s)`` at the nodes comes from the spectral indefinite-integral
    matrix, and ``U(u_i, u_m) = U(u_i, s) U(u_m, s)*`` reuses one sweep of the
    propagator.
    """
    x, w, Q = _integration_matrix(quadrature_order)
    half = 0.5 * (t - s)
    nodes = s + (x + 1) * half
    Us = propagate_grid([model], s, list(nodes) + [t], k)[0]
    U_nodes, U_t = Us[:-1], Us[-1]
    G2 = np.stack([gamma2_spectral(model, u) for u in nodes])
    # K[m] = U(u_m, s)* Gamma_2(u_m), so U(a, u_m) Gamma_2 W(u_m) = U(a, s) K[m] W(u_m)
    K = U_nodes.conj().transpose(0, 2, 1) @ G2
    terms = [U_t]
    W_nodes = U_nodes
    for _ in range(J):
        inner = K @ W_nodes  # (n, N, N)
        W_t = U_t @ np.tensordot(w * half, inner, axes=1)
        W_nodes = U_nodes @ np.tensordot(Q * half, inner, axes=(1, 0))
        terms.append(W_t)
    return terms


def dyson_term(model, j: int, t: float, s: float, quadrature_order: int = 24, k: int = 2**12):
    return dyson_terms(model, t, s, j, quadrature_order, k)[j]


def dyson_series(model, t: float, s: float, J: int, quadrature_order: int = 24, k: int = 2**12):
    """``U + W^(1) + ... + W^(J)``."""
    return sum(dyson_terms(model, t, s, J, quadrature_order, k))


def direct_w(model: TimeDependentHamiltonian, t: float, s: float, k: int = 2**12) -> np.ndarray:
    """``H(t)^{1/2} U(t, s) H(s)^{-1/2}`` with the same propagator as the Dyson terms."""
    U = propagate_grid([model], s, [t], k)[0, 0]
    return model(t).sqrt @ U @ model(s).inv_sqrt


# ---------------------------------------------------------------------------
# weak derivatives
# ---------------------------------------------------------------------------


def weak_derivative_residual(
    model: TimeDependentHamiltonian,
    t: float,
    s: float,
    phi: np.ndarray,
    psi: np.ndarray,
    h: float,
    variable: str = "t",
    sign: float = 1.0,
    k: int = 2**12,
) -> float:
    """Central-difference defect of the weak Schrödinger equation.

    ``variable="t"`` compares ``d/dt <phi, U(t,s) psi>`` with
    ``-i <H(t)^{1/2} phi, H(t)^{1/2} U(t,s) psi>``; ``variable="s"`` compares
    ``d/ds`` with ``+i <H(s)^{1/2} U(t,s)* phi, H(s)^{1/2} psi>``.  ``sign=-1``
    flips the form term, which is how the sign of the ``s`` equation is
    discriminated.
    """
    if not h > 0:
        raise ValueError("h must be positive")
    if variable == "t":
        Us = propagate_grid([model], s, [t - h, t, t + h], k)[0]
        fd = (np.vdot(phi, Us[2] @ psi) - np.vdot(phi, Us[0] @ psi)) / (2 * h)
        R = model(t).sqrt
        form = -1j * np.vdot(R @ phi, R @ Us[1] @ psi)
    elif variable == "s":
        # U(t, s') = U(t, t) U(s', t)* for every s'
        Us = propagate_grid([model], t, [s - h, s, s + h], k)[0]
        Us = Us.conj().transpose(0, 2, 1)
        fd = (np.vdot(phi, Us[2] @ psi) - np.vdot(phi, Us[0] @ psi)) / (2 * h)
        R = model(s).sqrt
        form = 1j * np.vdot(R @ Us[1].conj().T @ phi, R @ psi)
    else:
        raise ValueError("variable must be 't' or 's'")
    return float(abs(fd - sign * form))
