"""Finite-volume magnetic Schrödinger operators on a hypercubic lattice.

The continuum operator ``(-i grad - A - F(t))^2 + V`` is replaced by a
nearest-neighbour Peierls discretisation.  Link phases carry the vector
potential, so a homogeneous shift ``F`` of the vector potential is exactly a
diagonal gauge transformation in open geometry, and magnetic translations are
exact symmetries of covariant disorder in periodic geometry.

Conventions
-----------
- Sites are indexed in C order over ``geometry.shape``.
- Link arrays have shape ``(d, *shape)``; entry ``[j, n]`` belongs to the bond
  from site ``n`` to ``n + e_j``.  In open geometry the entries with
  ``n_j = L_j - 1`` are unused.
- The forward hop ``H[x, x + e_j]`` equals ``-t_b exp(-i(theta_b + a F_j)) / a**2``.
- Open geometry uses Dirichlet ghost sites, so the diagonal is ``2d/a**2``
  everywhere.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

__all__ = [
    "UnsupportedOperation",
    "NumericalError",
    "LatticeGeometry",
    "DisorderModel",
    "Realization",
    "FieldProfile",
    "HermitianOperator",
    "TimeDependentHamiltonian",
    "landau_phases",
    "build_hamiltonian",
    "electric_field",
    "switching_integral",
    "gauge_phases",
    "gauge_unitary",
    "gauge_identity_residual",
    "magnetic_translation",
    "covariance_residual",
    "verify_form_bound",
    "derive_seed",
]

HERMITIAN_RTOL = 1e-13


class UnsupportedOperation(RuntimeError):
    """Raised when an operation is not defined for the geometry's boundary mode."""


class NumericalError(ArithmeticError):
    """Raised when a dense factorisation fails."""


# ---------------------------------------------------------------------------
# geometry
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LatticeGeometry:
    """Hypercubic box of ``prod(shape)`` sites with spacing ``spacing``.

    Unit cells are cubes of side 1, i.e. ``1/spacing`` sites per axis, so
    ``1/spacing`` must be an integer dividing every extent.
    """

    shape: tuple
    spacing: float = 1.0
    boundary: str = "open"

    def __post_init__(self):
        shape = tuple(int(n) for n in np.atleast_1d(self.shape))
        object.__setattr__(self, "shape", shape)
        if not 1 <= len(shape) <= 3:
            raise ValueError(f"dimension must be 1, 2 or 3, got {len(shape)}")
        if any(n < 1 for n in shape):
            raise ValueError(f"extents must be positive, got {shape}")
        if self.boundary not in ("open", "periodic"):
            raise ValueError(f"boundary must be 'open' or 'periodic', got {self.boundary!r}")
        if not self.spacing > 0:
            raise ValueError("spacing must be positive")
        c = 1.0 / self.spacing
        if abs(c - round(c)) > 1e-9:
            raise ValueError("1/spacing must be an integer (sites per unit cell edge)")
        if any(n % round(c) for n in shape):
            raise ValueError("extents must be multiples of the unit-cell size 1/spacing")
        if self.boundary == "periodic" and any(n < 3 for n in shape):
            raise ValueError("periodic axes need at least 3 sites")

    @property
    def dimension(self) -> int:
        return len(self.shape)

    @property
    def n_sites(self) -> int:
        return math.prod(self.shape)

    @property
    def cell_size(self) -> int:
        """Sites per axis inside one unit cell."""
        return int(round(1.0 / self.spacing))

    @property
    def sites_per_cell(self) -> int:
        return self.cell_size**self.dimension

    @property
    def cell_shape(self) -> tuple:
        return tuple(n // self.cell_size for n in self.shape)

    @property
    def n_cells(self) -> int:
        return math.prod(self.cell_shape)

    @functools.cached_property
    def coordinates(self) -> np.ndarray:
        """Integer site coordinates, shape ``(N, d)``."""
        grids = np.indices(self.shape).reshape(self.dimension, -1)
        return grids.T.copy()

    def positions(self, origin: str = "corner") -> np.ndarray:
        """Physical coordinates ``x`` of every site, shape ``(N, d)``.

        ``origin="corner"`` puts site 0 at ``x = 0``; ``origin="center"``
        measures from the centre of the box.
        """
        x = self.coordinates * self.spacing
        if origin == "corner":
            return x
        if origin == "center":
            return x - 0.5 * (np.array(self.shape) - 1) * self.spacing
        raise ValueError(f"unknown origin {origin!r}")

    @functools.cached_property
    def cell_labels(self) -> np.ndarray:
        """Unit-cell label in ``Z^d`` of every site, shape ``(N, d)``."""
        return self.coordinates // self.cell_size

    @property
    def reference_cell(self) -> tuple:
        """Label of the cell playing the role of ``chi_0``.

        The centre cell in open geometry, the origin cell on the torus.
        """
        if self.boundary == "open":
            return tuple(n // 2 for n in self.cell_shape)
        return (0,) * self.dimension

    def cell_sites(self, label: Optional[Sequence[int]] = None) -> np.ndarray:
        if label is None:
            label = self.reference_cell
        label = np.asarray(label, dtype=int)
        if self.boundary == "periodic":
            label = label % np.array(self.cell_shape)
        mask = np.all(self.cell_labels == label, axis=1)
        return np.flatnonzero(mask)

    def all_cells(self) -> list:
        return [tuple(c) for c in np.ndindex(*self.cell_shape)]

    def bonds(self, j: int):
        """Bonds in direction ``j``.

        Returns ``(src, dst, link_index)`` where ``link_index`` indexes the
        flattened ``(*shape)`` part of a link array.
        """
        coords = self.coordinates
        L = self.shape[j]
        if self.boundary == "open":
            keep = coords[:, j] < L - 1
        else:
            keep = np.ones(len(coords), dtype=bool)
        src = np.flatnonzero(keep)
        nbr = coords[keep].copy()
        nbr[:, j] = (nbr[:, j] + 1) % L
        dst = np.ravel_multi_index(nbr.T, self.shape)
        return src, dst, src

    @functools.cached_property
    def laplacian(self) -> np.ndarray:
        """Plain lattice ``-Delta`` (no phases), Dirichlet in open geometry."""
        a2 = self.spacing**2
        N = self.n_sites
        lap = np.eye(N) * (2 * self.dimension / a2)
        for j in range(self.dimension):
            src, dst, _ = self.bonds(j)
            np.add.at(lap, (src, dst), -1.0 / a2)
            np.add.at(lap, (dst, src), -1.0 / a2)
        return lap


def landau_phases(geometry: LatticeGeometry, field_strength: float) -> np.ndarray:
    """Landau-gauge Peierls phases for a uniform field ``B`` in the (x0, x1) plane.

    Every plaquette carries flux ``B a**2``.  On the torus the wrap bonds in
    direction 1 carry the extra phase that closes the seam; this needs
    ``B a**2 L0 L1`` to be a multiple of ``2 pi``.
    """
    d = geometry.dimension
    phases = np.zeros((d,) + geometry.shape)
    if field_strength == 0.0:
        return phases
    if d < 2:
        raise ValueError("a magnetic field needs dimension >= 2")
    a2 = geometry.spacing**2
    L0, L1 = geometry.shape[0], geometry.shape[1]
    if geometry.boundary == "periodic":
        n_flux = field_strength * a2 * L0 * L1 / (2 * np.pi)
        if abs(n_flux - round(n_flux)) > 1e-9:
            raise ValueError(
                "periodic geometry requires B = 2 pi n / (L0 L1 a^2); "
                f"got {n_flux:.6g} flux quanta"
            )
    n0 = np.indices(geometry.shape)[0]
    n1 = np.indices(geometry.shape)[1]
    phases[0] = -field_strength * a2 * n1
    if geometry.boundary == "periodic":
        wrap = n1 == L1 - 1
        phases[1] = np.where(wrap, field_strength * a2 * L1 * n0, 0.0)
    return phases


# ---------------------------------------------------------------------------
# disorder
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Realization:
    """One disorder sample ``omega`` on a fixed geometry.

    ``link_phases`` holds the random part of the vector potential only; the
    uniform-field Landau phases are added when the Hamiltonian is built, so
    that translating a sample does not translate the gauge.
    """

    geometry: LatticeGeometry
    seed: int
    v_plus: np.ndarray
    v_minus: np.ndarray
    link_phases: np.ndarray
    hopping: np.ndarray
    magnetic_field: float = 0.0
    gamma: float = 1.0

    @property
    def potential(self) -> np.ndarray:
        return self.v_plus - self.v_minus

    def total_phases(self) -> np.ndarray:
        return self.link_phases + landau_phases(self.geometry, self.magnetic_field)

    def phase_matrix(self) -> np.ndarray:
        """Antisymmetric matrix of directed-bond phases (zero off the bonds)."""
        N = self.geometry.n_sites
        theta = np.zeros((N, N))
        total = self.total_phases()
        for j in range(self.geometry.dimension):
            src, dst, idx = self.geometry.bonds(j)
            ph = total[j].reshape(-1)[idx]
            theta[src, dst] += ph
            theta[dst, src] -= ph
        return theta

    def translate(self, shift: Sequence[int]) -> "Realization":
        """The sample ``tau(a) omega``: every per-site array shifted by ``a`` cells."""
        geom = self.geometry
        if geom.boundary != "periodic":
            raise UnsupportedOperation("translations need periodic geometry")
        steps = tuple(int(s) * geom.cell_size for s in np.atleast_1d(shift))
        if len(steps) != geom.dimension:
            raise ValueError("shift must have one entry per dimension")
        axes = tuple(range(geom.dimension))

        def roll_sites(v):
            return np.roll(v.reshape(geom.shape), steps, axis=axes).reshape(-1)

        def roll_links(arr):
            return np.roll(arr, steps, axis=tuple(a + 1 for a in axes))

        return Realization(
            geometry=geom,
            seed=self.seed,
            v_plus=roll_sites(self.v_plus),
            v_minus=roll_sites(self.v_minus),
            link_phases=roll_links(self.link_phases),
            hopping=roll_links(self.hopping),
            magnetic_field=self.magnetic_field,
            gamma=self.gamma,
        )


@dataclass(frozen=True)
class DisorderModel:
    """Bounded i.i.d. disorder.

    Parameters
    ----------
    v_plus_max : float
        ``V_+`` uniform on ``[0, v_plus_max]``.
    v_minus_max : float
        ``V_-`` uniform on ``[0, v_minus_max]``; keeps ``sup |V_-|`` bounded.
    link_disorder : float
        Random link phases uniform on ``[-w, w]``.
    magnetic_field : float
        Uniform field ``B`` (Landau gauge, needs ``d >= 2``).
    dimerization : float
        Alternating hopping magnitudes ``1 +/- delta`` along every axis.
    """

    v_plus_max: float = 0.0
    v_minus_max: float = 0.0
    link_disorder: float = 0.0
    magnetic_field: float = 0.0
    dimerization: float = 0.0

    def __post_init__(self):
        for name in ("v_plus_max", "v_minus_max", "link_disorder"):
            value = getattr(self, name)
            if not (np.isfinite(value) and value >= 0):
                raise ValueError(f"{name} must be finite and >= 0")
        if not 0 <= self.dimerization < 1:
            raise ValueError("dimerization must lie in [0, 1)")

    def gamma(self, geometry: LatticeGeometry) -> float:
        """Ensemble-wide offset making ``H + gamma >= 1`` for every sample."""
        return 1.0 + self.v_minus_max + 2 * geometry.dimension / geometry.spacing**2

    def sample(self, geometry: LatticeGeometry, seed: int) -> Realization:
        rng = np.random.default_rng(seed)
        N = geometry.n_sites
        d = geometry.dimension
        v_plus = rng.uniform(0.0, self.v_plus_max, N) if self.v_plus_max else np.zeros(N)
        v_minus = rng.uniform(0.0, self.v_minus_max, N) if self.v_minus_max else np.zeros(N)
        if self.link_disorder:
            links = rng.uniform(-self.link_disorder, self.link_disorder, (d,) + geometry.shape)
        else:
            links = np.zeros((d,) + geometry.shape)
        hopping = np.ones((d,) + geometry.shape)
        if self.dimerization:
            idx = np.indices(geometry.shape)
            for j in range(d):
                hopping[j] = 1.0 + self.dimerization * np.where(idx[j] % 2 == 0, 1.0, -1.0)
        # validate the flux once here so a bad B fails at sampling time
        landau_phases(geometry, self.magnetic_field)
        return Realization(
            geometry=geometry,
            seed=int(seed),
            v_plus=v_plus,
            v_minus=v_minus,
            link_phases=links,
            hopping=hopping,
            magnetic_field=self.magnetic_field,
            gamma=self.gamma(geometry),
        )


def derive_seed(master: int, index: int) -> int:
    """Seed of realization ``index`` under master seed ``master``.

    Hashes the pair through :class:`numpy.random.SeedSequence`, so seeds of
    different indices are statistically independent and the derivation does
    not depend on how realizations are distributed over workers.
    """
    if master < 0 or index < 0:
        raise ValueError("master seed and index must be non-negative")
    state = np.random.SeedSequence([int(master), int(index)]).generate_state(2, np.uint32)
    return int(state[0]) << 31 | int(state[1]) >> 1


# ---------------------------------------------------------------------------
# electric field
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FieldProfile:
    """Adiabatically switched homogeneous field ``E(t) = exp(eta min(t, 0)) E``."""

    E: tuple
    eta: float

    def __post_init__(self):
        E = tuple(float(e) for e in np.atleast_1d(self.E))
        object.__setattr__(self, "E", E)
        if not (np.isfinite(self.eta) and self.eta > 0):
            raise ValueError("eta must be a positive finite number")

    @property
    def vector(self) -> np.ndarray:
        return np.array(self.E)

    def electric_field(self, t: float) -> np.ndarray:
        return math.exp(self.eta * min(t, 0.0)) * self.vector

    def switching_integral(self, t: float) -> np.ndarray:
        """``F(t)``, the integral of ``E(s)`` from ``-inf`` to ``t``."""
        return (math.exp(self.eta * min(t, 0.0)) / self.eta + max(t, 0.0)) * self.vector

    def electric_field_derivative(self, t: float) -> np.ndarray:
        """``E'(t)``; one-sided (left) value at ``t = 0``."""
        if t <= 0:
            return self.eta * math.exp(self.eta * t) * self.vector
        return np.zeros_like(self.vector)


def electric_field(profile: FieldProfile, t: float) -> np.ndarray:
    return profile.electric_field(t)


def switching_integral(profile: FieldProfile, t: float) -> np.ndarray:
    return profile.switching_integral(t)


# ---------------------------------------------------------------------------
# dense Hermitian operators
# ---------------------------------------------------------------------------


class HermitianOperator:
    """Dense Hermitian matrix with a lazily cached eigendecomposition."""

    def __init__(self, matrix: np.ndarray, *, offset: float = 0.0, check: bool = True):
        matrix = np.asarray(matrix, dtype=complex)
        if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
            raise ValueError("expected a square matrix")
        if check:
            scale = max(np.abs(matrix).max(initial=0.0), 1.0)
            asym = np.abs(matrix - matrix.conj().T).max(initial=0.0)
            if asym > HERMITIAN_RTOL * scale:
                raise ValueError(f"matrix is not Hermitian (asymmetry {asym:.3g})")
        matrix = 0.5 * (matrix + matrix.conj().T)
        matrix.setflags(write=False)
        self.matrix = matrix
        self.offset = offset
        self._expm_cache: dict = {}

    @property
    def shape(self):
        return self.matrix.shape

    @functools.cached_property
    def eigh(self):
        try:
            w, v = np.linalg.eigh(self.matrix)
        except np.linalg.LinAlgError as exc:
            cond = np.linalg.cond(self.matrix)
            raise NumericalError(f"eigendecomposition failed (condition number {cond:.3g})") from exc
        w.setflags(write=False)
        v.setflags(write=False)
        return w, v

    @property
    def eigenvalues(self) -> np.ndarray:
        return self.eigh[0]

    @property
    def min_eigenvalue(self) -> float:
        return float(self.eigh[0][0])

    @property
    def norm(self) -> float:
        w = self.eigh[0]
        return float(max(abs(w[0]), abs(w[-1])))

    def function(self, f: Callable[[np.ndarray], np.ndarray]) -> np.ndarray:
        w, v = self.eigh
        return (v * f(w)) @ v.conj().T

    def power(self, p: float) -> np.ndarray:
        w, v = self.eigh
        if p != int(p) and w[0] <= 0:
            raise ValueError("fractional powers need a positive operator")
        return (v * w**p) @ v.conj().T

    @functools.cached_property
    def sqrt(self) -> np.ndarray:
        return self.power(0.5)

    @functools.cached_property
    def inv_sqrt(self) -> np.ndarray:
        return self.power(-0.5)

    def expm(self, dt: float) -> np.ndarray:
        """``exp(-i dt H)``."""
        key = float(dt)
        out = self._expm_cache.get(key)
        if out is None:
            w, v = self.eigh
            out = (v * np.exp(-1j * dt * w)) @ v.conj().T
            if len(self._expm_cache) < 64:
                self._expm_cache[key] = out
        return out

    def resolvent(self, z: float) -> np.ndarray:
        """``(H + z)^{-1}``."""
        w, v = self.eigh
        return (v / (w + z)) @ v.conj().T


# ---------------------------------------------------------------------------
# Hamiltonians
# ---------------------------------------------------------------------------


def _check_realization(geometry: LatticeGeometry, realization: Realization):
    if realization.geometry != geometry:
        raise ValueError("realization was sampled on a different geometry")
    if not np.all(np.isfinite(realization.potential)):
        raise ValueError("potential sample contains non-finite values")
    if not np.all(np.isfinite(realization.link_phases)):
        raise ValueError("link phases contain non-finite values")


def hopping_matrix(
    geometry: LatticeGeometry, realization: Realization, j: int, field_shift=None
) -> np.ndarray:
    """Forward hop ``T_j(F)`` with ``T[x, x + e_j] = t_b exp(-i(theta_b + a F_j))``."""
    F = 0.0 if field_shift is None else float(np.asarray(field_shift)[j])
    a = geometry.spacing
    src, dst, idx = geometry.bonds(j)
    theta = realization.total_phases()[j].reshape(-1)[idx]
    mag = realization.hopping[j].reshape(-1)[idx]
    T = np.zeros((geometry.n_sites, geometry.n_sites), dtype=complex)
    np.add.at(T, (src, dst), mag * np.exp(-1j * (theta + a * F)))
    return T


def build_hamiltonian(
    geometry: LatticeGeometry, realization: Realization, field_shift=None
) -> HermitianOperator:
    """Peierls discretisation of ``(-i grad - A - F)^2 + V + gamma``."""
    _check_realization(geometry, realization)
    d = geometry.dimension
    if field_shift is not None:
        field_shift = np.asarray(field_shift, dtype=float).reshape(-1)
        if field_shift.shape != (d,):
            raise ValueError(f"field_shift must have length {d}")
        if not np.all(np.isfinite(field_shift)):
            raise ValueError("field_shift must be finite")
    a2 = geometry.spacing**2
    H = np.diag(2 * d / a2 + realization.potential + realization.gamma).astype(complex)
    for j in range(d):
        T = hopping_matrix(geometry, realization, j, field_shift)
        H -= (T + T.conj().T) / a2
    return HermitianOperator(H, offset=realization.gamma)


def gauge_phases(geometry: LatticeGeometry, profile: FieldProfile, t: float, origin="corner"):
    """Diagonal of ``G(t) = exp(i F(t) . x)``."""
    return np.exp(1j * geometry.positions(origin) @ profile.switching_integral(t))


def gauge_unitary(geometry: LatticeGeometry, profile: FieldProfile, t: float, origin="corner"):
    if geometry.boundary != "open":
        raise UnsupportedOperation("the position operator is only global in open geometry")
    return np.diag(gauge_phases(geometry, profile, t, origin))


def gauge_identity_residual(
    geometry: LatticeGeometry, realization: Realization, profile: FieldProfile, t: float
) -> float:
    """``||G(t) H G(t)* - H(F(t))||`` in operator norm."""
    if geometry.boundary != "open":
        raise UnsupportedOperation("gauge identity needs open geometry")
    G = gauge_phases(geometry, profile, t)
    H0 = build_hamiltonian(geometry, realization).matrix
    Ht = build_hamiltonian(geometry, realization, profile.switching_integral(t)).matrix
    rotated = G[:, None] * H0 * G.conj()[None, :]
    return float(np.linalg.norm(rotated - Ht, 2))


def _shift_permutation(geometry: LatticeGeometry, shift) -> np.ndarray:
    steps = np.array([int(s) * geometry.cell_size for s in np.atleast_1d(shift)])
    coords = (geometry.coordinates + steps) % np.array(geometry.shape)
    return np.ravel_multi_index(coords.T, geometry.shape)


def magnetic_translation(geometry: LatticeGeometry, shift, magnetic_field: float = 0.0) -> np.ndarray:
    """Unitary ``U(a)`` mapping ``H_omega`` to ``H_{tau(a) omega}``.

    A pure lattice shift followed by the diagonal gauge correction that
    restores the Landau gauge.  The correction is fixed by propagating phases
    along a spanning tree of the clean (disorder-free) lattice.

    On a torus carrying ``n`` flux quanta a shift by ``s_0`` cells along axis
    0 changes the holonomy around axis 1 by ``2 pi n s_0 / L_0`` (and
    symmetrically for axis 1).  No diagonal gauge can undo a holonomy change,
    so only shifts with ``n s_0 / L_0`` and ``n s_1 / L_1`` integral are
    symmetries; other shifts raise ``ValueError``.
    """
    if geometry.boundary != "periodic":
        raise UnsupportedOperation("magnetic translations need periodic geometry")
    shift = np.atleast_1d(shift)
    if len(shift) != geometry.dimension:
        raise ValueError("shift must have one entry per dimension")
    if magnetic_field != 0.0:
        L0, L1 = geometry.shape[0], geometry.shape[1]
        n_flux = magnetic_field * geometry.spacing**2 * L0 * L1 / (2 * np.pi)
        for axis, L in ((0, L0), (1, L1)):
            steps = int(shift[axis]) * geometry.cell_size
            q = n_flux * steps / L
            if abs(q - round(q)) > 1e-9:
                raise ValueError(
                    f"shift {tuple(int(v) for v in shift)} changes the torus holonomy by "
                    f"{q:.4g} flux quanta; it is not a magnetic translation"
                )
    N = geometry.n_sites
    perm = _shift_permutation(geometry, shift)
    T = np.zeros((N, N))
    T[perm, np.arange(N)] = 1.0
    if magnetic_field == 0.0:
        return T.astype(complex)

    d = geometry.dimension
    clean = Realization(
        geometry=geometry,
        seed=0,
        v_plus=np.zeros(N),
        v_minus=np.zeros(N),
        link_phases=np.zeros((d,) + geometry.shape),
        hopping=np.ones((d,) + geometry.shape),
        magnetic_field=magnetic_field,
    )
    target = build_hamiltonian(geometry, clean).matrix
    moved = T @ target @ T.T
    phase = np.zeros(N, dtype=complex)
    phase[0] = 1.0
    seen = np.zeros(N, dtype=bool)
    seen[0] = True
    queue = [0]
    while queue:
        x = queue.pop()
        for y in np.flatnonzero(np.abs(target[x]) > 0):
            if seen[y] or y == x:
                continue
            ratio = target[x, y] / moved[x, y]
            phase[y] = np.conj(ratio) * phase[x]
            seen[y] = True
            queue.append(y)
    return phase[:, None] * T


def covariance_residual(realization: Realization, shift) -> float:
    """``||U(a) H_omega U(a)* - H_{tau(a) omega}||`` in operator norm."""
    geom = realization.geometry
    U = magnetic_translation(geom, shift, realization.magnetic_field)
    H = build_hamiltonian(geom, realization).matrix
    H_shifted = build_hamiltonian(geom, realization.translate(shift)).matrix
    return float(np.linalg.norm(U @ H @ U.conj().T - H_shifted, 2))


def verify_form_bound(realization: Realization, alpha: float, beta: float) -> bool:
    """Whether ``<psi, V_- psi> <= alpha <psi, -Delta psi> + beta ||psi||^2`` holds."""
    if not 0 <= alpha < 1:
        raise ValueError("alpha must lie in [0, 1)")
    if beta < 0:
        raise ValueError("beta must be >= 0")
    geom = realization.geometry
    M = alpha * geom.laplacian + beta * np.eye(geom.n_sites) - np.diag(realization.v_minus)
    return bool(np.linalg.eigvalsh(M)[0] >= -1e-12 * max(1.0, beta))


# ---------------------------------------------------------------------------
# time-dependent Hamiltonian of one sample
# ---------------------------------------------------------------------------


@dataclass(eq=False)
class TimeDependentHamiltonian:
    """``t -> H_omega(t) = H(A_omega + F(t), V_omega)`` for one realization."""

    realization: Realization
    profile: FieldProfile
    cache_size: int = 512
    _cache: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if len(self.profile.E) != self.geometry.dimension:
            raise ValueError("field vector and geometry dimension differ")

    @property
    def geometry(self) -> LatticeGeometry:
        return self.realization.geometry

    @property
    def seed(self) -> int:
        return self.realization.seed

    @property
    def field_is_zero(self) -> bool:
        return not np.any(self.profile.vector)

    @functools.cached_property
    def static(self) -> HermitianOperator:
        """``H_omega`` itself (``F = 0``)."""
        return build_hamiltonian(self.geometry, self.realization)

    def at_shift(self, field_shift) -> HermitianOperator:
        return build_hamiltonian(self.geometry, self.realization, field_shift)

    def __call__(self, t: float) -> HermitianOperator:
        key = float(t)
        op = self._cache.get(key)
        if op is None:
            if self.field_is_zero:
                op = self.static
            else:
                op = self.at_shift(self.profile.switching_integral(key))
            if len(self._cache) >= self.cache_size:
                self._cache.pop(next(iter(self._cache)))
            self._cache[key] = op
        return op

    def hopping(self, j: int, field_shift=None) -> np.ndarray:
        return hopping_matrix(self.geometry, self.realization, j, field_shift)

    def current(self, j: int, field_shift) -> np.ndarray:
        """``dH/dF_j`` at shift ``F``: ``i (T_j - T_j*) / a``."""
        T = self.hopping(j, field_shift)
        return 1j * (T - T.conj().T) / self.geometry.spacing

    def covariant_derivative(self, j: int, field_shift=None) -> np.ndarray:
        """Lattice covariant derivative ``Pi_j(F) = -i (T_j(F) - 1) / a``.

        The lattice counterpart of ``-i d_j - A_j - F_j``; ``Pi_j(0)`` plays the
        role of the continuum ``D_j``.
        """
        T = self.hopping(j, field_shift)
        return -1j * (T - np.eye(len(T))) / self.geometry.spacing

    def derivative(self, t: float) -> np.ndarray:
        """``dH(t)/dt = sum_j E_j(t) dH/dF_j``."""
        F = self.profile.switching_integral(t)
        E = self.profile.electric_field(t)
        out = np.zeros((self.geometry.n_sites,) * 2, dtype=complex)
        for j, Ej in enumerate(E):
            if Ej:
                out += Ej * self.current(j, F)
        return out

    def gauge(self, t: float, origin: str = "corner") -> np.ndarray:
        """Diagonal of ``G(t)``."""
        return gauge_phases(self.geometry, self.profile, t, origin)

    def step(self, anchor: float, dt: float) -> np.ndarray:
        """``exp(-i dt H(anchor))``.

        In open geometry this uses ``H(anchor) = G H G*`` so that only the
        static Hamiltonian is ever diagonalised.
        """
        if self.geometry.boundary == "open":
            g = self.gauge(anchor)
            return g[:, None] * self.static.expm(dt) * g.conj()[None, :]
        return self(anchor).expm(dt)
