"""Covariant operator ensembles at finite volume.

An element of ``K_1``, ``K_2`` or ``K_infinity`` is represented by one dense
matrix per disorder realization, stacked into an array of shape
``(M, N, N)``, together with the seeds that produced the realizations.  The
disorder average ``E{.}`` is the empirical mean over the stack.

Two trace windows are supported.  ``"cell"`` restricts to the reference unit
cell ``chi_0`` and is the literal finite-volume version of the trace per unit
volume.  ``"volume"`` averages ``tr chi_a X chi_a`` over every cell ``a`` of
the box, which is ``tr X / n_cells``.  Only the volume window is cyclic for a
single finite matrix; identities that rely on cyclicity of the trace
(centrality of ``T``, isometry of the conjugation ``U A U*``, the vanishing of
``L_t(A, zeta(t))``) hold exactly there and only on average in the cell
window.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .lattice_model import (
    DisorderModel,
    FieldProfile,
    HermitianOperator,
    LatticeGeometry,
    TimeDependentHamiltonian,
    derive_seed,
)
from .propagator import propagate_grid

__all__ = [
    "CovariantEnsemble",
    "CellProjector",
    "ModelEnsemble",
    "SeedMismatch",
    "k2_inner",
    "norms",
    "tuv",
    "tuv_with_error",
    "tuv_volume",
    "odot_l",
    "odot_r",
    "dagger",
    "diamond",
    "diamond_identities",
    "apply_superpropagator",
    "superpropagator",
    "apply_HL_sqrt",
    "apply_HR_sqrt",
    "q0_membership",
    "gauge_conjugate",
]

WINDOWS = ("cell", "volume")


class SeedMismatch(ValueError):
    """Two ensembles entering one operation come from different realizations."""


@dataclass(frozen=True)
class CellProjector:
    """Multiplication by the indicator of one unit cell."""

    label: tuple
    sites: np.ndarray
    n_sites: int

    @classmethod
    def of(cls, geometry: LatticeGeometry, label: Optional[Sequence[int]] = None):
        if label is None:
            label = geometry.reference_cell
        return cls(tuple(int(v) for v in label), geometry.cell_sites(label), geometry.n_sites)

    @property
    def matrix(self) -> np.ndarray:
        P = np.zeros((self.n_sites, self.n_sites))
        P[self.sites, self.sites] = 1.0
        return P

    def compress(self, X: np.ndarray) -> np.ndarray:
        """``chi X chi`` restricted to the cell's sites (works on stacks)."""
        return X[..., self.sites[:, None], self.sites[None, :]]


@dataclass(frozen=True, eq=False)
class CovariantEnsemble:
    """Per-realization matrices of one covariant operator.

    Parameters
    ----------
    matrices : ndarray, shape (M, N, N)
    seeds : tuple of int
        One seed per realization; binary operations require equal seeds.
    geometry : LatticeGeometry
    cell : tuple, optional
        Label of ``chi_0``; defaults to ``geometry.reference_cell``.
    window : {"cell", "volume"}
    """

    matrices: np.ndarray
    seeds: tuple
    geometry: LatticeGeometry
    cell: Optional[tuple] = None
    window: str = "cell"

    def __post_init__(self):
        A = np.asarray(self.matrices, dtype=complex)
        if A.ndim == 2:
            A = A[None]
        N = self.geometry.n_sites
        if A.ndim != 3 or A.shape[1:] != (N, N):
            raise ValueError(f"matrices must have shape (M, {N}, {N}), got {A.shape}")
        seeds = tuple(int(s) for s in self.seeds)
        if len(seeds) != A.shape[0]:
            raise ValueError("one seed per realization is required")
        if self.window not in WINDOWS:
            raise ValueError(f"window must be one of {WINDOWS}")
        cell = self.geometry.reference_cell if self.cell is None else tuple(self.cell)
        object.__setattr__(self, "matrices", A)
        object.__setattr__(self, "seeds", seeds)
        object.__setattr__(self, "cell", cell)

    # -- construction -----------------------------------------------------

    def like(self, matrices: np.ndarray) -> "CovariantEnsemble":
        """Same seeds, geometry, cell and window, new matrices."""
        return CovariantEnsemble(matrices, self.seeds, self.geometry, self.cell, self.window)

    def with_window(self, window: str) -> "CovariantEnsemble":
        return CovariantEnsemble(self.matrices, self.seeds, self.geometry, self.cell, window)

    @classmethod
    def identity(cls, geometry, seeds, **kw):
        N = geometry.n_sites
        return cls(np.broadcast_to(np.eye(N, dtype=complex), (len(seeds), N, N)).copy(), seeds, geometry, **kw)

    @classmethod
    def zeros(cls, geometry, seeds, **kw):
        N = geometry.n_sites
        return cls(np.zeros((len(seeds), N, N), dtype=complex), seeds, geometry, **kw)

    # -- shape ------------------------------------------------------------

    @property
    def M(self) -> int:
        return self.matrices.shape[0]

    @property
    def N(self) -> int:
        return self.matrices.shape[1]

    @property
    def projector(self) -> CellProjector:
        return CellProjector.of(self.geometry, self.cell)

    def __len__(self):
        return self.M

    def __getitem__(self, i) -> np.ndarray:
        return self.matrices[i]

    # -- compatibility and arithmetic -------------------------------------

    def check_compatible(self, other: "CovariantEnsemble"):
        if self.seeds != other.seeds:
            raise SeedMismatch("ensembles were built from different seed lists")
        if self.geometry != other.geometry:
            raise ValueError("ensembles live on different geometries")

    def _binary(self, other, op):
        if isinstance(other, CovariantEnsemble):
            self.check_compatible(other)
            return self.like(op(self.matrices, other.matrices))
        return self.like(op(self.matrices, other))

    def __add__(self, other):
        return self._binary(other, np.add)

    def __sub__(self, other):
        return self._binary(other, np.subtract)

    def __mul__(self, scalar):
        if isinstance(scalar, CovariantEnsemble):
            raise TypeError("use odot_l, odot_r or diamond for products of ensembles")
        return self.like(self.matrices * scalar)

    __rmul__ = __mul__

    def __neg__(self):
        return self.like(-self.matrices)

    @property
    def dagger(self) -> "CovariantEnsemble":
        return dagger(self)

    def per_realization_trace(self) -> np.ndarray:
        """``tr chi_0 A chi_0`` (cell window) or ``tr A / n_cells`` (volume window)."""
        if self.window == "cell":
            idx = self.projector.sites
            return self.matrices[:, idx, idx].sum(axis=1)
        return np.trace(self.matrices, axis1=1, axis2=2) / self.geometry.n_cells

    def max_norm(self) -> float:
        return float(np.max(np.linalg.norm(self.matrices, 2, axis=(1, 2))))


def _mean(values: np.ndarray):
    """Disorder average; numpy's pairwise summation keeps it order-deterministic."""
    return np.mean(values, axis=0)


def _stderr(values: np.ndarray) -> float:
    if len(values) < 2:
        return float("nan")
    return float(np.std(values, ddof=1) / np.sqrt(len(values)))


def _as_stack(B, like: CovariantEnsemble) -> np.ndarray:
    if isinstance(B, CovariantEnsemble):
        like.check_compatible(B)
        return B.matrices
    B = np.asarray(B, dtype=complex)
    if B.ndim == 2:
        return np.broadcast_to(B, like.matrices.shape)
    if B.shape != like.matrices.shape:
        raise ValueError("operator stack does not match the ensemble")
    return B


# ---------------------------------------------------------------------------
# inner product, norms, trace per unit volume
# ---------------------------------------------------------------------------


def _inner_per_realization(A: CovariantEnsemble, B: CovariantEnsemble) -> np.ndarray:
    if A.window == "cell":
        idx = A.projector.sites
        return np.einsum("mij,mij->m", A.matrices[:, :, idx].conj(), B.matrices[:, :, idx])
    return np.einsum("mij,mij->m", A.matrices.conj(), B.matrices) / A.geometry.n_cells


def k2_inner(A: CovariantEnsemble, B: CovariantEnsemble) -> complex:
    """``<<A, B>> = E tr (A chi_0)* (B chi_0)``, antilinear in ``A``."""
    A.check_compatible(B)
    if A.window != B.window or A.cell != B.cell:
        raise ValueError("ensembles use different trace windows")
    return complex(_mean(_inner_per_realization(A, B)))


def norms(A: CovariantEnsemble) -> tuple:
    """Estimates of ``(|||A|||_1, |||A|||_2, |||A|||_infinity)``.

    ``|||A|||_1 = E tr chi_0 |A| chi_0`` with ``|A|`` from the singular value
    decomposition; ``|||A|||_inf`` is the largest operator norm in the stack.
    """
    _, sv, Vh = np.linalg.svd(A.matrices)
    absA = np.einsum("mki,mk,mkj->mij", Vh.conj(), sv, Vh)
    n1 = float(_mean(A.like(absA).per_realization_trace().real))
    n2 = float(np.sqrt(max(k2_inner(A, A).real, 0.0)))
    ninf = float(np.max(sv[:, 0])) if sv.size else 0.0
    return n1, n2, ninf


def tuv_with_error(A: CovariantEnsemble) -> tuple:
    """``T(A)`` and its standard error over realizations."""
    values = A.per_realization_trace()
    mean = complex(_mean(values))
    se = float(np.hypot(_stderr(values.real), _stderr(values.imag))) if A.M > 1 else float("nan")
    return mean, se


def tuv(A: CovariantEnsemble) -> complex:
    """Trace per unit volume ``E tr chi_0 A chi_0`` (in the ensemble's window)."""
    return tuv_with_error(A)[0]


def tuv_volume(A: np.ndarray, geometry: LatticeGeometry) -> tuple:
    """Spatial average ``|Lambda|^{-1} sum_a tr chi_a A chi_a`` for one realization.

    Returns ``(value, standard_error)``; the error treats the per-cell values
    as independent, which is accurate once cells are further apart than the
    decay length of ``A``.
    """
    A = np.asarray(A)
    if A.shape != (geometry.n_sites,) * 2:
        raise ValueError("matrix does not match geometry")
    diag = np.diag(A)
    labels = np.ravel_multi_index(geometry.cell_labels.T, geometry.cell_shape)
    per_cell = np.bincount(labels, weights=diag.real, minlength=geometry.n_cells) + 1j * np.bincount(
        labels, weights=diag.imag, minlength=geometry.n_cells
    )
    value = complex(np.mean(per_cell))
    se = float(np.hypot(_stderr(per_cell.real), _stderr(per_cell.imag)))
    return value, se


# ---------------------------------------------------------------------------
# module structure
# ---------------------------------------------------------------------------


def dagger(A: CovariantEnsemble) -> CovariantEnsemble:
    """``A^dagger``: conjugate transpose per realization."""
    return A.like(np.conj(np.swapaxes(A.matrices, 1, 2)))


def odot_l(B, A: CovariantEnsemble) -> CovariantEnsemble:
    """``B (.)_L A = B A`` with ``B`` bounded (an ensemble, a stack or one matrix)."""
    return A.like(_as_stack(B, A) @ A.matrices)


def odot_r(A: CovariantEnsemble, B) -> CovariantEnsemble:
    """``A (.)_R B = (B* (.)_L A^dagger)^dagger``, i.e. ``A B``.

    Implemented through its definition so that ``(A (.)_R B)^dagger`` equals
    ``B* (.)_L A^dagger`` bit for bit.
    """
    Bs = _as_stack(B, A)
    return dagger(odot_l(np.conj(np.swapaxes(Bs, -1, -2)), dagger(A)))


def diamond(A: CovariantEnsemble, B: CovariantEnsemble) -> CovariantEnsemble:
    """``A <> B``: the per-realization product, an element of ``K_1``."""
    A.check_compatible(B)
    return A.like(A.matrices @ B.matrices)


def diamond_identities(A: CovariantEnsemble, B: CovariantEnsemble, C) -> tuple:
    """Residuals of the three centrality identities, each relative to its scale.

    Returns ``(r1, r2, r3)`` with

    - ``r1 = |T(A <> B) - <<A^dagger, B>>|``
    - ``r2 = |T(A <> B) - T(B <> A)|``
    - ``r3 = |T((C (.)_L A) <> B) - T(A <> (B (.)_R C))|``

    divided by ``||A||_2 ||B||_2`` (times ``||C||_inf`` for ``r3``).
    """
    scale = norms(A)[1] * norms(B)[1]
    Cs = _as_stack(C, A)
    c_scale = float(np.max(np.linalg.norm(Cs, 2, axis=(-2, -1))))
    scale = scale if scale > 0 else 1.0
    tab = tuv(diamond(A, B))
    r1 = abs(tab - k2_inner(dagger(A), B)) / scale
    r2 = abs(tab - tuv(diamond(B, A))) / scale
    lhs = tuv(diamond(odot_l(Cs, A), B))
    rhs = tuv(diamond(A, odot_r(B, Cs)))
    r3 = abs(lhs - rhs) / (scale * (c_scale if c_scale > 0 else 1.0))
    return float(r1), float(r2), float(r3)


# ---------------------------------------------------------------------------
# realizations of the Hamiltonian
# ---------------------------------------------------------------------------


class ModelEnsemble:
    """``omega -> H_omega(t)`` for a list of seeded realizations.

    Parameters
    ----------
    models : sequence of TimeDependentHamiltonian
        All on the same geometry and driven by the same field profile.
    window : {"cell", "volume"}
        Default window of ensembles produced by :meth:`ensemble`.
    """

    def __init__(self, models: Sequence[TimeDependentHamiltonian], window: str = "cell", cell=None):
        models = list(models)
        if not models:
            raise ValueError("need at least one realization")
        geom = models[0].geometry
        if any(m.geometry != geom for m in models):
            raise ValueError("all realizations must share one geometry")
        self.models = models
        self.geometry = geom
        self.seeds = tuple(m.seed for m in models)
        self.window = window
        self.cell = cell

    @classmethod
    def sample(
        cls,
        geometry: LatticeGeometry,
        disorder: DisorderModel,
        profile: FieldProfile,
        n_realizations: int,
        master_seed: int = 0,
        window: str = "cell",
    ) -> "ModelEnsemble":
        """Realizations ``derive_seed(master_seed, i)`` for ``i < n_realizations``."""
        seeds = [derive_seed(master_seed, i) for i in range(n_realizations)]
        return cls.from_seeds(geometry, disorder, profile, seeds, window)

    @classmethod
    def from_seeds(cls, geometry, disorder, profile, seeds, window="cell"):
        models = [TimeDependentHamiltonian(disorder.sample(geometry, s), profile) for s in seeds]
        return cls(models, window)

    def with_profile(self, profile: FieldProfile) -> "ModelEnsemble":
        """Same realizations driven by another field profile."""
        return ModelEnsemble(
            [TimeDependentHamiltonian(m.realization, profile) for m in self.models], self.window, self.cell
        )

    @property
    def profile(self) -> FieldProfile:
        return self.models[0].profile

    @property
    def M(self) -> int:
        return len(self.models)

    def ensemble(self, matrices, window: Optional[str] = None) -> CovariantEnsemble:
        return CovariantEnsemble(matrices, self.seeds, self.geometry, self.cell, window or self.window)

    def hamiltonians(self, t: Optional[float] = None) -> list:
        """``H_omega(t)`` per realization; ``t=None`` gives the unshifted ``H_omega``."""
        if t is None:
            return [m.static for m in self.models]
        return [m(t) for m in self.models]

    def hamiltonian_ensemble(self, t: Optional[float] = None) -> CovariantEnsemble:
        return self.ensemble(np.stack([H.matrix for H in self.hamiltonians(t)]))

    def function(self, f: Callable, t: Optional[float] = None) -> CovariantEnsemble:
        """``f(H_omega(t))`` per realization."""
        return self.ensemble(np.stack([H.function(f) for H in self.hamiltonians(t)]))

    def sqrt_stack(self, t: Optional[float] = None) -> np.ndarray:
        return np.stack([H.sqrt for H in self.hamiltonians(t)])

    def gauge_stack(self, t: float) -> np.ndarray:
        """Diagonals of ``G(t)``, shape ``(M, N)``."""
        g = self.models[0].gauge(t)
        return np.broadcast_to(g, (self.M, len(g)))

    def propagators(self, s: float, times: Sequence[float], k: int, rule: str = "left") -> np.ndarray:
        """``U_k(tau, s)`` for each time, shape ``(M, len(times), N, N)``."""
        return propagate_grid(self.models, s, times, k, rule=rule)


def apply_superpropagator(U: np.ndarray, A: CovariantEnsemble) -> CovariantEnsemble:
    """``U (.)_L A (.)_R U*`` for a stack ``U`` of per-realization unitaries."""
    U = _as_stack(U, A)
    return odot_r(odot_l(U, A), np.conj(np.swapaxes(U, -1, -2)))


def superpropagator(
    models: ModelEnsemble,
    t: float,
    s: float,
    A: CovariantEnsemble,
    k: int = 2**12,
    rule: str = "left",
) -> CovariantEnsemble:
    """``U(t, s)(A) = U(t, s) A U(s, t)`` with the frozen-generator propagator."""
    if t == s:
        return A.like(A.matrices.copy())
    U = models.propagators(s, [t], k, rule)[:, 0]
    return apply_superpropagator(U, A)


def gauge_conjugate(A: CovariantEnsemble, g: np.ndarray, inverse: bool = False) -> CovariantEnsemble:
    """``G A G*`` (or ``G* A G``) for diagonal ``G = diag(g)``."""
    g = np.asarray(g)
    if inverse:
        g = g.conj()
    if g.ndim == 1:
        g = g[None, :]
    return A.like(g[:, :, None] * A.matrices * g.conj()[:, None, :])


def apply_HL_sqrt(A: CovariantEnsemble, models: ModelEnsemble, t: Optional[float] = None) -> CovariantEnsemble:
    """``H_L(t)^{1/2} A = H_omega(t)^{1/2} A`` per realization."""
    return odot_l(models.sqrt_stack(t), A)


def apply_HR_sqrt(A: CovariantEnsemble, models: ModelEnsemble, t: Optional[float] = None) -> CovariantEnsemble:
    """``H_R(t)^{1/2} A = (H_L(t)^{1/2} A^dagger)^dagger``."""
    return dagger(apply_HL_sqrt(dagger(A), models, t))


def q0_membership(A: CovariantEnsemble, models: ModelEnsemble, t: Optional[float] = None) -> tuple:
    """``(||H^{1/2} A||_2, ||H^{1/2} A^dagger||_2)``."""
    left = apply_HL_sqrt(A, models, t)
    right = apply_HL_sqrt(dagger(A), models, t)
    return norms(left)[1], norms(right)[1]
