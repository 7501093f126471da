import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from liouville_lab.covariant_algebra import (
    CellProjector,
    CovariantEnsemble,
    ModelEnsemble,
    SeedMismatch,
    apply_HL_sqrt,
    apply_HR_sqrt,
    apply_superpropagator,
    dagger,
    diamond,
    diamond_identities,
    gauge_conjugate,
    k2_inner,
    norms,
    odot_l,
    odot_r,
    q0_membership,
    superpropagator,
    tuv,
    tuv_volume,
    tuv_with_error,
)
from liouville_lab.lattice_model import DisorderModel, FieldProfile, LatticeGeometry


def random_ensemble(geometry, seeds, rng, window="cell"):
    N = geometry.n_sites
    X = rng.normal(size=(len(seeds), N, N)) + 1j * rng.normal(size=(len(seeds), N, N))
    return CovariantEnsemble(X, seeds, geometry, window=window)


ONE = LatticeGeometry((1,))


def scalar(value, seeds=(0,)):
    return CovariantEnsemble(np.full((len(seeds), 1, 1), value, dtype=complex), seeds, ONE)


# -- construction ---------------------------------------------------------------------


def test_shape_and_seed_validation(chain8):
    with pytest.raises(ValueError):
        CovariantEnsemble(np.zeros((2, 4, 4)), (0, 1), chain8)
    with pytest.raises(ValueError):
        CovariantEnsemble(np.zeros((2, 8, 8)), (0,), chain8)
    with pytest.raises(ValueError):
        CovariantEnsemble(np.zeros((1, 8, 8)), (0,), chain8, window="strip")


def test_projector_properties():
    g = LatticeGeometry((8, 4), spacing=0.5)
    total = sum(CellProjector.of(g, c).matrix for c in g.all_cells())
    np.testing.assert_array_equal(total, np.eye(g.n_sites))
    chi = CellProjector.of(g).matrix
    np.testing.assert_array_equal(chi @ chi, chi)


def test_seed_mismatch_is_an_error(chain8):
    rng = np.random.default_rng(0)
    A = random_ensemble(chain8, (1, 2), rng)
    B = random_ensemble(chain8, (1, 3), rng)
    with pytest.raises(SeedMismatch):
        k2_inner(A, B)
    with pytest.raises(SeedMismatch):
        A + B


def test_ensembles_cannot_be_multiplied_with_star(chain8):
    A = CovariantEnsemble.identity(chain8, (0,))
    with pytest.raises(TypeError):
        A * A


# -- inner product and norms ------------------------------------------------------------


def test_k2_inner_examples(chain8):
    Z = CovariantEnsemble.zeros(chain8, (0, 1))
    assert k2_inner(Z, Z) == 0
    I = CovariantEnsemble.identity(chain8, (0, 1))
    assert k2_inner(I, I) == 1  # one site per cell at a = 1
    g = LatticeGeometry((8,), spacing=0.5)
    I2 = CovariantEnsemble.identity(g, (0,))
    assert k2_inner(I2, I2) == 2
    assert k2_inner(scalar(2.0), scalar(3j)) == 6j


def test_k2_inner_requires_same_window(chain8):
    A = CovariantEnsemble.identity(chain8, (0,))
    with pytest.raises(ValueError):
        k2_inner(A, A.with_window("volume"))


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), window=st.sampled_from(["cell", "volume"]))
def test_inner_product_properties(chain8, seed, window):
    rng = np.random.default_rng(seed)
    seeds = (5, 6, 7)
    A = random_ensemble(chain8, seeds, rng, window)
    B = random_ensemble(chain8, seeds, rng, window)
    ab, ba = k2_inner(A, B), k2_inner(B, A)
    assert ab == pytest.approx(np.conj(ba), abs=1e-12)
    aa = k2_inner(A, A)
    assert aa.real >= 0 and abs(aa.imag) <= 1e-12
    nA, nB = norms(A)[1], norms(B)[1]
    assert abs(ab) <= nA * nB * (1 + 1e-12)
    if window == "volume":
        # the dagger is anti-unitary once the trace is cyclic
        assert k2_inner(dagger(A), dagger(B)) == pytest.approx(ba, abs=1e-12 * nA * nB)
    assert dagger(dagger(A)).matrices.tobytes() == A.matrices.tobytes()


def test_norm_examples(chain8):
    I = CovariantEnsemble.identity(chain8, (0, 1))
    assert norms(I)[2] == pytest.approx(1.0)
    e0 = np.zeros((8, 8), dtype=complex)
    c = chain8.cell_sites()[0]
    e0[c, c] = 1.0
    rank1 = CovariantEnsemble(e0[None], (0,), chain8)
    np.testing.assert_allclose(norms(rank1), (1.0, 1.0, 1.0), atol=1e-12)


@settings(max_examples=15, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_norm_comparisons(seed):
    g = LatticeGeometry((8,), spacing=0.5)
    rng = np.random.default_rng(seed)
    A = random_ensemble(g, (1, 2), rng)
    n1, n2, ninf = norms(A)
    assert n2 <= ninf * np.sqrt(g.sites_per_cell) * (1 + 1e-12)
    assert abs(tuv(A)) <= n1 * (1 + 1e-12)


# -- trace per unit volume -----------------------------------------------------------------


def test_tuv_of_identity_counts_sites():
    g = LatticeGeometry((12,), spacing=1 / 3)
    assert tuv(CovariantEnsemble.identity(g, (0,))) == 3
    assert tuv_volume(np.eye(12), g)[0] == 3


def test_tuv_of_hamiltonian_mean_diagonal():
    # E H_xx = 2/a^2 + lambda/2 + gamma with lambda = 1 in d = 1
    g = LatticeGeometry((8,))
    model = DisorderModel(v_plus_max=1.0)
    ens = ModelEnsemble.sample(g, model, FieldProfile([0.0], 1.0), 200, master_seed=1)
    value, se = tuv_with_error(ens.hamiltonian_ensemble())
    expected = 2.0 + 0.5 + model.gamma(g)
    assert abs(value.real - expected) <= 3 * se


def test_tuv_frozen(ensemble8, profile):
    from liouville_lab.liouville import EquilibriumSpec, equilibrium_state

    z = equilibrium_state(EquilibriumSpec(np.inf, 4.6), ensemble8)
    assert tuv(z.ensemble).real == pytest.approx(0.43262957256407514, abs=1e-12)
    np.testing.assert_allclose(norms(z.ensemble), (0.43262957256407514, 0.6577458267173385, 1.0), atol=1e-12)


def test_tuv_volume_rejects_wrong_shape(chain8):
    with pytest.raises(ValueError):
        tuv_volume(np.eye(4), chain8)


# -- module structure ------------------------------------------------------------------------


def test_products_with_identity(chain8):
    rng = np.random.default_rng(1)
    A = random_ensemble(chain8, (0, 1), rng)
    np.testing.assert_array_equal(odot_l(np.eye(8), A).matrices, A.matrices)
    np.testing.assert_array_equal(odot_r(A, np.eye(8)).matrices, A.matrices)


def test_scalar_products():
    assert odot_l(scalar(2.0).matrices, scalar(3.0)).matrices[0, 0, 0] == 6
    assert odot_r(scalar(2.0), scalar(3.0).matrices).matrices[0, 0, 0] == 6


def test_right_product_dagger_identity_is_exact(chain8):
    rng = np.random.default_rng(2)
    g = LatticeGeometry((4,))
    A = random_ensemble(g, (0,), rng)
    B = random_ensemble(g, (0,), rng)
    lhs = dagger(odot_r(A, B)).matrices
    rhs = odot_l(np.conj(np.swapaxes(B.matrices, 1, 2)), dagger(A)).matrices
    assert np.array_equal(lhs, rhs)


def test_diamond_examples(chain8):
    I = CovariantEnsemble.identity(chain8, (0,))
    assert tuv(diamond(I, I)) == k2_inner(I, I) == 1
    assert diamond_identities(scalar(2.0), scalar(1.5 - 1j), scalar(4j).matrices) == (0.0, 0.0, 0.0)


@settings(max_examples=10, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_diamond_identities_volume_window(seed):
    g = LatticeGeometry((8,))
    rng = np.random.default_rng(seed)
    seeds = tuple(range(16))
    A, B, C = (random_ensemble(g, seeds, rng, "volume") for _ in range(3))
    assert max(diamond_identities(A, B, C.matrices)) <= 1e-12


def test_first_diamond_identity_holds_in_cell_window(chain8):
    # T(A <> B) = <<A^dagger, B>> needs no cyclicity
    rng = np.random.default_rng(5)
    A, B, C = (random_ensemble(chain8, (0, 1), rng) for _ in range(3))
    assert diamond_identities(A, B, C.matrices)[0] <= 1e-12


# -- superpropagator ------------------------------------------------------------------------


def test_superpropagator_equal_times(ensemble8):
    rng = np.random.default_rng(0)
    A = random_ensemble(ensemble8.geometry, ensemble8.seeds, rng)
    np.testing.assert_array_equal(superpropagator(ensemble8, -0.5, -0.5, A).matrices, A.matrices)


def test_superpropagator_zero_field_fixes_functions_of_H(ensemble8):
    still = ensemble8.with_profile(FieldProfile([0.0], 1.0))
    A = still.function(lambda e: np.exp(-e))
    out = superpropagator(still, 0.0, -3.0, A)
    assert np.max(np.abs(out.matrices - A.matrices)) <= 1e-13


def test_superpropagator_isometry_and_dagger(volume8):
    rng = np.random.default_rng(4)
    A = random_ensemble(volume8.geometry, volume8.seeds, rng, "volume")
    out = superpropagator(volume8, 0.0, -1.0, A, k=64)
    assert abs(norms(out)[1] / norms(A)[1] - 1) <= 1e-10
    assert abs(norms(out)[2] / norms(A)[2] - 1) <= 1e-10
    out_dag = superpropagator(volume8, 0.0, -1.0, dagger(A), k=64)
    assert np.max(np.abs(dagger(out).matrices - out_dag.matrices)) <= 1e-12


def test_superpropagator_composition(ensemble8):
    rng = np.random.default_rng(6)
    A = random_ensemble(ensemble8.geometry, ensemble8.seeds, rng)
    k = 128
    # r = -0.37 is off the grid: composition is exact for any r
    two = superpropagator(ensemble8, 0.0, -0.37, superpropagator(ensemble8, -0.37, -1.0, A, k), k)
    one = superpropagator(ensemble8, 0.0, -1.0, A, k)
    assert norms(two - one)[1] <= 1e-11 * norms(A)[1]


def test_spectrum_preserved_by_superpropagator(ensemble8):
    from liouville_lab.liouville import EquilibriumSpec, equilibrium_state

    z = equilibrium_state(EquilibriumSpec(np.inf, 4.6), ensemble8).ensemble
    out = superpropagator(ensemble8, 0.0, -2.0, z, k=64)
    np.testing.assert_allclose(np.linalg.eigvalsh(out.matrices), np.linalg.eigvalsh(z.matrices), atol=1e-10)


# -- H_L, H_R and Q^(0) ----------------------------------------------------------------------


def test_HL_sqrt_of_inverse_sqrt_is_identity(ensemble8):
    R = ensemble8.ensemble(np.stack([H.inv_sqrt for H in ensemble8.hamiltonians()]))
    np.testing.assert_allclose(apply_HL_sqrt(R, ensemble8).matrices, np.broadcast_to(np.eye(8), (4, 8, 8)), atol=1e-12)


def test_HR_is_conjugated_HL(ensemble8):
    rng = np.random.default_rng(8)
    A = random_ensemble(ensemble8.geometry, ensemble8.seeds, rng)
    lhs = apply_HR_sqrt(A, ensemble8, -0.5).matrices
    rhs = dagger(apply_HL_sqrt(dagger(A), ensemble8, -0.5)).matrices
    assert np.array_equal(lhs, rhs)


def test_HL_gauge_surrogate(ensemble8):
    # H_L(s)^{1/2} A = G(s) H_L^{1/2} (G(s)* A G(s)) G(s)*
    rng = np.random.default_rng(9)
    A = random_ensemble(ensemble8.geometry, ensemble8.seeds, rng)
    s = -0.4
    g = ensemble8.gauge_stack(s)
    direct = apply_HL_sqrt(A, ensemble8, s)
    via = gauge_conjugate(apply_HL_sqrt(gauge_conjugate(A, g, inverse=True), ensemble8), g)
    assert np.max(np.abs(direct.matrices - via.matrices)) <= 1e-10


def test_q0_membership_is_finite(ensemble8):
    A = ensemble8.function(lambda e: np.exp(-e))
    left, right = q0_membership(A, ensemble8)
    assert np.isfinite(left) and np.isfinite(right)
    assert left == pytest.approx(right)  # A is Hermitian


def test_apply_superpropagator_identity(ensemble8):
    A = ensemble8.function(np.sqrt)
    U = np.broadcast_to(np.eye(8), (4, 8, 8))
    np.testing.assert_array_equal(apply_superpropagator(U, A).matrices, A.matrices)


def test_model_ensemble_validation(chain8, disorder, profile):
    with pytest.raises(ValueError):
        ModelEnsemble([])
    other = ModelEnsemble.sample(LatticeGeometry((4,)), disorder, profile, 1)
    mixed = ModelEnsemble.sample(chain8, disorder, profile, 1).models + other.models
    with pytest.raises(ValueError):
        ModelEnsemble(mixed)


def test_sampling_independent_of_count(chain8, disorder, profile):
    small = ModelEnsemble.sample(chain8, disorder, profile, 2, master_seed=4)
    large = ModelEnsemble.sample(chain8, disorder, profile, 5, master_seed=4)
    assert small.seeds == large.seeds[:2]
