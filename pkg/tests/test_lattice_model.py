import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from liouville_lab.lattice_model import (
    DisorderModel,
    FieldProfile,
    HermitianOperator,
    LatticeGeometry,
    TimeDependentHamiltonian,
    UnsupportedOperation,
    build_hamiltonian,
    covariance_residual,
    derive_seed,
    electric_field,
    gauge_identity_residual,
    gauge_unitary,
    magnetic_translation,
    switching_integral,
    verify_form_bound,
)


# -- geometry ---------------------------------------------------------------


def test_geometry_rejects_bad_input():
    with pytest.raises(ValueError):
        LatticeGeometry((4, 4, 4, 4))
    with pytest.raises(ValueError):
        LatticeGeometry((0,))
    with pytest.raises(ValueError):
        LatticeGeometry((4,), boundary="twisted")
    with pytest.raises(ValueError):
        LatticeGeometry((6,), spacing=0.25)  # 4 sites per cell do not divide 6


def test_cells_partition_the_box():
    g = LatticeGeometry((8, 4), spacing=0.5)
    assert g.sites_per_cell == 4
    assert g.n_cells == 8
    seen = np.concatenate([g.cell_sites(c) for c in g.all_cells()])
    assert sorted(seen) == list(range(g.n_sites))


def test_reference_cell_conventions():
    assert LatticeGeometry((16,)).reference_cell == (8,)
    assert LatticeGeometry((16,), boundary="periodic").reference_cell == (0,)


def test_centred_positions_are_symmetric():
    x = LatticeGeometry((5,)).positions("center")[:, 0]
    np.testing.assert_allclose(x, [-2, -1, 0, 1, 2])


# -- Hamiltonian --------------------------------------------------------------


def test_single_site_hamiltonian():
    g = LatticeGeometry((1,))
    r = DisorderModel().sample(g, 0)
    H = build_hamiltonian(g, r)
    gamma = 1.0 + 2.0
    np.testing.assert_allclose(H.matrix, [[2.0 + gamma]])


def test_zero_shift_equals_no_shift(chain8, disorder):
    r = disorder.sample(chain8, 3)
    np.testing.assert_array_equal(build_hamiltonian(chain8, r, [0.0]).matrix, build_hamiltonian(chain8, r).matrix)


def test_path_graph_eigenvalues():
    # the hopping part of a clean open chain of 4 sites is the path-graph Laplacian
    g = LatticeGeometry((4,))
    r = DisorderModel().sample(g, 0)
    H = build_hamiltonian(g, r)
    expected = 2 - 2 * np.cos(np.arange(1, 5) * np.pi / 5) + r.gamma
    np.testing.assert_allclose(H.eigenvalues, expected, atol=1e-13)


def test_dimension_mismatch_rejected(chain8, disorder):
    r = disorder.sample(chain8, 0)
    with pytest.raises(ValueError):
        build_hamiltonian(chain8, r, [0.1, 0.2])
    with pytest.raises(ValueError):
        build_hamiltonian(LatticeGeometry((4,)), r)


def test_nonfinite_potential_rejected(chain8, disorder):
    r = disorder.sample(chain8, 0)
    r.v_plus[2] = np.nan
    with pytest.raises(ValueError):
        build_hamiltonian(chain8, r)


def test_frozen_sample(chain8, disorder):
    r = disorder.sample(chain8, derive_seed(0, 0))
    np.testing.assert_allclose(r.v_plus[:3], [0.10348884, 0.22254854, 0.07784708], atol=1e-8)
    H = build_hamiltonian(chain8, r)
    np.testing.assert_allclose(H.eigenvalues[[0, -1]], [3.42127158, 7.30462869], atol=1e-8)


@settings(max_examples=25, deadline=None)
@given(
    seed=st.integers(0, 2**32 - 1),
    v_minus=st.floats(0.0, 3.0),
    d=st.sampled_from([1, 2]),
    F=st.floats(-5, 5),
)
def test_offset_spectrum_at_least_one(seed, v_minus, d, F):
    g = LatticeGeometry((4,) * d)
    model = DisorderModel(v_plus_max=1.0, v_minus_max=v_minus, link_disorder=0.5)
    r = model.sample(g, seed)
    H = build_hamiltonian(g, r, [F] * d)
    assert H.min_eigenvalue >= 1.0 - 1e-12
    assert np.allclose(H.matrix, H.matrix.conj().T)


def test_link_phases_antisymmetric():
    g = LatticeGeometry((4, 4), boundary="periodic")
    r = DisorderModel(link_disorder=0.7).sample(g, 5)
    theta = r.phase_matrix()
    np.testing.assert_array_equal(theta, -theta.T)


def test_hermitian_operator_rejects_non_hermitian():
    with pytest.raises(ValueError):
        HermitianOperator(np.array([[1.0, 2.0], [0.0, 1.0]]))


def test_expm_diagonal_case():
    H = HermitianOperator(np.diag([1.0, 2.0]))
    np.testing.assert_allclose(H.expm(np.pi), np.diag([-1.0, 1.0]), atol=1e-14)


def test_expm_matches_scaling_and_squaring():
    import scipy.linalg

    rng = np.random.default_rng(11)
    X = rng.normal(size=(8, 8)) + 1j * rng.normal(size=(8, 8))
    H = (X + X.conj().T) / 2
    np.testing.assert_allclose(HermitianOperator(H).expm(0.7), scipy.linalg.expm(-0.7j * H), atol=1e-10)


# -- field profile ---------------------------------------------------------------


def test_electric_field_values():
    p = FieldProfile([2.0, 0.0], 1.0)
    np.testing.assert_allclose(electric_field(p, 0.0), [2, 0])
    np.testing.assert_allclose(electric_field(p, 5.0), [2, 0])
    np.testing.assert_allclose(electric_field(p, -1.0), [2 * math.exp(-1), 0])


def test_switching_integral_values():
    np.testing.assert_allclose(switching_integral(FieldProfile([1, 0], 2.0), 0.0), [0.5, 0])
    np.testing.assert_allclose(switching_integral(FieldProfile([1, 1], 1.0), 3.0), [4, 4])
    assert np.allclose(switching_integral(FieldProfile([1, 1], 1.0), -60.0), 0.0)


def test_eta_must_be_positive():
    with pytest.raises(ValueError):
        FieldProfile([1.0], 0.0)


def test_switching_integral_derivative_is_second_order():
    p = FieldProfile([0.3], 1.3)
    t = -0.7
    hs = np.array([1e-2, 5e-3, 2.5e-3])
    err = [abs((p.switching_integral(t + h) - p.switching_integral(t - h))[0] / (2 * h) - p.electric_field(t)[0]) for h in hs]
    slopes = np.log(np.array(err[:-1]) / err[1:]) / np.log(2)
    assert np.all(np.abs(slopes - 2.0) <= 0.2)


# -- gauge and covariance ----------------------------------------------------------


def test_gauge_unitary_example():
    g = LatticeGeometry((2,))
    # F(0) = E/eta, so E = pi, eta = 1 gives F = pi
    G = gauge_unitary(g, FieldProfile([np.pi], 1.0), 0.0)
    np.testing.assert_allclose(G, np.diag([1.0, -1.0]), atol=1e-15)


def test_gauge_unitary_trivial_cases():
    g = LatticeGeometry((1,))
    np.testing.assert_array_equal(gauge_unitary(g, FieldProfile([3.0], 1.0), 0.0), [[1.0]])
    np.testing.assert_allclose(gauge_unitary(LatticeGeometry((4,)), FieldProfile([0.0], 1.0), 1.0), np.eye(4))


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2**31), t=st.floats(-10, 3), E=st.floats(-2, 2))
def test_gauge_identity_exact(seed, t, E):
    g = LatticeGeometry((8,))
    r = DisorderModel(v_plus_max=1.0, link_disorder=0.3).sample(g, seed)
    res = gauge_identity_residual(g, r, FieldProfile([E], 1.0), t)
    assert res <= 1e-12 * build_hamiltonian(g, r).norm


def test_gauge_unitary_needs_open_geometry():
    with pytest.raises(UnsupportedOperation):
        gauge_unitary(LatticeGeometry((8,), boundary="periodic"), FieldProfile([1.0], 1.0), 0.0)


def test_translation_at_zero_is_identity():
    g = LatticeGeometry((8,), boundary="periodic")
    np.testing.assert_array_equal(magnetic_translation(g, (0,)), np.eye(8))


@pytest.mark.parametrize("shift", [1, 3, 5])
def test_covariance_exact_1d(shift):
    g = LatticeGeometry((8,), boundary="periodic")
    r = DisorderModel(v_plus_max=1.0).sample(g, 4)
    assert covariance_residual(r, (shift,)) <= 1e-12 * build_hamiltonian(g, r).norm


def test_covariance_clean_is_zero():
    g = LatticeGeometry((8,), boundary="periodic")
    r = DisorderModel().sample(g, 0)
    assert covariance_residual(r, (3,)) == 0.0


@pytest.mark.parametrize("n_flux, shifts", [(6, [(1, 0), (0, 1), (2, 3)]), (3, [(2, 0), (0, 2), (4, 2)])])
def test_covariance_with_magnetic_field(n_flux, shifts):
    g = LatticeGeometry((6, 6), boundary="periodic")
    B = 2 * np.pi * n_flux / 36
    r = DisorderModel(v_plus_max=1.0, link_disorder=0.2, magnetic_field=B).sample(g, 9)
    for shift in shifts:
        assert covariance_residual(r, shift) <= 1e-12 * build_hamiltonian(g, r).norm


def test_shift_that_changes_holonomy_is_rejected():
    # one flux quantum on a 6x6 torus: a one-cell shift moves the holonomy by 1/6 quantum
    g = LatticeGeometry((6, 6), boundary="periodic")
    with pytest.raises(ValueError, match="holonomy"):
        magnetic_translation(g, (1, 0), 2 * np.pi / 36)


def test_flux_quantisation_enforced():
    g = LatticeGeometry((6, 6), boundary="periodic")
    with pytest.raises(ValueError):
        DisorderModel(magnetic_field=0.1).sample(g, 0)


def test_translation_needs_periodic():
    with pytest.raises(UnsupportedOperation):
        magnetic_translation(LatticeGeometry((8,)), (1,))


# -- form bound --------------------------------------------------------------------


def test_form_bound_examples(chain8):
    r0 = DisorderModel().sample(chain8, 0)
    assert verify_form_bound(r0, 0.0, 0.0)
    r = DisorderModel(v_minus_max=0.5).sample(chain8, 1)
    assert verify_form_bound(r, 0.0, 0.5)
    mu = float(r.v_minus.max())
    assert verify_form_bound(r, 0.0, mu)
    assert not verify_form_bound(r, 0.0, 0.9 * mu)
    with pytest.raises(ValueError):
        verify_form_bound(r, 1.0, 0.0)


# -- seeds ---------------------------------------------------------------------------


def test_derived_seeds_frozen():
    assert [derive_seed(0, i) for i in range(3)] == [6375474603054492659, 8514611595135926838, 6745496414556587486]
    assert derive_seed(7, 5) == 2153077620576773585


def test_sampling_deterministic(chain8, disorder):
    a = disorder.sample(chain8, 123)
    b = disorder.sample(chain8, 123)
    np.testing.assert_array_equal(a.v_plus, b.v_plus)


def test_translate_then_build_equals_shift():
    g = LatticeGeometry((8,), boundary="periodic")
    r = DisorderModel(v_plus_max=1.0).sample(g, 2)
    np.testing.assert_array_equal(r.translate((3,)).v_plus, np.roll(r.v_plus, 3))


def test_time_dependent_hamiltonian_derivative(model8):
    t, h = -0.4, 1e-5
    fd = (model8(t + h).matrix - model8(t - h).matrix) / (2 * h)
    np.testing.assert_allclose(model8.derivative(t), fd, atol=1e-8)


def test_step_uses_gauge_identity(model8):
    direct = model8(-0.3).expm(0.1)
    np.testing.assert_allclose(model8.step(-0.3, 0.1), direct, atol=1e-13)


def test_cell_average_distributional_invariance():
    # E tr chi_a f(H) chi_a is the same for every cell a on the torus
    g = LatticeGeometry((12,), boundary="periodic")
    model = DisorderModel(v_plus_max=1.0)
    vals = {0: [], 5: []}
    for i in range(200):
        H = build_hamiltonian(g, model.sample(g, derive_seed(3, i)))
        F = H.function(lambda e: np.exp(-((e - 5.0) ** 2)))
        for c in vals:
            vals[c].append(F[c, c].real)
    a, b = np.array(vals[0]), np.array(vals[5])
    se = math.hypot(a.std(ddof=1), b.std(ddof=1)) / math.sqrt(len(a))
    assert abs(a.mean() - b.mean()) <= 3 * se


def test_time_dependent_hamiltonian_checks_dimension(chain8, disorder):
    with pytest.raises(ValueError):
        TimeDependentHamiltonian(disorder.sample(chain8, 0), FieldProfile([0.1, 0.2], 1.0))
