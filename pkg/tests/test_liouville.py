import math
import warnings

import numpy as np
import pytest

from liouville_lab.covariant_algebra import ModelEnsemble, k2_inner, norms
from liouville_lab.harness.suites import dictionary
from liouville_lab.lattice_model import (
    DisorderModel,
    FieldProfile,
    LatticeGeometry,
    UnsupportedOperation,
)
from liouville_lab.liouville import (
    DensityEnsemble,
    EquilibriumSpec,
    bath_residual,
    duhamel_rho,
    duhamel_rho_many,
    equilibrium_state,
    field_commutator,
    form_HL_t,
    form_HR_t,
    form_L,
    form_L_commutator,
    limit_rho,
    liouville_residual,
    liouville_residual_study,
    position_commutator,
    propagation_derivative_residual,
    q0_check,
    uniqueness_check,
    zeta_t,
)

FERMI = EquilibriumSpec(math.inf, 4.6)


@pytest.fixture(scope="module")
def zeta(volume8):
    return equilibrium_state(FERMI, volume8)


@pytest.fixture(scope="module")
def still(volume8):
    return volume8.with_profile(FieldProfile([0.0], 1.0))


@pytest.fixture(scope="module")
def A(volume8):
    return dictionary(volume8, FERMI.fermi_energy)["f1(H)"]


# -- equilibrium ---------------------------------------------------------------------


def test_fermi_projection_extremes(volume8):
    lo = equilibrium_state(EquilibriumSpec(math.inf, 0.0), volume8)
    hi = equilibrium_state(EquilibriumSpec(math.inf, 100.0), volume8)
    assert np.max(np.abs(lo.matrices)) <= 1e-14
    np.testing.assert_allclose(hi.matrices, np.broadcast_to(np.eye(8), (4, 8, 8)), atol=1e-13)


def test_fermi_dirac_at_the_fermi_energy():
    g = LatticeGeometry((1,))
    ens = ModelEnsemble.sample(g, DisorderModel(), FieldProfile([0.0], 1.0), 1)
    level = ens.hamiltonians()[0].min_eigenvalue
    z = equilibrium_state(EquilibriumSpec(2.0, level), ens)
    assert z.matrices[0, 0, 0].real == pytest.approx(0.5, abs=1e-15)


def test_fermi_tie_counts_as_occupied():
    spec = EquilibriumSpec(math.inf, 1.0)
    np.testing.assert_array_equal(spec.occupation([1.0 + 5e-13, 1.0 + 1e-9]), [1.0, 0.0])


def test_spec_validation():
    with pytest.raises(ValueError):
        EquilibriumSpec(0.0, 1.0)
    with pytest.raises(ValueError):
        EquilibriumSpec(1.0, math.nan)


def test_projection_properties(zeta):
    Z = zeta.matrices
    assert np.max(np.abs(Z @ Z - Z)) <= 1e-12
    w = np.linalg.eigvalsh(Z)
    assert w.min() >= -1e-12 and w.max() <= 1 + 1e-12
    assert zeta.hermiticity_defect() <= 1e-12


def test_finite_temperature_bounds(volume8):
    z = equilibrium_state(EquilibriumSpec(3.0, 4.6), volume8)
    w = np.linalg.eigvalsh(z.matrices)
    assert w.min() > 0 and w.max() < 1


def test_provenance_validated(zeta):
    with pytest.raises(ValueError):
        DensityEnsemble(zeta.ensemble, 0.0, "guess")


# -- zeta(t) -----------------------------------------------------------------------------


def test_zeta_t_is_equilibrium_of_shifted_hamiltonian(volume8, zeta):
    direct = equilibrium_state(FERMI, volume8, t=0.0)
    assert norms(zeta_t(zeta, 0.0, volume8).ensemble - direct.ensemble)[1] <= 1e-10


def test_zeta_t_preserves_spectrum_and_vanishes_far_back(volume8, zeta):
    zt = zeta_t(zeta, -0.3, volume8)
    np.testing.assert_allclose(np.linalg.eigvalsh(zt.matrices), np.linalg.eigvalsh(zeta.matrices), atol=1e-13)
    far = zeta_t(zeta, -60.0, volume8)
    assert np.max(np.abs(far.matrices - zeta.matrices)) <= 1e-14


def test_zeta_t_needs_open_geometry():
    g = LatticeGeometry((6,), boundary="periodic")
    ens = ModelEnsemble.sample(g, DisorderModel(), FieldProfile([0.1], 1.0), 1)
    z = equilibrium_state(FERMI, ens)
    with pytest.raises(UnsupportedOperation):
        zeta_t(z, 0.0, ens)
    with pytest.raises(UnsupportedOperation):
        position_commutator(z, 0)


# -- position commutators and Q^(0) --------------------------------------------------------


def test_position_commutator_trivial_cases(volume8):
    I = volume8.ensemble(np.broadcast_to(np.eye(8), (4, 8, 8)).copy())
    assert np.max(np.abs(position_commutator(I, 0).matrices)) == 0
    Z = I.like(np.zeros((4, 8, 8)))
    assert q0_check(Z, volume8) == (0.0, 0.0)


def test_field_commutator_is_linear_in_E(zeta):
    a = field_commutator(zeta, [0.1]).matrices
    b = field_commutator(zeta, [0.3]).matrices
    np.testing.assert_allclose(b, 3 * a, atol=1e-15)


def test_q0_check_stable_in_a_gapped_chain():
    # strong dimerisation opens a gap around E_F = 5.1
    disorder = DisorderModel(v_plus_max=0.2, dimerization=0.5)
    spec = EquilibriumSpec(math.inf, 5.1)
    values = []
    for L in (16, 32):
        ens = ModelEnsemble.sample(LatticeGeometry((L,)), disorder, FieldProfile([0.0], 1.0), 4)
        values.append(q0_check(equilibrium_state(spec, ens), ens)[1])
    assert abs(values[1] - values[0]) <= 0.1 * values[0]


# -- Duhamel representation ------------------------------------------------------------------


def test_duhamel_zero_field_is_fixed_point(still, zeta):
    for r in duhamel_rho_many(still, FERMI, [-4.0, 0.0, 2.0], zeta=zeta, k=64):
        assert np.max(np.abs(r.rho.matrices - zeta.matrices)) <= 1e-12


def test_duhamel_hermitian_and_trace_preserving(volume8, zeta):
    r = duhamel_rho(volume8, FERMI, 0.0, zeta=zeta, k=512)
    assert r.rho.hermiticity_defect() <= 1e-10
    # conjugation preserves the trace in the volume window
    tr_rho = np.trace(r.rho.matrices, axis1=1, axis2=2).real
    tr_zeta = np.trace(zeta.matrices, axis1=1, axis2=2).real
    assert np.max(np.abs(tr_rho - tr_zeta)) <= 1e-9


def test_duhamel_tail_bound(volume8, zeta):
    X = field_commutator(zeta, volume8.profile.vector)
    for t in (-4.0, -6.0, -8.0):
        r = duhamel_rho(volume8, FERMI, t, zeta=zeta, t_min=-16.0, k=256)
        dev = norms(r.rho.ensemble - zeta_t(zeta, t, volume8).ensemble)[1]
        assert dev <= math.exp(t) * norms(X)[1]


def test_duhamel_truncation_bound_is_reported(volume8, zeta):
    r = duhamel_rho(volume8, FERMI, 0.0, zeta=zeta, t_min=-6.0, k=128)
    expected = math.exp(-6.0) * norms(field_commutator(zeta, [0.1]))[1]
    assert r.truncation_bound == pytest.approx(expected)
    with pytest.warns(RuntimeWarning, match="too shallow"):
        duhamel_rho(volume8, FERMI, 0.0, zeta=zeta, t_min=-2.0, k=64, tolerance=1e-8)


def test_duhamel_rejects_t_min_above_times(volume8, zeta):
    with pytest.raises(ValueError):
        duhamel_rho(volume8, FERMI, -3.0, zeta=zeta, t_min=-2.0)


def test_duhamel_matches_limit(volume8, zeta):
    d = duhamel_rho(volume8, FERMI, 0.0, zeta=zeta, k=2048)
    lim = limit_rho(volume8, FERMI, 0.0, zeta=zeta, k=2048)
    assert norms(d.rho.ensemble - lim.rho_gauged.ensemble)[1] <= 1e-5
    budget = d.truncation_bound + math.exp(-8.0) * norms(field_commutator(zeta, [0.1]))[1]
    assert norms(d.rho.ensemble - lim.rho.ensemble)[1] <= budget


# -- limit representation ----------------------------------------------------------------------


def test_limit_zero_field(still, zeta):
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        lim = limit_rho(still, FERMI, 0.0, zeta=zeta, k=64)
    assert not lim.diverged
    assert np.max(np.abs(lim.rho.matrices - zeta.matrices)) <= 1e-12


def test_limit_gaps_shrink_at_switching_rate(volume8, zeta):
    lim = limit_rho(volume8, FERMI, 0.0, zeta=zeta, k=1024)
    assert not lim.diverged
    for ratio in lim.gap_ratios:
        assert abs(ratio / math.exp(-2.0) - 1) <= 0.3
    assert all(b < a for a, b in zip(lim.representation_gaps, lim.representation_gaps[1:]))


def test_limit_divergence_is_reported(volume8, zeta):
    # s steps that shrink geometrically make consecutive gaps grow
    with pytest.warns(RuntimeWarning, match="not contracting"):
        lim = limit_rho(volume8, FERMI, 0.0, s_list=(-1.0, -1.01, -3.0), zeta=zeta, k=256)
    assert lim.diverged


def test_limit_validates_s_list(volume8):
    with pytest.raises(ValueError):
        limit_rho(volume8, FERMI, 0.0, s_list=(-4.0, -2.0))
    with pytest.raises(ValueError):
        limit_rho(volume8, FERMI, -3.0, s_list=(-2.0, -4.0))


# -- forms ---------------------------------------------------------------------------------------


def test_L_of_identity_vanishes(still):
    I = still.ensemble(np.broadcast_to(np.eye(8), (4, 8, 8)).copy())
    assert form_HL_t(I, I, still, None) == pytest.approx(form_HR_t(I, I, still, None))
    assert abs(form_L(I, I, still, None)) <= 1e-12


def test_L_is_real_on_hermitian_input(volume8, A):
    assert abs(form_L(A, A, volume8, -0.5).imag) <= 1e-12


def test_L_equals_commutator_form(volume8):
    rng = np.random.default_rng(2)
    X = rng.normal(size=(4, 8, 8)) + 1j * rng.normal(size=(4, 8, 8))
    Y = rng.normal(size=(4, 8, 8)) + 1j * rng.normal(size=(4, 8, 8))
    A_, B_ = volume8.ensemble(X), volume8.ensemble(Y)
    assert form_L(A_, B_, volume8, -0.2) == pytest.approx(form_L_commutator(A_, B_, volume8, -0.2), abs=1e-11)


def test_bath_lemma(volume8, zeta):
    for name, A_ in dictionary(volume8, FERMI.fermi_energy).items():
        for t in (-2.0, -1.0, 0.0):
            value, scale = bath_residual(A_, zeta_t(zeta, t, volume8), volume8, t)
            assert value <= 1e-8 * scale, name


# -- Liouville equation -------------------------------------------------------------------------


def test_liouville_residual_second_order(volume8, A):
    hs = [4e-2, 2e-2, 1e-2]
    res = liouville_residual_study(A, volume8, FERMI, -0.5, hs, k=1024)
    slopes = np.log(res[:-1] / res[1:]) / np.log(2)
    assert np.all(np.abs(slopes - 2.0) <= 0.2)


def test_liouville_residual_zero_field(still, A):
    assert liouville_residual(A, still, FERMI, -0.5, 1e-2, k=64) <= 1e-12


def test_liouville_residual_rejects_bad_h(volume8, A):
    with pytest.raises(ValueError):
        liouville_residual(A, volume8, FERMI, 0.0, -1e-2)


def test_initial_condition_decay(volume8, zeta):
    # f(H) itself has no first-order overlap with rho - zeta under a cyclic trace,
    # so the decay is probed with a smoothed position commutator
    A = dictionary(volume8, FERMI.fermi_energy)["i[x,f1(H)]"]
    times = [-8.0, -6.0, -4.0]
    res = duhamel_rho_many(volume8, FERMI, times, zeta=zeta, t_min=-16.0, k=512)
    ref = k2_inner(A, zeta.ensemble)
    C = [abs(k2_inner(A, r.rho.ensemble) - ref) / math.exp(t) for t, r in zip(times, res)]
    assert max(C) / min(C) <= 1.1


def test_linear_response_slope(volume8, zeta):
    Es = np.array([1e-3, 2e-3, 4e-3])
    vals = []
    for E in Es:
        m = volume8.with_profile(FieldProfile([E], 1.0))
        r = duhamel_rho(m, FERMI, 0.0, zeta=zeta, k=256)
        vals.append(norms(r.rho.ensemble - zeta_t(zeta, 0.0, m).ensemble)[1])
    slope = np.polyfit(np.log(Es), np.log(vals), 1)[0]
    assert abs(slope - 1.0) <= 0.1


# -- propagation derivatives and uniqueness ------------------------------------------------------


def test_propagation_derivative_zero_field(still, zeta):
    assert propagation_derivative_residual(zeta, zeta, still, -1.0, -1.0, 1e-2, k=64) <= 1e-12


@pytest.mark.parametrize("variable", ["t", "r"])
def test_propagation_derivative_second_order(volume8, zeta, A, variable):
    hs = [4e-2, 2e-2, 1e-2]
    res = np.array([propagation_derivative_residual(A, zeta, volume8, -0.2, -1.0, h, variable, k=1024) for h in hs])
    slopes = np.log(res[:-1] / res[1:]) / np.log(2)
    assert np.all(np.abs(slopes - 2.0) <= 0.2)


def test_propagation_derivative_r_sign(volume8, zeta, A):
    right = propagation_derivative_residual(A, zeta, volume8, -0.2, -1.0, 1e-2, "r", k=1024)
    wrong = propagation_derivative_residual(A, zeta, volume8, -0.2, -1.0, 1e-2, "r", sign=-1.0, k=1024)
    assert wrong >= 10 * right


def test_propagation_derivative_validates(volume8, zeta):
    with pytest.raises(ValueError):
        propagation_derivative_residual(zeta, zeta, volume8, 0.0, -1.0, 0.0)
    with pytest.raises(ValueError):
        propagation_derivative_residual(zeta, zeta, volume8, 0.0, -1.0, 1e-2, "s")


def test_uniqueness(volume8, A):
    rep = uniqueness_check(volume8, [-2.0, -1.0, 0.0], A, k=256)
    assert rep.zero_solution_norm == 0.0
    assert rep.value <= 1e-8 * rep.scale
