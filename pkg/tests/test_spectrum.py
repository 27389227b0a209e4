import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lattice_drain import (InputError, LatticeModel, NumericError, approx_dissipation_spectrum,
                           build_chain, build_ring_flux, classify_regime,
                           closed_form_inverse, closed_form_left_eigenvectors,
                           diagonalize_coupled, dynamical_matrix, exact_dynamical_spectrum,
                           refine_root, remainder_r, ring_analytics, self_consistency,
                           site_dynamical_matrix)
from lattice_drain.eigensystem import EigenSystem
from lattice_drain.spectrum import commutator_matrix

from conftest import ci_models, random_hermitian


def single_site():
    return diagonalize_coupled(LatticeModel(1, np.array([[0.3]]), 0))


def spectrum(model, gamma):
    es = diagonalize_coupled(model)
    return es, exact_dynamical_spectrum(dynamical_matrix(es, gamma), es, gamma)


def dimer_lambdas(j, gamma):
    # roots of (lam + i gamma/4)^2 = j^2 - gamma^2/16, ordered by real part
    s = np.sqrt(complex(j**2 - gamma**2 / 16))
    return np.array([-0.25j * gamma - s, -0.25j * gamma + s])


# --- dynamical matrix ----------------------------------------------------------

def test_single_site_matrix():
    es = diagonalize_coupled(LatticeModel(1, np.array([[0.0]]), 0))
    np.testing.assert_allclose(dynamical_matrix(es, 2.0), [[-1j]])


def test_dimer_matrix():
    es = diagonalize_coupled(build_chain(2))
    g = 0.8
    expected = np.diag([-1.0, 1.0]) - 1j * g / 4 * np.array([[1, 1], [1, 1]])
    np.testing.assert_allclose(dynamical_matrix(es, g), expected, atol=1e-14)


@pytest.mark.parametrize("model", ci_models(), ids=lambda m: m.label)
def test_trace_and_route_equivalence(model):
    es = diagonalize_coupled(model)
    for g in (0.3, 2.0, 7.0):
        a = dynamical_matrix(es, g)
        assert np.trace(a) == pytest.approx(es.energies.sum() - 0.5j * g * es.drain_weight.sum(),
                                            abs=1e-12 * es.n_modes)
        lam_eig = np.linalg.eigvals(a)
        lam_site = np.linalg.eigvals(site_dynamical_matrix(model, g))
        # dropped modes appear in the site route with their bare (real) energy
        for lam in lam_eig:
            assert np.min(np.abs(lam_site - lam)) < 1e-9


def test_negative_gamma_rejected():
    es = diagonalize_coupled(build_chain(2))
    with pytest.raises(InputError):
        dynamical_matrix(es, -1.0)


# --- exact spectrum ------------------------------------------------------------

def test_single_site_spectrum():
    es = single_site()
    ds = exact_dynamical_spectrum(dynamical_matrix(es, 1.5), es)
    assert ds.lambdas[0] == pytest.approx(0.3 - 0.75j, abs=1e-14)
    assert ds.rates[0] == pytest.approx(1.5)
    assert ds.gamma == pytest.approx(1.5)


@pytest.mark.parametrize("gamma", [0.5, 1.0, 3.9, 6.0])
def test_dimer_spectrum(gamma):
    es, ds = spectrum(build_chain(2), gamma)
    for lam in dimer_lambdas(1, gamma):
        assert np.min(np.abs(ds.lambdas - lam)) < 1e-12


def test_ring_macroscopic_mode():
    es, ds = spectrum(build_ring_flux(100, 1.0, np.pi / 2), 5.0)
    assert ds.macroscopic.sum() == 1
    # bound state of H - i(gamma/2)|0><0| on a ring: gamma_0 = sqrt(gamma^2 - 16 J^2)
    assert ds.rates[ds.macroscopic][0] == pytest.approx(3.0, abs=1e-10)


def test_zero_gamma_spectrum():
    es, ds = spectrum(build_chain(5), 0.0)
    np.testing.assert_array_equal(ds.rates, 0)
    np.testing.assert_allclose(ds.lambdas.real, es.energies)


@pytest.mark.parametrize("model", ci_models(), ids=lambda m: m.label)
@pytest.mark.parametrize("gamma", [0.1, 1.0, 4.0, 20.0])
def test_spectrum_invariants(model, gamma):
    es, ds = spectrum(model, gamma)
    assert np.all(ds.lambdas.imag <= 1e-10)
    assert ds.lambdas.sum() == pytest.approx(
        es.energies.sum() - 0.5j * gamma * es.drain_weight.sum(), abs=1e-9 * es.n_modes)
    assert ds.residual < 1e-8
    np.testing.assert_allclose(ds.left_vectors @ ds.inverse_vectors, np.eye(es.n_modes), atol=1e-8)
    np.testing.assert_allclose(self_consistency(es, gamma, ds.lambdas), 1j, atol=1e-8)
    np.testing.assert_allclose(ds.lambdas, es.energies + ds.delta_nu - 0.5j * ds.rates, atol=1e-14)
    assert sorted(ds.match) == list(range(es.n_modes))


@settings(max_examples=30, deadline=None)
@given(n=st.integers(1, 10), seed=st.integers(0, 2**32 - 1),
       gamma=st.floats(0.01, 50.0))
def test_random_models_passive_and_sum_rule(n, seed, gamma):
    model = LatticeModel(n, random_hermitian(n, seed), seed % n)
    es, ds = spectrum(model, gamma)
    assert np.all(ds.rates >= -1e-10)
    assert ds.lambdas.sum() == pytest.approx(
        es.energies.sum() - 0.5j * gamma * es.drain_weight.sum(), abs=1e-9 * max(n, 1))
    lam_site = np.linalg.eigvals(site_dynamical_matrix(model, gamma))
    for lam in ds.lambdas:
        assert np.min(np.abs(lam_site - lam)) < 1e-9


# --- closed forms --------------------------------------------------------------

def test_closed_form_single_site():
    es = diagonalize_coupled(LatticeModel(1, np.array([[0.0]]), 0))
    g = 2.0
    lam = np.array([-1j])
    v, res = closed_form_left_eigenvectors(lam, es, g)
    np.testing.assert_allclose(v, [[1j / np.sqrt(g)]])
    assert res < 1e-15
    winv, weights = closed_form_inverse(lam, es, g)
    np.testing.assert_allclose(weights, [-g / 2])
    np.testing.assert_allclose(winv @ v, [[1]])


def test_closed_form_dimer():
    es = diagonalize_coupled(build_chain(2))
    lam = dimer_lambdas(1.0, 1.0)
    v, res = closed_form_left_eigenvectors(lam, es, 1.0)
    assert res < 1e-10
    winv, _ = closed_form_inverse(lam, es, 1.0)
    assert np.max(np.abs(v @ winv - np.eye(2))) < 1e-10


def test_closed_form_ring25():
    es, ds = spectrum(build_ring_flux(25, 1.0, np.pi / 2), 2.0)
    v, res = closed_form_left_eigenvectors(ds, es, 2.0)
    assert res < 1e-8
    winv, _ = closed_form_inverse(ds, es)
    # rows of the inverse sum to -i e^{-i phi_i} sqrt(Gbar_i)
    expected = -1j * np.exp(-1j * es.drain_phase) * np.sqrt(2.0 * es.drain_weight)
    np.testing.assert_allclose(winv.sum(axis=1), expected, atol=1e-8)


@pytest.mark.parametrize("model", ci_models(), ids=lambda m: m.label)
def test_commutator_identity(model):
    es, ds = spectrum(model, 1.3)
    lam = ds.lambdas
    expected = 1j / (lam.conj()[None, :] - lam[:, None])
    np.testing.assert_allclose(commutator_matrix(ds.left_vectors), expected, atol=1e-8)


def test_closed_form_agrees_with_numeric_left_vectors():
    import scipy.linalg
    es, ds = spectrum(build_chain(8), 1.7)
    a = dynamical_matrix(es, 1.7)
    w, vl = scipy.linalg.eig(a, left=True, right=False)
    for k, lam in enumerate(ds.lambdas):
        col = vl[:, np.argmin(np.abs(w - lam))].conj()  # row left-eigenvector
        row = ds.left_vectors[k]
        c = np.vdot(col, row) / np.vdot(col, col)
        np.testing.assert_allclose(c * col, row, atol=1e-9)


def test_pole_collision():
    es = diagonalize_coupled(build_chain(3))
    with pytest.raises(NumericError, match="lambda_0"):
        closed_form_left_eigenvectors(es.energies.astype(complex), es, 1.0)


# --- self-consistency ------------------------------------------------------------

def test_self_consistency_single_site():
    es = diagonalize_coupled(LatticeModel(1, np.array([[0.4]]), 0))
    assert self_consistency(es, 3.0, 0.4 - 1.5j) == pytest.approx(1j, abs=1e-15)


def test_self_consistency_dimer_root():
    es = diagonalize_coupled(build_chain(2))
    lam = -0.25j * 1.2 + np.sqrt(1 - 1.2**2 / 16)
    assert abs(self_consistency(es, 1.2, lam) - 1j) < 1e-12


def test_newton_polishes_perturbed_roots():
    es, ds = spectrum(build_chain(12), 2.0)
    lam = refine_root(es, 2.0, ds.lambdas * (1 + 1e-7))
    np.testing.assert_allclose(lam, ds.lambdas, atol=1e-10)
    assert np.all(np.abs(self_consistency(es, 2.0, lam) - 1j) < 1e-10)


def test_newton_nonconvergence_reports_iterate():
    es = diagonalize_coupled(build_chain(6))
    with pytest.raises(NumericError, match="last iterate"):
        refine_root(es, 1.0, np.array([40.0 + 0j]), max_iter=2)


# --- remainder and approximate spectrum ------------------------------------------

def test_remainder_band_centre_vanishes():
    es = diagonalize_coupled(build_chain(25))
    mid = np.argmin(np.abs(es.energies))
    assert abs(es.energies[mid]) < 1e-12
    assert remainder_r(es, mid) == pytest.approx(0.0, abs=1e-13)


def _remainder_loop(es, i):
    # straight transcription as an oracle for the vectorised version
    total = 0.0
    for j in range(es.n_modes):
        if j != i:
            total += es.spacing[i] / (es.energies[i] - es.energies[j]) * es.drain_weight[j]
    return total / np.pi


@pytest.mark.parametrize("model", ci_models()[1:], ids=lambda m: m.label)
def test_remainder_bounds_and_oracle(model):
    es = diagonalize_coupled(model)
    r = remainder_r(es)
    for i in range(es.n_modes):
        assert r[i] == pytest.approx(_remainder_loop(es, i), abs=1e-14)
    # r_i is a weighted average (weights sum to <= 1) of Delta_i / (eps_i - eps_j) / pi
    gap = np.array([np.min(np.abs(np.delete(es.energies, i) - es.energies[i]))
                    for i in range(es.n_modes)])
    assert np.all(np.abs(r) <= es.spacing / gap / np.pi + 1e-12)


def test_remainder_one_over_pi_bound(reference_lattices):
    # holds whenever the local spacing does not exceed the nearest gap, as on these lattices
    models = list(reference_lattices.values()) + [build_ring_flux(n, 1.0, np.pi / 2) for n in (10, 100)]
    for model in models:
        r = remainder_r(diagonalize_coupled(model))
        assert np.all(np.abs(r) <= 1 / np.pi)


def test_remainder_can_exceed_one_over_pi_for_uneven_gaps():
    from lattice_drain import build_hofstadter
    r = remainder_r(diagonalize_coupled(build_hofstadter(3, 4, 1.0, np.pi / 2)))
    assert np.abs(r).max() > 1 / np.pi


def test_ring_remainder_shrinks_with_size():
    peaks = []
    for n in (50, 100, 200, 400):
        r = remainder_r(diagonalize_coupled(build_ring_flux(n, 1.0, np.pi / 2)))
        assert np.all(np.abs(r) <= 1 / np.pi)
        peaks.append(np.abs(r).max())
    assert all(b < a for a, b in zip(peaks, peaks[1:]))
    # O(1/N): N * max|r| stays bounded
    assert np.ptp(np.array(peaks) * np.array([50, 100, 200, 400])) < 0.05


def _manual_es(delta, w):
    e = np.array([0.0])
    return EigenSystem(energies=e, wavefunctions=np.ones((1, 1)), drain_amp=np.sqrt([w]),
                       drain_phase=e, drain_weight=np.array([w]), spacing=np.array([delta]),
                       drain=0, hop_scale=1.0, all_energies=e, all_wavefunctions=np.ones((1, 1)),
                       retained=np.array([0]), n_dropped=0)


def test_approx_formula_point():
    # Delta/pi = 0.5, Gbar/2 = 0.1, r = 0 -> 0.5 ln(0.6/0.4)
    es = _manual_es(0.5 * np.pi, 0.2)
    ap = approx_dissipation_spectrum(es, np.array([0.0]), 1.0)
    assert ap.rates[0] == pytest.approx(0.5 * np.log(1.5), rel=1e-14)
    assert ap.rates[0] == pytest.approx(0.2027, abs=1e-4)


def test_approx_zero_gamma():
    es = diagonalize_coupled(build_chain(9))
    ap = approx_dissipation_spectrum(es, remainder_r(es), 0.0)
    np.testing.assert_array_equal(ap.rates, 0)


def test_approx_pole_sentinel():
    es = _manual_es(np.pi, 0.5)  # Delta/pi = 1, Gbar/2 = 1 at gamma = 4
    ap = approx_dissipation_spectrum(es, np.array([0.0]), 4.0)
    assert np.isinf(ap.rates[0]) and ap.pole[0]
    info = classify_regime(es, np.array([0.0]), 4.0, 0)
    assert info.label == "impedance" and np.isinf(info.limit)


@settings(max_examples=40, deadline=None)
@given(delta=st.floats(0.01, 2.0), w=st.floats(1e-3, 1.0), r=st.floats(-0.3, 0.3),
       gamma=st.floats(0.0, 100.0))
def test_approx_rates_non_negative(delta, w, r, gamma):
    ap = approx_dissipation_spectrum(_manual_es(delta, w), np.array([r]), gamma)
    assert ap.rates[0] >= 0


@settings(max_examples=40, deadline=None)
@given(delta=st.floats(0.05, 2.0), w=st.floats(0.01, 1.0), r=st.floats(-0.3, 0.3))
def test_regime_limits(delta, w, r):
    es = _manual_es(delta, w)
    a = delta / np.pi
    g_small = 1e-3 * a / w
    exact = approx_dissipation_spectrum(es, np.array([r]), g_small).rates[0]
    info = classify_regime(es, np.array([r]), g_small, 0)
    assert info.label == "perturbative"
    assert info.limit == pytest.approx(exact, rel=1e-4)
    assert info.limit == pytest.approx(w * g_small, rel=1e-4)
    g_big = 1e4 * a / w
    exact = approx_dissipation_spectrum(es, np.array([r]), g_big).rates[0]
    info = classify_regime(es, np.array([r]), g_big, 0)
    assert info.label == "zeno"
    assert info.limit == pytest.approx(exact, rel=1e-3)
    # impedance point Gbar/2 = Delta/pi
    g_mid = 2 * a / w
    if abs(r) > 1e-6:
        exact = approx_dissipation_spectrum(es, np.array([r]), g_mid).rates[0]
        info = classify_regime(es, np.array([r]), g_mid, 0)
        assert info.label == "impedance"
        assert info.limit == pytest.approx(exact, rel=1e-10)


@settings(max_examples=40, deadline=None)
@given(w=st.floats(0.05, 1.0), frac=st.floats(0.0, 3.0))
def test_enhancement_criterion(w, frac):
    # gamma_i / Gbar_i rises at small coupling iff |r| < w / sqrt(3)
    r = frac * w / np.sqrt(3)
    if abs(frac - 1) < 0.05:
        return
    es = _manual_es(np.pi, w)
    info = classify_regime(es, np.array([r]), 1e-3, 0)
    g = np.array([1e-3, 2e-2]) / w
    ratio = [approx_dissipation_spectrum(es, np.array([r]), x).rates[0] / (w * x) for x in g]
    assert info.enhanced == (frac < 1)
    assert (ratio[1] > ratio[0]) == (frac < 1)


# --- ring analytics ---------------------------------------------------------------

def test_ring_analytics_kc():
    ra = ring_analytics(100, 1.0, 1.0)
    assert ra.k_c == pytest.approx(np.arccos(0.25), abs=1e-12)
    assert ra.k_c == pytest.approx(1.3181, abs=1e-4)
    assert ra.gamma_0 is None


def test_ring_analytics_overdamped():
    ra = ring_analytics(100, 1.0, 5.0)
    assert ra.k_c is None
    assert ra.gamma_0 == pytest.approx(3.0)
    c = np.cos(np.pi * ra.mode_index / 100)
    np.testing.assert_allclose(ra.rates, 2 / 100 * c * np.log((5 + 4 * c) / (5 - 4 * c)))


def test_ring_analytics_boundary():
    under = ring_analytics(100, 1.0, 4.0)
    assert under.k_c == 0.0
    over = ring_analytics(100, 1.0, 4.0 + 1e-12)
    np.testing.assert_allclose(under.rates, over.rates, rtol=1e-9)


def test_ring_analytics_matches_ring_spectrum():
    n = 100
    ra = ring_analytics(n, 1.0, 1.0)
    es = diagonalize_coupled(build_ring_flux(n, 1.0, np.pi / 2))
    np.testing.assert_allclose(es.energies, ra.energies, atol=1e-12)


def test_ring_convergence_with_size():
    errs = []
    for n in (100, 200, 400):
        es, ds = spectrum(build_ring_flux(n, 1.0, np.pi / 2), 1.0)
        ra = ring_analytics(n, 1.0, 1.0)
        k = np.pi * ra.mode_index / n
        sel = np.abs(np.abs(k) - ra.k_c) > 0.2
        errs.append(np.max(np.abs(ds.rates - ra.rates)[sel] / ra.rates[sel]))
    assert errs[0] > errs[1] > errs[2]


# --- regime behaviour of exact rates ------------------------------------------------

@pytest.mark.parametrize("model", [build_chain(25), build_ring_flux(25, 1.0, np.pi / 2)],
                         ids=lambda m: m.label)
def test_zeno_monotonicity(model):
    es = diagonalize_coupled(model)
    g = 1.0
    while np.any(es.drain_weight * g <= 3 * es.spacing):
        g *= 2
    a = exact_dynamical_spectrum(dynamical_matrix(es, g), es, g)
    b = exact_dynamical_spectrum(dynamical_matrix(es, 2 * g), es, 2 * g)
    keep = ~a.macroscopic & ~b.macroscopic
    assert a.macroscopic.sum() == 1
    assert np.all(b.rates[keep] < a.rates[keep])


def test_reference_lattice_approximation_quality(reference_lattices):
    for model in reference_lattices.values():
        es = diagonalize_coupled(model)
        r = remainder_r(es)
        for g in (0.5, 2.0, 4.0):
            ds = exact_dynamical_spectrum(dynamical_matrix(es, g), es, g)
            ap = approx_dissipation_spectrum(es, r, g)
            assert np.median(np.abs(ap.rates - ds.rates) / ds.rates) < 0.15
