import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings, strategies as st

from oracles import dense_gibbs, dense_kernel_operator, dense_pressure
from thermogame.fockspace import (
    FockBasis,
    FockSpaceError,
    annihilation,
    build_internal_energy,
    creation,
    eigenvalues,
    entropy_density,
    gibbs_state,
    identity,
    kernel_operator,
    lro_estimator,
    parity_operator,
    passivity_check,
    pbc_consistency,
    pressure_ed,
    random_density_matrix,
    von_neumann_entropy,
    write_spectrum_csv,
)
from thermogame.model import (
    Channel,
    InteractionKernel,
    Lattice,
    LongRangeModel,
    hopping_kernel,
    number_kernel,
    zero_kernel,
)


def test_car_relations_are_exact():
    basis = FockBasis.from_lattice(Lattice(1, ("up", "down"), 1))
    n = basis.n_modes
    one = identity(basis).matrix
    for i in range(n):
        ai = annihilation(basis, i).matrix
        for j in range(n):
            aj = annihilation(basis, j).matrix
            adj = creation(basis, j).matrix
            anti = ai @ adj + adj @ ai
            expected = one if i == j else sp.csr_matrix(one.shape)
            assert abs(anti - expected).max() == 0
            assert abs(ai @ aj + aj @ ai).max() == 0


def test_single_site_chemical_potential():
    lat = Lattice(1, ("s",), 0)
    mu = 0.5
    model = LongRangeModel(lat, number_kernel(("s",), coef=-mu), (), 1.0)
    u = build_internal_energy(model, lat).toarray()
    assert np.allclose(np.sort(np.diag(u).real), [-mu, 0.0])
    assert np.isclose(pressure_ed(build_internal_energy(model, lat), 1.0, 1), np.log(1 + np.exp(0.5)))
    assert np.isclose(np.log(1 + np.exp(0.5)), 0.974077, atol=1e-6)


def test_repulsive_density_channel_on_one_site():
    # U = -mu n + n^2 = (1 - mu) n since n^2 = n
    lat = Lattice(1, ("s",), 0)
    mu = 0.3
    model = LongRangeModel(lat, number_kernel(("s",), coef=-mu),
                           (Channel.from_operator(number_kernel(("s",)), 1, 1.0),), 1.0)
    u = build_internal_energy(model, lat).toarray()
    assert np.allclose(np.sort(np.diag(u).real), [0.0, 1 - mu])
    assert np.allclose(u - np.diag(np.diag(u)), 0)


def test_torus_wrap_of_hopping_on_three_sites():
    # on the 3-site ring the displacements +1 and -2 coincide, so a range-2 hop doubles the bond
    lat = Lattice(1, ("s",), 1)
    nn = kernel_operator(hopping_kernel({(1,): 1.0, (-1,): 1.0}, ("s",)), lat).toarray()
    nnn = kernel_operator(hopping_kernel({(2,): 1.0, (-2,): 1.0}, ("s",)), lat).toarray()
    both = kernel_operator(hopping_kernel({(1,): 1.0, (-1,): 1.0, (2,): 1.0, (-2,): 1.0}, ("s",)), lat).toarray()
    assert np.allclose(nn, nnn)
    assert np.allclose(both, 2 * nn)


def test_open_boundary_drops_and_counts_terms():
    lat = Lattice(1, ("s",), 1)
    hop = hopping_kernel({(1,): -1.0, (-1,): -1.0}, ("s",))
    op = kernel_operator(hop, lat, pbc=False)
    assert op.dropped_terms == 2
    # open chain of three sites: single-particle levels -sqrt(2), 0, sqrt(2)
    levels = eigenvalues(op)
    assert np.isclose(levels.min(), -np.sqrt(2))


def _random_quadratic_terms(rng, spins):
    terms = []
    for r in (0, 1):
        for s in spins:
            for t in spins:
                c = rng.normal() + 1j * rng.normal()
                terms.append(((("+", s, (0,)), ("-", t, (r,))), c))
                terms.append(((("+", t, (r,)), ("-", s, (0,))), np.conj(c)))
    g = rng.normal() + 1j * rng.normal()
    terms.append(((("-", spins[0], (0,)), ("-", spins[-1], (1,))), g))
    terms.append(((("+", spins[-1], (1,)), ("+", spins[0], (0,))), np.conj(g)))
    return terms


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_kernel_operator_matches_jordan_wigner_oracle(seed):
    rng = np.random.default_rng(seed)
    spins = ("up", "down")
    terms = _random_quadratic_terms(rng, spins)
    terms.append(((("+", "up", (0,)), ("+", "down", (1,)), ("-", "down", (1,)), ("-", "up", (0,))), 0.7))
    kernel = InteractionKernel(terms)
    lat = Lattice(1, spins, 1)
    ours = kernel_operator(kernel, lat).toarray()
    ref = dense_kernel_operator(terms, 1, spins, 1)
    assert np.allclose(np.linalg.eigvalsh(ours), np.linalg.eigvalsh(ref), atol=1e-10)
    for beta in (0.5, 2.0):
        assert np.isclose(pressure_ed(kernel_operator(kernel, lat), beta, 3), dense_pressure(ref, beta, 3),
                          atol=1e-12)


def test_internal_energy_with_pairing_channel_matches_oracle():
    spins = ("up", "down")
    lat = Lattice(1, spins, 1)
    pair_terms = [((("-", "down", (0,)), ("-", "up", (0,))), 1.0)]
    pair = InteractionKernel(pair_terms)
    hop_terms = [((("+", s, (0,)), ("-", s, (r,))), -1.0) for s in spins for r in (1, -1)]
    model = LongRangeModel(lat, InteractionKernel(hop_terms), (Channel.from_operator(pair, -1, 0.8),), 3.0)
    ours = build_internal_energy(model, lat).toarray()
    b = dense_kernel_operator(pair_terms, 1, spins, 1)
    ref = dense_kernel_operator(hop_terms, 1, spins, 1) - 0.8 / 3 * b.conj().T @ b
    assert np.allclose(np.linalg.eigvalsh(ours), np.linalg.eigvalsh(ref), atol=1e-10)


def test_pressure_of_zero_energy_and_shift():
    lat = Lattice(1, ("up", "down"), 1)
    model = LongRangeModel(lat, zero_kernel(), (), 1.0)
    u = build_internal_energy(model, lat)
    assert np.isclose(pressure_ed(u, 2.0, 3), 6 * np.log(2) / (2.0 * 3))
    eps = 0.37
    shifted = u + identity(u.basis) * eps
    assert np.isclose(pressure_ed(shifted, 2.0, 3), pressure_ed(u, 2.0, 3) - eps / 3, atol=1e-14)


def test_pressure_is_overflow_safe():
    lat = Lattice(1, ("s",), 0)
    model = LongRangeModel(lat, number_kernel(("s",), coef=-1e4), (), 50.0)
    assert np.isclose(pressure_ed(build_internal_energy(model, lat), 50.0, 1), 1e4)


def test_non_hermitian_energy_is_rejected():
    lat = Lattice(1, ("s",), 0)
    op = kernel_operator(InteractionKernel([((("-", "s", (0,)), ("-", "t", (0,))), 1.0)]),
                         Lattice(1, ("s", "t"), 0))
    with pytest.raises(FockSpaceError):
        pressure_ed(op, 1.0, 1)
    with pytest.raises(FockSpaceError):
        gibbs_state(op, 1.0)


def test_gibbs_state_matches_matrix_exponential():
    spins = ("up", "down")
    lat = Lattice(1, spins, 1)
    rng = np.random.default_rng(5)
    terms = _random_quadratic_terms(rng, spins)
    kernel = InteractionKernel(terms)
    energy = kernel_operator(kernel, lat)
    state = gibbs_state(energy, 1.3)
    rho = state.density_matrix()
    assert np.isclose(np.trace(rho).real, 1.0, atol=1e-12)
    assert np.linalg.eigvalsh(rho).min() >= -1e-12
    ref = dense_gibbs(energy.toarray(), 1.3)
    assert np.allclose(rho, ref, atol=1e-10)
    a = annihilation(energy.basis, 2)
    assert np.isclose(state.expectation(a.adjoint() @ a), np.trace(ref @ (a.adjoint() @ a).toarray()))


def test_gibbs_limits():
    lat = Lattice(1, ("s",), 0)
    model = LongRangeModel(lat, number_kernel(("s",), coef=-1.0), (), 1.0)
    u = build_internal_energy(model, lat)
    n = creation(u.basis, 0) @ annihilation(u.basis, 0)
    assert np.isclose(gibbs_state(u, 1e-8).expectation(n), 0.5, atol=1e-6)
    assert np.isclose(gibbs_state(u, 60.0).expectation(n), 1.0, atol=1e-12)


def test_ring_hopping_energy_matches_fermi_factors():
    lat = Lattice(1, ("s",), 1)
    hop = hopping_kernel({(1,): -1.0, (-1,): -1.0, (0,): 0.2}, ("s",))
    u = kernel_operator(hop, lat)
    beta = 1.7
    energy = gibbs_state(u, beta).expectation(u).real
    ks = 2 * np.pi * np.arange(3) / 3
    eps = -2 * np.cos(ks) + 0.2
    assert np.isclose(energy, np.sum(eps / (1 + np.exp(beta * eps))))


def test_gauge_invariant_state_kills_pairing():
    lat = Lattice(1, ("up", "down"), 1)
    hop = hopping_kernel({(1,): -1.0, (-1,): -1.0}, ("up", "down"))
    state = gibbs_state(kernel_operator(hop, lat), 2.0)
    pair = kernel_operator(InteractionKernel([((("-", "down", (0,)), ("-", "up", (0,))), 1.0)]), lat)
    assert abs(state.expectation(pair)) < 1e-12


def test_entropy_values():
    lat = Lattice(1, ("up", "down"), 1)
    model = LongRangeModel(lat, zero_kernel(), (), 1.0)
    state = gibbs_state(build_internal_energy(model, lat), 1.0)
    assert np.isclose(entropy_density(state, 3), 6 * np.log(2) / 3)
    pure = np.zeros((4, 4))
    pure[1, 1] = 1.0
    assert von_neumann_entropy(pure) == 0.0
    with pytest.raises(FockSpaceError):
        von_neumann_entropy(np.diag([0.7, 0.7]))


def test_free_energy_identity_at_gibbs_state():
    lat = Lattice(1, ("s",), 0)
    model = LongRangeModel(lat, number_kernel(("s",), coef=-0.5), (), 1.0)
    u = build_internal_energy(model, lat)
    state = gibbs_state(u, 1.0)
    f = state.expectation(u).real - entropy_density(state, 1) / 1.0
    assert np.isclose(f, -pressure_ed(u, 1.0, 1), atol=1e-12)


def test_passivity_on_random_states():
    rng = np.random.default_rng(3)
    lat = Lattice(1, ("s",), 0)
    model = LongRangeModel(Lattice(1, ("up", "down"), 0), number_kernel(("up", "down"), coef=-0.4), (), 2.0)
    u = build_internal_energy(model)
    trials = [random_density_matrix(u.dim, rng) for _ in range(100)]
    rep = passivity_check(u, 2.0, trials, 1)
    assert rep.passed
    assert abs(rep.gibbs_margin) < 1e-10
    assert rep.worst_margin > 1e-6
    ground = np.zeros((u.dim, u.dim))
    idx = int(np.argmin(np.diag(u.toarray()).real))
    ground[idx, idx] = 1.0
    assert passivity_check(u, 2.0, [ground], 1).margins[0] >= 0


def test_random_density_matrix_is_a_state():
    rho = random_density_matrix(8, np.random.default_rng(0), rank=3)
    assert np.isclose(np.trace(rho).real, 1.0)
    assert np.linalg.eigvalsh(rho).min() > -1e-14
    assert np.linalg.matrix_rank(rho, tol=1e-12) == 3


def _pair_operators(basis, sites):
    return [annihilation(basis, 2 * x + 1) @ annihilation(basis, 2 * x) for x in range(sites)]


def test_lro_estimator_values():
    lat = Lattice(1, ("up", "down"), 1)
    pair_kernel = InteractionKernel([((("-", "down", (0,)), ("-", "up", (0,))), 1.0)])
    one = InteractionKernel([((), 1.0)])
    # product Gibbs state: only the diagonal x = y terms survive
    onsite = LongRangeModel(lat, number_kernel(("up", "down"), coef=-0.2), (), 2.0)
    state = gibbs_state(build_internal_energy(onsite, lat), 2.0)
    assert np.isclose(lro_estimator(state, one, lat), 1.0)
    n_site = np.exp(0.4) / (1 + np.exp(0.4))
    assert np.isclose(lro_estimator(state, pair_kernel, lat), 3 * n_site**2 / 9)
    # hopping: the full double sum, built operator by operator
    hop = LongRangeModel(lat, hopping_kernel({(1,): -1.0, (-1,): -1.0}, ("up", "down")), (), 2.0)
    state = gibbs_state(build_internal_energy(hop, lat), 2.0)
    b = _pair_operators(state.energy.basis, 3)
    direct = sum(state.expectation(bx.adjoint() @ by) for bx in b for by in b).real / 9
    assert np.isclose(lro_estimator(state, pair_kernel, lat), direct)


def test_lro_estimator_accepts_site_families():
    lat = Lattice(1, ("up", "down"), 1)
    hop = LongRangeModel(lat, hopping_kernel({(1,): -1.0, (-1,): -1.0}, ("up", "down")), (), 1.0)
    state = gibbs_state(build_internal_energy(hop, lat), 1.0)
    basis = state.energy.basis
    b = _pair_operators(basis, 3)
    family = lambda x: b[lat.site_index(x)]
    pair_kernel = InteractionKernel([((("-", "down", (0,)), ("-", "up", (0,))), 1.0)])
    assert np.isclose(lro_estimator(state, family, lat), lro_estimator(state, pair_kernel, lat))


def test_spectrum_csv(tmp_path):
    lat = Lattice(1, ("s",), 1)
    u = kernel_operator(hopping_kernel({(1,): -1.0, (-1,): -1.0}, ("s",)), lat)
    path = tmp_path / "spec.csv"
    write_spectrum_csv(u, path)
    lines = path.read_text().splitlines()
    assert lines[0] == "# thermogame-csv schema=1 table=spectrum"
    assert lines[1] == "eigenvalue"
    vals = np.array([float(v) for v in lines[2:]])
    assert len(vals) == 8 and np.all(np.diff(vals) >= 0)


def test_pbc_consistency_for_zero_range_and_hopping():
    lat = Lattice(1, ("s",), 1)
    onsite = LongRangeModel(lat, number_kernel(("s",), coef=-0.3), (), 1.0)
    rep = pbc_consistency(onsite, [1, 2, 3])
    assert rep.differences == [0.0, 0.0, 0.0]
    hop = LongRangeModel(lat, hopping_kernel({(1,): -1.0, (-1,): -1.0}, ("s",)), (), 1.0)
    rep = pbc_consistency(hop, [1, 2, 3, 4])
    assert rep.monotone
    # boundary effect of order 1 / (2l + 1)
    assert np.isclose(rep.exponent, -1.0, atol=0.05)
    far = LongRangeModel(lat, hopping_kernel({(3,): -1.0, (-3,): -1.0}, ("s",)), (), 1.0)
    rep = pbc_consistency(far, [1, 2, 3])
    assert rep.asserted == [False, False, True]


def test_parity_commutes_with_even_energy():
    lat = Lattice(1, ("up", "down"), 1)
    pair = InteractionKernel([((("-", "down", (0,)), ("-", "up", (1,))), 1.0),
                              ((("+", "up", (1,)), ("+", "down", (0,))), 1.0)])
    u = kernel_operator(pair, lat).matrix
    p = parity_operator(FockBasis.from_lattice(lat)).matrix
    assert abs(u @ p - p @ u).max() == 0


@settings(max_examples=20, deadline=None)
@given(st.floats(-1.0, 1.0), st.floats(-1.0, 1.0), st.floats(0.2, 3.0), st.floats(-1, 1))
def test_pressure_is_convex_along_lines(t, mu, beta, s):
    lat = Lattice(1, ("s",), 1)
    a = kernel_operator(hopping_kernel({(1,): t, (-1,): t, (0,): -mu}, ("s",)), lat)
    b = kernel_operator(InteractionKernel([((("+", "s", (0,)), ("+", "s", (1,)), ("-", "s", (1,)), ("-", "s", (0,))), 1.0)]), lat)
    h = 1e-3
    p = [pressure_ed(a + b * (s + k * h), beta, 3) for k in (-1, 0, 1)]
    assert p[0] + p[2] - 2 * p[1] >= -1e-12
