# tests/test_dynamics.py
import allure
import numpy as np
import pytest

from spinbus.dynamics import KrylovSector, SpectralSector, energy, evolve, prepare_propagator
from spinbus.errors import DomainError
from spinbus.hamiltonian import HamiltonianParams, build_hamiltonian
from spinbus.system import RegisterState, SectorState, SystemLayout, build_layout, encode_product_state, site_occupations
from tests.dense_oracle import dense_evolve, dense_hamiltonian


@allure.feature("Unitary dynamics")
@pytest.mark.dynamics
class TestTwoSiteRabi:

    @pytest.fixture(autouse=True)
    def setup(self):
        self.layout = SystemLayout(2, 0)
        self.params = HamiltonianParams(J=1.0, J0=0.0, h0=0.0, h=[])
        self.state = SectorState(self.layout, {1: np.array([1.0, 0.0])})
        yield

    @pytest.mark.parametrize("method", ["spectral", "krylov"])
    def test_occupation_follows_rabi_formula(self, method):
        prop = prepare_propagator(build_hamiltonian(self.layout, self.params, [1]), method)
        for t in (0.1, 0.4, 1.3, 7.25):
            occ = site_occupations(prop.evolve(self.state, t))
            assert occ[1] == pytest.approx(np.sin(2 * t) ** 2, abs=1e-10)


@allure.feature("Unitary dynamics")
@pytest.mark.dynamics
class TestPropagator:

    @pytest.fixture(autouse=True)
    def setup(self, rng):
        self.layout = build_layout(3, 2)
        self.params = HamiltonianParams.s1(0.3, [0.2, -0.4])
        self.ops = build_hamiltonian(self.layout, self.params, range(5))
        self.state = encode_product_state(self.layout, RegisterState.random(2, rng))
        self.spectral = prepare_propagator(self.ops, "spectral")
        self.krylov = prepare_propagator(self.ops, "krylov")
        yield

    def test_auto_picks_by_dimension(self):
        prop = prepare_propagator(self.ops, "auto", spectral_max_dim=20)
        assert isinstance(prop.sector(1), SpectralSector)
        assert isinstance(prop.sector(3), KrylovSector)

    def test_unknown_method(self):
        with pytest.raises(DomainError):
            prepare_propagator(self.ops, "magic")

    def test_norm_preserved(self):
        for t in np.linspace(0.0, 40.0, 9):
            assert abs(evolve(self.spectral, self.state, t).norm() - 1.0) < 1e-10

    def test_composition(self):
        once = self.spectral.evolve(self.state, 5.5)
        twice = self.spectral.evolve(self.spectral.evolve(self.state, 2.0), 3.5)
        assert abs(once.vdot(twice)) == pytest.approx(1.0, abs=1e-9)
        assert np.allclose(once.to_dense(), twice.to_dense(), atol=1e-9)

    def test_spectral_matches_krylov(self):
        a = self.spectral.evolve(self.state, 12.0).to_dense()
        b = self.krylov.evolve(self.state, 12.0).to_dense()
        assert np.allclose(a, b, atol=1e-9)

    @allure.story("Evolution against the dense oracle")
    def test_matches_dense_evolution(self):
        H = dense_hamiltonian(self.layout, self.params)
        expected = dense_evolve(H, self.state.to_dense(), 3.7)
        assert np.allclose(self.spectral.evolve(self.state, 3.7).to_dense(), expected, atol=1e-10)

    def test_energy_conserved(self):
        e0 = energy(self.ops, self.state)
        assert energy(self.ops, self.spectral.evolve(self.state, 9.0)) == pytest.approx(e0, abs=1e-10)

    def test_negative_time(self):
        with pytest.raises(DomainError):
            self.spectral.evolve(self.state, -1.0)

    def test_missing_sector(self):
        prop = prepare_propagator(build_hamiltonian(self.layout, self.params, [0, 1]))
        with pytest.raises(DomainError):
            prop.evolve(self.state, 1.0)

    @pytest.mark.parametrize("method", ["spectral", "krylov"])
    def test_trajectory_matches_pointwise(self, method):
        prop = self.spectral if method == "spectral" else self.krylov
        times = np.linspace(0.0, 6.0, 11)
        other = encode_product_state(self.layout, RegisterState.from_labels(["1", "0"], ["+", "-"]))
        rows = []
        for t_chunk, amps in prop.trajectory([self.state, other], times, chunk=4):
            assert all(v.shape[1:] == (2, len(t_chunk)) for v in amps.values())
            rows.extend((t, {k: v[:, :, i] for k, v in amps.items()}) for i, t in enumerate(t_chunk))
        assert [t for t, _ in rows] == list(times)
        for t, amps in rows:
            for col, s in enumerate((self.state, other)):
                expected = prop.evolve(s, t)
                for k, v in expected.amplitudes.items():
                    assert np.allclose(amps[k][:, col], v, atol=1e-9)

    def test_trajectory_needs_sorted_times(self):
        with pytest.raises(DomainError):
            next(self.spectral.trajectory([self.state], [1.0, 0.5]))
