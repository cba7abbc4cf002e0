# tests/test_gates.py
import allure
import numpy as np
import pytest

from spinbus.dynamics import prepare_propagator
from spinbus.errors import CalibrationError, DomainError
from spinbus.gates import (
    ChannelOptions,
    GateTarget,
    PairChannel,
    apply_gate,
    average_gate_fidelity,
    calibrate_phases,
    channel_inputs,
    concurrence,
    fidelity_from_blocks,
    global_phases,
    haar_average_fidelity_mc,
    ideal_phases,
    mean_fidelity,
    reconstruct_pair_channel,
    spectator_states,
    transfer_amplitudes,
)
from spinbus.hamiltonian import HamiltonianParams, build_hamiltonian
from spinbus.optimize import evaluate_point, grid
from spinbus.system import RegisterState, build_layout
from tests.dense_oracle import dense_channel


def _propagator(layout, params, spectators="plus"):
    backgrounds = spectator_states(layout.pair_count, spectators)
    sectors = sorted({k for nu in range(1, layout.pair_count + 1)
                      for s in channel_inputs(layout, nu, backgrounds) for k in s.amplitudes})
    return prepare_propagator(build_hamiltonian(layout, params, sectors), "spectral")


def _random_channel(rng, env_dim=4):
    """Stinespring dilation of a random isometry 4 -> 4 * env_dim."""
    m = rng.normal(size=(4 * env_dim, 4)) + 1j * rng.normal(size=(4 * env_dim, 4))
    V, _ = np.linalg.qr(m)
    V = V.reshape(4, env_dim, 4)  # [q, e, j]
    blocks = np.einsum("qej,pek->jkqp", V, V.conj())
    return PairChannel(blocks, 1, 0.0, "plus")


def _unitary_channel(G):
    """rho -> G rho G^dagger as channel blocks."""
    return PairChannel(np.einsum("qj,pk->jkqp", G, np.conj(G)), 1, 0.0, "plus")


@allure.feature("Gate targets")
@pytest.mark.gates
class TestGateTarget:

    def test_ideal_phases_odd_chain(self):
        assert np.allclose(ideal_phases(5).phases, (0.0, np.pi, np.pi, np.pi))

    def test_ideal_phases_even_chain(self):
        assert np.allclose(ideal_phases(4).phases, (0.0, np.pi / 2, np.pi / 2, 0.0))

    @pytest.mark.parametrize("N", [2, 3, 4, 5, 10, 21])
    def test_ideal_gate_entangles(self, N):
        p00, p01, p10, p11 = ideal_phases(N).phases
        assert np.angle(np.exp(1j * (p00 + p11 - p01 - p10 + np.pi))) == pytest.approx(0.0, abs=1e-12)

    def test_entangling_phase_wrapped(self):
        assert GateTarget((0.0, np.pi, np.pi, np.pi)).entangling_phase == pytest.approx(np.pi)
        assert GateTarget((0.0, 0.25, 0.25, 1.0)).entangling_phase == pytest.approx(0.5)

    def test_needs_four_phases(self):
        with pytest.raises(DomainError):
            GateTarget((0.0, 1.0))

    def test_unitary_swaps(self):
        G = GateTarget((0.1, 0.2, 0.3, 0.4)).unitary
        assert np.allclose(G.conj().T @ G, np.eye(4))
        assert G[2, 1] == pytest.approx(np.exp(0.2j))
        assert G[1, 2] == pytest.approx(np.exp(0.3j))

    def test_apply_gate(self):
        rho = np.zeros((4, 4), dtype=complex)
        rho[1, 1] = 1.0
        out = apply_gate(GateTarget((0.0, 0.7, 0.7, 0.0)), rho)
        assert out[2, 2] == pytest.approx(1.0)

    def test_concurrence(self):
        bell = np.array([1, 0, 0, 1]) / np.sqrt(2)
        assert concurrence(np.outer(bell, bell.conj())) == pytest.approx(1.0, abs=1e-9)
        prod = np.kron([1, 0], [2 ** -0.5, 2 ** -0.5])
        assert concurrence(np.outer(prod, prod)) == pytest.approx(0.0, abs=1e-9)

    def test_channel_options_validated(self):
        with pytest.raises(DomainError):
            ChannelOptions(spectators="random")
        with pytest.raises(DomainError):
            ChannelOptions(target="cz")


@allure.feature("Channel reconstruction")
@pytest.mark.gates
class TestChannelReconstruction:

    @pytest.fixture(autouse=True)
    def setup(self):
        self.layout = build_layout(2, 2)
        self.params = HamiltonianParams(J=1.0, J0=0.6, h0=0.3, h=[0.25, -0.4])
        self.prop = _propagator(self.layout, self.params)
        yield

    @allure.story("Channel against the dense oracle")
    @pytest.mark.parametrize("pair", [1, 2])
    @pytest.mark.parametrize("policy, label", [("plus", "+"), ("zero", "0")])
    def test_matches_dense_oracle(self, pair, policy, label):
        channel = reconstruct_pair_channel(self.layout, self.prop, pair, 2.3, spectators=policy)
        background = RegisterState.from_labels([label] * 2, [label] * 2)
        expected = dense_channel(self.layout, self.params, pair, 2.3, background)
        assert np.max(np.abs(channel.blocks - expected)) < 1e-10

    @pytest.mark.parametrize("t", [0.0, 1.1, 17.5])
    def test_cptp(self, t):
        report = reconstruct_pair_channel(self.layout, self.prop, 1, t).check_cptp()
        assert report["ok"], report

    def test_haar_mean_channel_is_cptp(self):
        channel = reconstruct_pair_channel(self.layout, self.prop, 2, 4.0, spectators="haar-mean", samples=3, seed=7)
        assert channel.check_cptp()["ok"]

    def test_identity_at_time_zero(self):
        channel = reconstruct_pair_channel(self.layout, self.prop, 1, 0.0)
        rho = np.full((4, 4), 0.25)
        assert np.allclose(channel.apply(rho), rho)
        # identity vs phase-free swap: F = 1/5 + |Tr G|^2 / 20 = 0.4
        assert average_gate_fidelity(channel, GateTarget((0, 0, 0, 0))) == pytest.approx(0.4)

    def test_calibration_fails_without_transfer(self):
        channel = reconstruct_pair_channel(self.layout, self.prop, 1, 0.0)
        with pytest.raises(CalibrationError):
            calibrate_phases(channel)

    def test_negative_time(self):
        with pytest.raises(DomainError):
            reconstruct_pair_channel(self.layout, self.prop, 1, -0.5)

    def test_propagator_must_fit_layout(self):
        other = build_layout(3, 2)
        with pytest.raises(DomainError):
            reconstruct_pair_channel(other, self.prop, 1, 1.0)

    def test_closed_form_matches_general_formula(self):
        channel = reconstruct_pair_channel(self.layout, self.prop, 1, 6.0)
        phases = (0.0, 0.9, 0.9, 2.1)
        general = average_gate_fidelity(channel, GateTarget(phases))
        assert fidelity_from_blocks(channel.blocks, phases) == pytest.approx(general, abs=1e-12)

    def test_mean_fidelity(self):
        channels = [reconstruct_pair_channel(self.layout, self.prop, nu, 6.0) for nu in (1, 2)]
        gates = [GateTarget((0, 0, 0, 0))] * 2
        report = mean_fidelity(channels, gates, self.params.as_dict())
        assert report.mean == pytest.approx(np.mean(report.per_pair))
        assert report.time == 6.0
        with pytest.raises(DomainError):
            mean_fidelity(channels, gates[:1])

    def test_global_phases_symmetric(self):
        phases = global_phases(build_layout(3, 1), _propagator(build_layout(3, 1), HamiltonianParams.s1(1.0, [0.0])), 2.0)
        assert phases[((0,), (0,))] == 0.0
        diff = phases[((0,), (1,))] - phases[((1,), (0,))]
        assert abs(np.angle(np.exp(1j * diff))) < 1e-8


    def test_global_phases_symmetric_two_pairs(self):
        phases = global_phases(self.layout, self.prop, 2.0)
        assert len(phases) == 16
        for (a, b), phi in phases.items():
            assert abs(np.angle(np.exp(1j * (phi - phases[(b, a)])))) < 1e-8, (a, b)

@allure.feature("Average gate fidelity")
@pytest.mark.gates
class TestFidelity:

    @pytest.fixture(autouse=True)
    def setup(self, rng):
        self.rng = rng
        yield

    def test_perfect_channel(self):
        gate = GateTarget((0.0, 0.4, 0.4, 1.9))
        G = gate.unitary
        blocks = np.zeros((4, 4, 4, 4), dtype=complex)
        for j in range(4):
            for jp in range(4):
                blocks[j, jp] = np.outer(G[:, j], G[:, jp].conj())
        channel = PairChannel(blocks, 1, 0.0, "plus")
        assert average_gate_fidelity(channel, gate) == pytest.approx(1.0)
        assert fidelity_from_blocks(blocks, gate.phases) == pytest.approx(1.0)

    def test_global_phase_of_target_ignored(self):
        channel = _random_channel(self.rng)
        phases = np.array([0.0, 0.4, 0.4, 1.9])
        shifted = GateTarget(phases + 0.83)
        assert average_gate_fidelity(channel, shifted) == pytest.approx(
            average_gate_fidelity(channel, GateTarget(phases)), abs=1e-12)

    def test_fully_depolarizing_channel(self):
        blocks = np.einsum("jk,qp->jkqp", np.eye(4), np.eye(4)) / 4
        channel = PairChannel(blocks, 1, 0.0, "plus")
        gate = GateTarget((0.0, 0.7, 0.7, 2.2))
        assert average_gate_fidelity(channel, gate) == pytest.approx(0.25)
        assert fidelity_from_blocks(blocks, gate.phases) == pytest.approx(0.25)
        mean, stderr = haar_average_fidelity_mc(channel, gate, samples=500, seed=3)
        assert mean == pytest.approx(0.25, abs=1e-12)
        assert stderr < 1e-12

    def test_identity_channel_against_identity_gate(self):
        channel = PairChannel(np.einsum("jq,kp->jkqp", np.eye(4), np.eye(4)), 1, 0.0, "plus")
        mean, stderr = haar_average_fidelity_mc(channel, np.eye(4), samples=500, seed=5)
        assert mean == pytest.approx(1.0, abs=1e-12)
        assert stderr < 1e-12

    def test_calibration_recovers_conjugation(self):
        gate = GateTarget((0.0, 0.3, 0.3, 1.1))
        recovered = calibrate_phases(_unitary_channel(gate.unitary))
        assert np.allclose(recovered.phases, gate.phases, atol=1e-9)

    def test_random_channels_are_cptp(self):
        assert _random_channel(self.rng).check_cptp()["ok"]

    @allure.story("Closed form against Haar Monte-Carlo")
    def test_closed_form_matches_monte_carlo(self):
        within_three, worst = 0, 0.0
        for i in range(20):
            channel = _random_channel(self.rng)
            gate = GateTarget(self.rng.uniform(0, 2 * np.pi, size=4))
            exact = average_gate_fidelity(channel, gate)
            mean, stderr = haar_average_fidelity_mc(channel, gate, samples=2000, seed=i)
            z = abs(mean - exact) / stderr
            within_three += z <= 3.0
            worst = max(worst, z)
        assert within_three >= 19
        assert worst < 5.0

    def test_monte_carlo_needs_samples(self):
        with pytest.raises(DomainError):
            haar_average_fidelity_mc(_random_channel(self.rng), GateTarget((0, 0, 0, 0)), samples=10)

    def test_transfer_amplitudes_of_perfect_swap(self):
        gate = GateTarget((0.0, 1.0, 1.0, 2.0))
        G = gate.unitary
        blocks = np.einsum("qj,pk->jkqp", G, G.conj())
        amps = transfer_amplitudes(blocks)
        assert np.allclose(np.angle(amps), [0.0, 1.0, 1.0, 2.0])


@allure.feature("Entangling gate properties")
@pytest.mark.gates
@pytest.mark.reference
class TestSinglePairGate:

    @allure.story("Calibrated phases follow the free-fermion transfer phases")
    def test_phases_at_peak(self):
        layout = build_layout(5, 1)
        params = HamiltonianParams.s1(0.04, [0.0])
        point = evaluate_point(layout, params, grid(1.0, 500.0, 0.25))
        prop = _propagator(layout, params)
        gate = calibrate_phases(reconstruct_pair_channel(layout, prop, 1, point.tau))
        ideal = ideal_phases(5)
        for got, want in zip(gate.phases, ideal.phases):
            assert abs(np.angle(np.exp(1j * (got - want)))) < 0.05
        assert abs(abs(gate.entangling_phase) - np.pi) < 0.2

    @allure.story("Optimal single-pair gate entangles |+>|+>")
    def test_creates_entanglement(self):
        layout = build_layout(4, 1)
        params = HamiltonianParams.s1(0.04, [0.1])
        point = evaluate_point(layout, params, grid(470.0, 495.0, 0.25))
        channel = reconstruct_pair_channel(layout, _propagator(layout, params), 1, point.tau)
        plus = np.full(4, 0.5)
        assert concurrence(channel.apply(np.outer(plus, plus))) > 0.9
