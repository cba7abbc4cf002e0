"""Lindblad evolution under site-local sigma^z dephasing and the F-vs-gamma curve.

    d rho/dt = -i[H, rho] + gamma * sum_i (Z_i rho Z_i - rho)

Both terms preserve the block structure rho = sum_{k,k'} rho_{kk'} over
excitation sectors, so only blocks populated at t = 0 are stored. In the
occupation basis the dissipator is elementwise:
(Z_i rho Z_i - rho)_{ab} summed over sites = -2 * d(a, b) * rho_{ab},
with d the Hamming distance restricted to the dephased sites.
"""
from functools import lru_cache

import attr
import numpy as np

from spinbus.dynamics import prepare_propagator
from spinbus.errors import DomainError, IntegratorError
from spinbus.gates import (
    ChannelOptions,
    FidelityReport,
    channel_inputs,
    fidelity_from_blocks,
    ideal_phases,
    phases_from_amplitudes,
    spectator_states,
    transfer_amplitudes,
)
from spinbus.hamiltonian import build_hamiltonian
from spinbus.system import SectorState, pair_split, sector_basis
from utilis.logger import get_logger

logger = get_logger(__name__)


def _non_negative(instance, attribute, value):
    if value < 0:
        raise DomainError(f"{attribute.name} must be >= 0, got {value}")


@attr.s(frozen=True, slots=True)
class NoiseSpec:
    """Dephasing rate and integrator settings (units of J and 1/J)."""

    gamma = attr.ib(converter=float, validator=_non_negative)
    dt = attr.ib(default=0.01, converter=float)
    integrator = attr.ib(default="rk4")
    dephase_registers = attr.ib(default=True)
    trace_tol = attr.ib(default=1e-6, converter=float)
    hermiticity_tol = attr.ib(default=1e-8, converter=float)
    max_halvings = attr.ib(default=4, converter=int)
    check_every = attr.ib(default=200, converter=int)

    def __attrs_post_init__(self):
        if self.dt <= 0:
            raise DomainError(f"dt must be > 0, got {self.dt}")
        if self.integrator not in ("rk4", "strang"):
            raise DomainError(f"integrator must be rk4 or strang, got {self.integrator!r}")


# ===========================
# Density states
# ===========================
@attr.s(frozen=True, slots=True, eq=False)
class DensityState:
    """Blocks rho_{kk'} of shape (dim_k, dim_k', *batch); absent blocks are zero."""

    layout = attr.ib()
    blocks = attr.ib(repr=False)

    @classmethod
    def from_pure(cls, kets, bras=None):
        """Batch of |ket_i><bra_i| (bras default to kets)."""
        bras = kets if bras is None else bras
        layout = kets[0].layout
        blocks = {}
        ks = sorted({k for s in kets for k in s.amplitudes})
        kps = sorted({k for s in bras for k in s.amplitudes})
        for k in ks:
            dk = sector_basis(layout, k).dimension
            K = np.stack([s.amplitudes.get(k, np.zeros(dk, complex)) for s in kets], axis=-1)
            for kp in kps:
                dkp = sector_basis(layout, kp).dimension
                B = np.stack([s.amplitudes.get(kp, np.zeros(dkp, complex)) for s in bras], axis=-1)
                blocks[(k, kp)] = np.einsum("ai,bi->abi", K, B.conj())
        return cls(layout, blocks)

    def trace(self) -> np.ndarray:
        return sum(np.einsum("aa...->...", b) for (k, kp), b in self.blocks.items() if k == kp)

    def hermiticity_error(self) -> float:
        err = 0.0
        for (k, kp), b in self.blocks.items():
            other = self.blocks.get((kp, k))
            mirror = np.zeros_like(b) if other is None else np.swapaxes(other, 0, 1).conj()
            err = max(err, float(np.max(np.abs(b - mirror), initial=0.0)))
        return err

    def purity(self) -> np.ndarray:
        """Tr rho^2 for Hermitian rho (sum of |rho_ab|^2)."""
        return sum(np.sum(np.abs(b) ** 2, axis=(0, 1)) for b in self.blocks.values())

    def combine(self, other, scale: float):
        """self + scale * other, block by block."""
        return DensityState(self.layout, {key: b + scale * other.blocks[key] for key, b in self.blocks.items()})


@lru_cache(maxsize=1024)
def _dephasing_distance(layout, k: int, kp: int, registers: bool) -> np.ndarray:
    sites = layout.chain_sites + (layout.register_sites if registers else ())
    mask = sum(1 << s for s in sites)
    a = sector_basis(layout, k).states
    b = sector_basis(layout, kp).states
    return np.bitwise_count((a[:, None] ^ b[None, :]) & mask).astype(float)


def _left(H, block):
    shape = block.shape
    return (H @ block.reshape(shape[0], -1)).reshape(shape)


def _right(block, H):
    # block @ H for real symmetric H, batch axes kept
    moved = np.swapaxes(block, 0, 1)
    shape = moved.shape
    return np.swapaxes((H @ moved.reshape(shape[0], -1)).reshape(shape), 0, 1)


def _weights(dist, ndim):
    return dist.reshape(dist.shape + (1,) * (ndim - 2))


def lindblad_rhs(rho: DensityState, ops, gamma: float, dephase_registers: bool = True) -> DensityState:
    """-i[H, rho] + gamma * sum_i (Z_i rho Z_i - rho), block-diagonal in (k, k')."""
    H = {op.excitation_count: op.matrix for op in ops}
    out = {}
    for (k, kp), b in rho.blocks.items():
        if k not in H or kp not in H:
            raise DomainError(f"no Hamiltonian block for sector pair ({k}, {kp})")
        d = -1j * (_left(H[k], b) - _right(b, H[kp]))
        if gamma:
            dist = _dephasing_distance(rho.layout, k, kp, bool(dephase_registers))
            d = d - 2.0 * gamma * _weights(dist, b.ndim) * b
        out[(k, kp)] = d
    return DensityState(rho.layout, out)


# ===========================
# Integrators
# ===========================
def _rk4_step(rho, ops, spec, dt):
    f = lambda r: lindblad_rhs(r, ops, spec.gamma, spec.dephase_registers)  # noqa: E731
    k1 = f(rho)
    k2 = f(rho.combine(k1, dt / 2))
    k3 = f(rho.combine(k2, dt / 2))
    k4 = f(rho.combine(k3, dt))
    blocks = {
        key: b + dt / 6 * (k1.blocks[key] + 2 * k2.blocks[key] + 2 * k3.blocks[key] + k4.blocks[key])
        for key, b in rho.blocks.items()
    }
    return DensityState(rho.layout, blocks)


def _strang_stepper(rho0, ops, spec, dt):
    prop = prepare_propagator(ops, "spectral")
    unitaries = {}
    for k, sec in prop.sectors.items():
        unitaries[k] = (sec.vectors * np.exp(-1j * sec.energies * dt)) @ sec.vectors.T
    half = {
        key: _weights(np.exp(-spec.gamma * dt * _dephasing_distance(rho0.layout, *key, bool(spec.dephase_registers))),
                      b.ndim)
        for key, b in rho0.blocks.items()
    }

    def step(rho):
        blocks = {}
        for (k, kp), b in rho.blocks.items():
            b = half[(k, kp)] * b
            b = _left(unitaries[k], b)
            b = np.swapaxes(_left(unitaries[kp].conj(), np.swapaxes(b, 0, 1)), 0, 1)
            blocks[(k, kp)] = half[(k, kp)] * b
        return DensityState(rho.layout, blocks)
    return step


def _drift(rho, trace0, hermitian):
    trace_err = float(np.max(np.abs(rho.trace() - trace0)))
    herm_err = rho.hermiticity_error() if hermitian else 0.0
    return trace_err, herm_err


def evolve_lindblad(rho0: DensityState, ops, spec: NoiseSpec, t: float) -> DensityState:
    """Integrate to time t; dt is halved (up to spec.max_halvings times) on trace/Hermiticity drift."""
    if t < 0:
        raise DomainError(f"time must be >= 0, got {t}")
    if t == 0:
        return rho0
    trace0 = rho0.trace()
    hermitian = rho0.hermiticity_error() < spec.hermiticity_tol
    dt = spec.dt
    for attempt in range(spec.max_halvings + 1):
        steps = max(1, int(np.ceil(t / dt - 1e-9)))
        h = t / steps
        stepper = (_strang_stepper(rho0, ops, spec, h) if spec.integrator == "strang"
                   else (lambda r, _h=h: _rk4_step(r, ops, spec, _h)))
        rho, failed = rho0, False
        for i in range(1, steps + 1):
            rho = stepper(rho)
            if i % spec.check_every == 0 or i == steps:
                trace_err, herm_err = _drift(rho, trace0, hermitian)
                if trace_err > spec.trace_tol or herm_err > spec.hermiticity_tol or not np.isfinite(trace_err):
                    logger.warning(
                        f"Lindblad drift at t={i * h:.3f} (dt={h:.3g}): trace {trace_err:.2e}, "
                        f"hermiticity {herm_err:.2e}; halving dt"
                    )
                    failed = True
                    break
        if not failed:
            logger.debug(f"Lindblad integration to t={t} done in {steps} {spec.integrator} steps (dt={h:.3g})")
            return rho
        dt = h / 2
    logger.error(f"Lindblad integration to t={t} failed after {spec.max_halvings} halvings")
    raise IntegratorError(f"trace/hermiticity drift persists at dt={dt * 2:.3g}; use a smaller dt",
                          context=f"noise gamma={spec.gamma}")


# ===========================
# Channels under dephasing
# ===========================
def density_partial_trace_pair(rho: DensityState, pair: int) -> np.ndarray:
    """Tr over all but (A_pair, B_pair); returns (4, 4, *batch)."""
    layout = rho.layout
    layout.check_pair(pair)
    sectors = sorted({k for key in rho.blocks for k in key})
    keys = np.unique(np.concatenate([pair_split(layout, pair, k)[0] for k in sectors]))
    lookup = {}
    for k in sectors:
        env, q = pair_split(layout, pair, k)
        table = np.full((len(keys), 4), -1, dtype=np.int64)
        env_idx = np.searchsorted(keys, env)
        table[env_idx, q] = np.arange(len(env))
        lookup[k] = (env_idx, q, table)

    batch = next(iter(rho.blocks.values())).shape[2:]
    out = np.zeros((4, 4) + batch, dtype=complex)
    for (k, kp), b in rho.blocks.items():
        env_idx, q, _ = lookup[k]
        table = lookup[kp][2]
        rows = np.repeat(np.arange(len(env_idx)), 4)
        qp = np.tile(np.arange(4), len(env_idx))
        cols = table[env_idx[rows], qp]
        keep = cols >= 0
        np.add.at(out, (q[rows[keep]], qp[keep]), b[rows[keep], cols[keep]])
    return out


def noisy_channel_blocks(layout, ops, pair: int, tau: float, spec: NoiseSpec, backgrounds) -> np.ndarray:
    """blocks[j, j', q, q'] of the dephased channel, averaged over spectator backgrounds."""
    blocks = np.zeros((4, 4, 4, 4), dtype=complex)
    for bg in backgrounds:
        inputs = channel_inputs(layout, pair, [bg])
        for jp in range(4):
            rho0 = DensityState.from_pure(inputs, [inputs[jp]] * 4)
            rho = evolve_lindblad(rho0, ops, spec, tau)
            reduced = density_partial_trace_pair(rho, pair)  # (4, 4, j)
            blocks[:, jp] += np.moveaxis(reduced, -1, 0)
    return blocks / len(backgrounds)


def noisy_mean_fidelity(layout, params, tau: float, gamma: float, options: ChannelOptions = ChannelOptions(),
                        spec: NoiseSpec = None) -> FidelityReport:
    """Per-pair fidelities of the Lindblad-evolved channels at gate duration tau."""
    spec = attr.evolve(spec, gamma=gamma) if spec is not None else NoiseSpec(gamma)
    M = layout.pair_count
    backgrounds = spectator_states(M, options.spectators, options.samples, options.seed)
    sectors = sorted({k for nu in range(1, M + 1) for s in channel_inputs(layout, nu, backgrounds)
                      for k in s.amplitudes})
    ops = build_hamiltonian(layout, params, sectors)
    per_pair = []
    for nu in range(1, M + 1):
        blocks = noisy_channel_blocks(layout, ops, nu, tau, spec, backgrounds)
        if options.target == "calibrated":
            phases = phases_from_amplitudes(transfer_amplitudes(blocks))
        else:
            phases = np.asarray(ideal_phases(layout.chain_length).phases)
        per_pair.append(float(fidelity_from_blocks(blocks, phases)))
    report = FidelityReport(per_pair, float(tau), {"gamma": spec.gamma, **params.as_dict()})
    logger.info(f"gamma/J={spec.gamma:g}: F={report.mean:.6f} ({', '.join(f'{f:.4f}' for f in per_pair)})")
    return report


def fidelity_vs_gamma(layout, params, tau: float, gammas, options: ChannelOptions = ChannelOptions(),
                      spec: NoiseSpec = None) -> list:
    """One FidelityReport per dephasing rate."""
    return [noisy_mean_fidelity(layout, params, tau, g, options, spec) for g in gammas]


def pure_density(state: SectorState) -> DensityState:
    """|state><state| with an empty batch axis removed."""
    rho = DensityState.from_pure([state])
    return DensityState(rho.layout, {key: b[..., 0] for key, b in rho.blocks.items()})
