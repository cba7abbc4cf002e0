"""Strategies S1/S2: exhaustive search of F over Hamiltonian parameters and gate duration."""
import itertools
from concurrent.futures import ProcessPoolExecutor

import attr
import numpy as np

from spinbus.dynamics import prepare_propagator
from spinbus.errors import DomainError, NumericalError
from spinbus.gates import (
    ChannelOptions,
    channel_blocks,
    channel_inputs,
    fidelity_from_blocks,
    ideal_phases,
    phases_from_amplitudes,
    spectator_states,
    transfer_amplitudes,
)
from spinbus.hamiltonian import HamiltonianParams, build_hamiltonian
from spinbus.system import build_layout
from utilis.logger import get_logger

logger = get_logger(__name__)

TIME_WINDOW = (0.0, 500.0)


def grid(lo: float, hi: float, step: float) -> tuple:
    """lo, lo+step, ... up to hi inclusive, rounded to kill float drift."""
    if step <= 0:
        raise DomainError(f"grid step must be > 0, got {step}")
    if hi < lo:
        raise DomainError(f"empty grid [{lo}, {hi}]")
    count = int(np.floor((hi - lo) / step + 1e-9)) + 1
    return tuple(float(x) for x in np.round(lo + step * np.arange(count), 10))


# ===========================
# Fidelity over time at one parameter point
# ===========================
@attr.s(frozen=True, slots=True, eq=False)
class FidelityCurve:
    times = attr.ib(repr=False)
    per_pair = attr.ib(repr=False)  # (T, M)

    @property
    def mean(self) -> np.ndarray:
        return self.per_pair.mean(axis=1)


def fidelity_curve(layout, params: HamiltonianParams, times, options: ChannelOptions = ChannelOptions()) -> FidelityCurve:
    """F_nu(t) for every pair over `times` (sorted, within the 0..500/J window)."""
    times = np.asarray(times, dtype=float)
    M = layout.pair_count
    backgrounds = spectator_states(M, options.spectators, options.samples, options.seed)
    inputs = [channel_inputs(layout, nu, backgrounds) for nu in range(1, M + 1)]
    states = [s for group in inputs for s in group]
    sectors = sorted({k for s in states for k in s.amplitudes})

    prop = prepare_propagator(build_hamiltonian(layout, params, sectors), options.method, options.spectral_max_dim)
    per_pair = np.empty((len(times), M))
    width = 4 * len(backgrounds)
    ideal = np.asarray(ideal_phases(layout.chain_length).phases)

    row = 0
    for t_chunk, amps in prop.trajectory(states, times, options.chunk):
        for nu in range(1, M + 1):
            cols = slice((nu - 1) * width, nu * width)
            own = {k: v[:, cols] for k, v in amps.items()}
            blocks = channel_blocks(layout, nu, own, len(backgrounds))
            if options.target == "calibrated":
                phases = phases_from_amplitudes(transfer_amplitudes(blocks))
            else:
                phases = np.broadcast_to(ideal, (len(t_chunk), 4))
            per_pair[row:row + len(t_chunk), nu - 1] = fidelity_from_blocks(blocks, phases)
        row += len(t_chunk)
    return FidelityCurve(times, per_pair)


@attr.s(frozen=True, slots=True)
class PointResult:
    """Best gate duration for fixed Hamiltonian parameters."""

    params = attr.ib()
    tau = attr.ib()
    fidelity = attr.ib()
    per_pair = attr.ib(converter=tuple)


def evaluate_point(layout, params: HamiltonianParams, tau_grid, options: ChannelOptions = ChannelOptions()) -> PointResult:
    """max over tau of the mean fidelity, one propagator for the whole sweep."""
    tau_grid = np.sort(np.asarray(tau_grid, dtype=float))
    if len(tau_grid) == 0:
        raise DomainError("empty tau grid")
    if tau_grid.min() < TIME_WINDOW[0] or tau_grid.max() > TIME_WINDOW[1]:
        raise DomainError(f"tau grid must lie in [{TIME_WINDOW[0]}, {TIME_WINDOW[1]}]/J")
    curve = fidelity_curve(layout, params, tau_grid, options)
    best = int(np.argmax(curve.mean))
    return PointResult(params, float(tau_grid[best]), float(curve.mean[best]), curve.per_pair[best])


# ===========================
# Strategies
# ===========================
@attr.s(frozen=True, slots=True)
class StrategySpec:
    """Search grids of one strategy. S1 scans J0 with h0 = 0, S2 scans h0 with J0 = J."""

    kind = attr.ib()
    coupling_values = attr.ib(converter=tuple)  # J0/J for S1, h0/J for S2
    h_values = attr.ib(converter=lambda v: tuple(tuple(g) for g in v))
    tau_min = attr.ib(default=1.0, converter=float)
    tau_max = attr.ib(default=500.0, converter=float)
    tau_step = attr.ib(default=0.25, converter=float)
    coupling_step = attr.ib(default=0.01, converter=float)
    h_step = attr.ib(default=0.05, converter=float)
    coupling_range = attr.ib(default=(0.01, 1.0), converter=tuple)
    h_max = attr.ib(default=1.5, converter=float)
    refine = attr.ib(default=False)
    J = attr.ib(default=1.0, converter=float)

    def __attrs_post_init__(self):
        if self.kind not in ("S1", "S2"):
            raise DomainError(f"strategy must be S1 or S2, got {self.kind!r}")
        if not self.coupling_values or any(not g for g in self.h_values):
            raise DomainError("strategy grids must be non-empty")
        for nu, values in enumerate(self.h_values, start=1):
            sign = 1 if nu % 2 else -1
            if any(sign * v < -1e-12 for v in values):
                raise DomainError(f"h_{nu} grid must carry sign {sign:+d}")

    @classmethod
    def build(cls, kind: str, M: int, coupling_range=None, coupling_step=None, h_max=1.5, h_step=0.05,
              tau_range=(1.0, 500.0), tau_step=0.25, refine=False, J=1.0):
        """Default grids: J0/J in [0.01, 1] step 0.01 (S1), h0/J in [20, 40] step 1 (S2),
        h_nu/J in (-1)^(nu+1) [0, h_max] step 0.05."""
        if kind == "S1":
            coupling_range = coupling_range or (0.01, 1.0)
            coupling_step = coupling_step or 0.01
        else:
            coupling_range = coupling_range or (20.0, 40.0)
            coupling_step = coupling_step or 1.0
        base = grid(0.0, h_max, h_step)
        h_values = [tuple(x if nu % 2 else -x for x in base) for nu in range(1, M + 1)]
        return cls(
            kind, grid(coupling_range[0], coupling_range[1], coupling_step), h_values,
            tau_range[0], tau_range[1], tau_step, coupling_step, h_step, coupling_range, h_max, refine, J,
        )

    @property
    def tau_grid(self) -> np.ndarray:
        return np.asarray(grid(self.tau_min, self.tau_max, self.tau_step))

    def params_for(self, coupling: float, h) -> HamiltonianParams:
        if self.kind == "S1":
            return HamiltonianParams.s1(coupling, h, J=self.J)
        return HamiltonianParams.s2(coupling, h, J=self.J)

    def points(self):
        """Grid points in lexicographic order (coupling outermost)."""
        for coupling, *h in itertools.product(self.coupling_values, *self.h_values):
            yield self.params_for(coupling, h)

    def size(self) -> int:
        return len(self.coupling_values) * int(np.prod([len(g) for g in self.h_values]))

    def local(self, best: HamiltonianParams, divisor: int):
        """Grid of step/divisor spanning one coarse step around `best`, clipped to the ranges."""
        coupling = best.J0 if self.kind == "S1" else best.h0
        c_step = self.coupling_step / divisor
        lo, hi = self.coupling_range
        couplings = sorted({round(min(max(coupling + i * c_step, lo), hi), 10) for i in range(-2, 3)})
        h_local = []
        for nu, h in enumerate(best.h, start=1):
            sign = 1 if nu % 2 else -1
            vals = {round(sign * min(max(sign * (h + i * self.h_step / divisor), 0.0), self.h_max), 10)
                    for i in range(-2, 3)}
            h_local.append(sorted(vals))
        return attr.evolve(self, coupling_values=couplings, h_values=h_local, refine=False)


@attr.s(frozen=True, slots=True)
class OptimizationResult:
    strategy = attr.ib()
    params = attr.ib()
    tau = attr.ib()
    fidelity = attr.ib()
    per_pair = attr.ib(converter=tuple)
    evaluated = attr.ib(default=0)
    failures = attr.ib(factory=list, eq=False)
    landscape = attr.ib(factory=list, eq=False, repr=False)

    def summary(self) -> str:
        h = ", ".join(f"{x:g}" for x in self.params.h)
        knob = f"J0/J={self.params.J0:g}" if self.strategy == "S1" else f"h0/J={self.params.h0:g}"
        return f"{self.strategy}: F^max={self.fidelity:.6f} at J*tau={self.tau:g} ({knob}, h=[{h}])"


def _evaluate_task(task):
    layout, params, tau_grid, options = task
    try:
        return evaluate_point(layout, params, tau_grid, options), None
    except NumericalError as e:
        return None, str(e)


def _record(stage, params, point=None, error=None):
    rec = {"stage": stage, "J0": params.J0, "h0": params.h0}
    rec.update({f"h{nu}": h for nu, h in enumerate(params.h, start=1)})
    if point is not None:
        rec["Jtau"] = point.tau
        rec["F"] = point.fidelity
        rec.update({f"F{nu}": f for nu, f in enumerate(point.per_pair, start=1)})
    else:
        rec["error"] = error
    return rec


def _scan(layout, spec, options, workers, stage, best, landscape, failures):
    tasks = [(layout, p, spec.tau_grid, options) for p in spec.points()]
    total = len(tasks)
    logger.info(f"🔎 {stage} scan: {total} grid points x {len(spec.tau_grid)} tau samples, {workers} worker(s)")
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_evaluate_task, tasks, chunksize=max(1, total // (4 * workers))))
    else:
        results = map(_evaluate_task, tasks)

    step = max(1, total // 10)
    for i, ((_, params, _, _), (point, error)) in enumerate(zip(tasks, results), start=1):
        if point is None:
            logger.warning(f"Grid point {params.as_dict()} skipped: {error}")
            failures.append({"params": params.as_dict(), "error": error})
            landscape.append(_record(stage, params, error=error))
            continue
        landscape.append(_record(stage, params, point))
        if best is None or point.fidelity > best.fidelity:
            best = point
        if i % step == 0 or i == total:
            logger.info(f"  {i}/{total} points, best F={best.fidelity:.6f} at J*tau={best.tau:g}")
    return best


def optimize(layout, spec: StrategySpec, options: ChannelOptions = ChannelOptions(), workers: int = 1) -> OptimizationResult:
    """argmax of F over the strategy grid x tau grid, ties resolved to the first grid point."""
    if len(spec.h_values) != layout.pair_count:
        raise DomainError(f"strategy has {len(spec.h_values)} field grids, layout has {layout.pair_count} pairs")
    landscape, failures = [], []
    best = _scan(layout, spec, options, workers, "coarse", None, landscape, failures)
    if spec.refine and best is not None:
        for divisor in (2, 4):
            best = _scan(layout, spec.local(best.params, divisor), options, workers,
                         f"refine/{divisor}", best, landscape, failures)
    if best is None:
        raise NumericalError("every grid point failed", context="optimize")
    result = OptimizationResult(spec.kind, best.params, best.tau, best.fidelity, best.per_pair,
                                len(landscape), failures, landscape)
    logger.info(f"✅ {result.summary()}")
    return result


# ===========================
# Chain-length scaling
# ===========================
def scaling_sweep(chain_lengths, pair_count: int, spec: StrategySpec, options: ChannelOptions = ChannelOptions(),
                  workers: int = 1) -> list:
    """One optimize() per chain length, shortest chain first; returns (N, OptimizationResult) pairs."""
    lengths = sorted({int(n) for n in chain_lengths})
    if not lengths:
        raise DomainError("chain length sweep needs at least one N")
    results = []
    for i, N in enumerate(lengths, start=1):
        logger.info(f"📏 Chain length N={N} ({i}/{len(lengths)})")
        results.append((N, optimize(build_layout(N, pair_count), spec, options, workers)))
    return results


def scaling_rows(results) -> list:
    """F^max, tau and the optimal couplings/fields against N, one dict per chain length."""
    rows = []
    for N, r in results:
        row = {"N": N, "strategy": r.strategy, "F_max": r.fidelity, "Jtau": r.tau, "J0": r.params.J0, "h0": r.params.h0}
        row.update({f"h{nu}": h for nu, h in enumerate(r.params.h, start=1)})
        rows.append(row)
    return rows
