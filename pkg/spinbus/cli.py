"""Batch front-end: `python -m spinbus --config config.json`.

One JSON config describes one experiment; artifacts land in the output
folder as `<command>_<hash12>.csv/.json`.
"""
import argparse
import logging
import os
import sys

import attr
import numpy as np

from spinbus.dynamics import prepare_propagator
from spinbus.errors import ConfigError, DomainError, NumericalError, SpinBusError
from spinbus.gates import ChannelOptions
from spinbus.hamiltonian import HamiltonianParams, build_hamiltonian
from spinbus.noise import NoiseSpec, fidelity_vs_gamma
from spinbus.optimize import (
    StrategySpec,
    evaluate_point,
    fidelity_curve,
    grid,
    optimize,
    scaling_rows,
    scaling_sweep,
)
from spinbus.system import RegisterState, SystemLayout, build_layout, encode_product_state, site_occupations
from spinbus.twoway import TwoWayScenario, transmission_and_crosstalk
from utilis.config_loader import env_int, load_config
from utilis.logger import get_logger, set_level
from utilis.results_writer import artifact_path, config_hash, write_json, write_table

logger = get_logger(__name__)

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL = 0, 2, 3
DEFAULT_OUT_DIR = "results"


@attr.s(frozen=True, slots=True)
class RunContext:
    config = attr.ib()
    out_dir = attr.ib()
    workers = attr.ib()
    seed = attr.ib()
    digest = attr.ib()

    def path(self, ext, suffix=""):
        return artifact_path(self.out_dir, self.config.command, self.digest, ext, suffix)


# ===========================
# Config -> domain objects
# ===========================
def _layout(config) -> SystemLayout:
    return build_layout(config.layout.chain_length, config.layout.pair_count)


def _params(config) -> HamiltonianParams:
    p = config.params
    return HamiltonianParams(p.J, p.J0, p.h0, p.h)


def _options(config, seed) -> ChannelOptions:
    ch, dyn = config.channel, config.dynamics
    return ChannelOptions(ch.spectators, ch.target, ch.samples, seed, dyn.method, dyn.spectral_max_dim, dyn.chunk)


def _times(config) -> np.ndarray:
    t = config.time
    if t.tau is not None:
        if not t.tau:
            raise ConfigError("time.tau", "empty list")
        return np.asarray(sorted(float(x) for x in t.tau))
    return np.asarray(grid(t.tau_min, t.tau_max, t.tau_step))


def _registers(config) -> RegisterState:
    return RegisterState.from_labels(config.twoway.psi, config.twoway.phi)


def _strategy(config, pair_count: int) -> StrategySpec:
    s, t = config.strategy, config.time
    if t.tau is not None:
        raise ConfigError("time.tau", "optimize scans a tau grid; use tau_min/tau_max/tau_step")
    spec = StrategySpec.build(
        s.kind, pair_count, s.coupling_range, s.coupling_step, s.h_max, s.h_step,
        (t.tau_min, t.tau_max), t.tau_step, s.refine, config.params.J,
    )
    if s.coupling_values is not None:
        spec = attr.evolve(spec, coupling_values=s.coupling_values)
    if s.h_values is not None:
        spec = attr.evolve(spec, h_values=s.h_values)
    return spec


def _pair_columns(prefix, values):
    return {f"{prefix}{nu}": f for nu, f in enumerate(values, start=1)}


def _fidelity_config(ctx, params, tau, result, layout=None) -> dict:
    """A `fidelity` config that re-evaluates one optimum; `result` echoes what was found."""
    raw = ctx.config.raw
    out = {
        "command": "fidelity",
        "layout": layout or raw["layout"],
        "params": {"J": params.J, "J0": params.J0, "h0": params.h0, "h": list(params.h)},
        "time": {"tau": [tau]},
        "seed": ctx.seed,
        "result": result,
    }
    for section in ("channel", "dynamics"):
        if section in raw:
            out[section] = raw[section]
    return out


# ===========================
# Commands
# ===========================
def run_evolve(ctx):
    config = ctx.config
    layout, params = _layout(config), _params(config)
    state = encode_product_state(layout, _registers(config))
    prop = prepare_propagator(
        build_hamiltonian(layout, params, state.sectors), config.dynamics.method, config.dynamics.spectral_max_dim
    )
    times = _times(config)
    labels = layout.site_labels
    rows = []
    for t_chunk, amps in prop.trajectory([state], times, config.dynamics.chunk):
        occ = site_occupations(attr.evolve(state, amplitudes={k: v[:, 0, :] for k, v in amps.items()}))
        for i, t in enumerate(t_chunk):
            rows.append({"Jt": t, **dict(zip(labels, occ[:, i]))})
    write_table(ctx.path("csv"), rows, columns=["Jt", *labels])
    last = rows[-1]
    far = max(layout.b_site(nu) for nu in range(1, layout.pair_count + 1))
    return f"evolve: {len(rows)} time points up to J*t={last['Jt']:g}, <n_{labels[far]}>={last[labels[far]]:.4f}"


def run_fidelity(ctx):
    config = ctx.config
    layout, params = _layout(config), _params(config)
    times = _times(config)
    curve = fidelity_curve(layout, params, times, _options(config, ctx.seed))
    rows = [
        {"Jtau": t, "F": f, **_pair_columns("F", per_pair)}
        for t, f, per_pair in zip(curve.times, curve.mean, curve.per_pair)
    ]
    columns = ["Jtau", "F", *(f"F{nu}" for nu in range(1, layout.pair_count + 1))]
    write_table(ctx.path("csv"), rows, columns=columns)

    best = int(np.argmax(curve.mean))
    tau, f = float(times[best]), float(curve.mean[best])
    result = {"F": f, "Jtau": tau, "per_pair": [float(x) for x in curve.per_pair[best]]}
    write_json(ctx.path("json"), _fidelity_config(ctx, params, tau, result))
    return f"fidelity: F^max={f:.6f} at J*tau={tau:g} (J0/J={params.J0:g}, h0/J={params.h0:g}, h={list(params.h)})"


def _write_landscape(ctx, result, pair_count, suffix=""):
    columns = ["stage", "J0", "h0", *(f"h{nu}" for nu in range(1, pair_count + 1)),
               "Jtau", "F", *(f"F{nu}" for nu in range(1, pair_count + 1))]
    if result.failures:
        columns.append("error")
    write_table(ctx.path("csv", suffix), result.landscape, columns=columns)


def _optimum_summary(result) -> dict:
    return {
        "strategy": result.strategy,
        "F": result.fidelity,
        "Jtau": result.tau,
        "per_pair": list(result.per_pair),
        "evaluated": result.evaluated,
        "failures": len(result.failures),
    }


def run_optimize(ctx):
    config = ctx.config
    if config.layout.chain_lengths is not None:
        return run_scaling(ctx)
    layout = _layout(config)
    spec = _strategy(config, layout.pair_count)
    result = optimize(layout, spec, _options(config, ctx.seed), workers=ctx.workers)
    if config.output.landscape:
        _write_landscape(ctx, result, layout.pair_count)
    write_json(ctx.path("json"), _fidelity_config(ctx, result.params, result.tau, _optimum_summary(result)))
    return result.summary()


def run_scaling(ctx):
    """optimize over `layout.chain_lengths`: F^max, tau and optimal knobs against N."""
    config = ctx.config
    M = config.layout.pair_count
    spec = _strategy(config, M)
    results = scaling_sweep(config.layout.chain_lengths, M, spec, _options(config, ctx.seed), ctx.workers)
    if config.output.landscape:
        for N, result in results:
            _write_landscape(ctx, result, M, f"N{N}")
    columns = ["N", "strategy", "F_max", "Jtau", "J0", "h0", *(f"h{nu}" for nu in range(1, M + 1))]
    write_table(ctx.path("csv", "scaling"), scaling_rows(results), columns=columns)
    optima = [
        _fidelity_config(ctx, r.params, r.tau, _optimum_summary(r), layout={"chain_length": N, "pair_count": M})
        for N, r in results
    ]
    write_json(ctx.path("json", "scaling"), {"strategy": spec.kind, "optima": optima})
    trend = ", ".join(f"N={N}: {r.fidelity:.4f}" for N, r in results)
    return f"optimize ({spec.kind}) over chain lengths: F^max {trend}"


def run_noise(ctx):
    config = ctx.config
    layout, params = _layout(config), _params(config)
    options = _options(config, ctx.seed)
    tau = config.noise.tau
    if tau is None:
        tau = evaluate_point(layout, params, _times(config), options).tau
        logger.info(f"Gate duration from the unitary sweep: J*tau={tau:g}")
    n = config.noise
    spec = NoiseSpec(0.0, n.dt, n.integrator, n.dephase_registers)
    reports = fidelity_vs_gamma(layout, params, tau, n.gammas, options, spec)
    rows = [
        {"gamma_over_J": g, "F_mean": r.mean, **_pair_columns("F_", r.per_pair)}
        for g, r in zip(n.gammas, reports)
    ]
    columns = ["gamma_over_J", "F_mean", *(f"F_{nu}" for nu in range(1, layout.pair_count + 1))]
    write_table(ctx.path("csv"), rows, columns=columns)
    write_json(ctx.path("json"), {
        "Jtau": float(tau),
        "params": params.as_dict(),
        "integrator": n.integrator,
        "gamma_over_J": [float(g) for g in n.gammas],
        "F_mean": [r.mean for r in reports],
    })
    worst = min(rows, key=lambda r: r["F_mean"])
    return f"noise: {len(rows)} rates at J*tau={tau:g}, lowest F={worst['F_mean']:.6f} (gamma/J={worst['gamma_over_J']:g})"


def run_twoway(ctx):
    config = ctx.config
    layout, params = _layout(config), _params(config)
    scenario = TwoWayScenario(_registers(config))
    sectors = encode_product_state(layout, scenario.initial).sectors
    prop = prepare_propagator(
        build_hamiltonian(layout, params, sectors), config.dynamics.method, config.dynamics.spectral_max_dim
    )
    report = transmission_and_crosstalk(layout, prop, scenario, _times(config), config.dynamics.chunk)
    rows = {"Jt": report.times, "transmission": report.transmission, "crosstalk": report.crosstalk}
    write_table(ctx.path("csv"), rows, columns=["Jt", "transmission", "crosstalk"])
    write_json(ctx.path("json"), {
        "peak_Jt": report.peak_time,
        "peak_transmission": report.peak_transmission,
        "crosstalk_at_peak": report.crosstalk_at_peak,
        "params": params.as_dict(),
    })
    return (f"twoway: transmission {report.peak_transmission:.4f} at J*t={report.peak_time:g}, "
            f"crosstalk {report.crosstalk_at_peak:.2e}")


COMMANDS = {
    "evolve": run_evolve,
    "fidelity": run_fidelity,
    "optimize": run_optimize,
    "noise": run_noise,
    "twoway": run_twoway,
}


def run(config, out_dir=None, workers=None, seed=None) -> str:
    """Execute one experiment, write its artifacts and return the summary line."""
    seed = config.seed if seed is None else int(seed)
    workers = env_int("SPINBUS_WORKERS", 1) if workers is None else int(workers)
    if workers < 1:
        raise ConfigError("workers", f"must be >= 1, got {workers}")
    out_dir = out_dir or os.getenv("SPINBUS_OUT_DIR") or config.output.dir or DEFAULT_OUT_DIR
    ctx = RunContext(config, out_dir, workers, seed, config_hash(config.raw, seed))
    logger.info(f"▶ {config.command} (hash {ctx.digest}, seed {seed}, {workers} worker(s)) -> {out_dir}")
    return COMMANDS[config.command](ctx)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="spinbus", description="Parallel entangling gates over an XX spin-chain bus.")
    parser.add_argument("--config", default="config.json", help="experiment config (JSON)")
    parser.add_argument("--out", default=None, help="output folder (env SPINBUS_OUT_DIR, default results/)")
    parser.add_argument("--workers", type=int, default=None, help="worker processes (env SPINBUS_WORKERS, default 1)")
    parser.add_argument("--seed", type=int, default=None, help="overrides the config seed")
    parser.add_argument("--verbose", action="store_true", help="debug logging")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.verbose:
        set_level(logging.DEBUG)
    if args.seed is not None and args.seed < 0:
        logger.error(f"Config error: seed: must be >= 0, got {args.seed}")
        return EXIT_CONFIG
    try:
        config = load_config(args.config)
        summary = run(config, args.out, args.workers, args.seed)
    except (ConfigError, DomainError) as e:
        logger.error(f"Config error: {e}")
        return EXIT_CONFIG
    except NumericalError as e:
        logger.error(f"Numerical error: {e}")
        return EXIT_NUMERICAL
    except SpinBusError as e:
        logger.error(f"Error: {e}")
        return EXIT_NUMERICAL
    print(summary)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
