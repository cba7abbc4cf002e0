"""Unitary evolution |psi(t)> = exp(-iHt)|psi(0)> sector by sector."""
import attr
import numpy as np
import scipy.linalg as la
from scipy.sparse.linalg import expm_multiply

from spinbus.errors import DomainError, NumericalError
from spinbus.system import SectorState
from utilis.logger import get_logger

logger = get_logger(__name__)

SPECTRAL_MAX_DIM = 4000
DEFAULT_CHUNK = 64


def _as_columns(v):
    v = np.asarray(v, dtype=complex)
    return v.reshape(v.shape[0], -1), v.shape[1:]


@attr.s(frozen=True, slots=True, eq=False)
class SpectralSector:
    """Cached eigensystem of one sector block."""

    excitation_count = attr.ib()
    energies = attr.ib(repr=False)
    vectors = attr.ib(repr=False)

    @property
    def dimension(self) -> int:
        return len(self.energies)

    def propagate(self, v, times) -> np.ndarray:
        """exp(-iHt) v for every t; result has a trailing time axis."""
        cols, tail = _as_columns(v)
        times = np.asarray(times, dtype=float)
        coeff = self.vectors.T @ cols
        phases = np.exp(-1j * np.outer(self.energies, times))
        weighted = (coeff[:, :, None] * phases[:, None, :]).reshape(self.dimension, -1)
        out = self.vectors @ weighted
        return out.reshape((self.dimension,) + tail + (len(times),))


@attr.s(frozen=True, slots=True, eq=False)
class KrylovSector:
    """Sparse block evolved with scipy's truncated-Taylor expm_multiply."""

    excitation_count = attr.ib()
    matrix = attr.ib(repr=False)

    @property
    def dimension(self) -> int:
        return self.matrix.shape[0]

    def step(self, cols, dt: float) -> np.ndarray:
        if dt == 0.0:
            return cols
        return expm_multiply(-1j * dt * self.matrix, cols)

    def propagate(self, v, times) -> np.ndarray:
        cols, tail = _as_columns(v)
        times = np.asarray(times, dtype=float)
        out = np.empty(cols.shape + (len(times),), dtype=complex)
        order = np.argsort(times, kind="stable")
        current, t_now = cols, 0.0
        for i in order:
            current = self.step(current, times[i] - t_now)
            t_now = times[i]
            out[:, :, i] = current
        return out.reshape((self.dimension,) + tail + (len(times),))


@attr.s(frozen=True, slots=True, eq=False)
class Propagator:
    """Evolution handles for a set of sectors."""

    sectors = attr.ib()
    method = attr.ib()

    def sector(self, k: int):
        try:
            return self.sectors[k]
        except KeyError:
            raise DomainError(f"sector k={k} not covered by the propagator (has {sorted(self.sectors)})") from None

    def evolve(self, s: SectorState, t: float) -> SectorState:
        if t < 0:
            raise DomainError(f"evolution time must be >= 0, got {t}")
        amps = {k: self.sector(k).propagate(v, [t])[..., 0] for k, v in s.amplitudes.items()}
        return SectorState(s.layout, amps)

    def trajectory(self, states, times, chunk: int = DEFAULT_CHUNK):
        """Yield (t_chunk, {k: array(dim_k, n_states, len(t_chunk))}) over sorted `times`.

        Sectors absent from a state are filled with zeros. Krylov sectors
        carry their vectors from one chunk to the next.
        """
        times = np.asarray(times, dtype=float)
        if np.any(times < 0) or np.any(np.diff(times) < 0):
            raise DomainError("trajectory times must be non-negative and sorted")
        sectors = sorted({k for s in states for k in s.amplitudes})
        initial = {}
        for k in sectors:
            dim = self.sector(k).dimension
            initial[k] = np.stack(
                [s.amplitudes.get(k, np.zeros(dim, dtype=complex)) for s in states], axis=1
            )

        carried = dict(initial)
        t_now = 0.0
        for start in range(0, len(times), chunk):
            t_chunk = times[start:start + chunk]
            out = {}
            for k in sectors:
                handle = self.sector(k)
                if isinstance(handle, KrylovSector):
                    block = handle.propagate(carried[k], t_chunk - t_now)
                    carried[k] = block[..., -1]
                else:
                    block = handle.propagate(initial[k], t_chunk)
                out[k] = block
            t_now = t_chunk[-1]
            yield t_chunk, out


def _diagonalize(op):
    try:
        energies, vectors = la.eigh(op.matrix.toarray())
    except (la.LinAlgError, ValueError) as e:
        logger.error(f"Diagonalization failed in sector k={op.excitation_count}: {e!r}")
        raise NumericalError(f"eigh failed: {e}", context=f"dynamics sector k={op.excitation_count}") from e
    return SpectralSector(op.excitation_count, energies, vectors)


def prepare_propagator(ops, method: str = "auto", spectral_max_dim: int = SPECTRAL_MAX_DIM) -> Propagator:
    """Spectral (cached eigensystems) or Krylov handles for every sector operator.

    `auto` diagonalizes sectors up to `spectral_max_dim` and uses Krylov beyond.
    """
    if method not in {"auto", "spectral", "krylov"}:
        raise DomainError(f"unknown propagation method {method!r}")
    sectors = {}
    for op in ops:
        use_spectral = method == "spectral" or (method == "auto" and op.dimension <= spectral_max_dim)
        if use_spectral:
            sectors[op.excitation_count] = _diagonalize(op)
        else:
            sectors[op.excitation_count] = KrylovSector(op.excitation_count, op.matrix)
        logger.debug(
            f"Sector k={op.excitation_count} (dim {op.dimension}) -> "
            f"{'spectral' if use_spectral else 'krylov'}"
        )
    return Propagator(sectors, method)


def evolve(prop: Propagator, s: SectorState, t: float) -> SectorState:
    """Norm-preserving e^{-iHt} applied to `s`."""
    return prop.evolve(s, t)


def energy(ops, s: SectorState) -> float:
    """<s|H|s>."""
    by_k = {op.excitation_count: op.matrix for op in ops}
    total = 0.0
    for k, v in s.amplitudes.items():
        if k not in by_k:
            raise DomainError(f"no Hamiltonian block for sector k={k}")
        total += np.vdot(v, by_k[k] @ v).real
    return float(total)
