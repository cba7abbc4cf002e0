"""Site layout, excitation-number sectors and pure states over them.

Sites are ordered A_1..A_M, chain 1..N, B_M..B_1 so that the mirror
reflection of the device is the index map i -> n-1-i. A basis state of
the whole device is an integer whose bit `s` is the occupation of site
`s` (1 = spin up, 0 = spin down).
"""
from functools import lru_cache
from itertools import combinations
from math import comb

import attr
import numpy as np

from spinbus.errors import DomainError
from utilis.logger import get_logger

logger = get_logger(__name__)

NORM_TOL = 1e-10

# single-qubit states accepted by RegisterState.from_labels
_LABELS = {
    "0": (1.0, 0.0),
    "1": (0.0, 1.0),
    "+": (2 ** -0.5, 2 ** -0.5),
    "-": (2 ** -0.5, -(2 ** -0.5)),
    "+i": (2 ** -0.5, 1j * 2 ** -0.5),
    "-i": (2 ** -0.5, -1j * 2 ** -0.5),
}


# ===========================
# Layout
# ===========================
def _check_chain_length(instance, attribute, value):
    if int(value) < 2:
        raise DomainError(f"chain_length must be >= 2, got {value}")


def _check_pair_count(instance, attribute, value):
    if int(value) < 0:
        raise DomainError(f"pair_count must be >= 0, got {value}")


@attr.s(frozen=True, slots=True)
class SystemLayout:
    """Registers A/B with `pair_count` qubits each around a chain of `chain_length` sites.

    `pair_count = 0` describes a bare chain.
    """

    chain_length = attr.ib(converter=int, validator=_check_chain_length)
    pair_count = attr.ib(converter=int, validator=_check_pair_count)

    @property
    def total_sites(self) -> int:
        return self.chain_length + 2 * self.pair_count

    def a_site(self, pair: int) -> int:
        self.check_pair(pair)
        return pair - 1

    def b_site(self, pair: int) -> int:
        self.check_pair(pair)
        return self.total_sites - pair

    def chain_site(self, i: int) -> int:
        if not 1 <= i <= self.chain_length:
            raise DomainError(f"chain site {i} outside 1..{self.chain_length}")
        return self.pair_count + i - 1

    @property
    def chain_sites(self) -> tuple:
        return tuple(range(self.pair_count, self.pair_count + self.chain_length))

    @property
    def register_sites(self) -> tuple:
        n, m = self.total_sites, self.pair_count
        return tuple(range(m)) + tuple(range(n - m, n))

    @property
    def reflection(self) -> tuple:
        """Site permutation of the mirror symmetry (an involution)."""
        n = self.total_sites
        return tuple(n - 1 - s for s in range(n))

    @property
    def site_labels(self) -> tuple:
        labels = [f"A{nu}" for nu in range(1, self.pair_count + 1)]
        labels += [f"C{i}" for i in range(1, self.chain_length + 1)]
        labels += [f"B{nu}" for nu in range(self.pair_count, 0, -1)]
        return tuple(labels)

    def check_pair(self, pair: int):
        if not 1 <= pair <= self.pair_count:
            raise DomainError(f"pair index {pair} outside 1..{self.pair_count}")


def build_layout(N: int, M: int) -> SystemLayout:
    """Layout for M register pairs across an N-site data-bus."""
    if N < 2 or M < 1:
        logger.error(f"Rejected layout N={N}, M={M}")
        raise DomainError(f"need N >= 2 and M >= 1, got N={N}, M={M}")
    layout = SystemLayout(N, M)
    logger.debug(f"Layout N={N}, M={M}: {' '.join(layout.site_labels)}")
    return layout


# ===========================
# Sector bases
# ===========================
@attr.s(frozen=True, slots=True, eq=False)
class SectorBasis:
    """All occupation bitstrings with exactly k set bits, sorted ascending."""

    n_sites = attr.ib()
    excitation_count = attr.ib()
    states = attr.ib(repr=False)

    @property
    def dimension(self) -> int:
        return len(self.states)

    def encode(self, bitstrings) -> np.ndarray:
        """Dense indices of the given occupation integers."""
        bitstrings = np.asarray(bitstrings, dtype=np.int64)
        idx = np.searchsorted(self.states, bitstrings)
        inside = idx < self.dimension
        if not np.all(inside) or not np.array_equal(self.states[idx], bitstrings):
            raise DomainError(f"bitstring not in sector k={self.excitation_count}")
        return idx

    def decode(self, indices) -> np.ndarray:
        return self.states[np.asarray(indices, dtype=np.int64)]

    def occupations(self) -> np.ndarray:
        """(dimension, n_sites) 0/1 matrix of site occupations."""
        return ((self.states[:, None] >> np.arange(self.n_sites)) & 1).astype(np.int8)


@lru_cache(maxsize=None)
def _basis_for(n_sites: int, k: int) -> SectorBasis:
    if k == 0:
        states = np.zeros(1, dtype=np.int64)
    else:
        states = np.fromiter(
            (sum(1 << s for s in c) for c in combinations(range(n_sites), k)),
            dtype=np.int64,
            count=comb(n_sites, k),
        )
        states.sort()
    states.setflags(write=False)
    logger.debug(f"Sector basis n={n_sites}, k={k}: dim {len(states)}")
    return SectorBasis(n_sites, k, states)


def sector_basis(layout: SystemLayout, k: int) -> SectorBasis:
    """Basis of the k-excitation sector with bijective indexing."""
    if not 0 <= k <= layout.total_sites:
        raise DomainError(f"sector k={k} outside 0..{layout.total_sites}")
    return _basis_for(layout.total_sites, int(k))


# ===========================
# Register and sector states
# ===========================
def _as_pairs(values, name):
    pairs = tuple((complex(a0), complex(a1)) for a0, a1 in values)
    for nu, (a0, a1) in enumerate(pairs, start=1):
        if abs(abs(a0) ** 2 + abs(a1) ** 2 - 1.0) > NORM_TOL:
            raise DomainError(f"{name}[{nu}] is not normalized: |a0|^2+|a1|^2 = {abs(a0) ** 2 + abs(a1) ** 2:.3g}")
    return pairs


@attr.s(frozen=True, slots=True)
class RegisterState:
    """Product state of both registers: alpha[nu] on A_nu, beta[nu] on B_nu."""

    alpha = attr.ib(converter=lambda v: _as_pairs(v, "alpha"))
    beta = attr.ib(converter=lambda v: _as_pairs(v, "beta"))

    def __attrs_post_init__(self):
        if len(self.alpha) != len(self.beta):
            raise DomainError(f"register sizes differ: {len(self.alpha)} vs {len(self.beta)}")

    @property
    def pair_count(self) -> int:
        return len(self.alpha)

    @classmethod
    def from_labels(cls, a_labels, b_labels):
        """Build from labels '0', '1', '+', '-', '+i', '-i' (explicit (a0, a1) pairs pass through)."""
        return cls([qubit_state(x) for x in a_labels], [qubit_state(x) for x in b_labels])

    @classmethod
    def random(cls, M: int, rng: np.random.Generator):
        """Haar-random single-qubit states on every register qubit."""
        def draw():
            v = rng.normal(size=2) + 1j * rng.normal(size=2)
            v /= np.linalg.norm(v)
            return tuple(v)
        return cls([draw() for _ in range(M)], [draw() for _ in range(M)])

    def replace(self, pair: int, a, b):
        """Copy with pair `pair` set to (a, b)."""
        alpha, beta = list(self.alpha), list(self.beta)
        alpha[pair - 1], beta[pair - 1] = a, b
        return RegisterState(alpha, beta)


def qubit_state(x):
    if not isinstance(x, str):
        a0, a1 = x
        return complex(a0), complex(a1)
    try:
        return _LABELS[x]
    except KeyError:
        raise DomainError(f"unknown qubit label {x!r}; expected one of {sorted(_LABELS)}") from None


def _freeze(amplitudes):
    frozen = {}
    for k, v in sorted(amplitudes.items()):
        arr = np.array(v, dtype=complex)
        arr.setflags(write=False)
        frozen[int(k)] = arr
    return frozen


@attr.s(frozen=True, slots=True, eq=False)
class SectorState:
    """Pure state stored as one amplitude vector per populated excitation sector.

    Vectors may carry trailing axes (several states, several times) as
    long as the leading axis is the sector dimension.
    """

    layout = attr.ib()
    amplitudes = attr.ib(converter=_freeze, repr=False)

    @property
    def sectors(self) -> tuple:
        return tuple(self.amplitudes)

    def norm(self) -> float:
        return float(np.sqrt(sum(np.vdot(v, v).real for v in self.amplitudes.values())))

    def vdot(self, other) -> complex:
        """<self|other>."""
        if self.layout != other.layout:
            raise DomainError("states live on different layouts")
        shared = set(self.amplitudes) & set(other.amplitudes)
        return complex(sum(np.vdot(self.amplitudes[k], other.amplitudes[k]) for k in shared))

    def to_dense(self) -> np.ndarray:
        """Full 2**n vector indexed by occupation integer (small layouts only)."""
        psi = np.zeros(2 ** self.layout.total_sites, dtype=complex)
        for k, v in self.amplitudes.items():
            psi[sector_basis(self.layout, k).states] = v
        return psi

    @classmethod
    def from_dense(cls, layout: SystemLayout, psi):
        psi = np.asarray(psi, dtype=complex)
        amps = {}
        for k in range(layout.total_sites + 1):
            v = psi[sector_basis(layout, k).states]
            if np.any(v != 0):
                amps[k] = v
        return cls(layout, amps)


def encode_product_state(layout: SystemLayout, regs: RegisterState) -> SectorState:
    """Sector decomposition of |psi_1..psi_M>_A |0>_ch |phi_1..phi_M>_B."""
    M = layout.pair_count
    if regs.pair_count != M:
        raise DomainError(f"register state has {regs.pair_count} pairs, layout has {M}")

    chain_mask = sum(1 << s for s in layout.chain_sites)
    amps = {}
    for k in range(2 * M + 1):
        states = sector_basis(layout, k).states
        v = np.where(states & chain_mask, 0.0, 1.0).astype(complex)
        for nu in range(1, M + 1):
            a = (states >> layout.a_site(nu)) & 1
            b = (states >> layout.b_site(nu)) & 1
            v *= np.where(a, regs.alpha[nu - 1][1], regs.alpha[nu - 1][0])
            v *= np.where(b, regs.beta[nu - 1][1], regs.beta[nu - 1][0])
        if np.any(v != 0):
            amps[k] = v
    return SectorState(layout, amps)


def site_occupations(state: SectorState) -> np.ndarray:
    """<n_s> for every site (trailing axes of the amplitudes are kept)."""
    out = None
    for k, v in state.amplitudes.items():
        occ = sector_basis(state.layout, k).occupations().astype(float)
        weights = np.abs(v) ** 2
        term = np.tensordot(occ, weights, axes=([0], [0]))
        out = term if out is None else out + term
    return out


# ===========================
# Partial trace onto one pair
# ===========================
@lru_cache(maxsize=4096)
def pair_split(layout: SystemLayout, pair: int, k: int):
    """Split sector-k states into (environment bits, pair index q = 2a + b)."""
    states = sector_basis(layout, k).states
    sa, sb = layout.a_site(pair), layout.b_site(pair)
    q = (((states >> sa) & 1) << 1) | ((states >> sb) & 1)
    env = states & ~((1 << sa) | (1 << sb))
    return env, q


def stack_pair_amplitudes(layout: SystemLayout, pair: int, *amplitude_maps):
    """Rearrange sector amplitudes into arrays X[env, q, ...] with a shared env axis.

    Every map is {k: array(dim_k, ...)}; all maps must share trailing shape.
    """
    layout.check_pair(pair)
    sectors = sorted({k for amps in amplitude_maps for k in amps})
    if not sectors:
        raise DomainError("no populated sectors to trace")
    envs = np.concatenate([pair_split(layout, pair, k)[0] for k in sectors])
    keys, inverse = np.unique(envs, return_inverse=True)

    offsets, start = {}, 0
    for k in sectors:
        size = sector_basis(layout, k).dimension
        offsets[k] = slice(start, start + size)
        start += size

    stacked = []
    for amps in amplitude_maps:
        tail = next(iter(amps.values())).shape[1:]
        X = np.zeros((len(keys), 4) + tail, dtype=complex)
        for k, v in amps.items():
            _, q = pair_split(layout, pair, k)
            X[inverse[offsets[k]], q] = v
        stacked.append(X)
    return stacked


def partial_trace_pair(bra: SectorState, ket: SectorState, pair: int) -> np.ndarray:
    """Tr over everything but (A_pair, B_pair) of |ket><bra|, basis |00>,|01>,|10>,|11>."""
    if bra.layout != ket.layout:
        raise DomainError("bra and ket live on different layouts")
    X_ket, X_bra = stack_pair_amplitudes(ket.layout, pair, ket.amplitudes, bra.amplitudes)
    return np.einsum("eq...,ep...->...qp", X_ket, X_bra.conj())


def reflection_permutation(layout: SystemLayout, k: int) -> np.ndarray:
    """perm[i] = index of the mirror image of basis state i within sector k."""
    basis = sector_basis(layout, k)
    mirrored = np.zeros_like(basis.states)
    for s, r in enumerate(layout.reflection):
        mirrored |= ((basis.states >> s) & 1) << r
    return basis.encode(mirrored)
