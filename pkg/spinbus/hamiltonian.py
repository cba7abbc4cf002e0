"""H = H_ch + H_I restricted to excitation-number sectors.

Conventions: sigma^z|1> = +|1>, sigma^z|0> = -|0>; the XX term
sigma^x sigma^x + sigma^y sigma^y hops an excitation with amplitude 2x
the bond coupling. No constant energy shift is added.
"""
import attr
import numpy as np
from scipy import sparse

from spinbus.errors import DomainError
from spinbus.system import SystemLayout, sector_basis
from utilis.logger import get_logger

logger = get_logger(__name__)


def _positive(instance, attribute, value):
    if not value > 0:
        raise DomainError(f"{attribute.name} must be > 0, got {value}")


@attr.s(frozen=True, slots=True)
class HamiltonianParams:
    """Couplings and fields in units of J."""

    J = attr.ib(converter=float, validator=_positive)
    J0 = attr.ib(converter=float)
    h0 = attr.ib(converter=float)
    h = attr.ib(converter=lambda v: tuple(float(x) for x in v))

    @classmethod
    def s1(cls, J0, h, J=1.0):
        """Strategy S1 point: h0 = 0."""
        return cls(J, J0, 0.0, h)

    @classmethod
    def s2(cls, h0, h, J=1.0):
        """Strategy S2 point: J0 = J."""
        return cls(J, J, h0, h)

    def as_dict(self) -> dict:
        return {"J": self.J, "J0": self.J0, "h0": self.h0, "h": list(self.h)}


@attr.s(frozen=True, slots=True, eq=False)
class SectorOperator:
    """Sparse Hermitian block of H on the k-excitation sector."""

    excitation_count = attr.ib()
    matrix = attr.ib(repr=False)

    @property
    def dimension(self) -> int:
        return self.matrix.shape[0]


def bonds(layout: SystemLayout, p: HamiltonianParams):
    """(site_i, site_j, coupling) for every XX bond, in a fixed order."""
    out = []
    for i in range(1, layout.chain_length):
        out.append((layout.chain_site(i), layout.chain_site(i + 1), p.J))
    for nu in range(1, layout.pair_count + 1):
        out.append((layout.a_site(nu), layout.chain_site(1), p.J0))
        out.append((layout.chain_site(layout.chain_length), layout.b_site(nu), p.J0))
    return out


def site_fields(layout: SystemLayout, p: HamiltonianParams) -> np.ndarray:
    """Longitudinal field on every site."""
    if len(p.h) != layout.pair_count:
        raise DomainError(f"expected {layout.pair_count} pair fields, got {len(p.h)}")
    f = np.zeros(layout.total_sites)
    f[layout.chain_site(1)] += p.h0
    f[layout.chain_site(layout.chain_length)] += p.h0
    for nu, h_nu in enumerate(p.h, start=1):
        f[layout.a_site(nu)] += h_nu
        f[layout.b_site(nu)] += h_nu
    return f


def _sector_matrix(layout, p, k):
    basis = sector_basis(layout, k)
    states = basis.states
    fields = site_fields(layout, p)
    diag = (2.0 * basis.occupations() - 1.0) @ fields

    rows = [np.arange(basis.dimension)]
    cols = [np.arange(basis.dimension)]
    data = [diag]
    for i, j, c in bonds(layout, p):
        if c == 0.0:
            continue
        hop = ((states >> i) ^ (states >> j)) & 1
        src = np.flatnonzero(hop)
        dst = basis.encode(states[src] ^ ((1 << i) | (1 << j)))
        rows.append(dst)
        cols.append(src)
        data.append(np.full(len(src), 2.0 * c))

    H = sparse.coo_matrix(
        (np.concatenate(data), (np.concatenate(rows), np.concatenate(cols))),
        shape=(basis.dimension, basis.dimension),
    ).tocsr()
    H.sum_duplicates()
    H.sort_indices()
    return H


def build_hamiltonian(layout: SystemLayout, p: HamiltonianParams, sectors) -> list:
    """One SectorOperator per requested excitation count."""
    ops = []
    for k in sectors:
        if not 0 <= k <= layout.total_sites:
            logger.error(f"Sector k={k} outside 0..{layout.total_sites}")
            raise DomainError(f"sector k={k} outside 0..{layout.total_sites}")
        H = _sector_matrix(layout, p, int(k))
        logger.debug(f"H sector k={k}: dim {H.shape[0]}, nnz {H.nnz}")
        ops.append(SectorOperator(int(k), H))
    return ops
