# tests/dense_oracle.py
"""Full 2**n reference implementation for small layouts (total_sites <= 10).

Index convention matches spinbus: bit s of the basis integer is the
occupation of site s, and sigma_z |1> = +1.
"""
from functools import reduce

import numpy as np
from scipy import linalg as la

from spinbus.gates import pair_basis_states
from spinbus.hamiltonian import bonds, site_fields

I2 = np.eye(2, dtype=complex)
X = np.array([[0, 1], [1, 0]], dtype=complex)
Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
Z = np.diag([-1.0, 1.0]).astype(complex)


def site_operator(n, ops: dict):
    """Tensor product with ops[s] on site s, identity elsewhere (site n-1 is the leading factor)."""
    return reduce(np.kron, [ops.get(s, I2) for s in reversed(range(n))])


def dense_hamiltonian(layout, params):
    """Pauli-sum H = sum c (XX + YY) + sum f Z."""
    n = layout.total_sites
    H = np.zeros((2 ** n, 2 ** n), dtype=complex)
    for i, j, c in bonds(layout, params):
        H += c * (site_operator(n, {i: X, j: X}) + site_operator(n, {i: Y, j: Y}))
    for s, f in enumerate(site_fields(layout, params)):
        if f:
            H += f * site_operator(n, {s: Z})
    return H


def dense_evolve(H, psi, t):
    return la.expm(-1j * t * H) @ psi


def product_state(layout, regs):
    """|alpha>_A |0...0>_chain |beta>_B as a dense vector."""
    n = layout.total_sites
    single = {}
    for nu in range(1, layout.pair_count + 1):
        single[layout.a_site(nu)] = np.asarray(regs.alpha[nu - 1], dtype=complex)
        single[layout.b_site(nu)] = np.asarray(regs.beta[nu - 1], dtype=complex)
    zero = np.array([1.0, 0.0], dtype=complex)
    return reduce(np.kron, [single.get(s, zero) for s in reversed(range(n))])


def dense_partial_trace(layout, ket, bra, pair):
    """Tr_env |ket><bra| onto (A_pair, B_pair), basis index 2a + b."""
    n = layout.total_sites
    keep = [n - 1 - layout.a_site(pair), n - 1 - layout.b_site(pair)]

    def split(v):
        T = np.moveaxis(v.reshape((2,) * n), keep, [0, 1])
        return T.reshape(4, -1)

    return split(ket) @ split(bra).conj().T


def dense_channel(layout, params, pair, t, background):
    """blocks[j, j', q, q'] of the channel with the other pairs fixed to `background`."""
    H = dense_hamiltonian(layout, params)
    U = la.expm(-1j * t * H)
    evolved = [U @ product_state(layout, regs) for regs in pair_basis_states(background, pair)]
    blocks = np.zeros((4, 4, 4, 4), dtype=complex)
    for j in range(4):
        for jp in range(4):
            blocks[j, jp] = dense_partial_trace(layout, evolved[j], evolved[jp], pair)
    return blocks
