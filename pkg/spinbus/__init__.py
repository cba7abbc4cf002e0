"""Parallel two-qubit gates between registers A and B coupled through an XX spin-chain bus."""
from spinbus.errors import CalibrationError, ConfigError, DomainError, IntegratorError, NumericalError, SpinBusError
from spinbus.hamiltonian import HamiltonianParams, build_hamiltonian
from spinbus.system import RegisterState, SystemLayout, build_layout, encode_product_state

__all__ = [
    "CalibrationError",
    "ConfigError",
    "DomainError",
    "HamiltonianParams",
    "IntegratorError",
    "NumericalError",
    "RegisterState",
    "SpinBusError",
    "SystemLayout",
    "build_hamiltonian",
    "build_layout",
    "encode_product_state",
]
