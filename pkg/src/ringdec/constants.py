"""Physical constants (CODATA-2018, SI units)."""

from dataclasses import dataclass


@dataclass(frozen=True)
class PhysicalConstants:
    """Fundamental constants used throughout; immutable after construction."""

    hbar: float = 1.054571817e-34      # reduced Planck constant, J s
    k_B: float = 1.380649e-23          # Boltzmann constant, J/K
    m_p: float = 1.67262192369e-27     # proton mass, kg


CODATA2018 = PhysicalConstants()
