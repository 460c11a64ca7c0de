"""Operation counting and energy estimates.

Multiply-accumulates (MACs) are counted where dense linear algebra
happens: matrix products, row dot products, weighted row scalings and
the dense-mode integration loop. Accumulates (ACs) are counted where
binary spikes do the work: one per input spike arriving at a membrane
and one per emitted spike. Transcendental coordinate maps are counted
as neither; they are bookkeeping of the representation, not synaptic
work, and are identical across the compared modes.

Per-operation energies default to published estimates for 45 nm
arithmetic: 4.6 pJ per MAC and 0.9 pJ per AC.
"""

from dataclasses import dataclass

E_MAC_PJ = 4.6
E_AC_PJ = 0.9


@dataclass
class EnergyMeter:
    """Running operation counts for one measured forward pass."""

    macs: int = 0
    acs: int = 0

    def add_macs(self, n: int) -> None:
        self.macs += int(n)

    def add_acs(self, n: int) -> None:
        self.acs += int(n)

    def energy_mj(self, e_mac_pj: float = E_MAC_PJ,
                  e_ac_pj: float = E_AC_PJ) -> float:
        """Total energy in millijoules under the per-op constants."""
        return (self.macs * e_mac_pj + self.acs * e_ac_pj) * 1e-9


_active = None


def push_meter(meter: EnergyMeter):
    """Install ``meter`` as the recipient of op counts; returns it."""
    global _active
    _active = meter
    return meter


def pop_meter():
    global _active
    _active = None


def count_macs(n: int) -> None:
    if _active is not None:
        _active.add_macs(n)


def count_acs(n: int) -> None:
    if _active is not None:
        _active.add_acs(n)


def meter_active() -> bool:
    return _active is not None
