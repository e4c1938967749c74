"""ADC power model: each conversion costs ``c`` joules per step, ``2**b`` steps per sample."""
from __future__ import annotations

from dataclasses import dataclass

DEFAULT_BANDWIDTH_HZ = 200e3
DEFAULT_CONVERSION_ENERGY_J = 494e-15
DEFAULT_REFERENCE_BITS = 12


@dataclass(frozen=True)
class PowerModel:
    bandwidth: float = DEFAULT_BANDWIDTH_HZ
    conversion_energy: float = DEFAULT_CONVERSION_ENERGY_J
    node_count: int = 20
    adcs_per_node: int = 2

    def __post_init__(self):
        for name in ("bandwidth", "conversion_energy", "node_count", "adcs_per_node"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")


@dataclass(frozen=True)
class SavingsReport:
    low_bits: int
    reference_bits: int
    low_power: float
    reference_power: float
    percent_saved: float


def adc_power(model: PowerModel, bits: int) -> float:
    """Power of one ADC in watts: ``c * B * 2**b``."""
    return model.conversion_energy * model.bandwidth * 2.0**bits


def network_power(model: PowerModel, bits: int) -> float:
    """Total ADC power of the network in watts."""
    return model.adcs_per_node * model.node_count * adc_power(model, bits)


def percent_saved(low_bits: int, reference_bits: int) -> float:
    return 100.0 * (1.0 - 2.0 ** (low_bits - reference_bits))


def savings_report(model: PowerModel, low_bits: int, reference_bits: int = DEFAULT_REFERENCE_BITS) -> SavingsReport:
    return SavingsReport(
        low_bits=low_bits,
        reference_bits=reference_bits,
        low_power=network_power(model, low_bits),
        reference_power=network_power(model, reference_bits),
        percent_saved=percent_saved(low_bits, reference_bits),
    )


def power_table(model: PowerModel, bits_list, reference_bits: int = DEFAULT_REFERENCE_BITS) -> str:
    """CSV text with ``bits, power_watts, percent_saved_vs_reference``."""
    if not bits_list:
        raise ValueError("at least one bit depth is required")
    rows = ["bits,power_watts,percent_saved_vs_reference"]
    for b in bits_list:
        rows.append(f"{b},{network_power(model, b):.6e},{percent_saved(b, reference_bits):.4f}")
    return "\n".join(rows) + "\n"
