import pytest

from dqarls.power import PowerModel, adc_power, network_power, percent_saved, power_table, savings_report

NB_IOT = PowerModel(bandwidth=200e3, conversion_energy=494e-15, node_count=20)


def test_single_adc():
    assert adc_power(NB_IOT, 1) == pytest.approx(494e-15 * 200e3 * 2, rel=1e-12)
    assert adc_power(NB_IOT, 1) == pytest.approx(1.976e-7, rel=1e-9)
    assert adc_power(NB_IOT, 0) == pytest.approx(494e-15 * 200e3)
    for b in range(12):
        assert adc_power(NB_IOT, b + 1) == 2 * adc_power(NB_IOT, b)


def test_network_power():
    assert network_power(NB_IOT, 3) == pytest.approx(40 * 494e-15 * 2e5 * 8, rel=1e-12)
    assert network_power(NB_IOT, 3) == pytest.approx(3.16e-5, rel=1e-3)
    assert network_power(NB_IOT, 12) == pytest.approx(1.62e-2, rel=1e-3)
    for b in range(1, 13):
        assert network_power(NB_IOT, b) == NB_IOT.adcs_per_node * NB_IOT.node_count * adc_power(NB_IOT, b)


def test_savings():
    assert percent_saved(3, 12) == pytest.approx(100 * (1 - 2**-9))
    assert percent_saved(1, 12) == pytest.approx(99.95, abs=0.01)
    assert percent_saved(5, 5) == 0.0
    assert percent_saved(3, 12) > 90
    assert [percent_saved(12 - d, 12) for d in range(6)] == sorted(percent_saved(12 - d, 12) for d in range(6))
    other = PowerModel(bandwidth=1e6, conversion_energy=1e-12, node_count=3, adcs_per_node=1)
    a, b = savings_report(NB_IOT, 2, 9), savings_report(other, 2, 9)
    assert a.percent_saved == b.percent_saved
    assert a.reference_power == network_power(NB_IOT, 9)


def test_table():
    text = power_table(NB_IOT, [1, 3, 12])
    lines = text.strip().splitlines()
    assert lines[0] == "bits,power_watts,percent_saved_vs_reference"
    assert lines[2].startswith("3,3.161600e-05,99.80")
    with pytest.raises(ValueError):
        power_table(NB_IOT, [])


def test_model_validation():
    with pytest.raises(ValueError):
        PowerModel(bandwidth=0)
