import os
import sys

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, os.path.dirname(__file__))

from esrsim import fom, netline, presets  # noqa: E402

settings.register_profile("esrsim", deadline=None, max_examples=40, derandomize=True,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("esrsim")

# criterion number -> (passed, detail), filled by test_acceptance
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k:2d}: {'PASS' if ok else 'FAIL'}  {detail}")


@pytest.fixture(scope="session")
def config_study():
    """Configuration study at equal 1 mA short-end current, bare environment."""
    base = presets.esr_device("CPW_TO_CPS", "M1")
    configs = [presets.antenna_line(k, "M1") for k in ("CPS", "CPW", "CPW_TO_CPS")]
    return fom.compare_configurations(base.scene, configs, frequency=10e9, access=base.access, drive="current",
                                      terminal_current=1e-3)


@pytest.fixture(scope="session")
def stack_study():
    dev = presets.esr_device("CPS", "M1")
    return fom.compare_stacks(dev.scene, presets.antenna_line("CPS", "M1", thickness=None), ["poly", "M1"],
                              frequency=10e9, access=dev.access, drive="current", terminal_current=1e-3)


@pytest.fixture(scope="session")
def env_study():
    dev = presets.esr_device("CPW_TO_CPS", "M1", dummies=True, interconnects=True)
    return fom.compare_environment(dev.scene, dev.line, frequency=10e9, access=dev.access)


@pytest.fixture(scope="session")
def fill_sweep():
    """avg_E of the reference device against dummy fill fraction (0 = bare)."""
    out = {}
    for fill in (0.0, 0.1, 0.3, 0.5):
        dev = presets.esr_device("CPW_TO_CPS", "M1", dummies=fill > 0, fill_fraction=fill)
        out[fill] = fom.run_device(dev.scene, dev.line, 10e9, -7.0, dev.access, label=f"fill {fill}").report.avg_E
    return out


@pytest.fixture(scope="session")
def cryo_sweeps():
    dev = presets.esr_device("CPW_TO_CPS", "M1")
    f = np.linspace(0.1e9, 20e9, 101)
    cold = netline.frequency_sweep(dev.scene, dev.line, f, 4.0, dev.access)
    warm = netline.frequency_sweep(dev.scene, dev.line, f, 300.0, dev.access)
    return f, cold, warm


@pytest.fixture(scope="session")
def cps_result():
    """CPS device at -7 dBm, no access line, bare environment."""
    dev = presets.esr_device("CPS", "M1", access=False)
    return dev, fom.run_device(dev.scene, dev.line, 10e9, -7.0, None, label="CPS")
