import numpy as np
import pytest

from statphase.filterbank import FilterBank, FilterBankSpec, PrototypeFilter

# acceptance verdicts collected by tests/test_acceptance.py
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k:2d}: {'PASS' if ok else 'FAIL'}  {detail}")


@pytest.fixture(scope="session")
def chirp_bank():
    """103-channel gammachirp (n=4, c=4) cochlear bank, 100-5000 Hz."""
    return FilterBank(FilterBankSpec("cochlear", 100.0, 5000.0, PrototypeFilter.gammachirp(4, 4.0)))


@pytest.fixture(scope="session")
def tone_bank():
    """103-channel gammatone cochlear bank, 100-5000 Hz."""
    return FilterBank(FilterBankSpec("cochlear", 100.0, 5000.0, PrototypeFilter.gammatone(4)))


@pytest.fixture(scope="session")
def small_bank():
    """Small, quick gammachirp bank for unit tests."""
    spec = FilterBankSpec("cochlear", 500.0, 3000.0, PrototypeFilter.gammachirp(4, 2.0),
                          sample_rate_hz=16000.0, density=1.0)
    return FilterBank(spec)


@pytest.fixture(scope="session")
def gauss_bank():
    spec = FilterBankSpec("uniform", 800.0, 3000.0, PrototypeFilter.gaussian(),
                          sample_rate_hz=16000.0, density=2.0)
    return FilterBank(spec)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
