import numpy as np
import pytest

from compshock import AugmentedSvmaModel, InstrumentSpec, SvmaModel

# Baseline system: rows (x, w, y), shocks (eps1, eps2, eps3); eps1 and eps2
# form the composite shock. Theta_h = Theta_0 * R**h elementwise for h <= 8.
THETA0 = np.array([
    [1.0, 1.0, 0.4],
    [0.3, -0.5, 1.0],
    [0.9, 0.3, 0.6],
])
DECAY = np.array([
    [0.7, 0.5, 0.6],
    [0.6, 0.8, 0.5],
    [0.85, -0.75, 0.7],
])
H_MAX = 8


def baseline_coeffs():
    return np.array([THETA0 * DECAY**h for h in range(H_MAX + 1)])


def make_baseline(**kw):
    return SvmaModel(baseline_coeffs(), S=2, **kw)


# Augmented system: rows (x1, x2, y), shocks (eps1, eps2, eps3).
PSI_LAGS = [
    np.array([[0.5, 0.1, 0.2], [0.0, 0.4, 0.1], [0.6, 0.2, 0.5]]),
    np.array([[0.2, 0.0, 0.1], [0.1, 0.2, 0.0], [0.3, 0.4, 0.2]]),
    np.array([[0.1, 0.0, 0.0], [0.0, 0.1, 0.0], [0.1, -0.2, 0.1]]),
]


def augmented_coeffs(psi12=0.0, psi21=0.0):
    impact = np.array([[1.0, psi12, 0.3], [psi21, 1.0, -0.2], [0.8, 0.5, 1.0]])
    return np.array([impact] + PSI_LAGS)


def make_augmented(psi12=0.0, psi21=0.0, **kw):
    return AugmentedSvmaModel(augmented_coeffs(psi12, psi21), S=2, **kw)


def two_iv_specs():
    return [InstrumentSpec([1.0, 0.3, 0.0]), InstrumentSpec([0.2, 1.0, 0.0])]


def four_iv_specs():
    """Two instruments per sectoral shock; zero loadings are known a priori."""
    return [
        InstrumentSpec([1.0, 0.0, 0.0]),
        InstrumentSpec([0.7, 0.0, 0.0]),
        InstrumentSpec([0.0, 1.0, 0.0]),
        InstrumentSpec([0.0, 0.6, 0.0]),
    ]


FOUR_IV_PATTERN = np.array([[1, 0], [1, 0], [0, 1], [0, 1]], dtype=bool)


@pytest.fixture
def baseline():
    return make_baseline()


@pytest.fixture
def augmented():
    return make_augmented(no_intersectoral=True)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


# --- acceptance reporting ---------------------------------------------------

ACCEPTANCE_DETAILS = {}
_ACCEPTANCE_OUTCOMES = {}


def record_criterion(number, passed, detail):
    """Store the measured outcome of an acceptance criterion for the summary."""
    ACCEPTANCE_DETAILS[number] = (bool(passed), detail)
    print(f"criterion {number}: {'PASS' if passed else 'FAIL'}: {detail}")


def pytest_runtest_logreport(report):
    name = report.nodeid.rsplit("::", 1)[-1]
    if not name.startswith("test_criterion_"):
        return
    number = int(name.split("_")[2])
    if report.when == "call" or report.failed:
        _ACCEPTANCE_OUTCOMES[number] = report.passed and _ACCEPTANCE_OUTCOMES.get(number, True)


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE_OUTCOMES:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_ACCEPTANCE_OUTCOMES):
        ok = _ACCEPTANCE_OUTCOMES[number]
        detail = ACCEPTANCE_DETAILS.get(number, (ok, "no measurement recorded"))[1]
        terminalreporter.write_line(f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
