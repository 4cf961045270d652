import mpmath
import numpy as np
import pytest

ACCEPTANCE_LINES: list[str] = []


def psi_oracle(n: int, x: float, dps: int = 40) -> float:
    """Oscillator eigenfunction from the closed form with arbitrary-precision Hermite polynomials."""
    with mpmath.workdps(dps):
        x = mpmath.mpf(x)
        val = (mpmath.mpf(2) / mpmath.pi) ** mpmath.mpf("0.25") * mpmath.hermite(n, mpmath.sqrt(2) * x)
        val /= mpmath.sqrt(mpmath.mpf(2) ** n * mpmath.factorial(n))
        return float(val * mpmath.exp(-x * x))


def overlap_oracle(theta: float, x: float, n_max: int) -> np.ndarray:
    return np.array([np.exp(1j * n * theta) * psi_oracle(n, x) for n in range(n_max + 1)])


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
