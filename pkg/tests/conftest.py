import cmath
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))


def to_complex(z) -> complex:
    """Floating point value of a CycNumber, used as an independent oracle."""
    M = z.conductor
    return sum(float(c) * cmath.exp(2j * cmath.pi * k / M) for k, c in enumerate(z.coeffs))


ACCEPTANCE: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[n])
