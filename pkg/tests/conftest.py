from pathlib import Path

import pytest

ROOT = Path(__file__).resolve().parents[1]
MODELS = ROOT / "models"

ACCEPTANCE: list[str] = []


@pytest.fixture
def model_text():
    def read(name: str) -> str:
        return (MODELS / f"{name}.model").read_text()

    return read


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE:
            terminalreporter.write_line(line)
