import math
import sys
from datetime import date, timedelta
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from gtecon.ingest import PrevalencePoint, synthesize_incomes  # noqa: E402


@pytest.fixture(scope="session")
def incomes():
    return {"02000": synthesize_incomes("02000", 20000, math.log(100.0), 0.6, seed=7)}


def points(location, prevalences, start=date(2020, 11, 1)):
    return [PrevalencePoint(location, start + timedelta(days=i), p) for i, p in enumerate(prevalences)]


@pytest.fixture
def write_inputs(tmp_path):
    """Incidence CSV and YAML config for a one-district study; returns the config path."""

    def make(incidences=(50.0, 120.0, 300.0), extra=""):
        rows = "".join(f"02000,2020-11-{i + 1:02d},{v}\n" for i, v in enumerate(incidences))
        (tmp_path / "incidence.csv").write_text("Landkreis_id,Meldedatum,Inzidenz_7-Tage\n" + rows + "09162,2020-11-01,80\n")
        config = tmp_path / "run.yaml"
        config.write_text(
            "seed: 20201101\n"
            "locations: ['02000']\n"
            "algorithms: [2, 3]\n"
            "n_sim: 25\n"
            "incidence:\n  path: incidence.csv\n"
            "synthetic_income:\n  median: 100\n  scale: 0.6\n  count: 5000\n" + extra
        )
        return config

    return make


def pytest_terminal_summary(terminalreporter):
    module = sys.modules.get("test_acceptance")
    if module is None or not module.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(module.RESULTS):
        ok, detail = module.RESULTS[number]
        terminalreporter.write_line(f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}")
