import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from commonground.scenario import load_scenario_file, resolve_scenario_path


@pytest.fixture
def load_packaged():
    def _load(name):
        return load_scenario_file(resolve_scenario_path(name))

    return _load


@pytest.fixture
def mug_microwave(load_packaged):
    return load_packaged("mug_microwave")
