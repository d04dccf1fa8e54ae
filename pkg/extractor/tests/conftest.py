import sys
from pathlib import Path

_here = Path(__file__).resolve().parent
sys.path.insert(0, str(_here.parents[0] / "src"))
sys.path.insert(0, str(_here))

import pytest

from folder_fixtures import build_image_folder


@pytest.fixture
def image_folder(tmp_path):
    return build_image_folder(tmp_path / "images")
