import json
import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from pastesynth.config import toy_assets_dir  # noqa: E402
from pastesynth.inpaint.stub_server import StubServer  # noqa: E402


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def toy_dir() -> Path:
    return toy_assets_dir()


@pytest.fixture
def gray_server():
    with StubServer(fill="gray") as srv:
        yield srv


def write_config(path: Path, **fields) -> Path:
    path.write_text(json.dumps(fields))
    return path


@pytest.fixture
def toy_config(tmp_path, toy_dir):
    def make(**overrides):
        cfg = {
            "mode": "instance",
            "seed": 7,
            "num_images": 4,
            "objects_per_image": [1, 3],
            "background_dir": str(toy_dir / "backgrounds"),
            "cutout_dir": str(toy_dir / "cutouts"),
            "blend_methods": [{"type": "noblend"}, {"type": "gaussian", "sigma": 2.0}],
            "all_blend_same_image": True,
            "output_dir": str(tmp_path / "out"),
        }
        cfg.update(overrides)
        return write_config(tmp_path / "cfg.json", **cfg)

    return make


_ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def criterion(request):
    """Record one acceptance criterion's outcome; the summary lists every line."""
    from contextlib import contextmanager

    @contextmanager
    def check(number: int, title: str):
        try:
            yield
        except BaseException:
            line = f"criterion {number}: FAIL  {title}"
            raise
        else:
            line = f"criterion {number}: PASS  {title}"
        finally:
            _ACCEPTANCE_LINES.append(line)
            with request.config.pluginmanager.get_plugin("capturemanager").global_and_fixture_disabled():
                print(f"\n{line}")

    return check


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
