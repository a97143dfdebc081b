import os

import numpy as np
import pytest

from scenesynth import composer
from scenesynth.blend import ForegroundCutout
from scenesynth.config import EngineConfig
from scenesynth.demo import make_demo_assets
from scenesynth.imgcore import PixelBuffer


@pytest.fixture(scope="session")
def demo_dir(tmp_path_factory):
    d = tmp_path_factory.mktemp("demo")
    make_demo_assets(str(d), seeds_per_class=3)
    return str(d)


@pytest.fixture(scope="session")
def demo_config(demo_dir):
    return os.path.join(demo_dir, "config.yaml")


@pytest.fixture(scope="session")
def novel_dir(tmp_path_factory):
    """Assets for 10 classes; the last two stand in for novel instruments."""
    d = tmp_path_factory.mktemp("novel")
    make_demo_assets(str(d), seeds_per_class=2, n_classes=10)
    return str(d)


@pytest.fixture(scope="session")
def demo_engine(demo_config):
    return EngineConfig.load(demo_config)


@pytest.fixture(scope="session")
def registry(demo_engine):
    return demo_engine.registry()


@pytest.fixture(scope="session")
def background(demo_engine):
    return composer.load_rgb(demo_engine.background_path())


def small_pools(registry, background, seed=7, p=12, q=4, resolution=(96, 96), seeds_per_class=3, **kw):
    spec = composer.PoolSpec(p=p, q_per_seed=q, **kw)
    return composer.build_pools(
        registry, background, spec, seed, resolution=resolution, seeds_per_class=seeds_per_class
    )


@pytest.fixture
def make_pools(registry, background):
    def _make(**kw):
        return small_pools(registry, background, **kw)

    return _make


def rgb(arr):
    return PixelBuffer(np.asarray(arr, dtype=np.uint8))


def disk_cutout(size=21, radius=8, color=(200, 200, 210), class_id=1, cx=None, cy=None):
    yy, xx = np.mgrid[0:size, 0:size]
    cx = size / 2 if cx is None else cx
    cy = size / 2 if cy is None else cy
    alpha = ((xx + 0.5 - cx) ** 2 + (yy + 0.5 - cy) ** 2 <= radius**2) * 255
    data = np.zeros((size, size, 4), dtype=np.uint8)
    data[..., :3] = color
    data[..., 3] = alpha
    return ForegroundCutout(PixelBuffer(data), class_id, f"disk{class_id}")


ACCEPTANCE_LINES: list[str] = []


def record_criterion(number: int, title: str, passed: bool, detail: str) -> bool:
    line = f"{'PASS' if passed else 'FAIL'} criterion {number}: {title} ({detail})"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return passed


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
