"""Shared fixtures; the small engine keeps simulation tests fast."""

import numpy as np
import pytest

from flatbench import imaging, sim
from flatbench.config import EngineConfig


@pytest.fixture(scope="session")
def small_engine() -> EngineConfig:
    """Engine with a reduced particle grid for quick episodes."""
    return EngineConfig(cloth_nx=25, cloth_ny=25)


@pytest.fixture(scope="session")
def small_flat(small_engine):
    st = sim.init_flat(small_engine.cloth_nx, small_engine.cloth_ny,
                       small_engine.rest_len)
    return sim.settle(st, small_engine.sim)


@pytest.fixture(scope="session")
def small_flat_image(small_engine, small_flat):
    return sim.render_topdown(small_flat, small_engine.camera,
                              small_engine.cloth_color,
                              small_engine.bg_color)


@pytest.fixture(scope="session")
def small_flat_mask(small_engine, small_flat_image):
    return imaging.segment_cloth(small_flat_image, small_engine.hsv)


def grating(width, height, wavelength, angle, amplitude=100.0, mean=128.0):
    """Sinusoidal stripes whose crests run along `angle`."""
    ys, xs = np.mgrid[0:height, 0:width].astype(np.float64)
    phase = (xs * np.cos(angle + np.pi / 2.0)
             + ys * np.sin(angle + np.pi / 2.0))
    vals = mean + amplitude * np.sin(2.0 * np.pi * phase / wavelength)
    return np.clip(np.round(vals), 0, 255).astype(np.uint8)


@pytest.fixture(scope="session")
def grating_fn():
    return grating
