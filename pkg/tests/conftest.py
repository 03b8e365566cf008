import numpy as np
import pytest

from neckflex.frameio import DepthFrame, Manifest, RgbFrame, SessionBundle


def random_bundle(rng, width=8, height=6, n=3, **manifest_kw) -> SessionBundle:
    m = Manifest(width=width, height=height, frame_count=n, **manifest_kw)
    rgb = [RgbFrame(rng.integers(0, 256, (height, width, 3), dtype=np.uint8)) for _ in range(n)]
    depth = [DepthFrame(rng.integers(0, 65536, (height, width), dtype=np.uint16)) for _ in range(n)]
    return SessionBundle(m, rgb, depth)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
