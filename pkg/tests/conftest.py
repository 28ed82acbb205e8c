import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def write_pgm_bytes(path, values):
    """Write a raw P5 file directly, independent of the package writer."""
    values = np.asarray(values, dtype=np.uint8)
    h, w = values.shape
    with open(path, "wb") as fh:
        fh.write(b"P5\n%d %d\n255\n" % (w, h))
        fh.write(values.tobytes())


def write_ppm_bytes(path, values):
    values = np.asarray(values, dtype=np.uint8)
    h, w, _ = values.shape
    with open(path, "wb") as fh:
        fh.write(b"P6\n%d %d\n255\n" % (w, h))
        fh.write(values.tobytes())
