import numpy as np
import pytest

from usaug.core import Sample, validate_pair


def speckle(shape, rng, level=0.25):
    """Rayleigh-distributed background, clipped into [0, 1]."""
    return np.clip(rng.rayleigh(level * 0.6, size=shape), 0.0, 1.0)


def rect_phantom(shape=(128, 96), top=70, bottom=80, left=20, right=76, seed=0, bone=0.9):
    """Bright horizontal bone plate over speckle, with an acoustic shadow."""
    rng = np.random.default_rng(seed)
    img = speckle(shape, rng)
    mask = np.zeros(shape, dtype=np.uint8)
    mask[top:bottom, left:right] = 1
    img[top:bottom, left:right] = bone
    img[bottom:, left:right] *= 0.2
    return validate_pair(img, mask, f"rect{seed}")


def disk_mask(shape, centre_row, centre_col, radius):
    yy, xx = np.mgrid[: shape[0], : shape[1]]
    return (((yy - centre_row) ** 2 + (xx - centre_col) ** 2) <= radius**2).astype(np.uint8)


def disk_phantom(shape=(64, 64), centre_row=16, radius=6, seed=0, bone=0.9):
    rng = np.random.default_rng(seed)
    img = speckle(shape, rng)
    mask = disk_mask(shape, centre_row, shape[1] // 2, radius)
    img[mask == 1] = bone
    return validate_pair(img, mask, f"disk{seed}")


def random_mask(rng, shape, blobs=3):
    mask = np.zeros(shape, dtype=np.uint8)
    for _ in range(rng.integers(0, blobs + 1)):
        r0 = rng.integers(0, shape[0])
        c0 = rng.integers(0, shape[1])
        mask[r0 : r0 + rng.integers(1, 12), c0 : c0 + rng.integers(1, 20)] = 1
    return mask


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def rect_sample():
    return rect_phantom()


@pytest.fixture
def disk_sample():
    return disk_phantom()


# one PASS/FAIL line per acceptance criterion at the end of the run

_criteria: dict = {}
_criterion_of: dict = {}


def pytest_collection_modifyitems(items):
    for item in items:
        marker = item.get_closest_marker("criterion")
        if marker is not None:
            number, title = marker.args
            _criteria.setdefault(number, {"title": title, "passed": [], "failed": []})
            _criterion_of[item.nodeid] = number


def pytest_runtest_logreport(report):
    number = _criterion_of.get(report.nodeid)
    if number is None:
        return
    entry = _criteria[number]
    name = report.nodeid.split("::")[-1]
    if report.failed:
        if name not in entry["failed"]:
            entry["failed"].append(name)
    elif report.when == "call" and report.passed:
        entry["passed"].append(name)


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_criteria, key=int):
        entry = _criteria[number]
        ran = entry["passed"] or entry["failed"]
        if not ran:
            status = "SKIP"
        elif entry["failed"]:
            status = "FAIL"
        else:
            status = "PASS"
        detail = f" (failed: {', '.join(entry['failed'])})" if entry["failed"] else ""
        terminalreporter.write_line(f"{status} criterion {number}: {entry['title']}{detail}")
