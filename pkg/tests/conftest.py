import numpy as np
import pytest
from scipy import ndimage


def textured(seed: int, size: int = 128, pad: int = 16, sigma: float = 1.5) -> np.ndarray:
    """Smoothed uniform noise stretched to 0..255, with ``pad`` spare pixels per side."""
    rng = np.random.default_rng(seed)
    img = ndimage.gaussian_filter(rng.random((size + 2 * pad, size + 2 * pad)), sigma)
    return (img - img.min()) / (img.max() - img.min()) * 255.0


def shifted_pair(seed: int, dx: int, dy: int, size: int = 128, pad: int = 16):
    """Frames ``a`` and ``b`` where content moves by ``(dx, dy)`` from a to b."""
    big = textured(seed, size, pad)
    a = big[pad:pad + size, pad:pad + size]
    b = big[pad - dy:pad - dy + size, pad - dx:pad - dx + size]
    q = lambda m: np.floor(m + 0.5).astype(np.uint8)
    return q(a), q(b)


@pytest.fixture
def rng():
    return np.random.default_rng(2024)


_VERDICTS = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[_VERDICTS] = []


@pytest.fixture
def verdict(request, capsys):
    """Record and print one PASS/FAIL line for an acceptance criterion."""
    def report(label: str, ok: bool, detail: str) -> bool:
        line = f"[{'PASS' if ok else 'FAIL'}] {label}: {detail}"
        request.config.stash[_VERDICTS].append(line)
        with capsys.disabled():
            print("\n" + line)
        return ok
    return report


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_VERDICTS, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
