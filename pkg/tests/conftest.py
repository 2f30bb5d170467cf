import numpy as np
import pytest

from simwave.core import PropagationSet

_ACCEPTANCE_LINES = []


@pytest.fixture
def report():
    """Record one pass/fail line for the terminal summary."""
    def add(line):
        _ACCEPTANCE_LINES.append(line)
        print(line)
    return add


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def random_props(rng, layers, n, n_in=None, n_out=None):
    """Propagation set with CN(0, 1/n) entries."""
    n_in = n if n_in is None else n_in
    n_out = n if n_out is None else n_out

    def cn(shape, var):
        return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) * np.sqrt(var / 2)
    mats = [cn((n, n_in), 1.0 / n_in)] + [cn((n, n), 1.0 / n) for _ in range(layers - 1)]
    return PropagationSet(tuple(mats), cn((n_out, n), 1.0 / n))


def naive_product(props, theta):
    """Left-to-right product of explicit diagonal and propagation matrices."""
    G = props.layers[0]
    for l in range(props.depth):
        D = np.diag(np.exp(1j * theta[l]))
        G = D @ G
        G = (props.layers[l + 1] if l + 1 < props.depth else props.exit) @ G
    return G
