import numpy as np
import pytest

from latentmc import autodiff as ad


def finite_diff_grads(build_loss, tensors, h=1e-6):
    """Central-difference gradients of a rebuildable scalar loss.

    build_loss() must reconstruct the graph from the tensors' current .data
    and return a scalar Tensor.
    """
    grads = []
    for t in tensors:
        g = np.zeros_like(t.data)
        flat = t.data.reshape(-1)
        gflat = g.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            plus = build_loss().item()
            flat[i] = orig - h
            minus = build_loss().item()
            flat[i] = orig
            gflat[i] = (plus - minus) / (2 * h)
        grads.append(g)
    return grads


def rel_err(a, b):
    a, b = np.asarray(a), np.asarray(b)
    return float(np.max(np.abs(a - b) / np.maximum(1.0, np.maximum(np.abs(a), np.abs(b)))))


def check_grads(build_loss, tensors, tol=1e-5, h=1e-6):
    ad.zero_grad(tensors)
    ad.backward(build_loss())
    fd = finite_diff_grads(build_loss, tensors, h=h)
    worst = max(rel_err(t.grad, f) for t, f in zip(tensors, fd))
    assert worst < tol, f"gradient mismatch: worst relative error {worst}"
    return worst


@pytest.fixture
def rng():
    return np.random.Generator(np.random.PCG64(12345))


# Acceptance-gate results collected by tests/test_acceptance.py; echoed in the
# terminal summary so they are visible even with output capture on.
ACCEPTANCE_RESULTS = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_RESULTS:
        terminalreporter.section("acceptance gate")
        for line in ACCEPTANCE_RESULTS:
            terminalreporter.write_line(line)
