"""Central-difference gradient checking."""

import numpy as np

from .tensor import backward


def numerical_grad(f, arr: np.ndarray, h: float = 1e-6) -> np.ndarray:
    """d f() / d arr by central differences, perturbing ``arr`` in place."""
    grad = np.zeros_like(arr, dtype=np.float64)
    flat = arr.reshape(-1)
    gflat = grad.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        fp = f()
        flat[i] = orig - h
        fm = f()
        flat[i] = orig
        gflat[i] = (fp - fm) / (2 * h)
    return grad


def relative_error(a, b) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    denom = max(np.abs(a).max(), np.abs(b).max(), 1e-12)
    return float(np.abs(a - b).max() / denom)


def check_gradients(build_loss, tensors, h: float = 1e-6) -> dict[str, float]:
    """Compare analytic and numerical gradients for named tensors.

    ``build_loss`` is a zero-argument callable that runs the forward pass and
    returns a scalar Tensor; ``tensors`` maps names to the tracked Tensors
    whose ``.data`` is perturbed. Returns name -> max relative error.
    """
    for t in tensors.values():
        t.grad = None
    backward(build_loss())
    errors = {}
    for name, t in tensors.items():
        analytic = t.grad if t.grad is not None else np.zeros_like(t.data)
        numeric = numerical_grad(lambda: build_loss().item(), t.data, h)
        errors[name] = relative_error(analytic, numeric)
    return errors
