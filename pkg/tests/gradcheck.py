"""Central finite-difference gradient checking.

Everything runs in float64: with h = 1e-6 the truncation error of the
central difference is ~h^2 and float64 rounding is ~1e-10/h, both well
under the tolerances the checks assert.
"""
import numpy as np

from freqshield.autodiff import Tape, Tensor, backward, precision


def numeric_grad(fn, arrays, index, h=1e-6):
    """Central-difference gradient of scalar fn w.r.t. arrays[index]."""
    base = [np.array(a, dtype=np.float64) for a in arrays]
    target = base[index]
    grad = np.zeros_like(target)
    it = np.nditer(target, flags=["multi_index"])
    while not it.finished:
        idx = it.multi_index
        saved = target[idx]
        target[idx] = saved + h
        plus = fn(*base)
        target[idx] = saved - h
        minus = fn(*base)
        target[idx] = saved
        grad[idx] = (plus - minus) / (2.0 * h)
        it.iternext()
    return grad


def analytic_grads(build, arrays):
    """Tape gradients of scalar build(*tensors) w.r.t. every array."""
    with precision("float64"):
        tensors = [Tensor(a, requires_grad=True) for a in arrays]
        with Tape():
            loss = build(*tensors)
            backward(loss)
        return [None if t.grad is None else t.grad.copy() for t in tensors]


def check_grads(build, numeric_fn, arrays, tol=1e-5, h=1e-6):
    """Assert analytic and numeric gradients agree for every input.

    ``build`` maps Tensors to a scalar Tensor; ``numeric_fn`` maps the
    same arrays to a python float and must not touch the tape.
    """
    analytic = analytic_grads(build, arrays)
    for i in range(len(arrays)):
        expected = numeric_grad(numeric_fn, arrays, i, h=h)
        got = analytic[i]
        assert got is not None, f"input {i} received no gradient"
        scale = max(np.abs(expected).max(), np.abs(got).max(), 1.0)
        err = np.abs(got - expected).max() / scale
        assert err < tol, f"input {i}: gradient error {err:.3e} exceeds {tol:.1e}"
