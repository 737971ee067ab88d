"""Reverse-mode automatic differentiation over dense numpy arrays.

The design is a flat tape rather than a graph walk: every primitive that
runs while a ``Tape`` is active appends its backward rule, and
``backward`` replays the rules in reverse recorded order. Because the
forward pass appends in execution order, the reversed tape is already a
valid topological order and each rule fires at most once. A tape is
meant to live for a single training step; replaying it twice is an
error.

Tensors default to float32. Verification code (gradient checks, FFT
oracles) switches to float64 through :func:`precision` instead of
threading dtype arguments everywhere.

Broadcasting is deliberately restricted to scalar-vs-tensor. Shape
mismatches raise immediately; anything fancier must be spelled out by
the caller.
"""
from __future__ import annotations

import contextlib
from typing import Callable, Iterable, Sequence

import numpy as np

_DEFAULT_DTYPE = np.dtype(np.float32)
_TAPE_STACK: list["Tape"] = []

_ALLOWED_DTYPES = (np.dtype(np.float32), np.dtype(np.float64))


def default_dtype() -> np.dtype:
    """Return the dtype new tensors receive when none is specified."""
    return _DEFAULT_DTYPE


def set_default_dtype(dtype) -> None:
    """Set the process-wide default dtype (float32 or float64)."""
    dt = np.dtype(dtype)
    if dt not in _ALLOWED_DTYPES:
        raise ValueError(f"unsupported compute dtype {dt}; use float32 or float64")
    global _DEFAULT_DTYPE
    _DEFAULT_DTYPE = dt


@contextlib.contextmanager
def precision(dtype):
    """Temporarily switch the default dtype.

    Typical use is ``with precision(np.float64):`` around numerical
    verification so the production default stays float32.
    """
    previous = _DEFAULT_DTYPE
    set_default_dtype(dtype)
    try:
        yield
    finally:
        set_default_dtype(previous)


class Tensor:
    """A dense real array that can participate in gradient recording.

    Attributes:
        data: the underlying numpy array (row-major).
        requires_grad: whether backward passes accumulate into ``grad``.
        grad: accumulated gradient, or None before the first backward.
    """

    __slots__ = ("data", "requires_grad", "grad")

    def __init__(self, data, requires_grad: bool = False, dtype=None):
        dt = np.dtype(dtype) if dtype is not None else _DEFAULT_DTYPE
        if dt not in _ALLOWED_DTYPES:
            raise ValueError(f"unsupported tensor dtype {dt}")
        arr = np.array(data, dtype=dt, copy=True)
        if arr.size == 0:
            raise ValueError(f"tensors must be non-empty, got shape {arr.shape}")
        self.data = arr
        self.requires_grad = bool(requires_grad)
        self.grad: np.ndarray | None = None

    @classmethod
    def _wrap(cls, arr: np.ndarray, requires_grad: bool) -> "Tensor":
        # Internal constructor for op results: no copy, no dtype coercion.
        t = cls.__new__(cls)
        t.data = arr
        t.requires_grad = requires_grad
        t.grad = None
        return t

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    @property
    def dtype(self) -> np.dtype:
        return self.data.dtype

    def item(self) -> float:
        if self.data.size != 1:
            raise ValueError(f"item() needs a single-element tensor, got shape {self.shape}")
        return float(self.data.reshape(-1)[0])

    def clear_grad(self) -> None:
        self.grad = None

    def __repr__(self) -> str:
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.shape}, dtype={self.dtype}{flag})"

    # Operator sugar; the real work lives in the module-level primitives.
    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        return mul(self, -1.0)


class Tape:
    """Ordered record of primitives for one forward pass.

    Use as a context manager; ops executed inside record themselves when
    any input requires a gradient. ``backward`` consumes the tape; a
    second backward on the same tape raises.
    """

    __slots__ = ("_records", "_output_ids", "_consumed")

    def __init__(self):
        self._records: list[tuple[Tensor, Callable[[np.ndarray], None]]] = []
        self._output_ids: set[int] = set()
        self._consumed = False

    def __enter__(self) -> "Tape":
        _TAPE_STACK.append(self)
        return self

    def __exit__(self, exc_type, exc, tb) -> bool:
        popped = _TAPE_STACK.pop()
        if popped is not self:
            raise RuntimeError("tape stack corrupted: exited a tape that is not innermost")
        return False

    def __len__(self) -> int:
        return len(self._records)

    def _record(self, output: Tensor, rule: Callable[[np.ndarray], None]) -> None:
        self._records.append((output, rule))
        self._output_ids.add(id(output))


def active_tape() -> Tape | None:
    return _TAPE_STACK[-1] if _TAPE_STACK else None


def accumulate_grad(t: Tensor, g: np.ndarray) -> None:
    """Add ``g`` into ``t.grad``; no-op for tensors without gradients."""
    if not t.requires_grad:
        return
    if t.grad is None:
        t.grad = np.zeros_like(t.data)
    t.grad += g


def result_tensor(arr: np.ndarray, inputs: Iterable[Tensor | None],
                  rule: Callable[[np.ndarray], None]) -> Tensor:
    """Wrap an op result, recording ``rule`` if gradients are being taped.

    This is the extension point every primitive goes through, including
    the ones defined in other modules (convolution, spectral filtering).
    """
    tape = active_tape()
    needed = tape is not None and any(
        isinstance(i, Tensor) and i.requires_grad for i in inputs
    )
    out = Tensor._wrap(arr, needed)
    if needed:
        tape._record(out, rule)
    return out


def backward(loss: Tensor) -> None:
    """Propagate gradients from a scalar loss through the active tape.

    The tape is walked once in reverse recorded order and then marked
    consumed. Tensors whose value never reached the loss keep
    ``grad=None`` and their rules are skipped.
    """
    tape = active_tape()
    if tape is None:
        raise RuntimeError("backward() requires an active Tape context")
    if loss.data.size != 1:
        raise ValueError(f"loss must be a scalar tensor, got shape {loss.shape}")
    if tape._consumed:
        raise RuntimeError("tape already consumed; record a fresh forward pass before backward()")
    if id(loss) not in tape._output_ids:
        raise RuntimeError("loss was not recorded on the active tape")
    tape._consumed = True
    loss.grad = np.ones_like(loss.data)
    for output, rule in reversed(tape._records):
        g = output.grad
        if g is None:
            continue
        rule(g)


def clear_gradients(params: Sequence[Tensor]) -> None:
    for p in params:
        p.grad = None


def _as_operand(value, name: str):
    """Split an op argument into (Tensor-or-None, ndarray-or-float)."""
    if isinstance(value, Tensor):
        return value, value.data
    if isinstance(value, (int, float, np.floating, np.integer)):
        return None, float(value)
    raise TypeError(f"{name} expects a Tensor or a scalar, got {type(value).__name__}")


def _check_binary_shapes(op: str, a_data, b_data) -> None:
    sa = getattr(a_data, "shape", ())
    sb = getattr(b_data, "shape", ())
    if sa == sb:
        return
    if np.size(a_data) == 1 or np.size(b_data) == 1:
        return
    raise ValueError(
        f"{op}: shape mismatch {sa} vs {sb}; only scalar-vs-tensor broadcasting is supported"
    )


def _reduce_to(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Collapse a broadcast gradient back to the operand's shape."""
    if g.shape == shape:
        return g
    return np.asarray(g.sum(), dtype=g.dtype).reshape(shape)


def add(a, b) -> Tensor:
    """Elementwise a + b; b may be a scalar or an equal-shape tensor."""
    at, ad = _as_operand(a, "add")
    bt, bd = _as_operand(b, "add")
    if at is None and bt is None:
        raise TypeError("add needs at least one Tensor operand")
    _check_binary_shapes("add", ad, bd)
    arr = ad + bd

    def rule(g: np.ndarray) -> None:
        if at is not None:
            accumulate_grad(at, _reduce_to(g, at.data.shape))
        if bt is not None:
            accumulate_grad(bt, _reduce_to(g, bt.data.shape))

    return result_tensor(arr, (at, bt), rule)


def sub(a, b) -> Tensor:
    """Elementwise a - b with the same operand rules as ``add``."""
    at, ad = _as_operand(a, "sub")
    bt, bd = _as_operand(b, "sub")
    if at is None and bt is None:
        raise TypeError("sub needs at least one Tensor operand")
    _check_binary_shapes("sub", ad, bd)
    arr = ad - bd

    def rule(g: np.ndarray) -> None:
        if at is not None:
            accumulate_grad(at, _reduce_to(g, at.data.shape))
        if bt is not None:
            accumulate_grad(bt, _reduce_to(-g, bt.data.shape))

    return result_tensor(arr, (at, bt), rule)


def mul(a, b) -> Tensor:
    """Elementwise a * b; b may be a scalar or an equal-shape tensor."""
    at, ad = _as_operand(a, "mul")
    bt, bd = _as_operand(b, "mul")
    if at is None and bt is None:
        raise TypeError("mul needs at least one Tensor operand")
    _check_binary_shapes("mul", ad, bd)
    arr = ad * bd

    def rule(g: np.ndarray) -> None:
        if at is not None:
            accumulate_grad(at, _reduce_to(g * bd, at.data.shape))
        if bt is not None:
            accumulate_grad(bt, _reduce_to(g * ad, bt.data.shape))

    return result_tensor(arr, (at, bt), rule)


def relu(a: Tensor) -> Tensor:
    arr = np.maximum(a.data, 0)
    mask = a.data > 0

    def rule(g: np.ndarray) -> None:
        accumulate_grad(a, g * mask)

    return result_tensor(arr, (a,), rule)


def sigmoid(a: Tensor) -> Tensor:
    # Split by sign so neither branch exponentiates a large positive value.
    x = a.data
    arr = np.empty_like(x)
    pos = x >= 0
    arr[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    arr[~pos] = ex / (1.0 + ex)

    def rule(g: np.ndarray) -> None:
        accumulate_grad(a, g * arr * (1.0 - arr))

    return result_tensor(arr, (a,), rule)


def clamp(a: Tensor, lo: float, hi: float) -> Tensor:
    """Clip to [lo, hi]; gradient passes only where the input is inside."""
    if not lo <= hi:
        raise ValueError(f"clamp bounds out of order: lo={lo} > hi={hi}")
    arr = np.clip(a.data, lo, hi)
    mask = (a.data >= lo) & (a.data <= hi)

    def rule(g: np.ndarray) -> None:
        accumulate_grad(a, g * mask)

    return result_tensor(arr, (a,), rule)


def sum_all(a: Tensor) -> Tensor:
    arr = np.asarray(a.data.sum(), dtype=a.data.dtype)

    def rule(g: np.ndarray) -> None:
        accumulate_grad(a, np.broadcast_to(g, a.data.shape))

    return result_tensor(arr, (a,), rule)


def mean_all(a: Tensor) -> Tensor:
    n = a.data.size
    arr = np.asarray(a.data.mean(), dtype=a.data.dtype)

    def rule(g: np.ndarray) -> None:
        accumulate_grad(a, np.broadcast_to(g / n, a.data.shape))

    return result_tensor(arr, (a,), rule)
