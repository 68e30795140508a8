"""
Central finite-difference check of reverse-mode gradients.
"""

import numpy as onp
from dataclasses import dataclass

from thsgr.autodiff.tensor import Tape, Tensor
from thsgr.utils.errors import UsageError

from typing import Callable, List, Sequence, Tuple

KINK_HALVINGS = 4


@dataclass
class GradCheckReport:
    name: str
    max_rel_error: float
    tol: float
    checked: int
    h: float
    min_step: float
    worst_coordinate: str = ''

    @property
    def passed(self) -> bool:
        return bool(self.max_rel_error <= self.tol)

    def __str__(self) -> str:
        status = 'ok' if self.passed else 'FAIL'
        text = f'{self.name}: max rel error {self.max_rel_error:.2e} ({self.checked} coords) {status}'
        if self.worst_coordinate:
            text += f' worst at {self.worst_coordinate}'
        if self.min_step < self.h:
            text += f' step reduced to {self.min_step:.1e}'
        return text


def _scalar(out: Tensor) -> float:
    if not isinstance(out, Tensor) or out.size != 1:
        shape = getattr(out, 'shape', None)
        raise UsageError(f'grad_check needs a scalar-valued function, got shape {shape}')
    return out.item()


def relative_errors(analytic: onp.ndarray, numeric: onp.ndarray, floor: float) -> onp.ndarray:
    """|a - n| / max(|a|, |n|, floor), element-wise."""
    scale = onp.maximum(onp.maximum(onp.abs(analytic), onp.abs(numeric)), floor)
    return onp.abs(analytic - numeric) / scale


def _central_difference(
    f: Callable[..., Tensor],
    inputs: Sequence[Tensor],
    t: Tensor,
    i: int,
    h: float,
    agreement: float,
    floor: float,
) -> Tuple[float, float]:
    """
    Central difference at coordinate i of t, returned with the step it used.
    The step is halved only while the estimates for h and h/2 disagree, which
    happens when a kink of a piecewise-linear activation lies in the stencil.
    """
    value = t.data.flat[i]

    def estimate(step: float) -> float:
        t.data.flat[i] = value + step
        f_plus = _scalar(f(*inputs))
        t.data.flat[i] = value - step
        f_minus = _scalar(f(*inputs))
        t.data.flat[i] = value
        return (f_plus - f_minus) / (2 * step)

    previous = estimate(h)
    for _ in range(KINK_HALVINGS):
        current = estimate(h / 2)
        if relative_errors(onp.float64(previous), onp.float64(current), floor) <= agreement:
            return previous, h
        h, previous = h / 2, current
    return previous, h


def grad_check(
    f: Callable[..., Tensor],
    x: Tensor | Sequence[Tensor],
    h: float = 1e-5,
    tol: float = 1e-4,
    max_checks: int | None = None,
    seed: int = 0,
    name: str = 'grad_check',
    floor: float = 1e-4,
) -> GradCheckReport:
    """
    Compares the tape gradient of the scalar function f(*inputs) with central
    differences. Each checked coordinate contributes |a - n| / max(|a|, |n|, floor)
    for the analytic value a and the numeric value n; the report holds the
    largest of these over all inputs. `floor` bounds the denominator for
    gradients that vanish up to rounding, where the difference quotient is noise.

    Args:
        f: scalar-valued function of the inputs (may ignore them and close over
           parameters that are passed as inputs).
        x: tensor or tensors to differentiate with respect to.
        max_checks: number of randomly drawn coordinates per input, all if None.
    """
    inputs: List[Tensor] = [x] if isinstance(x, Tensor) else list(x)
    previous_flags = [t.requires_grad for t in inputs]
    for t in inputs:
        t.requires_grad = True
        t.grad = None
    try:
        with Tape() as tape:
            out = f(*inputs)
            _scalar(out)
        tape.backward(out)
        analytic = [
            t.grad.copy() if t.grad is not None else onp.zeros_like(t.data) for t in inputs
        ]
        rng = onp.random.default_rng(seed)
        worst, worst_coordinate = 0.0, ''
        min_step = h
        checked = 0
        for n, (t, grad) in enumerate(zip(inputs, analytic)):
            if max_checks is None or max_checks >= t.size:
                coords = onp.arange(t.size)
            else:
                coords = onp.sort(rng.choice(t.size, size=max_checks, replace=False))
            results = [_central_difference(f, inputs, t, int(i), h, tol, floor) for i in coords]
            numeric = onp.array([value for value, _ in results])
            min_step = min([min_step] + [step for _, step in results])
            errors = relative_errors(grad.reshape(-1)[coords], numeric, floor)
            j = int(errors.argmax())
            if errors[j] > worst:
                label = t.name or f'input {n}'
                index = onp.unravel_index(int(coords[j]), t.shape)
                worst, worst_coordinate = float(errors[j]), f'{label}{list(map(int, index))}'
            checked += len(coords)
    finally:
        for t, flag in zip(inputs, previous_flags):
            t.requires_grad = flag
    return GradCheckReport(name, worst, tol, checked, h, min_step, worst_coordinate)
