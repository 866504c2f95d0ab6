"""Central finite-difference verification of taped gradients."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping

import numpy as np

from .tensor import Parameter, Tensor


@dataclass
class GradCheckReport:
    tolerance: float
    errors: dict[str, float] = field(default_factory=dict)
    checked: dict[str, int] = field(default_factory=dict)

    @property
    def max_error(self) -> float:
        return max(self.errors.values(), default=0.0)

    @property
    def passed(self) -> bool:
        return self.max_error <= self.tolerance

    def failures(self) -> list[str]:
        return [name for name, err in self.errors.items() if err > self.tolerance]

    def to_dict(self) -> dict:
        return {
            "tolerance": self.tolerance,
            "passed": self.passed,
            "max_error": self.max_error,
            "parameters": {
                name: {"relative_error": err, "coordinates": self.checked[name], "passed": err <= self.tolerance}
                for name, err in self.errors.items()
            },
        }


def relative_error(analytic: np.ndarray, numeric: np.ndarray, floor: float = 1e-8) -> float:
    """||a - n|| / max(||a||, ||n||); zero when both norms are below ``floor``."""
    scale = max(np.linalg.norm(analytic), np.linalg.norm(numeric))
    if scale < floor:
        return 0.0
    return float(np.linalg.norm(analytic - numeric) / scale)


def finite_diff_check(
    f: Callable[[], Tensor],
    params: Mapping[str, Parameter] | Iterable[Parameter],
    step: float = 1e-5,
    tolerance: float = 1e-4,
    max_coords: int | None = None,
    rng: np.random.Generator | None = None,
    corrupt: float | None = None,
) -> GradCheckReport:
    """Compare taped gradients of the scalar ``f()`` against central differences.

    ``max_coords`` limits the number of randomly chosen coordinates checked per
    parameter. ``corrupt`` multiplies the taped gradients before comparison,
    which is how a broken backward pass is simulated.
    """
    if not isinstance(params, Mapping):
        params = {p.name: p for p in params}
    rng = rng if rng is not None else np.random.default_rng(0)

    for p in params.values():
        p.zero_grad()
    loss = f()
    loss.backward()
    analytic = {name: (p.grad if p.grad is not None else np.zeros_like(p.data)) for name, p in params.items()}

    report = GradCheckReport(tolerance=tolerance)
    for name, p in params.items():
        flat = p.data.reshape(-1)
        n = flat.size
        if max_coords is not None and n > max_coords:
            coords = np.sort(rng.choice(n, size=max_coords, replace=False))
        else:
            coords = np.arange(n)
        numeric = np.empty(len(coords))
        for k, idx in enumerate(coords):
            orig = flat[idx]
            flat[idx] = orig + step
            plus = f().item()
            flat[idx] = orig - step
            minus = f().item()
            flat[idx] = orig
            numeric[k] = (plus - minus) / (2.0 * step)
        a = analytic[name].reshape(-1)[coords]
        if corrupt is not None:
            a = a * corrupt
        report.errors[name] = relative_error(a, numeric)
        report.checked[name] = len(coords)
    for p in params.values():
        p.zero_grad()
    return report
