"""Central finite-difference checks of reverse-mode gradients."""

from dataclasses import dataclass, field

import numpy as np

from .errors import ContractError, NumericError
from .tensor import backward

# Coordinates whose analytic and numeric gradients are both below this size
# are compared in absolute terms; finite differences cannot resolve them.
GRAD_FLOOR = 1e-6


def relative_error(analytic, numeric):
    """Symmetric relative error ``|a - n| / (|a| + |n|)`` with a small floor."""
    return abs(analytic - numeric) / max(abs(analytic) + abs(numeric), GRAD_FLOOR)


@dataclass
class GradcheckReport:
    max_rel_error: float
    passed: bool
    tol: float
    per_param: dict = field(default_factory=dict)
    worst: tuple = None
    n_checked: int = 0

    def __str__(self):
        status = "PASS" if self.passed else "FAIL"
        return f"{status} max_rel_error={self.max_rel_error:.3e} (tol {self.tol:.1e}, {self.n_checked} coords)"


def _evaluate(f):
    value = f()
    data = np.asarray(value.data if hasattr(value, "data") else value)
    if data.size != 1 or np.iscomplexobj(data):
        raise ContractError("gradcheck needs f to return a real scalar")
    return float(data.reshape(()))


def gradcheck(f, params, eps=1e-5, tol=1e-4, max_coords=200, seed=0, retries=2):
    """Compare analytic gradients of ``f`` against central differences.

    Parameters
    ----------
    f : callable
        Zero-argument function returning a real scalar Tensor. It must be
        deterministic; freeze any sampling noise before calling.
    params : list of Tensor
        Leaf tensors to check. Their ``.data`` is perturbed in place and
        restored afterwards.
    eps, tol : float
        Finite-difference step and pass threshold on the relative error.
    max_coords : int
        At most this many randomly chosen coordinates per tensor.
    retries : int
        A coordinate that fails is re-measured with ``eps`` shrunk tenfold, up
        to ``retries`` times, keeping the best agreement. This only rescues
        coordinates where the step straddles a ReLU kink; a wrong analytic
        gradient fails at every step size.

    Returns
    -------
    GradcheckReport
    """
    rng = np.random.default_rng(seed)
    for p in params:
        p.grad = None
    loss = f()
    backward(loss)
    analytic = {id(p): (np.zeros_like(p.data) if p.grad is None else p.grad.copy()) for p in params}

    report = GradcheckReport(max_rel_error=0.0, passed=True, tol=tol)
    for i, p in enumerate(params):
        name = p.name or f"param{i}"
        flat = p.data.reshape(-1)
        size = flat.size
        coords = np.arange(size) if size <= max_coords else rng.choice(size, max_coords, replace=False)
        worst = 0.0
        for c in coords:
            a = float(analytic[id(p)].reshape(-1)[c])
            step = eps
            err = np.inf
            for _ in range(retries + 1):
                orig = flat[c]
                flat[c] = orig + step
                up = _evaluate(f)
                flat[c] = orig - step
                down = _evaluate(f)
                flat[c] = orig
                if not (np.isfinite(up) and np.isfinite(down) and np.isfinite(a)):
                    raise NumericError(f"non-finite value while checking {name}[{np.unravel_index(c, p.shape)}]")
                numeric = (up - down) / (2 * step)
                err = min(err, relative_error(a, numeric))
                if err < tol:
                    break
                step /= 10
            report.n_checked += 1
            if err > worst:
                worst = err
            if err > report.max_rel_error:
                report.max_rel_error = err
                report.worst = (name, tuple(int(v) for v in np.unravel_index(c, p.shape)), a, numeric)
        report.per_param[name] = worst
    report.passed = report.max_rel_error < tol
    for p in params:
        p.grad = None
    return report
