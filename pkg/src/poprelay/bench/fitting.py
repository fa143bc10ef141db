"""Response-time model families and their least-squares fits.

* ``poly2``  y = a0 + a1*x + a2*x**2
* ``invlog`` y = a - b*ln(x - c), defined for x > c
* ``linear`` y = intercept + slope*x
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from ..errors import DegenerateFit, ExtrapolationRefused, InvalidArgument, InvalidDomain

FAMILIES = ("poly2", "invlog", "linear")

_COEFF_NAMES = {
    "poly2": ("a0", "a1", "a2"),
    "invlog": ("a", "b", "c"),
    "linear": ("intercept", "slope"),
}


@dataclass(frozen=True)
class FitModel:
    family: str
    coefficients: tuple[float, ...]
    domain: tuple[float, float] | None = None
    rms_residual: float = 0.0
    n_samples: int = 0
    n_outliers_removed: int = 0
    label: str = field(default="", compare=False)

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise InvalidArgument(f"unknown model family {self.family!r}")
        if len(self.coefficients) != len(_COEFF_NAMES[self.family]):
            raise InvalidArgument(f"{self.family} takes {len(_COEFF_NAMES[self.family])} coefficients")

    @property
    def named(self) -> dict[str, float]:
        return dict(zip(_COEFF_NAMES[self.family], self.coefficients))

    @property
    def intercept(self) -> float:
        if self.family != "linear":
            raise InvalidArgument("intercept is defined for linear models only")
        return self.coefficients[0]

    @property
    def slope(self) -> float:
        if self.family != "linear":
            raise InvalidArgument("slope is defined for linear models only")
        return self.coefficients[1]

    def in_domain(self, x: float) -> bool:
        if self.domain is None:
            return True
        lo, hi = self.domain
        return lo <= x <= hi

    def evaluate(self, x):
        """Raw model value; no domain or extrapolation checks."""
        x = np.asarray(x, dtype=float)
        c = self.coefficients
        if self.family == "poly2":
            out = c[0] + c[1] * x + c[2] * x * x
        elif self.family == "linear":
            out = c[0] + c[1] * x
        else:
            out = c[0] - c[1] * np.log(x - c[2])
        return float(out) if out.ndim == 0 else out

    def predict(self, x: float) -> float:
        """Model value at ``x``.

        invlog refuses x <= c.  poly2 refuses points outside the fitted domain
        where the curve is already falling, because a falling response time
        there is an artifact of the quadratic term.
        """
        if self.family == "invlog" and x <= self.coefficients[2]:
            raise InvalidDomain(f"invlog model undefined for x={x} <= c={self.coefficients[2]}")
        if self.family == "poly2" and not self.in_domain(x):
            _, a1, a2 = self.coefficients
            if a1 + 2 * a2 * x < 0:
                raise ExtrapolationRefused(
                    f"x={x} is outside the fitted domain where the quadratic model decreases"
                )
        return self.evaluate(x)

    def to_dict(self) -> dict:
        return {
            "family": self.family,
            "coefficients": self.named,
            "domain": list(self.domain) if self.domain is not None else None,
            "rms_residual": self.rms_residual,
            "n_samples": self.n_samples,
            "n_outliers_removed": self.n_outliers_removed,
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "FitModel":
        family = data["family"]
        coeffs = data["coefficients"]
        if isinstance(coeffs, Mapping):
            coeffs = [coeffs[name] for name in _COEFF_NAMES[family]]
        domain = data.get("domain")
        return cls(
            family,
            tuple(float(v) for v in coeffs),
            tuple(domain) if domain is not None else None,
            float(data.get("rms_residual", 0.0)),
            int(data.get("n_samples", 0)),
            int(data.get("n_outliers_removed", 0)),
        )


def _arrays(xs, ys) -> tuple[np.ndarray, np.ndarray]:
    x = np.asarray(xs, dtype=float)
    y = np.asarray(ys, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise InvalidArgument("xs and ys must be 1-d sequences of equal length")
    if not (np.isfinite(x).all() and np.isfinite(y).all()):
        raise InvalidArgument("xs and ys must be finite")
    return x, y


def _rms(residuals: np.ndarray) -> float:
    return float(np.sqrt(np.mean(residuals * residuals))) if residuals.size else 0.0


def fit_poly2(xs: Sequence[float], ys: Sequence[float]) -> FitModel:
    """Least-squares quadratic, solved by QR on a centred and scaled design matrix."""
    x, y = _arrays(xs, ys)
    if np.unique(x).size < 3:
        raise DegenerateFit("poly2 fit needs at least 3 distinct x values")
    mu = x.mean()
    s = x.std()
    t = (x - mu) / s
    design = np.column_stack([np.ones_like(t), t, t * t])
    q, r = np.linalg.qr(design)
    if np.min(np.abs(np.diag(r))) < 1e-12 * np.max(np.abs(np.diag(r))):
        raise DegenerateFit("poly2 design matrix is rank deficient")
    c0, c1, c2 = np.linalg.solve(r, q.T @ y)
    # back to powers of raw x
    a2 = c2 / (s * s)
    a1 = c1 / s - 2.0 * c2 * mu / (s * s)
    a0 = c0 - c1 * mu / s + c2 * mu * mu / (s * s)
    model = FitModel("poly2", (float(a0), float(a1), float(a2)), (float(x.min()), float(x.max())))
    return _with_stats(model, x, y)


def fit_linear(xs: Sequence[float], ys: Sequence[float]) -> FitModel:
    x, y = _arrays(xs, ys)
    if np.unique(x).size < 2:
        raise DegenerateFit("linear fit needs at least 2 distinct x values")
    xm, ym = x.mean(), y.mean()
    dx = x - xm
    slope = float(np.dot(dx, y - ym) / np.dot(dx, dx))
    intercept = float(ym - slope * xm)
    model = FitModel("linear", (intercept, slope), (float(x.min()), float(x.max())))
    return _with_stats(model, x, y)


def fit_invlog(xs: Sequence[float], ys: Sequence[float], resolution: float = 0.01) -> FitModel:
    """Grid search over the shift c in (0, min(x)); (a, b) by least squares at each c.

    Candidates are ``resolution * k`` for k = 1, 2, ... strictly below min(x).
    The candidate with the smallest RMS residual wins (ties: smallest c).
    """
    x, y = _arrays(xs, ys)
    if not resolution > 0:
        raise InvalidArgument("resolution must be positive")
    if np.unique(x).size < 2:
        raise DegenerateFit("invlog fit needs at least 2 distinct x values")
    xmin = float(x.min())
    k_max = math.ceil(xmin / resolution) - 1
    if k_max < 1:
        raise InvalidDomain(f"min(x)={xmin} leaves no grid point in (0, min(x)) at resolution {resolution}")
    cs = resolution * np.arange(1, k_max + 1, dtype=float)
    cs = cs[cs < xmin]

    best = (math.inf, None)
    ym = y.mean()
    for chunk in np.array_split(cs, max(1, cs.size // 512)):
        logs = np.log(x[None, :] - chunk[:, None])
        lm = logs.mean(axis=1, keepdims=True)
        dl = logs - lm
        var = np.einsum("ij,ij->i", dl, dl)
        ok = var > 0
        slope = np.where(ok, (dl @ (y - ym)) / np.where(ok, var, 1.0), 0.0)
        intercept = ym - slope * lm[:, 0]
        resid = y[None, :] - (intercept[:, None] + slope[:, None] * logs)
        rms = np.sqrt(np.mean(resid * resid, axis=1))
        rms[~ok] = np.inf
        i = int(np.argmin(rms))
        if rms[i] < best[0]:
            best = (float(rms[i]), (float(intercept[i]), float(-slope[i]), float(chunk[i])))
    if best[1] is None:
        raise DegenerateFit("no grid point produced a finite invlog fit")
    model = FitModel("invlog", best[1], (xmin, float(x.max())))
    return _with_stats(model, x, y)


def _with_stats(model: FitModel, x: np.ndarray, y: np.ndarray) -> FitModel:
    resid = y - model.evaluate(x)
    return FitModel(model.family, model.coefficients, model.domain, _rms(resid), int(x.size), 0)


def fit(family: str, xs, ys, **kwargs) -> FitModel:
    if family == "poly2":
        return fit_poly2(xs, ys)
    if family == "linear":
        return fit_linear(xs, ys)
    if family == "invlog":
        return fit_invlog(xs, ys, **kwargs)
    raise InvalidArgument(f"unknown model family {family!r}")
