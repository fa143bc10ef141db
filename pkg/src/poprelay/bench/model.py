"""Workload parameter algebra, reference models, R_pr prediction and crossover."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

from ..errors import InconsistentParams, InvalidArgument, NoCrossover
from .fitting import FitModel

# Reference models measured on the original authors' hardware; kept for
# comparison and for the analytic crossover, not for acceptance of timings.
REFERENCE_NOVEL_RCTP = FitModel("poly2", (1.31855648e3, 4.44412352e-2, -3.70701991e-7), label="novel R_ctp")
REFERENCE_LEGACY_RCTP = FitModel("invlog", (123.78, 18.99, 9.99), label="legacy R_ctp")
REFERENCE_NOVEL_RPR = FitModel("linear", (8.96, 0.015), label="novel R_pr")
REFERENCE_LEGACY_RPR = FitModel("linear", (2328.04, 2.34), label="legacy R_pr")
# Results-chapter sign of the legacy slope; the increasing form above is used for crossover.
REFERENCE_LEGACY_RPR_RESULTS = FitModel("linear", (2328.04, -2.34), label="legacy R_pr (results sign)")

REFERENCE_MODELS = {
    "novel_rctp": REFERENCE_NOVEL_RCTP,
    "legacy_rctp": REFERENCE_LEGACY_RCTP,
    "novel_rpr": REFERENCE_NOVEL_RPR,
    "legacy_rpr": REFERENCE_LEGACY_RPR,
    "legacy_rpr_results_sign": REFERENCE_LEGACY_RPR_RESULTS,
}

_REL_TOL = 1e-9


@dataclass(frozen=True)
class ModelParams:
    lam: float | None  # tx/s
    T_c: float | None  # s
    T_p: float | None  # s
    m: int | None
    n: float
    N: float
    delta_C: int | None
    D: int  # ceil(log2 N), 0 for N <= 1


def _close(a: float, b: float) -> bool:
    return math.isclose(a, b, rel_tol=_REL_TOL, abs_tol=1e-12)


def trie_depth(count: float) -> int:
    """Reporting depth ceil(log2(count)); 0 for a trie of at most one pair."""
    if count < 0:
        raise InvalidArgument("transaction count must be non-negative")
    if count <= 1:
        return 0
    return math.ceil(math.log2(count) - 1e-12)


def param_model(
    n: float | None = None,
    N: float | None = None,
    lam: float | None = None,
    T_c: float | None = None,
    m: int | None = None,
    T_p: float | None = None,
    history: Sequence[float] = (),
    delta_C: int | None = None,
) -> ModelParams:
    """Complete the workload parameters from any sufficient, consistent subset.

    n = lam*T_c, T_p = m*T_c and N = n + sum(history).  Supplying a derived
    value together with everything it derives from is allowed only if they
    agree.
    """
    for name, v in (("n", n), ("N", N), ("lam", lam), ("T_c", T_c), ("T_p", T_p)):
        if v is not None and v < 0:
            raise InvalidArgument(f"{name} must be non-negative")
    if m is not None and m < 1:
        raise InvalidArgument("m must be >= 1")

    if lam is not None and T_c is not None:
        derived = lam * T_c
        if n is not None and not _close(n, derived):
            raise InconsistentParams(f"n={n} but lam*T_c={derived}")
        n = derived
    elif n is not None and T_c is not None and lam is None and T_c > 0:
        lam = n / T_c
    elif n is not None and lam is not None and T_c is None and lam > 0:
        T_c = n / lam

    if m is not None and T_c is not None:
        derived = m * T_c
        if T_p is not None and not _close(T_p, derived):
            raise InconsistentParams(f"T_p={T_p} but m*T_c={derived}")
        T_p = derived
    elif T_p is not None and T_c is not None and m is None and T_c > 0:
        ratio = T_p / T_c
        if not _close(ratio, round(ratio)) or round(ratio) < 1:
            raise InconsistentParams(f"T_p/T_c={ratio} is not a positive whole number of cycles")
        m = int(round(ratio))

    hist = float(sum(history))
    if n is not None:
        derived = n + hist
        if N is not None and not _close(N, derived):
            raise InconsistentParams(f"N={N} but n + sum(history)={derived}")
        N = derived
    elif N is not None:
        n = N - hist
        if n < 0:
            raise InconsistentParams("history exceeds N")
    else:
        raise InvalidArgument("need n, N, or lam and T_c to derive the transaction counts")

    return ModelParams(lam, T_c, T_p, m, n, N, delta_C, trie_depth(N))


def _require_linear(model: FitModel, what: str):
    if model.family != "linear":
        raise InvalidArgument(f"{what} needs a linear model, got {model.family}")


def predict_rpr_novel(lam: float, T_c: float, history_n: Sequence[float], model: FitModel) -> float:
    """R_pr = intercept + slope * (lam*T_c + sum(history_n)), in ms."""
    _require_linear(model, "predict_rpr_novel")
    return model.intercept + model.slope * (lam * T_c + float(sum(history_n)))


def default_lambda_grid(step: float = 50.0) -> list[float]:
    count = int(round((1000.0 - 250.0) / step))
    return [250.0 + i * step for i in range(count + 1)]


def rpr_grid(
    lambda_range: Sequence[float],
    T_p_range: Sequence[float],
    m: int,
    model: FitModel,
) -> list[tuple[float, float, float]]:
    """Rows (lambda, T_p, R_pr_ms) with N = lambda*T_p/m per cycle."""
    _require_linear(model, "rpr_grid")
    if m < 1:
        raise InvalidArgument("m must be >= 1")
    return [
        (float(lam), float(tp), model.intercept + model.slope * (lam * tp / m))
        for lam in lambda_range
        for tp in T_p_range
    ]


@dataclass(frozen=True)
class Crossover:
    delta_C_star: float
    winner_below: str
    winner_above: str
    note: str

    def to_dict(self) -> dict:
        return {
            "delta_C_star": self.delta_C_star,
            "winner_below": self.winner_below,
            "winner_above": self.winner_above,
            "note": self.note,
        }


def crossover(legacy: FitModel, novel: FitModel, n: float) -> Crossover:
    """Cycle difference where legacy and novel proof retrieval times meet.

    Legacy: R = L0 + L1*dC.  Novel with N = n*dC: R = N0 + N1*n*dC.
    """
    _require_linear(legacy, "crossover")
    _require_linear(novel, "crossover")
    novel_rate = novel.slope * n
    denom = novel_rate - legacy.slope
    if denom == 0:
        raise NoCrossover("legacy and novel response lines are parallel")
    star = (legacy.intercept - novel.intercept) / denom
    # the line with the smaller slope wins for large dC
    above = "legacy" if novel_rate > legacy.slope else "novel"
    below = "novel" if above == "legacy" else "legacy"
    if star < 1:
        note = f"{above} always faster in-domain"
    else:
        note = f"{below} faster for delta_C < {star:.6g}, {above} faster beyond"
    return Crossover(float(star), below, above, note)
