"""Three-step lag-order selection driven by residual autocorrelation.

Step 1 raises all four orders together until the residual ACF stays inside its
confidence band. Step 2 holds p1 and lowers p2 = p3 = p4 together; step 3
lowers p4, p3 and p2 one at a time. Steps 2 and 3 stop at the first reduction
that would bring back autocorrelation or drop a significant top-lag
coefficient.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .ardl import (
    REGRESSORS,
    ArdlFit,
    ArdlOrders,
    DimensionError,
    ModelData,
    Target,
    Transform,
    as_model_data,
    fit_ardl,
)
from .diagnostics import DegenerateInputError, acf, default_max_lag, ljung_box, two_sided_z
from .series import SeriesBundle

STOP_RULES = ("current", "lower")
_STEP3_ORDER = (("p4", "art"), ("p3", "adv"), ("p2", "eco"))


class SelectionError(Exception):
    def __init__(self, message: str, trace: "SelectionTrace"):
        super().__init__(message)
        self.trace = trace


def autocorr_present(
    residuals: Sequence[float], confidence: float = 0.95, max_lag: int | None = None
) -> bool:
    """True when any residual autocorrelation at lags 1..L leaves the band ±z/sqrt(n).

    L defaults to floor(10 * log10(n)). Zero-variance residuals count as free of
    autocorrelation.
    """
    x = np.asarray(residuals, dtype=float)
    n = len(x)
    if n < 8:
        raise ValueError(f"need at least 8 residuals, got {n}")
    if max_lag is None:
        max_lag = min(default_max_lag(n), n - 1)
    try:
        result = acf(x, max_lag, confidence)
    except DegenerateInputError:
        return False
    return result.exceeds_band


@dataclass
class Candidate:
    orders: ArdlOrders
    step: int
    autocorr_detected: bool
    top_lag_significant: bool
    acf_max: float
    band: float
    top_lag_t: dict[str, float]
    top_lag_sig: dict[str, bool]
    critical_value: float
    ljung_box_p: float | None = None
    decision: str = ""
    accepted: bool = False
    fit: ArdlFit | None = field(default=None, repr=False, compare=False)

    def to_dict(self) -> dict:
        return {
            "orders": list(self.orders.as_tuple()),
            "step": self.step,
            "autocorr_detected": self.autocorr_detected,
            "top_lag_significant": self.top_lag_significant,
            "acf_max_abs": self.acf_max,
            "band": self.band,
            "top_lag_t": self.top_lag_t,
            "critical_value": self.critical_value,
            "ljung_box_p": self.ljung_box_p,
            "decision": self.decision,
            "accepted": self.accepted,
        }


@dataclass
class SelectionTrace:
    candidates: list[Candidate] = field(default_factory=list)
    final: ArdlOrders | None = None
    step1_orders: ArdlOrders | None = None
    stop_rule: str = "current"

    def accepted(self) -> Candidate:
        hits = [c for c in self.candidates if c.accepted]
        if len(hits) != 1:
            raise ValueError(f"trace has {len(hits)} accepted candidates")
        return hits[0]

    def path(self) -> list[ArdlOrders]:
        """Orders that became the current model, in order, from the end of step 1."""
        out = []
        for c in self.candidates:
            if c.decision in ("step1-pass", "moved"):
                out.append(c.orders)
        return out

    def to_jsonl(self) -> str:
        return "".join(json.dumps(c.to_dict(), sort_keys=True) + "\n" for c in self.candidates)

    def write_jsonl(self, path: str | Path) -> None:
        Path(path).write_text(self.to_jsonl(), encoding="utf-8")


class _Selector:
    def __init__(self, data: ModelData, transform: Transform | None, confidence: float,
                 cov_type: str, stop_rule: str):
        self.data = data
        self.transform = transform
        self.confidence = confidence
        self.cov_type = cov_type
        self.stop_rule = stop_rule
        self.trace = SelectionTrace(stop_rule=stop_rule)
        self._cache: dict[ArdlOrders, Candidate] = {}

    def evaluate(self, orders: ArdlOrders, step: int) -> Candidate:
        if orders in self._cache:
            return self._cache[orders]
        fit = fit_ardl(self.data, self.data.target, orders, self.transform, self.cov_type)
        resid = fit.residuals
        n = len(resid)
        if n < 8:
            raise DimensionError(f"only {n} residuals for orders {orders}")
        band = two_sided_z(self.confidence) / math.sqrt(n)
        autocorr = autocorr_present(resid, self.confidence)
        try:
            acf_max = acf(resid).max_abs
            lb_p = ljung_box(resid).p_value
        except DegenerateInputError:
            acf_max, lb_p = 0.0, None
        crit = fit.critical_value(self.confidence)
        top_t = fit.top_lag_tvalues()
        top_sig = {reg: bool(abs(t) > crit) for reg, t in top_t.items()}
        cand = Candidate(orders, step, autocorr, any(top_sig.values()), acf_max, band,
                         top_t, top_sig, crit, lb_p, fit=fit)
        self._cache[orders] = cand
        self.trace.candidates.append(cand)
        return cand

    def step1(self, p_max: int) -> Candidate:
        for p in range(1, p_max + 1):
            try:
                cand = self.evaluate(ArdlOrders.uniform(p), step=1)
            except DimensionError as exc:
                raise SelectionError(f"step 1 ran out of observations at p = {p}: {exc}",
                                     self.trace) from exc
            if not cand.autocorr_detected:
                cand.decision = "step1-pass"
                self.trace.step1_orders = cand.orders
                return cand
            cand.decision = "step1-autocorr"
        raise SelectionError(f"residual autocorrelation remains up to p_max = {p_max}", self.trace)

    def _try_lower(self, current: Candidate, lower: ArdlOrders, regs: Sequence[str],
                   step: int) -> Candidate | None:
        """Return the lower candidate if the reduction is allowed, else None."""
        if self.stop_rule == "current":
            if any(current.top_lag_sig[r] for r in regs):
                return None
            cand = self.evaluate(lower, step)
            if cand.autocorr_detected:
                cand.decision = "rejected-autocorr"
                return None
        else:
            cand = self.evaluate(lower, step)
            if cand.autocorr_detected:
                cand.decision = "rejected-autocorr"
                return None
            if any(cand.top_lag_sig[r] for r in regs):
                cand.decision = "rejected-significant"
                return None
        cand.decision = "moved"
        return cand

    def step2(self, current: Candidate) -> Candidate:
        while True:
            o = current.orders
            k = o.p2
            if k == 0:
                return current
            lower = ArdlOrders(o.p1, k - 1, k - 1, k - 1)
            nxt = self._try_lower(current, lower, REGRESSORS, step=2)
            if nxt is None:
                return current
            current = nxt

    def step3(self, current: Candidate) -> Candidate:
        for attr, reg in _STEP3_ORDER:
            while getattr(current.orders, attr) > 0:
                lower = current.orders.replace(**{attr: getattr(current.orders, attr) - 1})
                nxt = self._try_lower(current, lower, (reg,), step=3)
                if nxt is None:
                    break
                current = nxt
        return current


def select_orders(
    data: SeriesBundle | ModelData,
    target: Target | str | None = None,
    transform: Transform | str | None = None,
    p_max: int = 30,
    confidence: float = 0.95,
    cov_type: str = "classical",
    stop_rule: str = "current",
) -> tuple[ArdlOrders, SelectionTrace]:
    """Run the three-step procedure and return the final orders with the trace.

    ``stop_rule="current"`` drops a lag only when the current model's top-lag
    coefficient is insignificant and the reduced model stays free of residual
    autocorrelation. ``stop_rule="lower"`` instead tests the top-lag
    coefficients of the reduced model.

    Raises
    ------
    SelectionError
        If no uniform order up to ``p_max`` clears the autocorrelation check.
    """
    if p_max < 1:
        raise ValueError("p_max must be at least 1")
    if stop_rule not in STOP_RULES:
        raise ValueError(f"stop_rule must be one of {STOP_RULES}")
    data = as_model_data(data, target)
    transform = Transform(transform) if transform is not None else None
    selector = _Selector(data, transform, confidence, cov_type, stop_rule)

    current = selector.step1(p_max)
    current = selector.step2(current)
    current = selector.step3(current)

    current.accepted = True
    selector.trace.final = current.orders
    return current.orders, selector.trace


def selected_fit(trace: SelectionTrace) -> ArdlFit:
    return trace.accepted().fit
