"""Mergeable Monte Carlo accumulators and binomial confidence intervals."""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
from scipy import stats as sps


@dataclass(frozen=True)
class ExperimentResult:
    """Trial count with Welford mean / second-moment accumulators.

    ``merge`` uses the pairwise update of Chan, Golub and LeVeque, so partial
    results from any partition of the trials combine to the same moments up
    to rounding.  Diagnostics are merged by summing numeric entries.
    """

    trials: int = 0
    mean: float = 0.0
    m2: float = 0.0
    diagnostics: dict = field(default_factory=dict)
    config: dict = field(default_factory=dict)

    @classmethod
    def from_values(cls, values, diagnostics=None, config=None) -> "ExperimentResult":
        v = np.asarray(values, dtype=float).ravel()
        if v.size == 0:
            return cls(0, 0.0, 0.0, dict(diagnostics or {}), dict(config or {}))
        mu = float(np.mean(v))
        return cls(v.size, mu, float(np.sum((v - mu) ** 2)), dict(diagnostics or {}), dict(config or {}))

    def merge(self, other: "ExperimentResult") -> "ExperimentResult":
        if other.trials == 0:
            return replace(self, diagnostics=_merge_diag(self.diagnostics, other.diagnostics))
        if self.trials == 0:
            return replace(other, diagnostics=_merge_diag(self.diagnostics, other.diagnostics), config=self.config or other.config)
        n = self.trials + other.trials
        delta = other.mean - self.mean
        mean = self.mean + delta * other.trials / n
        m2 = self.m2 + other.m2 + delta * delta * self.trials * other.trials / n
        return ExperimentResult(n, mean, m2, _merge_diag(self.diagnostics, other.diagnostics), self.config or other.config)

    @property
    def variance(self) -> float:
        return self.m2 / (self.trials - 1) if self.trials > 1 else float("nan")

    @property
    def standard_error(self) -> float:
        return float(np.sqrt(self.variance / self.trials)) if self.trials > 1 else float("nan")

    @property
    def variance_standard_error(self) -> float:
        """Normal-theory standard error of the sample variance, sqrt(2/(N-1)) * var."""
        return self.variance * float(np.sqrt(2.0 / (self.trials - 1))) if self.trials > 1 else float("nan")

    def to_dict(self) -> dict:
        return {
            "trials": self.trials,
            "mean": self.mean,
            "variance": self.variance,
            "standard_error": self.standard_error,
            "diagnostics": dict(self.diagnostics),
            "config": dict(self.config),
        }


def _merge_diag(a: dict, b: dict) -> dict:
    out = dict(a)
    for k, v in b.items():
        if k in out and isinstance(v, (int, float)) and isinstance(out[k], (int, float)):
            out[k] = out[k] + v
        else:
            out.setdefault(k, v)
    return out


def reduce_results(parts) -> ExperimentResult:
    """Left fold in the given order (callers pass chunks in trial-index order)."""
    acc = ExperimentResult()
    for p in parts:
        acc = acc.merge(p)
    return acc


def wilson_interval(successes: int, trials: int, confidence: float = 0.95):
    if trials <= 0:
        raise ValueError("need at least one trial")
    ci = sps.binomtest(int(successes), int(trials)).proportion_ci(confidence_level=confidence, method="wilson")
    return float(ci.low), float(ci.high)
