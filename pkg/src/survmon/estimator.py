"""Scikit-learn style front end: fit synthesizes, predict monitors."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from .monitor import CompiledInvariant
from .scenario import Scenario, build_scenario
from .synthesis import SynthOptions, synthesize
from .validation import check_samples_array


class SurveillanceMonitor(BaseEstimator):
    """Invariant-set health monitor for persistent-surveillance traces.

    ``fit`` takes a scenario (config dict, JSON path, or Scenario) and
    synthesizes one invariant set per part offline; ``predict`` labels
    sample rows (x1, x2, z_1..z_N[, u1, u2]) as healthy/unhealthy, and
    ``score_samples`` returns the worst per-part membership margin, so the
    estimator composes with standard pipelines and thresholding tools.

    Parameters
    ----------
    quantifier : str, default "exists"
        Input quantification of the offline synthesis ("exists",
        "forall_admissible" or "forall_raw").
    tol : float, default 1e-7
        Geometric tolerance used throughout synthesis and checking.
    max_iters : int, default 60
        Iteration cap of the fixed-point computation.
    margin : float, default 0.0
        Minimum membership margin for a sample to count as healthy.
    threads : int, default 1
        Worker cap for the per-part syntheses.
    """

    def __init__(self, quantifier="exists", tol=1e-7, max_iters=60,
                 margin=0.0, threads=1):
        self.quantifier = quantifier
        self.tol = tol
        self.max_iters = max_iters
        self.margin = margin
        self.threads = threads

    def fit(self, scenario, y=None):
        if not isinstance(scenario, Scenario):
            scenario = build_scenario(scenario)
        opts = SynthOptions(tol=self.tol, max_iters=self.max_iters,
                            input_quant=self.quantifier)
        part_ids = scenario.part_ids
        if self.threads > 1:
            with ThreadPoolExecutor(max_workers=self.threads) as pool:
                runs = list(pool.map(lambda pid: synthesize(scenario, [pid], opts),
                                     part_ids))
        else:
            runs = [synthesize(scenario, [pid], opts) for pid in part_ids]
        self.scenario_ = scenario
        self.invariants_ = [inv for inv, _ in runs]
        self.reports_ = [rep for _, rep in runs]
        self.compiled_ = [CompiledInvariant(inv, scenario, self.tol)
                          for inv in self.invariants_]
        self.n_parts_ = len(part_ids)
        return self

    def _check_fitted(self):
        if not hasattr(self, "compiled_"):
            raise NotFittedError("this SurveillanceMonitor is not fitted yet")

    def score_samples(self, X):
        """Worst per-part membership margin per row (negative = outside)."""
        self._check_fitted()
        X, has_input = check_samples_array(X, self.n_parts_)
        scores = np.full(X.shape[0], np.inf)
        for i, ci in enumerate(self.compiled_):
            cols = [0, 1, 2 + i] + ([2 + self.n_parts_, 3 + self.n_parts_]
                                    if has_input else [])
            margins = ci.margins_batch(X[:, cols], with_input=has_input)
            np.minimum(scores, margins, out=scores)
        return scores

    def decision_function(self, X):
        return self.score_samples(X) - self.margin

    def predict(self, X):
        """True where the sample is healthy (all per-part margins >= margin)."""
        return self.decision_function(X) >= 0.0
