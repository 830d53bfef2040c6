"""scikit-learn compatible wrappers.

Rows of ``X`` are sampled paths ``B(0), B(1/n), ..., B(m/n)``; the
transformers map each row to the Riemann-sum sequence of a construction or
to draws of its limit, so the constructions plug into pipelines and
``FunctionTransformer``-style feature code.
"""
from __future__ import annotations

import math

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from . import fbm
from .riemann import SeqExpr, parse_seq, realize
from .verify import _limit_draws


def _as_seq(expr) -> SeqExpr:
    return expr if isinstance(expr, SeqExpr) else parse_seq(expr)


class _PathTransformer(TransformerMixin, BaseEstimator):
    def _validate_paths(self, X, reset: bool):
        X = check_array(X, dtype=np.float64, ensure_min_features=2)
        if reset:
            self.n_features_in_ = X.shape[1]
        elif X.shape[1] != self.n_features_in_:
            raise ValueError(f"X has {X.shape[1]} grid points, fitted with {self.n_features_in_}")
        if not np.allclose(X[:, 0], 0.0):
            raise ValueError("paths must start at B(0) = 0")
        return X

    def _level(self, X) -> int:
        if self.n is not None:
            return int(self.n)
        # grid spans [0, 1] unless n is given
        return X.shape[1] - 1

    def _columns(self, n: int, m: int):
        if self.t is None:
            return slice(None)
        k = int(math.floor(n * self.t + 1e-9))
        if not 0 <= k <= m:
            raise ValueError(f"t = {self.t} lies outside the sampled grid")
        return [k]


class RiemannSumTransformer(_PathTransformer):
    """Realize a sequence construction on each path.

    Parameters
    ----------
    expr : str or SeqExpr
        Construction, e.g. ``"circle(x^2, fromfn(x))"``.
    t : float, optional
        If given, output the single column at ``floor(n t)``; otherwise the
        whole step function.
    n : int, optional
        Grid points per unit time. Defaults to ``X.shape[1] - 1`` (horizon 1).
    """

    def __init__(self, expr="fromfn(x)", t=None, n=None):
        self.expr = expr
        self.t = t
        self.n = n

    def fit(self, X, y=None):
        X = self._validate_paths(X, reset=True)
        self.seq_ = _as_seq(self.expr)
        self.element_ = self.seq_.image()
        self.n_ = self._level(X)
        return self

    def transform(self, X):
        check_is_fitted(self, "seq_")
        X = self._validate_paths(X, reset=False)
        values = realize(self.seq_, X)
        return values[:, self._columns(self.n_, X.shape[1] - 1)]


class LimitLawSampler(_PathTransformer):
    """Draw the limit ``eta + Phi(B(t)) + kappa * int psi(B) dW`` on each path.

    ``W`` is simulated independently of the rows of ``X`` from
    ``random_state``; row ``i`` uses key ``random_state ^ i``.
    """

    def __init__(self, expr="fromfn(x)", t=1.0, n=None, method="conditional-gaussian", random_state=0):
        self.expr = expr
        self.t = t
        self.n = n
        self.method = method
        self.random_state = random_state

    def fit(self, X, y=None):
        X = self._validate_paths(X, reset=True)
        self.element_ = _as_seq(self.expr).image()
        self.n_ = self._level(X)
        return self

    def transform(self, X):
        check_is_fitted(self, "element_")
        X = self._validate_paths(X, reset=False)
        self._columns(self.n_, X.shape[1] - 1)
        seeds = fbm.path_seeds(int(self.random_state), X.shape[0])
        draws = _limit_draws(self.element_, self.t, X, self.n_, seeds, self.method)
        return draws[:, None]
