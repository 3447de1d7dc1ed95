"""scikit-learn style transformer around a gallery construction."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import as_signals
from .atoms import analysis
from .gallery import get_entry
from .reconstruct import level_duals, reconstruct_full, relative_error


class FrameTransform(TransformerMixin, BaseEstimator):
    """Frame coefficients of signals sampled on a gallery frequency grid.

    Rows of ``X`` are complex frequency samples ``f_hat`` on the grid of the
    chosen entry (``grid_`` after fitting).  ``transform`` returns the frame
    coefficients of all levels concatenated in level order, and
    ``inverse_transform`` reconstructs through the dual frames.

    Parameters
    ----------
    entry : str
        Gallery entry name.
    entry_params : dict, optional
        Overrides passed to the entry builder.
    dual : {"auto", "canonical", "cg", "tight"}
    pathway : {"smooth", "raw"}

    Attributes
    ----------
    system_ : AtomSystem
    grid_ : FrequencyGrid
    duals_ : dict
    n_features_in_ : int
    n_atoms_ : int
    """

    def __init__(self, entry="shannon_1d", entry_params=None, dual="auto", pathway="smooth"):
        self.entry = entry
        self.entry_params = entry_params
        self.dual = dual
        self.pathway = pathway

    def fit(self, X=None, y=None):
        """Build the atom system and its duals.

        ``X`` is only checked against the grid size.
        """
        entry = get_entry(self.entry, **(self.entry_params or {}))
        self.entry_ = entry
        self.system_ = entry.build()
        self.grid_ = self.system_.grid
        self.n_features_in_ = self.grid_.size
        if X is not None:
            as_signals(X, self.n_features_in_)
        self.duals_ = level_duals(self.system_, self.dual)
        self._sizes = [(l.index, l.K) for l in self.system_.levels]
        self.n_atoms_ = int(sum(k for _, k in self._sizes))
        return self

    def transform(self, X):
        check_is_fitted(self, "system_")
        X = as_signals(X, self.n_features_in_)
        coeffs = analysis(self.system_, X)
        return np.concatenate([np.asarray(coeffs[j]).reshape(k, -1) for j, k in self._sizes]).T

    def _split(self, C):
        C = np.atleast_2d(np.asarray(C, dtype=complex))
        if C.shape[1] != self.n_atoms_:
            raise ValueError(f"expected {self.n_atoms_} coefficients per row, got {C.shape[1]}")
        out, start = {}, 0
        for j, k in self._sizes:
            out[j] = C[:, start:start + k].T
            start += k
        return out

    def inverse_transform(self, C):
        check_is_fitted(self, "system_")
        F, _ = reconstruct_full(self.system_, self._split(C), self.duals_, pathway=self.pathway)
        return np.atleast_2d(F)

    def score(self, X, y=None):
        """Negative mean relative reconstruction error (higher is better)."""
        X = as_signals(X, getattr(self, "n_features_in_", np.asarray(X).shape[-1]))
        R = self.inverse_transform(self.transform(X))
        return -float(np.mean(relative_error(R, X, self.grid_)))

    def frame_ratios(self, X):
        """``sum |c|^2 / |f|^2`` for each row of ``X``."""
        C = self.transform(X)
        X = as_signals(X, self.n_features_in_)
        return np.sum(np.abs(C) ** 2, axis=1) / self.grid_.norm2(X)
