"""
Featural valuation through the covariance eigenspectrum.

The buyer decomposes its own covariance; the seller measures how much of its
variance lies along each buyer eigenvector; the broker compares the two
spectra coordinate by coordinate. Each party centres with its own column
means, so nothing but the spectrum and the basis ever leaves a party.
"""

import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from graphmarket.graphs.core import GraphSet, sym_eig
from graphmarket.utils.errors import GraphInvariantError, ShapeError, ValidationError

logger = logging.getLogger(__name__)

ORTHONORMAL_TOLERANCE = 1e-6
DEGENERATE_VARIANCE = 1e-12
NEGATIVE_CLAMP = 1e-9


@dataclass(frozen=True, eq=False)
class FeatureSpectrum:
    """Descending eigenvalues with matching eigenvector columns."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    @property
    def dim(self) -> int:
        return int(self.eigenvalues.shape[0])


@dataclass(frozen=True, eq=False)
class ProjectedVariances:
    values: np.ndarray


@dataclass(frozen=True)
class FeaturalScores:
    diversity: float
    relevance: float


def stack_and_center(gs: GraphSet) -> np.ndarray:
    if not gs.has_features:
        raise GraphInvariantError("graph set carries no node features")
    stacked = np.vstack([g.features for g in gs])
    return stacked - stacked.mean(axis=0)


def covariance(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] == 0:
        raise ShapeError(f"expected a non-empty N x r matrix, got shape {x.shape}")
    return (x.T @ x) / x.shape[0]


def buyer_spectrum(x: np.ndarray) -> FeatureSpectrum:
    spectrum = sym_eig(covariance(x))
    eigenvalues = spectrum.eigenvalues[::-1].copy()
    if np.any(eigenvalues < -NEGATIVE_CLAMP):
        logger.warning("covariance has eigenvalue %.3e below zero", float(eigenvalues.min()))
    eigenvalues = np.clip(eigenvalues, 0.0, None)
    eigenvectors = spectrum.eigenvectors[:, ::-1].copy()
    return FeatureSpectrum(eigenvalues=eigenvalues, eigenvectors=eigenvectors)


def check_orthonormal(eigenvectors: np.ndarray) -> np.ndarray:
    basis = np.asarray(eigenvectors, dtype=np.float64)
    if basis.ndim != 2 or basis.shape[0] != basis.shape[1]:
        raise ShapeError(f"basis must be square, got shape {basis.shape}")
    deviation = float(np.max(np.abs(basis.T @ basis - np.eye(basis.shape[1]))))
    if deviation > ORTHONORMAL_TOLERANCE:
        raise ValidationError(f"basis is not orthonormal (max deviation {deviation:.3e})")
    return basis


def seller_projected_variances(x_s: np.ndarray, eigenvectors: np.ndarray) -> ProjectedVariances:
    """lambda_hat_i = || C_s u_i || for every buyer eigenvector u_i, kept in buyer order."""
    basis = check_orthonormal(eigenvectors)
    seller_covariance = covariance(x_s)
    if seller_covariance.shape[0] != basis.shape[0]:
        raise ShapeError(
            f"seller features have dimension {seller_covariance.shape[0]}, "
            f"buyer basis has dimension {basis.shape[0]}"
        )
    return ProjectedVariances(values=np.linalg.norm(seller_covariance @ basis, axis=0))


def _geometric_mean(terms: np.ndarray) -> float:
    if np.any(terms <= 0.0):
        return 0.0
    return float(np.exp(np.mean(np.log(terms))))


def diversity_relevance(lam: Sequence[float], lam_hat: Sequence[float]) -> FeaturalScores:
    lam = np.asarray(lam, dtype=np.float64)
    lam_hat = np.asarray(lam_hat, dtype=np.float64)
    if lam.shape != lam_hat.shape or lam.ndim != 1 or lam.size == 0:
        raise ShapeError(f"spectra must be equal-length vectors, got {lam.shape} and {lam_hat.shape}")
    if np.any(lam < 0) or np.any(lam_hat < 0):
        raise ValidationError("spectra must be non-negative")

    upper = np.maximum(lam, lam_hat)
    degenerate = upper <= DEGENERATE_VARIANCE
    safe_upper = np.where(degenerate, 1.0, upper)
    # a direction with no variance on either side: d = 0, r = 1
    diversity_terms = np.where(degenerate, 0.0, np.abs(lam - lam_hat) / safe_upper)
    relevance_terms = np.where(degenerate, 1.0, np.minimum(lam, lam_hat) / safe_upper)
    return FeaturalScores(
        diversity=_geometric_mean(diversity_terms),
        relevance=_geometric_mean(relevance_terms),
    )
