"""Distillation loss terms as pure functions over caller-provided tensors.

These are the training-time counterparts of the scoring metrics. The
similarity losses reuse the exact same matrix kernel as the proxies, so a
loss evaluated on the proxies' Gram matrices equals the proxy value to the
last bit.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .kernels import Tensor, log_softmax, softmax
from .metrics import SimilarityMatrix, matrix_mean_sq_diff


@dataclass(frozen=True)
class KdLossConfig:
    """Soft-target loss settings: softmax temperature and loss weight."""

    temperature: float = 4.0
    weight: float = 0.9

    def __post_init__(self):
        if self.temperature <= 0:
            raise ValueError(f"temperature must be positive, got {self.temperature}")
        if self.weight < 0:
            raise ValueError(f"weight must be nonnegative, got {self.weight}")


def loss_kd_kl(z_teacher: Tensor, z_student: Tensor, cfg: KdLossConfig = KdLossConfig()) -> float:
    """weight * temperature^2 * soft-target cross-entropy, averaged over the batch."""
    if z_teacher.shape != z_student.shape:
        raise ValueError(f"logit shapes differ: {z_teacher.shape} vs {z_student.shape}")
    rho = cfg.temperature
    p = softmax(z_teacher / rho, axis=1)
    ce = float(-(p * log_softmax(z_student / rho, axis=1)).sum(axis=1).mean())
    return cfg.weight * rho * rho * ce


def _as_square(m, name: str) -> np.ndarray:
    gram = m.gram if isinstance(m, SimilarityMatrix) else np.asarray(m, dtype=np.float64)
    if gram.ndim != 2 or gram.shape[0] != gram.shape[1]:
        raise ValueError(f"{name} must be a square matrix, got shape {gram.shape}")
    return gram


def loss_semantic(g_teacher, g_student) -> float:
    """Size-normalized squared distance between class-similarity matrices."""
    a = _as_square(g_teacher, "teacher similarity")
    b = _as_square(g_student, "student similarity")
    return matrix_mean_sq_diff(a, b)


def loss_relation(a_teacher, a_student) -> float:
    """Size-normalized squared distance between batch-similarity matrices."""
    a = _as_square(a_teacher, "teacher relation")
    b = _as_square(a_student, "student relation")
    return matrix_mean_sq_diff(a, b)


def loss_diswot_total(
    variant: str,
    ce: float,
    kl: float,
    l_ms: float = 0.0,
    l_mr: float = 0.0,
) -> float:
    """Combine the loss terms: "diswot" = ce + kl, "diswot_dagger" adds both
    similarity terms."""
    if variant == "diswot":
        return ce + kl
    if variant == "diswot_dagger":
        return ce + kl + l_ms + l_mr
    raise ValueError(f"unknown loss variant {variant!r}")
