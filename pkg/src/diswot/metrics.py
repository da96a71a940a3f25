"""Training-free proxy scores over activation bundles.

Every proxy returns a ProxyScore whose value is oriented so that higher is
better: the two similarity metrics and the KD distances are stored negated
(they measure teacher-student distance, and the best student minimizes it),
while nwot/params/flops are positive as computed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .arch import ArchDescriptor, SearchSpace
from .kernels import Tensor, log_softmax, softmax
from .network import ActivationBundle, NetworkInstance, count_flops, count_params
from .rng import InitSpec, stream

ROW_L2 = "row_l2"
MATRIX_L2 = "matrix_l2"
_NORMALIZATIONS = (ROW_L2, MATRIX_L2)

FC_WEIGHTS = "fc_weights"
FC_WEIGHT_GRADS = "fc_weight_grads"

KD_KINDS = ("kd_kl", "fitnets", "at", "sp", "cc", "rkd", "nst", "pkt")

# Stream key for the fixed FitNets feature projection; spells "FitS".
_FITNETS_ALIGN_SEED = 0x46697453


@dataclass(frozen=True)
class GradCamMaps:
    """Per-class localization maps, one flattened H*W row per class."""

    maps: Tensor
    source: str


@dataclass(frozen=True)
class SimilarityMatrix:
    gram: Tensor
    normalization: str


@dataclass(frozen=True)
class ProxyScore:
    proxy_name: str
    value: float
    higher_is_better: bool


def gradcam_maps(bundle: ActivationBundle, weight_source: str = FC_WEIGHTS) -> GradCamMaps:
    """Class-weighted batch-mean activation maps.

    Row n is sum_c w[n, c] * mean_over_batch(pre_gap_map[:, c]) flattened,
    with w either the classifier weight or its cross-entropy gradient.
    """
    if weight_source == FC_WEIGHTS:
        w = bundle.fc_weight
    elif weight_source == FC_WEIGHT_GRADS:
        w = bundle.fc_weight_grad
    else:
        raise ValueError(f"unknown weight source {weight_source!r}")
    _, c, h, width = bundle.pre_gap_map.shape
    if w.shape[1] != c:
        raise ValueError(f"weight has {w.shape[1]} columns but the map has {c} channels")
    mean_map = bundle.pre_gap_map.mean(axis=0).reshape(c, h * width)
    return GradCamMaps(w @ mean_map, weight_source)


def similarity_matrix(rows: Tensor, normalization: str = ROW_L2) -> SimilarityMatrix:
    """Normalized Gram matrix of the flattened rows.

    row_l2 rescales each row of the Gram matrix to unit L2 norm (zero rows
    stay zero); matrix_l2 divides the whole matrix by its Frobenius norm.
    Both cancel any positive scaling of the input rows.
    """
    if normalization not in _NORMALIZATIONS:
        raise ValueError(f"unknown normalization {normalization!r}")
    flat = np.asarray(rows, dtype=np.float64).reshape(rows.shape[0], -1)
    gram = flat @ flat.T
    if normalization == ROW_L2:
        norms = np.linalg.norm(gram, axis=1, keepdims=True)
        gram = np.divide(gram, norms, out=np.zeros_like(gram), where=norms > 0)
    else:
        norm = np.linalg.norm(gram)
        if norm > 0:
            gram = gram / norm
    return SimilarityMatrix(gram, normalization)


def matrix_mean_sq_diff(a: Tensor, b: Tensor) -> float:
    """Squared Frobenius distance divided by the entry count (1/n^2 for n x n)."""
    if a.shape != b.shape:
        raise ValueError(f"matrix shapes differ: {a.shape} vs {b.shape}")
    return float(np.mean((a - b) ** 2))


def semantic_similarity(teacher: GradCamMaps, student: GradCamMaps, normalization: str = ROW_L2) -> float:
    """Distance between the class-correlation structures of the two map sets."""
    if teacher.maps.shape[0] != student.maps.shape[0]:
        raise ValueError(
            f"class counts differ: {teacher.maps.shape[0]} vs {student.maps.shape[0]}"
        )
    g_t = similarity_matrix(teacher.maps, normalization)
    g_s = similarity_matrix(student.maps, normalization)
    return matrix_mean_sq_diff(g_t.gram, g_s.gram)


def relation_similarity(teacher_feat: Tensor, student_feat: Tensor, normalization: str = ROW_L2) -> float:
    """Distance between the batch-correlation structures of two feature tensors.

    Each sample's features are flattened to one row; feature dimensions may
    differ between the networks, the Gram matrices are B x B either way.
    """
    if teacher_feat.shape[0] != student_feat.shape[0]:
        raise ValueError(
            f"batch sizes differ: {teacher_feat.shape[0]} vs {student_feat.shape[0]}"
        )
    a_t = similarity_matrix(teacher_feat, normalization)
    a_s = similarity_matrix(student_feat, normalization)
    return matrix_mean_sq_diff(a_t.gram, a_s.gram)


def diswot_score_from_bundles(
    teacher: ActivationBundle,
    student: ActivationBundle,
    use_semantic: bool = True,
    use_relation: bool = True,
    weight_source: str = FC_WEIGHTS,
    normalization: str = ROW_L2,
) -> ProxyScore:
    """Negated sum of the semantic and relation distances; higher is better."""
    if not (use_semantic or use_relation):
        raise ValueError("at least one of use_semantic/use_relation must be on")
    total = 0.0
    if use_semantic:
        t_maps = gradcam_maps(teacher, weight_source)
        s_maps = gradcam_maps(student, weight_source)
        total += semantic_similarity(t_maps, s_maps, normalization)
    if use_relation:
        total += relation_similarity(teacher.pre_gap_map, student.pre_gap_map, normalization)
    return ProxyScore("diswot", -total, True)


def diswot_score(
    teacher: NetworkInstance,
    student_desc: ArchDescriptor,
    space: SearchSpace,
    batch,
    init: InitSpec,
    use_semantic: bool = True,
    use_relation: bool = True,
    weight_source: str = FC_WEIGHTS,
    normalization: str = ROW_L2,
    teacher_bundle: ActivationBundle | None = None,
) -> ProxyScore:
    """Build the student at random init and score it against the teacher.

    Pass teacher_bundle to reuse one teacher forward across many candidates
    (the result is identical to recomputing it here).
    """
    if teacher_bundle is None:
        teacher_bundle = teacher.activations(batch.images, batch.labels)
    student = NetworkInstance(student_desc, space, init)
    student_bundle = student.activations(batch.images, batch.labels)
    return diswot_score_from_bundles(
        teacher_bundle,
        student_bundle,
        use_semantic=use_semantic,
        use_relation=use_relation,
        weight_source=weight_source,
        normalization=normalization,
    )


def nwot_from_codes(codes: Tensor, eps: float = 1e-6) -> float:
    """Log-determinant of the sign-agreement kernel over binary codes [B, U].

    K[i, j] counts the units where samples i and j are both active or both
    inactive; eps regularizes rank-deficient kernels (duplicate codes).
    """
    b = codes.shape[0]
    if b < 2:
        raise ValueError("nwot needs a batch of at least 2 samples")
    active = codes.astype(np.float64)
    inactive = 1.0 - active
    kernel = active @ active.T + inactive @ inactive.T
    kernel = kernel + eps * np.eye(b)
    _, logdet = np.linalg.slogdet(kernel)
    return float(logdet)


def nwot_score(net: NetworkInstance, batch) -> ProxyScore:
    """Score a network by the ReLU sign-agreement kernel across the batch."""
    return ProxyScore("nwot", nwot_from_codes(net.relu_codes(batch.images)), True)


def _row_l2_normalize(rows: Tensor) -> Tensor:
    norms = np.linalg.norm(rows, axis=1, keepdims=True)
    return np.divide(rows, norms, out=np.zeros_like(rows), where=norms > 0)


def _kl_rows(p: Tensor, logp: Tensor, logq: Tensor) -> Tensor:
    """Per-row KL divergence given probabilities and both log terms."""
    terms = np.where(p > 0, p * (logp - logq), 0.0)
    return terms.sum(axis=1)


def _fitnets_projection(c_student: int, c_teacher: int) -> Tensor:
    """Fixed random [Ct, Cs] map aligning student features to teacher width.

    Keyed only by the two widths, so the proxy stays a pure function of the
    bundles. Scaled by 1/sqrt(Cs) to roughly preserve feature magnitude.
    """
    g = stream(_FITNETS_ALIGN_SEED, (c_student << 20) | c_teacher)
    return g.standard_normal((c_teacher, c_student)) / np.sqrt(c_student)


def _kd_kl(t: ActivationBundle, s: ActivationBundle, rho: float) -> float:
    zt = t.logits / rho
    zs = s.logits / rho
    p = softmax(zt, axis=1)
    return float(_kl_rows(p, log_softmax(zt, axis=1), log_softmax(zs, axis=1)).mean())


def _fitnets(t: ActivationBundle, s: ActivationBundle) -> float:
    ft = t.penultimate_features
    fs = s.penultimate_features
    if fs.shape[1] != ft.shape[1]:
        fs = fs @ _fitnets_projection(fs.shape[1], ft.shape[1]).T
    return float(np.mean((ft - fs) ** 2))


def _attention_rows(pre_gap: Tensor) -> Tensor:
    att = (pre_gap**2).sum(axis=1)
    return _row_l2_normalize(att.reshape(att.shape[0], -1))


def _at(t: ActivationBundle, s: ActivationBundle) -> float:
    if t.pre_gap_map.shape[2:] != s.pre_gap_map.shape[2:]:
        raise ValueError(
            f"attention maps need equal spatial dims, got {t.pre_gap_map.shape[2:]}"
            f" vs {s.pre_gap_map.shape[2:]}"
        )
    diff = _attention_rows(t.pre_gap_map) - _attention_rows(s.pre_gap_map)
    return float((diff**2).sum(axis=1).mean())


def _correlation_matrix(features: Tensor) -> Tensor:
    centered = features - features.mean(axis=1, keepdims=True)
    unit = _row_l2_normalize(centered)
    return unit @ unit.T


def _cc(t: ActivationBundle, s: ActivationBundle) -> float:
    rt = _correlation_matrix(t.penultimate_features)
    rs = _correlation_matrix(s.penultimate_features)
    return matrix_mean_sq_diff(rt, rs)


def _pairwise_distances(features: Tensor) -> Tensor:
    sq = (features**2).sum(axis=1)
    d2 = sq[:, None] + sq[None, :] - 2.0 * (features @ features.T)
    return np.sqrt(np.maximum(d2, 0.0))


def _rkd(t: ActivationBundle, s: ActivationBundle) -> float:
    dt = _pairwise_distances(t.penultimate_features)
    ds = _pairwise_distances(s.penultimate_features)
    return matrix_mean_sq_diff(dt, ds)


def _nst(t: ActivationBundle, s: ActivationBundle) -> float:
    if t.pre_gap_map.shape[2:] != s.pre_gap_map.shape[2:]:
        raise ValueError(
            f"channel maps need equal spatial dims, got {t.pre_gap_map.shape[2:]}"
            f" vs {s.pre_gap_map.shape[2:]}"
        )
    b = t.pre_gap_map.shape[0]
    total = 0.0
    for i in range(b):
        mt = _row_l2_normalize(t.pre_gap_map[i].reshape(t.pre_gap_map.shape[1], -1))
        ms = _row_l2_normalize(s.pre_gap_map[i].reshape(s.pre_gap_map.shape[1], -1))
        total += float((mt @ mt.T).mean() + (ms @ ms.T).mean() - 2.0 * (mt @ ms.T).mean())
    return total / b


def _pkt_probabilities(features: Tensor) -> Tensor:
    cos = _row_l2_normalize(features) @ _row_l2_normalize(features).T
    k = (cos + 1.0) / 2.0
    return k / k.sum(axis=1, keepdims=True)


def _pkt(t: ActivationBundle, s: ActivationBundle) -> float:
    pt = _pkt_probabilities(t.penultimate_features)
    ps = _pkt_probabilities(s.penultimate_features)
    logp = np.log(np.maximum(pt, 1e-300))
    logq = np.log(np.maximum(ps, 1e-300))
    return float(_kl_rows(pt, logp, logq).mean())


def kd_distance(
    kind: str,
    teacher: ActivationBundle,
    student: ActivationBundle,
    temperature: float = 1.0,
) -> ProxyScore:
    """Distillation-distance proxies, returned as negated distances.

    kind is one of kd_kl, fitnets, at, sp, cc, rkd, nst, pkt; temperature
    only affects kd_kl.
    """
    kind = kind.lower()
    if kind not in KD_KINDS:
        raise ValueError(f"unknown kd distance kind {kind!r}")
    if temperature <= 0:
        raise ValueError(f"temperature must be positive, got {temperature}")
    if teacher.penultimate_features.shape[0] != student.penultimate_features.shape[0]:
        raise ValueError("teacher and student bundles come from different batch sizes")
    if kind == "kd_kl":
        dist = _kd_kl(teacher, student, temperature)
    elif kind == "fitnets":
        dist = _fitnets(teacher, student)
    elif kind == "at":
        dist = _at(teacher, student)
    elif kind == "sp":
        dist = relation_similarity(teacher.pre_gap_map, student.pre_gap_map)
    elif kind == "cc":
        dist = _cc(teacher, student)
    elif kind == "rkd":
        dist = _rkd(teacher, student)
    elif kind == "nst":
        dist = _nst(teacher, student)
    else:
        dist = _pkt(teacher, student)
    return ProxyScore(kind, -dist, True)


def cost_proxy(kind: str, desc: ArchDescriptor, space: SearchSpace) -> ProxyScore:
    """params or flops as a (higher-is-better) capacity proxy."""
    kind = kind.lower()
    if kind == "params":
        return ProxyScore("params", float(count_params(desc, space)), True)
    if kind == "flops":
        return ProxyScore("flops", float(count_flops(desc, space)), True)
    raise ValueError(f"unknown cost proxy {kind!r}")


__all__ = [
    "GradCamMaps",
    "SimilarityMatrix",
    "ProxyScore",
    "ROW_L2",
    "MATRIX_L2",
    "FC_WEIGHTS",
    "FC_WEIGHT_GRADS",
    "KD_KINDS",
    "gradcam_maps",
    "similarity_matrix",
    "matrix_mean_sq_diff",
    "semantic_similarity",
    "relation_similarity",
    "diswot_score",
    "diswot_score_from_bundles",
    "nwot_from_codes",
    "nwot_score",
    "kd_distance",
    "cost_proxy",
]
