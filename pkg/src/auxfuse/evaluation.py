"""Query/gallery retrieval evaluation: mAP and CMC Rank-1/5/10/20.

AP per query uses the standard re-id form: AP = (1/R) * sum over relevant
ranks k of (#relevant in top k) / k. CMC@k is the fraction of queries whose
first relevant match lands within the top k. Queries left with no relevant
gallery item after filtering are excluded from the averages and counted
separately.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field

import numpy as np

from .feature_store import Dataset
from .fusion import FusionConfig, embed_batch

METRICS = ("euclidean", "cosine")


@dataclass
class EvalConfig:
    metric: str = "euclidean"
    l2_normalize: bool = False
    cross_camera_filter: bool = True
    ranks: list[int] = field(default_factory=lambda: [1, 5, 10, 20])

    def __post_init__(self):
        if self.metric not in METRICS:
            raise ValueError(f"bad metric {self.metric!r}")
        if not self.ranks or any(r < 1 for r in self.ranks):
            raise ValueError("ranks must be >= 1")
        if list(self.ranks) != sorted(set(self.ranks)):
            raise ValueError("ranks must be strictly increasing")


@dataclass
class QueryResult:
    query_id: str
    ap: float
    first_match_rank: int  # 1-based


@dataclass
class EvalReport:
    mAP: float
    cmc: dict[int, float]
    per_query: list[QueryResult]
    excluded_queries: list[str]

    def to_dict(self) -> dict:
        return {
            "mAP": self.mAP,
            "cmc": {str(k): v for k, v in self.cmc.items()},
            "per_query": [
                {"query_id": q.query_id, "ap": q.ap,
                 "first_match_rank": q.first_match_rank}
                for q in self.per_query
            ],
            "excluded_queries": list(self.excluded_queries),
        }


def distance_matrix(query: np.ndarray, gallery: np.ndarray,
                    config: EvalConfig) -> np.ndarray:
    if query.shape[1] != gallery.shape[1]:
        raise ValueError("descriptor dimension mismatch")
    q = np.asarray(query, dtype=np.float64)
    g = np.asarray(gallery, dtype=np.float64)
    if config.l2_normalize or config.metric == "cosine":
        for name, m in (("query", q), ("gallery", g)):
            norms = np.linalg.norm(m, axis=1)
            zero = np.where(norms == 0)[0]
            if zero.size and (config.metric == "cosine" or config.l2_normalize):
                raise ValueError(f"zero-vector descriptor: {name} index {zero[0]}")
    if config.l2_normalize:
        q = q / np.linalg.norm(q, axis=1, keepdims=True)
        g = g / np.linalg.norm(g, axis=1, keepdims=True)
    if config.metric == "euclidean":
        qq = np.sum(q * q, axis=1)[:, None]
        gg = np.sum(g * g, axis=1)[None, :]
        d2 = np.maximum(qq + gg - 2.0 * q @ g.T, 0.0)
        return np.sqrt(d2)
    qn = q / np.linalg.norm(q, axis=1, keepdims=True)
    gn = g / np.linalg.norm(g, axis=1, keepdims=True)
    return 1.0 - qn @ gn.T


def rank_gallery(distances: np.ndarray, query_identity: int, query_camera: int,
                 gallery_identities: np.ndarray, gallery_cameras: np.ndarray,
                 config: EvalConfig) -> np.ndarray:
    """Gallery indices in ascending distance; ties broken by gallery index.

    With cross_camera_filter, gallery items sharing the query's identity AND
    camera are dropped before ranking (and so never count as relevant).
    """
    keep = np.arange(len(distances))
    if config.cross_camera_filter:
        junk = (gallery_identities == query_identity) & (gallery_cameras == query_camera)
        keep = keep[~junk]
    # stable sort on distance preserves gallery-index order among ties
    order = keep[np.argsort(distances[keep], kind="stable")]
    return order


def average_precision(relevance: np.ndarray) -> float:
    """AP of a ranked relevance sequence (True at relevant positions)."""
    rel = np.asarray(relevance, dtype=bool)
    n_rel = int(rel.sum())
    if n_rel == 0:
        raise ValueError("no relevant items in ranking")
    hits = np.cumsum(rel)
    ks = np.where(rel)[0] + 1
    return float(np.sum(hits[rel.nonzero()] / ks) / n_rel)


def evaluate_descriptors(q_desc, q_ids, q_cams, q_sample_ids,
                         g_desc, g_ids, g_cams, config: EvalConfig) -> EvalReport:
    dist = distance_matrix(q_desc, g_desc, config)
    g_ids = np.asarray(g_ids)
    g_cams = np.asarray(g_cams)
    per_query: list[QueryResult] = []
    excluded: list[str] = []
    for qi in range(len(q_desc)):
        order = rank_gallery(dist[qi], q_ids[qi], q_cams[qi], g_ids, g_cams, config)
        rel = g_ids[order] == q_ids[qi]
        if not rel.any():
            excluded.append(q_sample_ids[qi])
            continue
        ap = average_precision(rel)
        first = int(np.argmax(rel)) + 1
        per_query.append(QueryResult(q_sample_ids[qi], ap, first))
    if not per_query:
        raise ValueError("no query has a relevant gallery match")
    mAP = float(np.mean([q.ap for q in per_query]))
    cmc = {}
    for k in config.ranks:
        cmc[k] = float(np.mean([q.first_match_rank <= k for q in per_query]))
    return EvalReport(mAP=mAP, cmc=cmc, per_query=per_query,
                      excluded_queries=excluded)


def evaluate(params: dict, fusion_config: FusionConfig, dataset: Dataset,
             config: EvalConfig) -> EvalReport:
    """Embed query/gallery records with the fusion model, then score."""
    queries = dataset.by_split("query")
    gallery = dataset.by_split("gallery")
    if not queries or not gallery:
        raise ValueError("need non-empty query and gallery splits")
    q_desc = embed_batch(queries, params, fusion_config)
    g_desc = embed_batch(gallery, params, fusion_config)
    return evaluate_descriptors(
        q_desc,
        np.array([r.identity_id for r in queries]),
        np.array([r.camera_id for r in queries]),
        [r.sample_id for r in queries],
        g_desc,
        np.array([r.identity_id for r in gallery]),
        np.array([r.camera_id for r in gallery]),
        config,
    )


def report_markdown(rows: list[tuple[str, EvalReport]], ranks=(1, 5, 10, 20)) -> str:
    """One table row per (label, report): mAP and ranks as percentages."""
    header = "| Model | mAP | " + " | ".join(f"Rank-{k}" for k in ranks) + " |"
    sep = "|" + "---|" * (len(ranks) + 2)
    lines = [header, sep]
    for label, rep in rows:
        cells = [f"{rep.mAP * 100:.1f}%"]
        cells += [f"{rep.cmc.get(k, float('nan')) * 100:.1f}%" for k in ranks]
        lines.append("| " + label + " | " + " | ".join(cells) + " |")
    return "\n".join(lines) + "\n"


def write_report(report: EvalReport, out_dir: str, label: str = "model") -> None:
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "report.json"), "w") as f:
        json.dump(report.to_dict(), f, indent=2, sort_keys=True)
    with open(os.path.join(out_dir, "report.md"), "w") as f:
        f.write(report_markdown([(label, report)], ranks=tuple(report.cmc)))
