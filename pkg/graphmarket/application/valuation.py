import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from graphmarket.application.protocol import proxy_size, run_session, size_report, summarize_set
from graphmarket.graphs.core import GraphSet, generate_proxy
from graphmarket.structure.matching import KeyFrame
from graphmarket.structure.transport import gwd_sets, structural_disparity
from graphmarket.utils.errors import ShapeError, ValidationError
from graphmarket.utils.objects import Preference, RunConfig, SellerRanking, ValuationReport
from graphmarket.utils.utils import rank_values, spearman

logger = logging.getLogger(__name__)

METRIC_ORDER = ("d", "r", "s")


def rank_sellers(reports: Sequence[Tuple[str, ValuationReport]], preference: Optional[Preference] = None) -> SellerRanking:
    """Average each seller's rank over the metrics every report carries; lower average is better."""
    preference = preference or Preference()
    if len(reports) < 2:
        raise ValidationError(f"ranking needs at least 2 sellers, got {len(reports)}")
    ids = [seller_id for seller_id, _ in reports]
    if len(set(ids)) != len(ids):
        raise ValidationError("seller ids must be unique")

    metric_sets = {tuple(sorted(report.metrics())) for _, report in reports}
    if len(metric_sets) != 1:
        raise ShapeError("reports carry different score kinds (some lack featural scores)")
    metrics = [metric for metric in METRIC_ORDER if metric in metric_sets.pop()]

    per_metric: Dict[str, Dict[str, float]] = {seller_id: {} for seller_id in ids}
    for metric in metrics:
        values = [report.metrics()[metric] for _, report in reports]
        descending = getattr(preference, metric) == "high"
        for seller_id, rank in zip(ids, rank_values(values, descending=descending)):
            per_metric[seller_id][metric] = rank

    average = {seller_id: float(np.mean(list(per_metric[seller_id].values()))) for seller_id in ids}
    final_order = sorted(ids, key=lambda seller_id: (average[seller_id], seller_id))
    return SellerRanking(per_metric_ranks=per_metric, average_rank=average, final_order=final_order)


def shared_config(buyer: GraphSet, candidates: Sequence[GraphSet], config: RunConfig) -> RunConfig:
    """Pin the proxy size so every candidate session sees the same proxy."""
    if config.proxy_nodes is not None:
        return config
    size = proxy_size(config, [size_report(gs) for gs in [buyer, *candidates]])
    return config.model_copy(update={"proxy_nodes": size})


def score_candidates(buyer: GraphSet, candidates: Sequence[GraphSet], config: RunConfig) -> List[ValuationReport]:
    if not candidates:
        raise ValidationError("no candidate sets to score")
    session_config = shared_config(buyer, candidates, config)

    def score(candidate: GraphSet) -> ValuationReport:
        report, _ = run_session(buyer, candidate, session_config)
        return report

    if config.threads > 1 and len(candidates) > 1:
        with ThreadPoolExecutor(max_workers=config.threads) as pool:
            reports = list(pool.map(score, candidates))
    else:
        reports = [score(candidate) for candidate in candidates]
    logger.info("SCORED %d CANDIDATES AGAINST %d-NODE PROXY", len(reports), session_config.proxy_nodes)
    return reports


def partition_samples(baseline: GraphSet, pool: GraphSet, config: RunConfig, groups: int = 5) -> List[List[int]]:
    """Rank every pool graph on its own against the baseline and cut the order into `groups` sets, best first."""
    if not 1 <= groups <= len(pool):
        raise ValidationError(f"cannot cut {len(pool)} graphs into {groups} groups")
    singletons = [GraphSet([g]) for g in pool]
    reports = score_candidates(baseline, singletons, config)
    width = len(str(len(pool)))
    ids = [str(i).zfill(width) for i in range(len(pool))]
    ranking = rank_sellers(list(zip(ids, reports)), config.prefer)
    order = [int(seller_id) for seller_id in ranking.final_order]
    return [chunk.tolist() for chunk in np.array_split(np.asarray(order, dtype=np.int64), groups)]


def pairwise_scores(sets: Sequence[GraphSet], config: RunConfig) -> Tuple[np.ndarray, np.ndarray]:
    """(GWD, S) matrices over all pairs, every set summarised once against one shared proxy."""
    if len(sets) < 1:
        raise ValidationError("no datasets given")
    reports = [size_report(gs) for gs in sets]
    proxy = generate_proxy(proxy_size(config, reports), config.proxy_p, config.seed)
    key = KeyFrame(proxy, tie_break=config.tie_break)
    node_cap = max(proxy.node_count, max(report.max_nodes for report in reports))
    summaries = [summarize_set(gs, key, config.k, config.k_prime, node_cap=node_cap)[0] for gs in sets]

    count = len(sets)
    gwd = np.zeros((count, count))
    for i in range(count):
        for j in range(i + 1, count):
            gwd[i, j] = gwd[j, i] = gwd_sets(summaries[i], summaries[j], threads=config.threads)
    disparity = np.vectorize(lambda value: structural_disparity(value, config.alpha).s)(gwd)
    return gwd, disparity


@dataclass(frozen=True)
class ProxyCheck:
    proxy_gwd: List[float]
    direct_gwd: List[float]
    proxy_ranks: List[float]
    direct_ranks: List[float]
    spearman: float


def proxy_rank_check(baseline: GraphSet, candidates: Sequence[GraphSet], config: RunConfig) -> ProxyCheck:
    """Rank candidates by GWD to the baseline once through the proxy and once with the baseline graph as key."""
    if len(candidates) < 2:
        raise ValidationError(f"rank comparison needs at least 2 candidates, got {len(candidates)}")
    every = [baseline, *candidates]
    node_cap = max(gs.max_nodes for gs in every)

    def distances(key: KeyFrame) -> List[float]:
        cap = max(node_cap, key.key.node_count)
        summaries = [summarize_set(gs, key, config.k, config.k_prime, node_cap=cap)[0] for gs in every]
        return [gwd_sets(summaries[0], summary, threads=config.threads) for summary in summaries[1:]]

    proxy = generate_proxy(proxy_size(config, [size_report(gs) for gs in every]), config.proxy_p, config.seed)
    proxy_gwd = distances(KeyFrame(proxy, tie_break=config.tie_break))
    direct_gwd = distances(KeyFrame(baseline[0], tie_break=config.tie_break))
    proxy_ranks = rank_values(proxy_gwd)
    direct_ranks = rank_values(direct_gwd)
    return ProxyCheck(
        proxy_gwd=proxy_gwd,
        direct_gwd=direct_gwd,
        proxy_ranks=proxy_ranks,
        direct_ranks=direct_ranks,
        spearman=spearman(proxy_ranks, direct_ranks),
    )
