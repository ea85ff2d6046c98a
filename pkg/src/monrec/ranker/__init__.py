"""Heterogeneous attention ranker for dimension and expression recommendation."""
from .losses import batch_top1max, link_bce, loss_rec, loss_top1max
from .metapath import metapath_context, metapath_contexts
from .model import HeteroRanker, attention_scores, attention_weights, mp_layer, score_candidates
from .schema import (DIMENSION_REC, DIMENSION_TASK, EXPRESSION_REC, EXPRESSION_TASK, TASKS, RankedList,
                     RankerConfig, TaskSchema)
from .taskgraph import Relation, TaskGraph, node_features
from .train import (EvalResult, Query, RankerResult, build_query, evaluate_links, load_ranker, rank_queries,
                    save_ranker, task_queries, train_ranker)

__all__ = [
    "batch_top1max", "link_bce", "loss_rec", "loss_top1max", "metapath_context", "metapath_contexts",
    "HeteroRanker", "attention_scores", "attention_weights", "mp_layer", "score_candidates",
    "DIMENSION_REC", "DIMENSION_TASK", "EXPRESSION_REC", "EXPRESSION_TASK", "TASKS", "RankedList",
    "RankerConfig", "TaskSchema", "Relation", "TaskGraph", "node_features", "EvalResult", "Query",
    "RankerResult", "build_query", "evaluate_links", "load_ranker", "rank_queries", "save_ranker",
    "task_queries", "train_ranker",
]
