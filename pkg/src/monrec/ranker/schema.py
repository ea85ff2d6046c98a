"""Task definitions, configuration and output records for the graph ranker."""
from __future__ import annotations

from dataclasses import asdict, dataclass, field

from ..graph import EdgeKind, NodeKind

DIMENSION_REC = "DimensionRec"
EXPRESSION_REC = "ExpressionRec"


@dataclass(frozen=True)
class TaskSchema:
    name: str
    node_kinds: tuple[NodeKind, ...]
    edge_kinds: tuple[EdgeKind, ...]
    query_kinds: tuple[NodeKind, ...]
    candidate_kind: NodeKind
    target_edge: EdgeKind
    # metapath schemas per start kind: sequences of node kinds visited after the start
    metapaths: dict = field(default_factory=dict, hash=False, compare=False)


DIMENSION_TASK = TaskSchema(
    name=DIMENSION_REC,
    node_kinds=(NodeKind.MONITOR, NodeKind.METRIC, NodeKind.DIMENSION),
    edge_kinds=(EdgeKind.MONITOR_HAS_METRIC, EdgeKind.METRIC_HAS_DIMENSION,
                EdgeKind.MONITOR_ASSOCIATED_DIMENSION),
    query_kinds=(NodeKind.MONITOR, NodeKind.METRIC),
    candidate_kind=NodeKind.DIMENSION,
    target_edge=EdgeKind.MONITOR_ASSOCIATED_DIMENSION,
    metapaths={
        NodeKind.MONITOR: [(NodeKind.METRIC, NodeKind.MONITOR, NodeKind.DIMENSION, NodeKind.MONITOR),
                           (NodeKind.DIMENSION, NodeKind.MONITOR, NodeKind.DIMENSION, NodeKind.MONITOR)],
        NodeKind.METRIC: [(NodeKind.MONITOR, NodeKind.DIMENSION, NodeKind.MONITOR, NodeKind.DIMENSION)],
        NodeKind.DIMENSION: [(NodeKind.MONITOR, NodeKind.METRIC, NodeKind.MONITOR, NodeKind.DIMENSION),
                             (NodeKind.METRIC, NodeKind.MONITOR, NodeKind.DIMENSION, NodeKind.MONITOR)],
    },
)

EXPRESSION_TASK = TaskSchema(
    name=EXPRESSION_REC,
    node_kinds=(NodeKind.SERVICE, NodeKind.MONITOR, NodeKind.METRIC, NodeKind.DIMENSION, NodeKind.EXPRESSION),
    edge_kinds=(EdgeKind.SERVICE_HAS_MONITOR, EdgeKind.MONITOR_HAS_METRIC,
                EdgeKind.MONITOR_ASSOCIATED_DIMENSION, EdgeKind.METRIC_HAS_DIMENSION,
                EdgeKind.MONITOR_USES_EXPRESSION, EdgeKind.METRIC_USES_EXPRESSION,
                EdgeKind.DIMENSION_USES_EXPRESSION),
    query_kinds=(NodeKind.MONITOR, NodeKind.METRIC, NodeKind.DIMENSION),
    candidate_kind=NodeKind.EXPRESSION,
    target_edge=EdgeKind.MONITOR_USES_EXPRESSION,
    metapaths={
        NodeKind.MONITOR: [(NodeKind.METRIC, NodeKind.MONITOR, NodeKind.EXPRESSION, NodeKind.MONITOR),
                           (NodeKind.SERVICE, NodeKind.MONITOR, NodeKind.EXPRESSION, NodeKind.MONITOR)],
        NodeKind.METRIC: [(NodeKind.MONITOR, NodeKind.EXPRESSION, NodeKind.MONITOR, NodeKind.EXPRESSION)],
        NodeKind.DIMENSION: [(NodeKind.MONITOR, NodeKind.EXPRESSION, NodeKind.MONITOR, NodeKind.EXPRESSION)],
        NodeKind.EXPRESSION: [(NodeKind.MONITOR, NodeKind.METRIC, NodeKind.MONITOR, NodeKind.EXPRESSION),
                              (NodeKind.MONITOR, NodeKind.SERVICE, NodeKind.MONITOR, NodeKind.EXPRESSION)],
        NodeKind.SERVICE: [(NodeKind.MONITOR, NodeKind.EXPRESSION, NodeKind.MONITOR, NodeKind.METRIC)],
    },
)

TASKS = {DIMENSION_REC: DIMENSION_TASK, EXPRESSION_REC: EXPRESSION_TASK}

# message widths per task: (hidden, output)
DEFAULT_WIDTHS = {DIMENSION_REC: (1024, 256), EXPRESSION_REC: (256, 128)}


@dataclass
class RankerConfig:
    task: str = DIMENSION_REC
    layers: int = 3
    hidden: int | None = None
    out: int | None = None
    heads: int = 4
    negatives: int = 10
    ranking_loss: bool = True
    metapaths: bool = True
    walk_length: int = 4
    walks_per_node: int = 8
    conventional_scaling: bool = False
    epochs: int = 150
    lr: float = 1e-3
    weight_decay: float = 1e-5
    split: tuple[float, float, float] = (0.8, 0.1, 0.1)
    mp_fraction: float = 0.7
    seed: int = 0

    def __post_init__(self):
        if self.task not in TASKS:
            raise ValueError(f"unknown task {self.task!r}; expected one of {sorted(TASKS)}")
        hidden, out = DEFAULT_WIDTHS[self.task]
        if self.hidden is None:
            self.hidden = hidden
        if self.out is None:
            self.out = out
        self.split = tuple(self.split)

    def validate(self) -> None:
        if self.layers < 1:
            raise ValueError(f"layers must be at least 1, got {self.layers}")
        if self.hidden <= 0 or self.out <= 0:
            raise ValueError("widths must be positive")
        if self.heads <= 0 or self.hidden % self.heads or self.out % self.heads:
            raise ValueError(f"widths {self.hidden}/{self.out} must be divisible by {self.heads} heads")
        if not 1 <= self.negatives <= 10:
            raise ValueError("negatives must lie in [1, 10]")
        if self.walk_length < 1 or self.walks_per_node < 1:
            raise ValueError("walk length and walks per node must be positive")
        if self.epochs < 1:
            raise ValueError("epochs must be positive")

    @property
    def widths(self) -> list[int]:
        return [self.hidden] * (self.layers - 1) + [self.out]

    @property
    def schema(self) -> TaskSchema:
        return TASKS[self.task]

    def to_dict(self) -> dict:
        d = asdict(self)
        d["split"] = list(self.split)
        return d


@dataclass(frozen=True)
class RankedList:
    query: tuple[str, ...]
    candidates: tuple[tuple[str, float], ...]

    @property
    def keys(self) -> list[str]:
        return [k for k, _ in self.candidates]

    def to_record(self) -> dict:
        return {"query": list(self.query), "ranked": [k for k, _ in self.candidates],
                "scores": [s for _, s in self.candidates]}
