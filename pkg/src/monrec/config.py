"""Run configuration: one YAML document holding every tunable default."""
from __future__ import annotations

from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import yaml

from .datagen import GenConfig
from .metric_select import SelectConfig
from .ranker import DIMENSION_REC, EXPRESSION_REC, RankerConfig


class ConfigError(ValueError):
    pass


@dataclass
class SimilarityConfig:
    weight: float = 0.5
    top_k: int = 5
    shapelets: int = 5
    shortlist: int = 20


@dataclass
class AlertConfig:
    max_similar: int = 5
    output_format: str = "monrec-json-v1"
    retries: int = 2


@dataclass
class PipelineConfig:
    top_dimensions: int = 3
    top_expressions: int = 1
    # small message widths keep desk-scale training fast; None uses the task defaults
    ranker_hidden: int | None = 64
    ranker_out: int | None = 32
    ranker_epochs: int = 150
    select_variant: str = "Ens"


@dataclass
class RunConfig:
    seed: int = 7
    datagen: GenConfig = field(default_factory=GenConfig)
    select: SelectConfig = field(default_factory=SelectConfig)
    dimension_rec: RankerConfig = field(default_factory=lambda: RankerConfig(task=DIMENSION_REC))
    expression_rec: RankerConfig = field(default_factory=lambda: RankerConfig(task=EXPRESSION_REC))
    similarity: SimilarityConfig = field(default_factory=SimilarityConfig)
    alerts: AlertConfig = field(default_factory=AlertConfig)
    pipeline: PipelineConfig = field(default_factory=PipelineConfig)

    def ranker(self, task: str) -> RankerConfig:
        base = self.dimension_rec if task == DIMENSION_REC else self.expression_rec
        p = self.pipeline
        cfg = RankerConfig(**{**asdict(base), "split": tuple(base.split)})
        if p.ranker_hidden is not None:
            cfg.hidden = p.ranker_hidden
        if p.ranker_out is not None:
            cfg.out = p.ranker_out
        cfg.epochs = p.ranker_epochs
        cfg.seed = self.seed
        cfg.validate()
        return cfg

    def validate(self) -> None:
        self.datagen.validate()
        self.select.validate()
        self.ranker(DIMENSION_REC)
        self.ranker(EXPRESSION_REC)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["datagen"] = self.datagen.to_dict()
        for k in ("dimension_rec", "expression_rec"):
            d[k]["split"] = list(d[k]["split"])
        return d

    def dumps(self) -> str:
        return yaml.safe_dump(self.to_dict(), sort_keys=True)


_SECTIONS = {"select": SelectConfig, "dimension_rec": RankerConfig, "expression_rec": RankerConfig,
             "similarity": SimilarityConfig, "alerts": AlertConfig, "pipeline": PipelineConfig}


def _section(cls, data: dict, name: str):
    known = {f.name for f in fields(cls)}
    unknown = sorted(set(data) - known)
    if unknown:
        raise ConfigError(f"unknown keys in section {name!r}: {unknown}")
    if "split" in data:
        data = {**data, "split": tuple(data["split"])}
    try:
        return cls(**data)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"section {name!r}: {exc}") from exc


def from_dict(d: dict | None) -> RunConfig:
    d = dict(d or {})
    unknown = sorted(set(d) - {"seed", "datagen", *_SECTIONS})
    if unknown:
        raise ConfigError(f"unknown config sections: {unknown}")
    cfg = RunConfig()
    if "seed" in d:
        cfg.seed = int(d["seed"])
    if "datagen" in d:
        try:
            cfg.datagen = GenConfig.from_dict({**GenConfig().to_dict(), **d["datagen"]})
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"section 'datagen': {exc}") from exc
    for name, cls in _SECTIONS.items():
        if name in d:
            setattr(cfg, name, _section(cls, {**asdict(getattr(cfg, name)), **(d[name] or {})}, name))
    return cfg


def load_config(path: str | Path | None = None, seed: int | None = None) -> RunConfig:
    """Defaults, overlaid by the YAML file at ``path``, overlaid by ``seed``."""
    data = {}
    if path is not None:
        try:
            data = yaml.safe_load(Path(path).read_text()) or {}
        except yaml.YAMLError as exc:
            raise ConfigError(f"cannot parse {path}: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError(f"{path} must hold a mapping")
    cfg = from_dict(data)
    if seed is not None:
        cfg.seed = seed
    cfg.validate()
    return cfg
