import pytest
import yaml

from monrec.config import ConfigError, RunConfig, from_dict, load_config
from monrec.ranker import DIMENSION_REC, EXPRESSION_REC


def test_defaults_validate():
    cfg = load_config()
    assert cfg.seed == 7 and cfg.datagen.services == 100
    r = cfg.ranker(DIMENSION_REC)
    assert (r.hidden, r.out, r.seed) == (64, 32, 7)


def test_yaml_round_trip(tmp_path):
    cfg = RunConfig(seed=11)
    cfg.pipeline.top_dimensions = 2
    path = tmp_path / "c.yaml"
    path.write_text(cfg.dumps())
    loaded = load_config(path)
    assert loaded.to_dict() == cfg.to_dict()


def test_seed_override_reaches_rankers(tmp_path):
    path = tmp_path / "c.yaml"
    path.write_text(yaml.safe_dump({"seed": 2, "pipeline": {"ranker_hidden": None, "ranker_out": None}}))
    cfg = load_config(path, seed=9)
    assert cfg.seed == 9 and cfg.ranker(EXPRESSION_REC).seed == 9
    assert (cfg.ranker(EXPRESSION_REC).hidden, cfg.ranker(EXPRESSION_REC).out) == (256, 128)


@pytest.mark.parametrize("doc, match", [
    ({"bogus": {}}, "unknown config sections"),
    ({"select": {"nope": 1}}, "unknown keys"),
    ({"dimension_rec": {"task": "Other"}}, "dimension_rec"),
])
def test_bad_sections(doc, match):
    with pytest.raises(ConfigError, match=match):
        from_dict(doc)


def test_invalid_values_rejected(tmp_path):
    path = tmp_path / "c.yaml"
    path.write_text(yaml.safe_dump({"dimension_rec": {"layers": 0}}))
    with pytest.raises(ValueError, match="layers"):
        load_config(path)
    path.write_text("- a list\n")
    with pytest.raises(ConfigError, match="mapping"):
        load_config(path)
    path.write_text("a: [unclosed\n")
    with pytest.raises(ConfigError, match="cannot parse"):
        load_config(path)
