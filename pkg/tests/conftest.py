import pytest

from monrec.datagen import GenConfig, generate

SMALL = dict(services=20, monitors=200, metrics=140, dimensions=88, expressions=100)


@pytest.fixture(scope="session")
def small_dataset():
    return generate(GenConfig(seed=3, **SMALL))


@pytest.fixture(scope="session")
def default_dataset():
    return generate(GenConfig())


def small_run_config():
    from monrec.config import RunConfig

    cfg = RunConfig(seed=3)
    cfg.datagen = GenConfig(seed=3, **SMALL)
    cfg.select.hidden, cfg.select.epochs = 32, 10
    cfg.pipeline.ranker_hidden, cfg.pipeline.ranker_out, cfg.pipeline.ranker_epochs = 16, 8, 8
    return cfg


@pytest.fixture(scope="session")
def small_models(small_dataset, tmp_path_factory):
    from monrec.pipeline import train_all

    out = tmp_path_factory.mktemp("models")
    models, report = train_all(small_dataset, small_run_config(), out, holdout_fraction=0.2)
    return out, models, report


# one line per acceptance criterion, printed after the run
ACCEPTANCE: dict[int, str] = {}


def record_criterion(number: int, passed: bool, detail: str) -> None:
    line = f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {detail}"
    ACCEPTANCE[number] = line
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[n])
