import os

from hypothesis import HealthCheck, settings

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("ci", deadline=None, max_examples=200, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


import pytest  # noqa: E402

from aqgen.config import Hyperparams  # noqa: E402
from aqgen.synth import SynthSpec, synth_generate  # noqa: E402
from aqgen.train import train  # noqa: E402

TINY_SPEC = SynthSpec(n_entities=30, n_relations=6, triples_per_relation=12, levels=(1, 2), n_train=40, n_dev=10, n_test=10)
TINY_HYPER = Hyperparams(hidden=16, embedding=12, heads=2, graph_layers=2, epochs=6, seed=0)


@pytest.fixture(scope="session")
def tiny_data():
    return synth_generate(TINY_SPEC, seed=0)


@pytest.fixture(scope="session")
def tiny_model(tiny_data):
    kb, splits = tiny_data
    return train(splits["train"], TINY_HYPER, splits["dev"], kb).params


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[0][1:])):
            terminalreporter.write_line(line)
