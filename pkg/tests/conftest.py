import numpy as np
import pytest

from debias_forge.synthgen import SynthConfig, gen_dataset, inject_bias, make_eval_suite


TINY = SynthConfig(
    num_labels=3,
    train_size=800,
    test_size=200,
    vocab_size=60,
    tokens_per_segment=4,
    seed=11,
)


@pytest.fixture(scope="session")
def tiny_cfg():
    return TINY


@pytest.fixture(scope="session")
def tiny_clean():
    return gen_dataset(TINY)


@pytest.fixture(scope="session")
def tiny_train(tiny_clean):
    return inject_bias(tiny_clean, m=0.9, rho=0.3, seed=TINY.seed)


@pytest.fixture(scope="session")
def tiny_suite():
    return make_eval_suite(TINY)


@pytest.fixture()
def rng():
    return np.random.default_rng(123)


# collected by the acceptance tests; echoed after the run so the per-criterion
# verdicts survive output capture
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
