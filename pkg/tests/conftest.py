import time

import numpy as np
import pytest

from landvec.persistence import dataset_fingerprint
from landvec.randfunc import generate_suite
from landvec.vae import TrainConfig, build_model, train

DESK_COUNT = 10_000
DESK_DIM = 2
DESK_M = 6
DESK_LS = 16
DESK_BETA = 0.001
DESK_EPOCHS = 100


class Desk:
    """Desk-scale training run shared by the slow tests."""

    def __init__(self):
        self.exprs, self.values, self.rejected = generate_suite(DESK_COUNT, DESK_DIM, seed=2023, m=DESK_M)
        self.fingerprint = dataset_fingerprint(self.values, DESK_DIM)
        self.config = TrainConfig(beta=DESK_BETA, epochs=DESK_EPOCHS, seed=0)
        t0 = time.perf_counter()
        self.model = train(self.values, self.config, "vae", DESK_LS, self.fingerprint)
        self.train_seconds = time.perf_counter() - t0
        self.history = self.model.metadata["history"]


@pytest.fixture(scope="session")
def desk():
    return Desk()


@pytest.fixture
def small_vae():
    return build_model("vae", 16, 2, seed=3, beta=0.5)


@pytest.fixture
def rng():
    return np.random.Generator(np.random.PCG64(12345))


# -- acceptance summary --------------------------------------------------------

_ACCEPTANCE: list[tuple[str, str, str]] = []


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    if item.module.__name__.endswith("test_acceptance") and (rep.when == "call" or rep.failed):
        doc = (item.function.__doc__ or item.name).strip().splitlines()[0]
        detail = "; ".join(str(v) for k, v in item.user_properties if k == "detail")
        _ACCEPTANCE.append(("PASS" if rep.passed else "FAIL", doc, detail))


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for status, doc, detail in _ACCEPTANCE:
        terminalreporter.write_line(f"{status} {doc}" + (f" [{detail}]" if detail else ""))
