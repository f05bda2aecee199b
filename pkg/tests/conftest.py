import numpy as np
import pytest

from lvgen.toy import make_toy_corpus


def conditioned_splits(toy, mode, seed=0):
    """Cleansed toy corpus -> (train, test, scaler) ConditionedCorpus pair."""
    from lvgen.diffusion import ConditionEncoder, build_corpus
    from lvgen.ingest import cleanse, split_train_test

    kept, _ = cleanse(toy.days)
    sp = split_train_test(kept, toy.meta, seed=seed)
    out = []
    enc = None
    for days in (sp.train, sp.test):
        keys = [d.key for d in days]
        x = sp.scaler.apply(np.stack([np.stack([d.p, d.q]) for d in days]))
        wx = toy.weather_matrix(keys)
        if enc is None:
            enc = ConditionEncoder.fit(mode, wx)
        out.append(build_corpus(x, keys, wx, toy.customer_counts(keys), enc))
    return out[0], out[1], sp.scaler


@pytest.fixture(scope="session")
def small_toy():
    return make_toy_corpus(n_substations=12, min_days=4, max_days=14, seed=5)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
