import time

import numpy as np
import pytest

import xpd
from xpd.ebm import ebm_margin_matrix
from xpd.gbdt import gbdt_margin_matrix


class StandardRun:
    """One full pipeline execution on the benchmark synthetic dataset,
    shared by everything that needs fitted models."""

    def __init__(self, seed: int = 7):
        t0 = time.perf_counter()
        self.dataset = xpd.synthesize(10000, 18, seed=seed, noise=0.02)
        self.split = xpd.stratified_split(self.dataset, (0.6, 0.2, 0.2), 42)
        self.train = self.dataset.take(self.split.train)
        self.valid = self.dataset.take(self.split.valid)
        self.test = self.dataset.take(self.split.test)
        self.gbdt = xpd.gbdt_fit(self.train, self.valid)
        self.ebm = xpd.ebm_fit(self.train, self.valid)
        self.gbdt_margins = gbdt_margin_matrix(self.gbdt, self.test.x)
        self.ebm_margins = ebm_margin_matrix(self.ebm, self.test.x)
        self.gbdt_phis, self.gbdt_base = xpd.attribution_matrix(self.gbdt, self.test.x)
        self.ebm_phis, self.ebm_base = xpd.attribution_matrix(self.ebm, self.test.x)
        self.elapsed_seconds = time.perf_counter() - t0


@pytest.fixture(scope="session")
def standard_run() -> StandardRun:
    return StandardRun(seed=7)


@pytest.fixture(scope="session")
def small_run():
    """A fast, fully wired pipeline for contract tests."""
    ds = xpd.synthesize(1500, 8, seed=3, noise=0.05)
    split = xpd.stratified_split(ds, (0.6, 0.2, 0.2), 42)
    train, valid, test = (ds.take(p) for p in split.parts())
    gbdt = xpd.gbdt_fit(train, valid, xpd.GbdtConfig(n_rounds=40, early_stopping_patience=10))
    ebm = xpd.ebm_fit(train, valid, xpd.EbmConfig(max_cycles=120, early_stopping_patience=20))
    return ds, train, valid, test, gbdt, ebm
