from types import SimpleNamespace

import pytest

from hybridcr.experiment import ExperimentConfig
from hybridcr.sim import RunConfig

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def scenario():
    cfg = ExperimentConfig()
    model, table = cfg.build()
    out = cfg.outage()

    def run_config(mode, lambda_p, slots, seed, alpha=0.2, **kw):
        return RunConfig(
            mode=mode, lambda_p=lambda_p, links=cfg.links(alpha), model=model, policy=table,
            rho_p=out.rho_p, rho_s=out.rho_s, slots=slots, seed=seed, **kw,
        )

    return SimpleNamespace(cfg=cfg, model=model, table=table, outage=out,
                           links=cfg.links, run_config=run_config)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
