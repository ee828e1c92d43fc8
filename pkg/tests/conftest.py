import numpy as np
import pytest

from dpvae.vae import VaeModel


def small_model(prior_mode="standard", seed=0, latent_dim=2, obs_std=1.0, identity_flow=False):
    """A narrow model that keeps gradient checks fast."""
    model = VaeModel.build(
        latent_dim=latent_dim, hidden=(8, 6), prior_mode=prior_mode, flow_blocks=2, flow_width=8, obs_std=obs_std
    )
    params = model.init_params(seed)
    if identity_flow and model.prior is not None:
        model.prior.set_identity(params)
    return model, params


@pytest.fixture
def batch():
    return np.random.default_rng(123).normal(size=(8, 2))


@pytest.fixture
def eps():
    return np.random.default_rng(456).standard_normal((8, 2))


# --- acceptance reporting -------------------------------------------------------

CRITERIA: dict[int, str] = {}


def record_criterion(number: int, title: str, ok: bool, detail: str) -> str:
    """Remember one PASS/FAIL line; all of them are printed at the end of the run."""
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {number}: {title} | {detail}"
    CRITERIA[number] = line
    print(line)
    return line


def pytest_terminal_summary(terminalreporter):
    if CRITERIA:
        terminalreporter.section("acceptance criteria")
        for number in sorted(CRITERIA):
            terminalreporter.write_line(CRITERIA[number])
