import pytest
from hypothesis import HealthCheck, settings

from nvforge import paper_default, run_campaign

settings.register_profile(
    "ci",
    derandomize=True,
    max_examples=60,
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("ci")


@pytest.fixture(scope="session")
def default_cfg():
    return paper_default()


@pytest.fixture(scope="session")
def default_report(tmp_path_factory):
    """One full paper-default campaign, shared by every test that only reads it."""
    out = tmp_path_factory.mktemp("campaign")
    report = run_campaign(paper_default(), out_dir=out)
    return report, out


@pytest.fixture(scope="session")
def small_config_dict():
    """A 4x5 grid with a short HBT window: fast enough to rerun several times."""
    cfg = paper_default().canonical_dict()
    cfg["grid"]["rows"] = 4
    cfg["grid"]["cols"] = 5
    cfg["grid"]["energies_nj_per_row"] = [37.7, 30.2, 25.7, 20.5]
    cfg["hbt"]["duration_s"] = 0.004
    return cfg
