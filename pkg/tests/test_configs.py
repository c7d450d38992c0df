"""End-to-end sweeps of the shipped configs; each takes seconds to minutes."""

import pandas as pd
import pytest

from alm_rates import cli
from alm_rates.config import CONFIGS_DIR
from alm_rates.schemas import load_config

SWEEP_CONFIGS = sorted(p for p in CONFIGS_DIR.glob("*.json") if len(load_config(p).noise.delta_values()) > 1)

# slope rule each sweep must pass, on top of every other summary rule
SLOPE_RULES = {
    "quadratic_standard_apriori": "slope_bregman",
    "quadratic_standard_morozov_rho15": "slope_bregman",
    "quadratic_standard_morozov_rho3": "slope_bregman",
    "quadratic_holder_nu01_apriori": "slope_bregman",
    "quadratic_holder_nu025_apriori": "slope_bregman",
    "tikhonov_morozov_holder": "slope_bregman",
    "sparsity_l1_apriori": "slope_norm",
}


def test_every_sweep_config_has_a_slope_rule():
    assert {p.stem for p in SWEEP_CONFIGS} == set(SLOPE_RULES)


@pytest.mark.slow
@pytest.mark.parametrize("path", SWEEP_CONFIGS, ids=lambda p: p.stem)
def test_shipped_sweep_passes(path, tmp_path):
    cfg = load_config(path)
    assert cli.cmd_sweep(cfg, tmp_path, threads=4) == cli.EXIT_CODES["pass"]
    summary = pd.read_csv(tmp_path / "summary.csv").set_index("check")
    failed = summary.index[summary["status"] != "pass"].tolist()
    assert not failed, summary.loc[failed, ["value", "threshold", "detail"]].to_string()
    slope = summary.loc[SLOPE_RULES[path.stem]]
    assert slope["value"] >= slope["threshold"]
    bounds = [name for name in summary.index if name.startswith("bound_")]
    assert bounds
    assert (summary.loc[bounds, "value"] <= cfg.analysis.bound_ratio_limit).all()

