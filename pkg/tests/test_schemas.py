import json

import pytest

from alm_rates.config import CONFIGS_DIR
from alm_rates.core.alm import ScheduleKind
from alm_rates.core.operators import LinearOperator
from alm_rates.core.regularizers import PowerSparsity, Quadratic
from alm_rates.errors import ConfigError
from alm_rates.schemas import load_config, parse_config

MINIMAL = {
    "problem": {"operator": "diagonal", "size": 10},
    "regularizer": {"kind": "quadratic"},
    "source": {"kind": "standard"},
    "noise": {"deltas": [0.01]},
}


def _parse(**overrides):
    doc = json.loads(json.dumps(MINIMAL))
    for section, values in overrides.items():
        doc[section] = {**doc.get(section, {}), **values}
    return parse_config(json.dumps(doc))


def _violations(**overrides):
    with pytest.raises(ConfigError) as info:
        _parse(**overrides)
    return info.value.violations


def test_minimal_config():
    cfg = _parse()
    assert cfg.stopping.kind == "apriori"
    assert cfg.noise.seeds == [0, 1, 2]
    assert cfg.monitors.names() == frozenset({"guler", "ppm", "kkt", "dual_objective"})
    assert isinstance(cfg.build_regularizer(), Quadratic)
    assert cfg.schedule().kind is ScheduleKind.CONSTANT
    assert cfg.distance() == "bregman"
    assert cfg.index_function_override() is None


def test_rho_below_one_rejected():
    assert "morozov requires rho > 1" in _violations(stopping={"kind": "morozov", "rho": 0.9})


def test_phi_exponent_cap():
    violations = _violations(phi={"c": 1.0, "p": 0.7})
    assert any("exponent cap" in v for v in violations)


def test_violations_are_batched():
    violations = _violations(
        stopping={"kind": "morozov", "rho": 0.9},
        solver={"schedule": {"kind": "geometric", "tau0": 1.0, "ratio": 2.0}},
        source={"kind": "holder", "nu": 0.8},
    )
    assert len(violations) == 3


def test_unknown_key_rejected():
    violations = _violations(problem={"colour": "red"})
    assert any(v.startswith("problem.colour") for v in violations)


def test_malformed_json_reports_position():
    with pytest.raises(ConfigError) as info:
        parse_config('{\n  "problem": {"size": 10,}\n}')
    assert info.value.violations[0].startswith("line 2, column")


def test_top_level_must_be_object():
    with pytest.raises(ConfigError):
        parse_config("[1, 2]")


def test_sparsity_rules():
    violations = _violations(
        problem={"operator": "dense", "size": 10, "cols": 8},
        regularizer={"kind": "sparsity", "q": 2.5, "penalty": "first_difference"},
        source={"support_size": 3},
    )
    assert any("q in [1, 2)" in v for v in violations)
    assert any("penalty applies" in v for v in violations)
    assert any("support_size" in v for v in violations)


def test_apriori_needs_positive_delta():
    assert any("delta > 0" in v for v in _violations(noise={"deltas": [0.0]}))


def test_noise_grid():
    cfg = _parse(noise={"deltas": [], "grid": {"start": 0.1, "stop": 1e-5, "points": 5}})
    assert cfg.noise.delta_values() == pytest.approx([0.1, 0.01, 0.001, 1e-4, 1e-5])


def test_short_grid_rejected():
    violations = _violations(noise={"deltas": [], "grid": {"start": 0.1, "stop": 0.001, "points": 3}})
    assert any("at least 5 distinct positive noise levels, got 3" in v for v in violations)


def test_uneven_delta_list_rejected():
    violations = _violations(noise={"deltas": [0.1, 0.05, 0.01, 0.005, 0.001]})
    assert "sweep noise levels must form a geometric grid" in violations


def test_domain_objects():
    cfg = _parse(
        problem={"operator": "dense", "size": 20, "cols": 40},
        regularizer={"kind": "sparsity", "q": 1.0},
        phi={"c": 2.0, "p": 0.25},
        solver={"schedule": {"kind": "explicit", "values": [1.0, 2.0]}},
    )
    assert isinstance(cfg.build_regularizer(), PowerSparsity)
    assert cfg.distance() == "norm"
    assert cfg.schedule().tau(5) == 2.0
    f = cfg.index_function_override()
    assert (f.c, f.p) == (2.0, 0.25)


def test_first_difference_penalty():
    cfg = _parse(regularizer={"kind": "quadratic", "penalty": "first_difference"})
    penalty = cfg.build_regularizer().penalty
    assert isinstance(penalty, LinearOperator)
    assert penalty.cols == 10


def test_derivative_penalty_scales_by_size():
    cfg = _parse(regularizer={"kind": "quadratic", "penalty": "derivative"})
    penalty = cfg.build_regularizer().penalty
    assert penalty.matrix[0, :2].tolist() == pytest.approx([-10.0, 10.0])


def test_holder_penalty_needs_identity_operator():
    violations = _violations(
        problem={"operator": "diagonal", "size": 10, "decay": 1.0},
        regularizer={"kind": "quadratic", "penalty": "derivative"},
        source={"kind": "holder", "nu": 0.25},
    )
    assert "holder sources with a derivative penalty need an identity operator" in violations


def test_source_profile():
    assert _parse(source={"profile": 0.5}).source_spec().profile == 0.5
    violations = _violations(
        problem={"operator": "dense", "size": 10, "cols": 20},
        regularizer={"kind": "sparsity", "q": 1.0},
        source={"profile": 0.5},
    )
    assert "source profile applies to quadratic regularizers only" in violations


def test_seed_override():
    cfg = _parse(noise={"seeds": [4, 9]}).with_seed(100)
    assert cfg.problem.seed == 100
    assert cfg.source.seed == 100
    assert cfg.noise.seeds == [100, 101]


def test_output_formats_are_normalized():
    assert _parse(output={"formats": ["CSV", " xlsx "]}).output.formats == ["csv", "xlsx"]


@pytest.mark.parametrize("path", sorted(CONFIGS_DIR.glob("*.json")), ids=lambda p: p.stem)
def test_shipped_configs_load(path):
    cfg = load_config(path)
    assert cfg.name == path.stem


def test_missing_file(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "absent.json")
