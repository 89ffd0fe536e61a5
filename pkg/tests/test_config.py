import pytest

from convex_pricing.config import ConfigError, ExperimentConfig, format_price_law, load_config, parse_config, \
    parse_price_law
from convex_pricing.core import PropensityModel


def test_price_laws():
    assert parse_price_law("uniform:1,3") == PropensityModel.uniform(1, 3)
    assert parse_price_law("exponential:rate=0.4") == PropensityModel.exponential(scale=2.5)
    assert parse_price_law("exponential:scale=2,loc=1") == PropensityModel.exponential(scale=2, location=1)
    assert parse_price_law("triangular:1,2,4").kind == "triangular"
    assert parse_price_law("lognormal:0,0.5").kind == "lognormal"
    for law in ("uniform:1,3", "exponential:rate=0.4", "triangular:1,2,4", "lognormal:0,0.5"):
        p = parse_price_law(law)
        assert parse_price_law(format_price_law(p)) == p
    for bad in ("uniform:3,1", "poisson:1", "exponential:mean=2", "uniform:a,b"):
        with pytest.raises(ConfigError):
            parse_price_law(bad)


def test_parse_full_config():
    cfg = parse_config("""
        # comment
        scenario.name = s
        scenario.family = shifted_exponential
        scenario.price_law = exponential:rate=0.4   # trailing comment
        learners = hinge, eps_insensitive
        n_grid = 100, 200
        replications = 3
        base_seed = 9
        learner.eps.c1 = inf
        learner.eps.c2 = none
        cv.refine = 1
        output.timing = yes
    """)
    assert cfg.family == "shifted_exponential" and cfg.learners == ("hinge", "eps_insensitive")
    assert cfg.n_grid == (100, 200) and cfg.eps_c1 is None and cfg.cv_refine == 1 and cfg.record_timing
    sc = cfg.scenario(100, 5)
    assert (sc.feature_low, sc.feature_high, sc.n, sc.seed) == (1.0, 5.0, 100, 5)


@pytest.mark.parametrize("text,msg", [
    ("bogus = 1", "unknown key"),
    ("learners", "expected"),
    ("replications = x", "bad value"),
    ("replications = 0", "replications"),
    ("n_grid = 300, 100", "increasing"),
    ("learners = hinge, svm", "unknown learner"),
    ("oracle.method = exact", "oracle.method"),
    ("cv.demand = trees", "cv.demand"),
    ("output.timing = maybe", "bad value"),
])
def test_errors_name_the_problem(text, msg):
    with pytest.raises(ConfigError, match=msg):
        parse_config(text, "x.cfg")


def test_shipped_configs_load():
    import pathlib
    root = pathlib.Path(__file__).resolve().parents[1] / "configs"
    for path in sorted(root.glob("*.cfg")):
        assert isinstance(load_config(path), ExperimentConfig)
