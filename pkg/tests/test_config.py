import pytest
from hypothesis import given, settings, strategies as st

from manifold_ssl.config import parse_config, parse_config_text, to_ini
from manifold_ssl.errors import ConfigError
from manifold_ssl.evaluation import ALL_METHODS, MethodId

MINIMAL = """
[data]
clinical = clinical.csv
survival_threshold_years = 5

[modalities]
gene = gene.csv
"""


def test_minimal_defaults(tmp_path):
    cfg = parse_config_text(MINIMAL, tmp_path)
    assert cfg.k_neighbors == 5
    assert cfg.kernel.kind == "polynomial" and cfg.kernel.degree == 3
    assert cfg.validation_fraction == 0.15
    assert cfg.n_folds == 5
    assert cfg.repetitions == 100
    assert cfg.methods == ALL_METHODS
    assert cfg.threshold_days == 1825
    assert cfg.clinical == (tmp_path / "clinical.csv").resolve()
    assert cfg.modalities["gene"].is_absolute()


def test_zero_neighbours_rejected(tmp_path):
    with pytest.raises(ConfigError, match="k_neighbors"):
        parse_config_text(MINIMAL + "[graph]\nk_neighbors = 0\n", tmp_path)


def test_unknown_key_named(tmp_path):
    with pytest.raises(ConfigError, match="gamma_z"):
        parse_config_text(MINIMAL + "[grid]\ngamma_z = 1\n", tmp_path)


def test_unknown_section_named(tmp_path):
    with pytest.raises(ConfigError, match="solver"):
        parse_config_text(MINIMAL + "[solver]\ntol = 1\n", tmp_path)


@pytest.mark.parametrize("extra, needle", [
    ("[split]\nn_folds = five\n", "integer"),
    ("[kernel]\nkind = sigmoid\n", "sigmoid"),
    ("[experiment]\nmethods = svm, bogus\n", "bogus"),
    ("[experiment]\nmethods = svm, svm\n", "repeat"),
    ("[grid]\ngamma_ambient = 0\n", "positive"),
    ("[mrmr]\nrelevance_weight = 0\n", "relevance_weight"),
])
def test_bad_values(tmp_path, extra, needle):
    with pytest.raises(ConfigError, match=needle):
        parse_config_text(MINIMAL + extra, tmp_path)


def test_required_entries(tmp_path):
    with pytest.raises(ConfigError, match="survival_threshold_years"):
        parse_config_text("[data]\nclinical = c.csv\n[modalities]\ng = g.csv\n", tmp_path)
    with pytest.raises(ConfigError, match="modalities"):
        parse_config_text("[data]\nclinical = c.csv\nsurvival_threshold_years = 5\n", tmp_path)


def test_missing_file_named(tmp_path):
    with pytest.raises(ConfigError, match="nowhere.ini"):
        parse_config(tmp_path / "nowhere.ini")


def test_check_paths(tmp_path):
    cfg = parse_config_text(MINIMAL, tmp_path)
    with pytest.raises(ConfigError, match="clinical.csv"):
        cfg.check_paths()


@settings(max_examples=40, deadline=None)
@given(k=st.integers(1, 30), reps=st.integers(1, 500), seed=st.integers(0, 2**31),
       ga=st.lists(st.floats(1e-6, 1e6), min_size=1, max_size=4),
       methods=st.lists(st.sampled_from(list(MethodId)), min_size=1, max_size=5, unique=True),
       kind=st.sampled_from(["linear", "polynomial", "rbf"]))
def test_effective_config_roundtrip(tmp_path_factory, k, reps, seed, ga, methods, kind):
    base = tmp_path_factory.mktemp("cfg")
    text = MINIMAL + (f"[graph]\nk_neighbors = {k}\n[kernel]\nkind = {kind}\n"
                      f"[grid]\ngamma_ambient = {', '.join(map(repr, ga))}\n"
                      f"[experiment]\nrepetitions = {reps}\nbase_seed = {seed}\n"
                      f"methods = {', '.join(m.value for m in methods)}\n")
    cfg = parse_config_text(text, base)
    again = parse_config_text(to_ini(cfg), "/")
    assert again == cfg


def test_output_directory_honoured(tmp_path):
    cfg = parse_config_text(MINIMAL + "[output]\ndirectory = out/here\n", tmp_path)
    assert cfg.output_dir == (tmp_path / "out" / "here").resolve()
