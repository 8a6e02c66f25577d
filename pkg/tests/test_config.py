import numpy as np
import pytest

from parasgd.config import (
    ConfigError,
    ExperimentConfig,
    format_layer,
    load_config,
    parse_assignments,
    parse_layer,
    parse_override,
    resolve_output_dir,
    update_dict,
)
from parasgd.models import ConvLayer, CostModel, DataLayer, LinearLayer, PoolLayer
from parasgd.settings import DEFAULT_OUTPUT_DIR, OUTPUT_DIR_ENV

INLINE_NET = """
net.layer.1 = data name=data shape=8x1x1x16
net.layer.2 = label name=label shape=8x1
net.layer.3 = linear name=ip1 inputs=data outputs=12
net.layer.4 = relu name=relu1 inputs=ip1
net.layer.5 = linear name=ip2 inputs=relu1 outputs=3
net.layer.6 = softmax-loss name=loss inputs=ip2,label
"""


def write_config(tmp_path, text: str, name: str = "experiment.conf") -> str:
    path = tmp_path / name
    path.write_text(text)
    return str(path)


def test_update_dict():
    old = {"a": 1, "b": 2}
    assert update_dict(old, {"b": 3, "c": 4}) == {"a": 1, "b": 3}
    assert update_dict(old, {"c": 4}, place_new=True) == {"a": 1, "b": 2, "c": 4}
    assert old == {"a": 1, "b": 2}


def test_parse_assignments_strips_comments():
    text = "# header\nscheme.tau = 25  # local steps\n\n  cost.S=20\n"
    assert parse_assignments(text) == {"scheme.tau": "25", "cost.S": "20"}
    with pytest.raises(ConfigError, match="expected"):
        parse_assignments("scheme.tau 25")
    with pytest.raises(ConfigError) as excinfo:
        parse_assignments("scheme.tau = 1\nscheme.tau = 2")
    assert excinfo.value.field == "scheme.tau"


def test_defaults():
    config = load_config()
    assert config == ExperimentConfig()
    assert config.scheme.name == "sparknet"
    assert config.example_shape == (1, 28, 28)
    assert config.cost_model() == CostModel(1.0, 0.0, 1.0)
    assert config.net_params().batch_size == 50
    assert config.threads >= 1


def test_file_values_are_coerced(tmp_path):
    path = write_config(
        tmp_path,
        "scheme.name = naive\nscheme.workers = 5\ntrain.batch_size = 10\n"
        "cost.C_b = 2\ncost.S = 20.5\ndata.shape = 1x16x16\n"
        "sweep.heatmap_taus = 1, 10, 50\nsweep.overheads = 0, 2.5\n",
    )
    config = load_config(path)
    assert config.scheme.workers == 5
    assert config.cost.C_b == 2.0 and config.cost.S == 20.5
    assert config.data.shape == (1, 16, 16)
    assert config.sweep.heatmap_taus == (1, 10, 50)
    assert config.sweep.overheads == (0.0, 2.5)
    assert config.source == path


def test_overrides_win_over_the_file(tmp_path):
    path = write_config(tmp_path, "scheme.tau = 10\n")
    assert load_config(path, {"scheme.tau": "30"}).scheme.tau == 30
    assert load_config(overrides={"run.seed": "7"}).run.seed == 7


@pytest.mark.parametrize(
    "key, value, field",
    [
        ("scheme.tua", "3", "scheme.tua"),
        ("schema.tau", "3", "schema.tau"),
        ("scheme.tau", "many", "scheme.tau"),
        ("scheme.tau", "0", "scheme.tau"),
        ("scheme.workers", "0", "scheme.workers"),
        ("train.batch_size", "0", "train.batch_size"),
        ("train.momentum", "1.0", "train.momentum"),
        ("cost.S", "-1", "cost.S"),
        ("cost.C_b", "0", "cost.C_b"),
        ("target.accuracy", "1.5", "target.accuracy"),
        ("eval.every", "0", "eval.every"),
        ("sweep.heatmap_taus", "1, 0", "sweep.heatmap_taus"),
        ("data.shape", "1xbig", "data.shape"),
        ("data.source", "imagenet", "data.source"),
        ("net.preset", "resnet", "net.preset"),
    ],
)
def test_invalid_values_name_their_field(key, value, field):
    with pytest.raises(ConfigError) as excinfo:
        load_config(overrides={key: value})
    assert excinfo.value.field == field


def test_unknown_scheme_lists_the_valid_ones():
    with pytest.raises(ConfigError, match="serial, naive, sparknet"):
        load_config(overrides={"scheme.name": "allreduce"})


def test_naive_needs_workers_dividing_the_batch():
    with pytest.raises(ConfigError) as excinfo:
        load_config(overrides={"scheme.name": "naive", "scheme.workers": "3"})
    assert excinfo.value.field == "scheme.workers"
    naive = load_config(overrides={"scheme.name": "naive", "scheme.workers": "5"})
    assert naive.scheme.workers == 5
    # the divisibility check is specific to the naive scheme
    assert load_config(overrides={"scheme.workers": "3"}).scheme.workers == 3


def test_naive_worker_check_with_idx_data(write_idx):
    images_path, labels_path = write_idx(np.zeros((4, 2, 2)), np.array([0, 1, 0, 1]))
    idx = {"data.source": "idx", "data.images": images_path, "data.labels": labels_path}
    with pytest.raises(ConfigError) as excinfo:
        load_config(overrides={**idx, "scheme.name": "naive", "scheme.workers": "3"})
    assert excinfo.value.field == "scheme.workers"
    naive = load_config(overrides={**idx, "scheme.name": "naive", "scheme.workers": "5"})
    assert naive.scheme.workers == 5


def test_relative_paths_resolve_against_the_config_file(tmp_path):
    (tmp_path / "data").mkdir()
    (tmp_path / "data" / "train.csv").write_text("0,0\n")
    path = write_config(
        tmp_path,
        "net.preset = mlp\ndata.source = csv\ndata.csv = data/train.csv\ndata.shape = 1x1x1\n"
        "output.dir = results\n",
    )
    config = load_config(path)
    assert config.data.csv == str(tmp_path / "data" / "train.csv")
    assert config.output.dir == str(tmp_path / "results")


def test_missing_data_files(tmp_path):
    with pytest.raises(ConfigError) as excinfo:
        load_config(overrides={"data.source": "idx"})
    assert excinfo.value.field == "data.images"
    with pytest.raises(ConfigError, match="no such file"):
        load_config(overrides={"data.source": "csv", "data.csv": str(tmp_path / "nope.csv")})


def test_unreadable_config_file(tmp_path):
    with pytest.raises(ConfigError) as excinfo:
        load_config(str(tmp_path / "missing.conf"))
    assert excinfo.value.field == "--config"


def test_inline_layers(tmp_path):
    config = load_config(write_config(tmp_path, INLINE_NET))
    params = config.net_params()
    assert params.batch_size == 8
    assert params.example_shape == (1, 1, 16)
    assert [spec.name for spec in params.layers] == [
        "data",
        "label",
        "ip1",
        "relu1",
        "ip2",
        "loss",
    ]
    assert config.as_dict()["net.layer.3"] == "linear name=ip1 inputs=data outputs=12"


def test_inline_layers_are_validated(tmp_path):
    broken = INLINE_NET.replace("inputs=relu1", "inputs=relu9")
    with pytest.raises(ConfigError) as excinfo:
        load_config(write_config(tmp_path, broken))
    assert excinfo.value.field == "net.layer"


def test_parse_layer():
    assert parse_layer("f", "conv name=c1 inputs=data kernel=5 filters=20") == ConvLayer(
        "c1", ("data",), (5, 5), 20
    )
    assert parse_layer("f", "pool name=p inputs=c1 kernel=3x2 stride=2") == PoolLayer(
        "p", ("c1",), (3, 2), 2
    )
    assert parse_layer("f", "data name=d shape=4x1x2x2") == DataLayer("d", (4, 1, 2, 2))
    for line in (
        "",
        "dropout name=x inputs=y",
        "linear name=ip inputs=data",
        "linear name=ip inputs=data outputs=3 bias=no",
        "linear name=ip inputs=data outputs=0",
        "data name=d shape=4x2x2",
        "pool name=p inputs=c kernel=2x2x2 stride=1",
    ):
        with pytest.raises(ConfigError):
            parse_layer("f", line)


def test_format_layer_reads_back():
    spec = LinearLayer("ip1", ("pool2",), 500)
    assert parse_layer("f", format_layer(spec)) == spec
    conv = ConvLayer("conv1", ("data",), (5, 3), 8)
    assert parse_layer("f", format_layer(conv)) == conv


def test_as_dict_is_flat():
    flat = load_config(overrides={"cost.S": "5"}).as_dict()
    assert flat["cost.S"] == 5.0
    assert flat["sweep.heatmap_workers"] == [1, 2, 4]
    assert "net.layer.1" not in flat


def test_output_dir_precedence(monkeypatch, tmp_path):
    monkeypatch.delenv(OUTPUT_DIR_ENV, raising=False)
    config = load_config()
    assert resolve_output_dir(None, config) == DEFAULT_OUTPUT_DIR

    monkeypatch.setenv(OUTPUT_DIR_ENV, "from-env")
    assert resolve_output_dir(None, config) == "from-env"

    configured = load_config(overrides={"output.dir": str(tmp_path / "from-config")})
    assert resolve_output_dir(None, configured) == str(tmp_path / "from-config")
    assert resolve_output_dir("from-cli", configured) == "from-cli"


def test_parse_override():
    assert parse_override("scheme.tau = 5") == ("scheme.tau", "5")
    assert parse_override("sweep.heatmap_taus=1,2") == ("sweep.heatmap_taus", "1,2")
    with pytest.raises(ConfigError):
        parse_override("scheme.tau")
