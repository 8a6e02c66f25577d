"""
Experiment configuration files.

A flat list of `section.key = value` assignments, eg.

    # K x tau grid on synthetic data
    net.preset = lenet-small
    data.source = synthetic
    data.per_class = 600
    train.batch_size = 50
    cost.S = 20
    sweep.heatmap_taus = 1, 10, 50, 100

`net.layer.<n> = <kind> key=value ...` lines, ordered by n, describe a
network inline and take precedence over `net.preset`:

    net.layer.1 = data name=data shape=8x1x1x16
    net.layer.2 = label name=label shape=8x1
    net.layer.3 = linear name=ip1 inputs=data outputs=3
    net.layer.4 = softmax-loss name=loss inputs=ip1,label
"""

import dataclasses
import os
import typing
from typing import Any, Dict, List, Mapping, Optional, Tuple

from parasgd import settings
from parasgd.lib import coerce_to_float, coerce_to_int, parse_extents
from parasgd.models import (
    ActivationLayer,
    ConvLayer,
    CostModel,
    DataLayer,
    LabelLayer,
    LayerSpec,
    LinearLayer,
    NetParams,
    NetSpecError,
    PoolLayer,
    SoftmaxWithLoss,
)

LAYER_PREFIX = "net.layer."
PATH_FIELDS = (
    "data.images",
    "data.labels",
    "data.csv",
    "data.validation_images",
    "data.validation_labels",
    "data.validation_csv",
    "output.dir",
)


class ConfigError(ValueError):
    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


@dataclasses.dataclass(frozen=True)
class ExperimentConfig:
    net: settings.NetSection = settings.NetSection()
    data: settings.DataSection = settings.DataSection()
    train: settings.TrainSection = settings.TrainSection()
    scheme: settings.SchemeSection = settings.SchemeSection()
    cost: settings.CostSection = settings.CostSection()
    target: settings.TargetSection = settings.TargetSection()
    budget: settings.BudgetSection = settings.BudgetSection()
    eval: settings.EvalSection = settings.EvalSection()
    sweep: settings.SweepSection = settings.SweepSection()
    run: settings.RunSection = settings.RunSection()
    output: settings.OutputSection = settings.OutputSection()
    layers: Tuple[LayerSpec, ...] = ()
    source: Optional[str] = None

    @property
    def example_shape(self) -> Tuple[int, int, int]:
        c, h, w = self.data.shape
        return (c, h, w)

    @property
    def threads(self) -> int:
        return self.run.threads or settings.available_threads()

    def net_params(self, example_shape: Optional[Tuple[int, int, int]] = None) -> NetParams:
        """Inline layers when given, else the named preset at train.batch_size"""
        if self.layers:
            return NetParams(self.layers)
        return settings.build_preset(
            self.net.preset,
            self.train.batch_size,
            example_shape or self.example_shape,
            self.data.classes,
        )

    def cost_model(self) -> CostModel:
        return CostModel(C_b=self.cost.C_b, S=self.cost.S, gamma=self.cost.gamma)

    def as_dict(self) -> Dict[str, Any]:
        """Flat `section.key` view, as written in config files"""
        flat: Dict[str, Any] = {}
        for section in settings.SECTIONS:
            for key, value in dataclasses.asdict(getattr(self, section)).items():
                flat[f"{section}.{key}"] = list(value) if isinstance(value, tuple) else value
        for index, spec in enumerate(self.layers, start=1):
            flat[f"{LAYER_PREFIX}{index}"] = format_layer(spec)
        return flat


def update_dict(
    old_dict: Mapping[str, Any], new_dict: Mapping[str, Any], place_new: bool = False
) -> Dict[str, Any]:
    """Returns a copy of `old_dict` after updating it with `new_dict`"""
    result = {**old_dict}
    for k, v in new_dict.items():
        if k in result or place_new:
            result[k] = v
    return result


def parse_assignments(text: str, source: str = "<config>") -> Dict[str, str]:
    assignments: Dict[str, str] = {}
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key = key.strip()
        if not sep or not key:
            raise ConfigError(f"{source}:{line_no}", f"expected 'section.key = value', got {raw!r}")
        if key in assignments:
            raise ConfigError(key, f"assigned twice ({source}:{line_no})")
        assignments[key] = value.strip()
    return assignments


def _coerce(field: str, hint: Any, raw: str) -> Any:
    if hint is bool:
        lowered = raw.lower()
        if lowered in ("true", "yes", "1", "on"):
            return True
        if lowered in ("false", "no", "0", "off"):
            return False
        raise ConfigError(field, f"expected a boolean, got {raw!r}")
    if hint is int:
        value = coerce_to_int(raw)
        if value is None:
            raise ConfigError(field, f"expected an integer, got {raw!r}")
        return value
    if hint is float:
        value = coerce_to_float(raw)
        if value is None:
            raise ConfigError(field, f"expected a number, got {raw!r}")
        return value
    if typing.get_origin(hint) in (tuple, Tuple):
        item_hint = typing.get_args(hint)[0]
        if item_hint is int and "x" in raw:
            try:
                return parse_extents(raw)
            except ValueError:
                raise ConfigError(field, f"expected extents like 1x28x28, got {raw!r}") from None
        items = [item.strip() for item in raw.split(",") if item.strip()]
        return tuple(_coerce(field, item_hint, item) for item in items)
    return raw


def _section_kwargs(section: str, raw: Mapping[str, str]) -> Dict[str, Any]:
    cls = settings.SECTIONS[section]
    hints = typing.get_type_hints(cls)
    return {key: _coerce(f"{section}.{key}", hints[key], value) for key, value in raw.items()}


def _layer_options(field: str, tokens: List[str]) -> Dict[str, str]:
    options: Dict[str, str] = {}
    for token in tokens:
        key, sep, value = token.partition("=")
        if not sep or not value:
            raise ConfigError(field, f"expected key=value, got {token!r}")
        options[key] = value
    return options


def _require(field: str, options: Dict[str, str], *keys: str) -> List[str]:
    missing = [k for k in keys if k not in options]
    if missing:
        raise ConfigError(field, f"missing {', '.join(missing)}")
    unknown = [k for k in options if k not in keys]
    if unknown:
        raise ConfigError(field, f"unknown option {', '.join(unknown)}")
    return [options[k] for k in keys]


def _extents(field: str, raw: str) -> Tuple[int, ...]:
    try:
        return parse_extents(raw)
    except ValueError:
        raise ConfigError(field, f"bad extents {raw!r}") from None


def _positive_int(field: str, raw: str) -> int:
    value = coerce_to_int(raw)
    if value is None or value < 1:
        raise ConfigError(field, f"expected a positive integer, got {raw!r}")
    return value


def _kernel(field: str, raw: str) -> Tuple[int, int]:
    """'5' is a 5x5 kernel"""
    extents = _extents(field, raw)
    if len(extents) == 1:
        return extents[0], extents[0]
    if len(extents) != 2:
        raise ConfigError(field, f"kernel must be kh x kw, got {raw!r}")
    return extents[0], extents[1]


def _inputs(raw: str) -> Tuple[str, ...]:
    return tuple(name for name in raw.split(",") if name)


def parse_layer(field: str, line: str) -> LayerSpec:
    if not line.split():
        raise ConfigError(field, "empty layer line")
    kind, *tokens = line.split()
    options = _layer_options(field, tokens)

    if kind == "data":
        name, shape = _require(field, options, "name", "shape")
        extents = _extents(field, shape)
        if len(extents) != 4:
            raise ConfigError(field, f"data shape must be b x c x h x w, got {shape}")
        return DataLayer(name, extents)  # type: ignore[arg-type]
    elif kind == "label":
        name, shape = _require(field, options, "name", "shape")
        extents = _extents(field, shape)
        if len(extents) != 2:
            raise ConfigError(field, f"label shape must be b x 1, got {shape}")
        return LabelLayer(name, extents)  # type: ignore[arg-type]
    elif kind == "conv":
        name, ins, kernel, filters = _require(
            field, options, "name", "inputs", "kernel", "filters"
        )
        return ConvLayer(
            name, _inputs(ins), _kernel(field, kernel), _positive_int(field, filters)
        )
    elif kind == "pool":
        name, ins, kernel, stride = _require(field, options, "name", "inputs", "kernel", "stride")
        return PoolLayer(
            name, _inputs(ins), _kernel(field, kernel), _positive_int(field, stride)
        )
    elif kind == "linear":
        name, ins, outputs = _require(field, options, "name", "inputs", "outputs")
        return LinearLayer(name, _inputs(ins), _positive_int(field, outputs))
    elif kind == "relu":
        name, ins = _require(field, options, "name", "inputs")
        return ActivationLayer(name, _inputs(ins))
    elif kind == "softmax-loss":
        name, ins = _require(field, options, "name", "inputs")
        return SoftmaxWithLoss(name, _inputs(ins))
    raise ConfigError(
        field,
        f"unknown layer kind {kind!r} "
        "(valid: data, label, conv, pool, linear, relu, softmax-loss)",
    )


def format_layer(spec: LayerSpec) -> str:
    def extents(values) -> str:
        return "x".join(str(v) for v in values)

    if isinstance(spec, DataLayer):
        return f"data name={spec.name} shape={extents(spec.shape)}"
    if isinstance(spec, LabelLayer):
        return f"label name={spec.name} shape={extents(spec.shape)}"
    ins = ",".join(spec.inputs)
    if isinstance(spec, ConvLayer):
        return (
            f"conv name={spec.name} inputs={ins} kernel={extents(spec.kernel)} "
            f"filters={spec.num_filters}"
        )
    if isinstance(spec, PoolLayer):
        return (
            f"pool name={spec.name} inputs={ins} kernel={extents(spec.kernel)} "
            f"stride={spec.stride}"
        )
    if isinstance(spec, LinearLayer):
        return f"linear name={spec.name} inputs={ins} outputs={spec.num_outputs}"
    if isinstance(spec, ActivationLayer):
        return f"relu name={spec.name} inputs={ins}"
    return f"softmax-loss name={spec.name} inputs={ins}"


def _layer_index(key: str) -> int:
    index = coerce_to_int(key[len(LAYER_PREFIX) :])
    if index is None:
        raise ConfigError(key, "layer lines are written net.layer.<number>")
    return index


def build_config(
    assignments: Mapping[str, str], base_dir: str = ".", source: Optional[str] = None
) -> ExperimentConfig:
    per_section: Dict[str, Dict[str, str]] = {section: {} for section in settings.SECTIONS}
    layer_lines: Dict[int, Tuple[str, str]] = {}

    for key, value in assignments.items():
        if key.startswith(LAYER_PREFIX):
            layer_lines[_layer_index(key)] = (key, value)
            continue
        section, _, name = key.partition(".")
        if section not in per_section:
            raise ConfigError(key, f"unknown section (valid: {', '.join(settings.SECTIONS)})")
        fields = {f.name for f in dataclasses.fields(settings.SECTIONS[section])}
        if name not in fields:
            raise ConfigError(key, f"unknown key (valid: {', '.join(sorted(fields))})")
        if key in PATH_FIELDS and value and not os.path.isabs(value):
            value = os.path.normpath(os.path.join(base_dir, value))
        per_section[section][name] = value

    sections = {}
    for section, raw in per_section.items():
        cls = settings.SECTIONS[section]
        defaults = dataclasses.asdict(cls())
        sections[section] = cls(**update_dict(defaults, _section_kwargs(section, raw)))

    layers = tuple(parse_layer(*layer_lines[i]) for i in sorted(layer_lines))
    config = ExperimentConfig(**sections, layers=layers, source=source)
    validate(config)
    return config


def load_config(
    path: Optional[str] = None, overrides: Optional[Mapping[str, str]] = None
) -> ExperimentConfig:
    """Defaults, then the file at `path`, then `overrides` (raw string values)"""
    assignments: Dict[str, str] = {}
    base_dir = os.getcwd()
    if path is not None:
        try:
            with open(path) as f:
                text = f.read()
        except OSError as e:
            raise ConfigError("--config", f"cannot read {path}: {e.strerror}") from None
        assignments = parse_assignments(text, path)
        base_dir = os.path.dirname(os.path.abspath(path))
    assignments = update_dict(assignments, overrides or {}, place_new=True)
    return build_config(assignments, base_dir, path)


def _check(ok: bool, field: str, message: str) -> None:
    if not ok:
        raise ConfigError(field, message)


def _check_file(field: str, path: str) -> None:
    _check(bool(path), field, "required for this data source")
    _check(os.path.isfile(path), field, f"no such file: {path}")


def _check_divides(workers: int, batch_size: int) -> None:
    _check(
        batch_size % workers == 0,
        "scheme.workers",
        f"K={workers} must divide the batch size {batch_size}",
    )


def validate(config: ExperimentConfig) -> None:
    data, train, scheme = config.data, config.train, config.scheme

    _check(
        scheme.name in settings.VALID_SCHEMES,
        "scheme.name",
        f"unknown scheme {scheme.name!r} (valid: {', '.join(settings.VALID_SCHEMES)})",
    )
    _check(
        data.source in settings.DATA_SOURCES,
        "data.source",
        f"unknown source {data.source!r} (valid: {', '.join(settings.DATA_SOURCES)})",
    )

    _check(data.classes >= 1, "data.classes", "must be >= 1")
    _check(len(data.shape) == 3 and min(data.shape) >= 1, "data.shape", "must be c x h x w")
    _check(data.per_class >= 1, "data.per_class", "must be >= 1")
    _check(data.separation >= 0, "data.separation", "must be >= 0")
    _check(0 < data.validation_fraction < 1, "data.validation_fraction", "must be in (0, 1)")
    if data.source == "idx":
        _check_file("data.images", data.images)
        _check_file("data.labels", data.labels)
    elif data.source == "csv":
        _check_file("data.csv", data.csv)
    if data.validation_images or data.validation_labels:
        _check_file("data.validation_images", data.validation_images)
        _check_file("data.validation_labels", data.validation_labels)
    if data.validation_csv:
        _check_file("data.validation_csv", data.validation_csv)

    _check(train.batch_size >= 1, "train.batch_size", "b must be >= 1")
    _check(train.learning_rate > 0, "train.learning_rate", "must be > 0")
    _check(0 <= train.momentum < 1, "train.momentum", "must be in [0, 1)")
    _check(train.warm_start >= 0, "train.warm_start", "must be >= 0")
    _check(scheme.workers >= 1, "scheme.workers", "K must be >= 1")
    _check(scheme.tau >= 1, "scheme.tau", "tau must be >= 1")

    _check(config.cost.C_b > 0, "cost.C_b", "must be > 0")
    _check(config.cost.S >= 0, "cost.S", "must be >= 0")
    _check(0 < config.cost.gamma <= 1, "cost.gamma", "must be in (0, 1]")
    _check(0 < config.target.accuracy <= 1, "target.accuracy", "a must be in (0, 1]")
    _check(config.target.calibrate_at >= 0, "target.calibrate_at", "must be >= 0")
    _check(config.budget.iterations >= 0, "budget.iterations", "must be >= 0")
    _check(config.budget.rounds >= 0, "budget.rounds", "must be >= 0")
    _check(config.eval.every >= 1, "eval.every", "must be >= 1")
    _check(config.eval.steps >= 0, "eval.steps", "must be >= 0")
    _check(config.run.threads >= 0, "run.threads", "must be >= 0")

    sweep = config.sweep
    for name in ("heatmap_workers", "heatmap_taus", "overhead_taus", "tau_taus", "scaling_workers"):
        values = getattr(sweep, name)
        _check(bool(values) and min(values) >= 1, f"sweep.{name}", "needs positive integers")
    _check(bool(sweep.overheads) and min(sweep.overheads) >= 0, "sweep.overheads", "needs S >= 0")
    _check(sweep.overhead_workers >= 1, "sweep.overhead_workers", "K must be >= 1")
    _check(sweep.tau_workers >= 1, "sweep.tau_workers", "K must be >= 1")
    _check(sweep.scaling_tau >= 1, "sweep.scaling_tau", "tau must be >= 1")

    if data.source == "idx" and not config.layers:
        # the example shape comes from the files; the preset is checked once they are read
        _check(
            config.net.preset in settings.PRESETS,
            "net.preset",
            f"unknown preset {config.net.preset!r} (valid: {', '.join(settings.PRESETS)})",
        )
        if scheme.name == "naive":
            _check_divides(scheme.workers, train.batch_size)
        return
    try:
        net_params = config.net_params()
    except NetSpecError as e:
        raise ConfigError("net.layer" if config.layers else "net.preset", str(e)) from None
    if scheme.name == "naive":
        _check_divides(scheme.workers, net_params.batch_size)


def resolve_output_dir(cli_out: Optional[str], config: ExperimentConfig) -> str:
    """--out, then output.dir, then $PARASGD_OUT, then ./parasgd-out"""
    for candidate in (cli_out, config.output.dir, os.environ.get(settings.OUTPUT_DIR_ENV)):
        if candidate:
            return candidate
    return settings.DEFAULT_OUTPUT_DIR


def parse_override(raw: str) -> Tuple[str, str]:
    key, sep, value = raw.partition("=")
    if not sep or not key.strip():
        raise ConfigError("--set", f"expected section.key=value, got {raw!r}")
    return key.strip(), value.strip()

