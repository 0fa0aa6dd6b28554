"""
Run configuration: a dataclass tree loaded from JSON, overridden by flags,
validated and hashed
"""

import hashlib
import json
import logging
import os
from dataclasses import asdict, dataclass, field, fields, is_dataclass, replace
from typing import Any, Dict, Optional, Tuple

import numpy as np

from config.settings import Settings
from ..core.attack import BASELINE_KINDS, AttackConfig
from ..core.evaluation import ApConfig
from ..core.segmenter import DecodeConfig, SegmenterConfig
from ..data.synthdata import SceneSpec
from ..utils.errors import ConfigError, FashionAdvError
from ..utils.file_handler import FileHandler

logger = logging.getLogger(__name__)


@dataclass
class DatasetConfig:
    n_train: int = Settings.DATASET['n_train']
    n_test: int = Settings.DATASET['n_test']
    n_styles: int = Settings.DATASET['n_styles']
    style_size: int = Settings.DATASET['style_size']
    scene: SceneSpec = field(default_factory=SceneSpec)


@dataclass
class TrainingConfig:
    epochs: int = Settings.SEGMENTER['epochs']
    lr: float = Settings.SEGMENTER['lr']
    batch_size: int = Settings.SEGMENTER['batch_size']
    eval_scenes: int = 200


@dataclass
class SuiteConfig:
    suite_size: int = Settings.ATTACK['suite_size']
    baselines: Tuple[str, ...] = BASELINE_KINDS
    baseline_epsilon: float = Settings.BASELINE['epsilon']
    baseline_steps: int = Settings.BASELINE['steps']
    baseline_step_size: float = Settings.BASELINE['step_size']
    grid_search: bool = True
    calibration_scenes: int = 5
    qfs: Tuple[int, ...] = Settings.EVALUATION['qfs']
    modes: Tuple[str, ...] = Settings.EVALUATION['modes']
    include_identity: bool = False
    ap: ApConfig = field(default_factory=ApConfig)


@dataclass
class RunConfig:
    seed: int = 0
    outdir: str = 'runs'
    workers: int = 1
    dataset: DatasetConfig = field(default_factory=DatasetConfig)
    model: SegmenterConfig = field(default_factory=SegmenterConfig)
    training: TrainingConfig = field(default_factory=TrainingConfig)
    decode: DecodeConfig = field(default_factory=DecodeConfig)
    attack: AttackConfig = field(default_factory=AttackConfig)
    suite: SuiteConfig = field(default_factory=SuiteConfig)

    # -- loading -----------------------------------------------------------------------

    @classmethod
    def from_dict(cls, payload: Dict[str, Any]) -> 'RunConfig':
        return _build(cls, payload, '')

    @classmethod
    def load(cls, path: Optional[str] = None) -> 'RunConfig':
        """Defaults, overlaid with the JSON file at ``path`` when given"""
        if not path:
            return cls()
        if not os.path.isfile(path):
            raise ConfigError("configuration file not found", path=path)
        try:
            payload = FileHandler.read_json(path)
        except json.JSONDecodeError as e:
            raise ConfigError(f"configuration is not valid JSON: {e}", path=path) from e
        logger.info(f"Loaded configuration from {path}")
        return cls.from_dict(payload)

    def override(self, key: str, value: Any) -> 'RunConfig':
        """Copy with the dotted ``key`` set to ``value``"""
        return _set_path(self, key.split('.'), value, key)

    # -- validation and provenance ---------------------------------------------------------

    def validate(self) -> None:
        if self.workers < 1:
            raise ConfigError("workers must be at least 1", key='workers', value=self.workers)
        if self.dataset.n_train < 1 or self.dataset.n_test < 1:
            raise ConfigError("dataset splits must be non-empty", key='dataset')
        if self.training.epochs < 1 or self.training.lr <= 0 or self.training.batch_size < 1:
            raise ConfigError("training needs epochs >= 1, lr > 0 and batch_size >= 1", key='training')
        if self.suite.suite_size < 1:
            raise ConfigError("suite size must be at least 1", key='suite.suite_size')
        unknown = [k for k in self.suite.baselines if k not in BASELINE_KINDS]
        if unknown:
            raise ConfigError(f"unknown baseline {unknown[0]}", key='suite.baselines')
        unknown = [m for m in self.suite.modes if m not in Settings.MANIPULATIONS]
        if unknown:
            raise ConfigError(f"unknown manipulation mode {unknown[0]}", key='suite.modes')
        if len(self.model.widths) != 4 or self.model.num_prototypes < 1:
            raise ConfigError("segmenter needs four stage widths and at least one prototype", key='model')
        if not 0 <= self.decode.score_thresh <= 1 or not 0 <= self.decode.nms_iou <= 1:
            raise ConfigError("decode thresholds must lie in [0, 1]", key='decode')
        try:
            self.dataset.scene.validate()
        except FashionAdvError as e:
            raise ConfigError(str(e), key='dataset.scene') from e
        self.attack.validate()
        self.suite.ap.validate()

    def to_dict(self) -> Dict[str, Any]:
        return json.loads(json.dumps(asdict(self), default=_jsonable))

    def digest(self) -> str:
        canonical = json.dumps(self.to_dict(), sort_keys=True, separators=(',', ':'))
        return hashlib.sha256(canonical.encode('utf-8')).hexdigest()

    def derived_seed(self, *keys: int) -> int:
        """Seed for one consumer of the global seed"""
        return int(np.random.SeedSequence([int(self.seed), *[int(k) for k in keys]]).generate_state(1)[0])

    def save(self, directory: str) -> Tuple[str, str]:
        config_path = FileHandler.write_json(os.path.join(directory, 'config.json'), self.to_dict())
        hash_path = os.path.join(directory, 'config.sha256')
        with open(hash_path, 'w', encoding='utf-8') as fh:
            fh.write(self.digest() + '\n')
        return config_path, hash_path


def _jsonable(value):
    if isinstance(value, np.ndarray):
        return value.tolist()
    raise TypeError(f"Object of type {type(value).__name__} is not JSON serializable")


def _tupled(value):
    if isinstance(value, list):
        return tuple(_tupled(v) for v in value)
    return value


def _build(cls, payload, prefix: str):
    if not isinstance(payload, dict):
        raise ConfigError("configuration section must be an object", key=prefix.rstrip('.') or '<root>')
    default = cls()
    names = {f.name for f in fields(cls)}
    unknown = sorted(set(payload) - names)
    if unknown:
        raise ConfigError("unknown configuration key", key=f"{prefix}{unknown[0]}")
    values = {}
    for name, value in payload.items():
        current = getattr(default, name)
        if is_dataclass(current):
            values[name] = _build(type(current), value, f"{prefix}{name}.")
        elif isinstance(current, tuple):
            values[name] = _tupled(value)
        else:
            values[name] = value
    return replace(default, **values)


def _set_path(node, parts, value, key: str):
    name = parts[0]
    if not is_dataclass(node) or name not in {f.name for f in fields(node)}:
        raise ConfigError("unknown configuration key", key=key)
    if len(parts) == 1:
        current = getattr(node, name)
        return replace(node, **{name: _tupled(list(value)) if isinstance(current, tuple) else value})
    return replace(node, **{name: _set_path(getattr(node, name), parts[1:], value, key)})
