"""Pipeline configuration: INI file with sections, env var overrides, validation.

Any key can be overridden with ``ASEM_<SECTION>__<KEY>``, e.g.
``ASEM_SEC__GAMMA=40``.
"""

from __future__ import annotations

import configparser
import dataclasses
import hashlib
import json
import os
from dataclasses import dataclass, field
from pathlib import Path

from .classifier import MultitaskConfig
from .embedding import CbowConfig
from .errors import ConfigError

ENV_PREFIX = "ASEM_"


@dataclass
class PathsSection:
    in_domain: str = ""
    bank: str = ""
    test: str = ""
    seeds: str = ""
    pos_lexicon: str = ""  # extra word<TAB>TAG entries layered over the bundled lexicon
    dev_labeled: str = ""
    embeddings: str = ""  # load instead of training CBOW
    bank_vectors: str = ""  # precomputed encoder: bank sentence vectors
    query_vectors: str = ""  # precomputed encoder: in-domain sentence vectors
    phrase_vectors: str = ""  # precomputed encoder: seed word vectors
    output_dir: str = "asem-out"


@dataclass
class CorpusSection:
    split_ratio: float = 0.85
    tagger: str = "lexicon"


@dataclass
class EmbeddingSection:
    dim: int = 200
    epochs: int = 10
    window: int = 10
    negatives: int = 5
    min_count: int = 2
    learning_rate: float = 0.025
    sample: float = 1e-3


@dataclass
class PseudoLabelSection:
    m: int = 2
    atp_window: int = 20  # tuned in [20, 100] in the original experiments


@dataclass
class SecSection:
    enabled: bool = True
    gamma: float = 40.0  # tuned in [0, 700] on unnormalized scores
    epsilon: float = 1e-9


@dataclass
class RetrievalSection:
    k: int = 10  # tuned in [1, 20]; 0 disables augmentation
    encoder: str = "cbow-sum"
    filter: bool = True


@dataclass
class ClassifierSection:
    lambda_acd: float = 1.0
    lambda_ate: float = 0.8
    lambda_atp: float = 0.6
    batch_size: int = 16
    learning_rate: float = 1e-3
    weight_decay: float = 1e-5
    epochs: int = 20
    hidden: int = 64
    context_dim: int = 32
    token_norm: str = "sum"


@dataclass
class RunSection:
    seed: int = 0


@dataclass
class PipelineConfig:
    paths: PathsSection = field(default_factory=PathsSection)
    corpus: CorpusSection = field(default_factory=CorpusSection)
    embedding: EmbeddingSection = field(default_factory=EmbeddingSection)
    pseudolabel: PseudoLabelSection = field(default_factory=PseudoLabelSection)
    sec: SecSection = field(default_factory=SecSection)
    retrieval: RetrievalSection = field(default_factory=RetrievalSection)
    classifier: ClassifierSection = field(default_factory=ClassifierSection)
    run: RunSection = field(default_factory=RunSection)

    # --- derived module configs ---

    def cbow(self) -> CbowConfig:
        e = self.embedding
        return CbowConfig(e.dim, e.epochs, e.window, e.negatives, e.min_count, e.learning_rate,
                          sample=e.sample, rng_seed=self.run.seed)

    def multitask(self) -> MultitaskConfig:
        c = self.classifier
        return MultitaskConfig(c.lambda_acd, c.lambda_ate, c.lambda_atp, c.batch_size, c.learning_rate,
                               c.weight_decay, c.epochs, c.hidden, c.context_dim,
                               token_norm=c.token_norm, rng_seed=self.run.seed)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def section_hash(self, *sections: str) -> str:
        payload = json.dumps({s: dataclasses.asdict(getattr(self, s)) for s in sections}, sort_keys=True)
        return hashlib.sha256(payload.encode()).hexdigest()

    def config_hash(self) -> str:
        """Hash of everything that can change results; where they are written does not."""
        d = self.to_dict()
        del d["paths"]["output_dir"]
        return hashlib.sha256(json.dumps(d, sort_keys=True).encode()).hexdigest()[:16]

    def with_seed(self, seed: int) -> "PipelineConfig":
        return dataclasses.replace(self, run=RunSection(seed))

    def validate(self, check_paths: bool = True) -> "PipelineConfig":
        try:
            self.cbow()
            self.multitask()
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        if not 0 < self.corpus.split_ratio < 1:
            raise ConfigError("corpus.split_ratio must lie in (0, 1)")
        if self.pseudolabel.m < 0 or self.pseudolabel.atp_window < 1:
            raise ConfigError("pseudolabel.m must be >= 0 and atp_window >= 1")
        if self.sec.gamma < 0 or self.sec.epsilon <= 0:
            raise ConfigError("sec.gamma must be >= 0 and sec.epsilon > 0")
        if self.retrieval.k < 0:
            raise ConfigError("retrieval.k must be >= 0")
        if check_paths:
            p = self.paths
            required = ["in_domain", "test", "seeds"] + (["bank"] if self.retrieval.k > 0 else [])
            for name in required:
                value = getattr(p, name)
                if not value:
                    raise ConfigError(f"paths.{name} is required")
                if not Path(value).exists():
                    raise ConfigError(f"paths.{name} does not exist: {value}")
            for name in ("pos_lexicon", "dev_labeled", "embeddings", "bank_vectors",
                         "query_vectors", "phrase_vectors"):
                value = getattr(p, name)
                if value and not Path(value).exists():
                    raise ConfigError(f"paths.{name} does not exist: {value}")
            if self.retrieval.encoder == "precomputed" and self.retrieval.k > 0 and not p.bank_vectors:
                raise ConfigError("the precomputed encoder needs paths.bank_vectors")
        return self


def _coerce(value: str, kind, where: str):
    try:
        if kind is bool:
            lowered = value.strip().lower()
            if lowered in ("1", "true", "yes", "on"):
                return True
            if lowered in ("0", "false", "no", "off"):
                return False
            raise ValueError(value)
        return kind(value.strip())
    except ValueError:
        raise ConfigError(f"{where}: cannot read {value!r} as {kind.__name__}") from None


def _apply(cfg: PipelineConfig, section: str, key: str, value: str, where: str) -> None:
    sec = getattr(cfg, section, None)
    if sec is None or not dataclasses.is_dataclass(sec):
        raise ConfigError(f"{where}: unknown section [{section}]")
    kinds = {f.name: f.type for f in dataclasses.fields(sec)}
    if key not in kinds:
        raise ConfigError(f"{where}: unknown key {section}.{key}")
    kind = {"str": str, "int": int, "float": float, "bool": bool}[kinds[key]]
    setattr(sec, key, _coerce(value, kind, where))


def load_config(path=None, env=None, base_dir=None) -> PipelineConfig:
    """Read an INI config (all keys optional), then apply env overrides.

    Relative paths in ``[paths]`` resolve against the config file's folder.
    """
    cfg = PipelineConfig()
    if path is not None:
        parser = configparser.ConfigParser(interpolation=None)
        try:
            with open(path, encoding="utf-8") as fh:
                parser.read_file(fh)
        except (OSError, configparser.Error) as exc:
            raise ConfigError(f"{path}: {exc}") from None
        for section in parser.sections():
            for key, value in parser.items(section):
                _apply(cfg, section, key, value, str(path))
        base_dir = base_dir or Path(path).resolve().parent
    env = os.environ if env is None else env
    for name, value in sorted(env.items()):
        if not name.startswith(ENV_PREFIX) or "__" not in name:
            continue
        section, key = name[len(ENV_PREFIX):].lower().split("__", 1)
        _apply(cfg, section, key, value, f"env {name}")
    if base_dir is not None:
        for f in dataclasses.fields(cfg.paths):
            value = getattr(cfg.paths, f.name)
            if value and not Path(value).is_absolute():
                setattr(cfg.paths, f.name, str(Path(base_dir) / value))
    return cfg


def dump_config(cfg: PipelineConfig, path) -> None:
    parser = configparser.ConfigParser(interpolation=None)
    for name, section in cfg.to_dict().items():
        parser[name] = {k: str(v) for k, v in section.items()}
    with open(path, "w", encoding="utf-8") as fh:
        parser.write(fh)
