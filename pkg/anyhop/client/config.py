"""Run configuration.

This module provides the Pydantic models that validate every tunable of the
pipeline, and the loader that assembles them from the flat, dotted-key config
files used by the CLI.

Classes
-------
EncoderConfig
    Sequence length, embedding size and seed of the frozen encoder
PipelineConfig
    Hop budget, retrieval depth, kept-pool size and ablation switches
RerankerConfig
    Graph attention depth and entity cap
TrainConfig
    Gradient descent settings shared by all trainable models
PathsConfig
    Default model and index directories
RunConfig
    Aggregate of all sections, built from a flat key-value mapping
SynthSpec
    Parameters of the synthetic benchmark generator
"""

import os
import warnings
from pathlib import Path
from typing import Any, Optional, Union

from pydantic import (
    BaseModel,
    ConfigDict,
    Field,
    ValidationError,
    field_validator,
    model_validator,
)

from anyhop.client._client_vars import CONFIG_DIR_ENV, SRC_DIR
from anyhop.client._exceptions import ConfigurationError
from anyhop.client._utils import load_yaml_config


_MODEL_CONFIG = ConfigDict(
    extra="forbid",
    frozen=True,
    populate_by_name=True,
    str_strip_whitespace=True,
    validate_default=True,
)


class EncoderConfig(BaseModel):
    """Configuration of the deterministic pair encoder.

    Parameters
    ----------
    max_length : int
        Token sequence length L of every encoded pair (config key ``encoder.L``)
    hidden_size : int
        Embedding size h, even (config key ``encoder.h``)
    seed : int
        Seed of the token hashing and segment vectors
    """

    model_config = _MODEL_CONFIG

    max_length: int = Field(64, ge=8, alias="L", description="Sequence length L")
    hidden_size: int = Field(32, ge=2, alias="h", description="Embedding size h")
    seed: int = Field(0, ge=0, description="Encoder seed")

    @field_validator("hidden_size")
    @classmethod
    def _check_even(cls, value: int) -> int:
        if value % 2 != 0:
            raise ValueError(f"encoder.h must be even, got {value}")
        return value


class PipelineConfig(BaseModel):
    """Configuration of the iterative retrieve, rerank and read loop.

    Parameters
    ----------
    max_hops : int
        Maximum number of retrieval rounds H
    retrieve_top_n : int
        Documents retrieved per round N
    keep_top_k : int
        Documents kept after reranking K
    rerank_cap : int
        Maximum number of documents fed to the reranker D_cap
    use_graph : bool
        Propagate entity information along shared-entity edges
    use_updater : bool
        Rewrite the question with a clue span when the reader abstains
    iterative_reranking : bool
        Filter the pool with reranker scores, otherwise with TF-IDF scores
    """

    model_config = _MODEL_CONFIG

    max_hops: int = Field(4, ge=1, alias="H", description="Maximum hops H")
    retrieve_top_n: int = Field(8, ge=1, alias="N", description="Docs per retrieval")
    keep_top_k: int = Field(4, ge=1, alias="K", description="Kept docs K")
    rerank_cap: int = Field(8, ge=1, alias="D_cap", description="Reranker input cap")
    use_graph: bool = True
    use_updater: bool = True
    iterative_reranking: bool = True

    @model_validator(mode="after")
    def _check_cap(self) -> "PipelineConfig":
        if self.keep_top_k > self.rerank_cap:
            raise ValueError(
                f"pipeline.K ({self.keep_top_k}) must not exceed "
                f"pipeline.D_cap ({self.rerank_cap})"
            )
        return self


class RerankerConfig(BaseModel):
    """Configuration of the graph reranker architecture."""

    model_config = _MODEL_CONFIG

    num_layers: int = Field(2, ge=1, alias="T", description="GAT layers T")
    entity_cap: int = Field(120, ge=1, description="Maximum graph nodes |E|")


class TrainConfig(BaseModel):
    """Configuration of plain gradient descent training."""

    model_config = _MODEL_CONFIG

    lr: float = Field(0.05, gt=0, description="Learning rate")
    steps: int = Field(400, ge=0, description="Gradient steps")
    seed: int = Field(0, ge=0, description="Sample order and sampling seed")
    batch_size: int = Field(8, ge=1, description="Samples per gradient step")
    log_every: int = Field(50, ge=1, description="Steps between loss log lines")


class PathsConfig(BaseModel):
    """Default directories used when the CLI flags are absent."""

    model_config = _MODEL_CONFIG

    models: Optional[Path] = None
    index: Optional[Path] = None


_SECTIONS: dict[str, type[BaseModel]] = {
    "encoder": EncoderConfig,
    "pipeline": PipelineConfig,
    "reranker": RerankerConfig,
    "train": TrainConfig,
    "paths": PathsConfig,
}


class RunConfig(BaseModel):
    """All configuration sections of a run.

    Notes
    -----
    The on-disk representation is flat: ``encoder.L: 64``, ``pipeline.K: 4``.
    Keys use the short aliases where a section defines one.
    """

    model_config = _MODEL_CONFIG

    encoder: EncoderConfig = Field(default_factory=EncoderConfig)
    pipeline: PipelineConfig = Field(default_factory=PipelineConfig)
    reranker: RerankerConfig = Field(default_factory=RerankerConfig)
    train: TrainConfig = Field(default_factory=TrainConfig)
    paths: PathsConfig = Field(default_factory=PathsConfig)

    @classmethod
    def from_flat(cls, flat: dict[str, Any]) -> "RunConfig":
        """Build a run config from a flat dotted-key mapping.

        Parameters
        ----------
        flat : dict[str, Any]
            Mapping such as ``{"encoder.h": 32, "pipeline.K": 4}``

        Returns
        -------
        RunConfig
            Validated configuration, unspecified keys keep their defaults

        Raises
        ------
        ConfigurationError
            If a key is unknown or a value fails validation
        """
        grouped: dict[str, dict[str, Any]] = {name: {} for name in _SECTIONS}
        for key, value in flat.items():
            section, _, field = str(key).partition(".")
            if section not in _SECTIONS or not field:
                raise ConfigurationError(f"Unknown config key: {key}")
            if field not in _field_keys(_SECTIONS[section]):
                raise ConfigurationError(f"Unknown config key: {key}")
            grouped[section][field] = value
        try:
            return cls(
                **{
                    name: _SECTIONS[name].model_validate(values)
                    for name, values in grouped.items()
                }
            )
        except ValidationError as err:
            raise ConfigurationError(f"Invalid configuration: {err}") from err

    def to_flat(self) -> dict[str, Any]:
        """Return the flat dotted-key representation."""
        flat: dict[str, Any] = {}
        for name in _SECTIONS:
            section = getattr(self, name).model_dump(by_alias=True, mode="json")
            for field, value in section.items():
                flat[f"{name}.{field}"] = value
        return flat


def _field_keys(model: type[BaseModel]) -> set[str]:
    """Return the accepted keys of a section, names and aliases."""
    keys = set()
    for name, info in model.model_fields.items():
        keys.add(name)
        if info.alias:
            keys.add(info.alias)
    return keys


def load_default_config() -> dict[str, Any]:
    """Load the flat default configuration.

    The packaged ``config/defaults.yaml`` is read first; a ``defaults.yaml``
    inside the directory named by ``ANYHOP_CONFIG_DIR`` overrides its keys.

    Returns
    -------
    dict[str, Any]
        Flat default configuration
    """
    default_path = Path(SRC_DIR, "config", "defaults.yaml")
    config = load_yaml_config(default_path)

    user_path = os.getenv(CONFIG_DIR_ENV)
    if user_path:
        user_file = Path(user_path, "defaults.yaml")
        if user_file.exists():
            config.update(load_yaml_config(user_file))
        else:
            warnings.warn(
                f"Could not find user config directory: {user_path}, revert to "
                f"default config located at {default_path}",
                UserWarning,
                stacklevel=2,
            )
    return config


def load_run_config(
    config_path: Optional[Union[str, Path]] = None,
    overrides: Optional[dict[str, Any]] = None,
) -> RunConfig:
    """Assemble the run configuration from every source.

    Precedence, lowest first: packaged defaults, ``ANYHOP_CONFIG_DIR``
    defaults, ``overrides`` (CLI flags), the explicit config file.

    Parameters
    ----------
    config_path : str or Path, optional
        Flat YAML config file
    overrides : dict[str, Any], optional
        Flat keys set from the command line, ``None`` values are ignored

    Returns
    -------
    RunConfig
        Validated configuration
    """
    flat = load_default_config()
    if overrides:
        flat.update({k: v for k, v in overrides.items() if v is not None})
    if config_path is not None:
        flat.update(load_yaml_config(config_path))
    return RunConfig.from_flat(flat)


class SynthSpec(BaseModel):
    """Parameters of a synthetic any-hop benchmark.

    Parameters
    ----------
    seed : int
        Generator seed
    n_docs : int
        Total number of documents
    n_entities : int
        Number of organisation entities, each with its own document; the other
        documents describe people
    n_questions : int
        Number of questions
    hop_mix : dict[int, float]
        Fraction of questions per gold chain length, keys in 1..3
    vocab_size : int
        Number of filler words documents draw their background text from
    dev_fraction : float
        Fraction of questions assigned to the held-out split
    """

    model_config = _MODEL_CONFIG

    seed: int = Field(7, ge=0)
    n_docs: int = Field(2000, ge=2)
    n_entities: int = Field(600, ge=2)
    n_questions: int = Field(300, ge=1)
    hop_mix: dict[int, float] = Field(default_factory=lambda: {1: 1 / 3, 2: 2 / 3})
    vocab_size: int = Field(500, ge=10, le=4000)
    dev_fraction: float = Field(0.2, ge=0.0, lt=1.0)

    @field_validator("hop_mix")
    @classmethod
    def _check_mix(cls, value: dict[int, float]) -> dict[int, float]:
        if not value:
            raise ValueError("hop_mix must not be empty")
        for hops, fraction in value.items():
            if hops not in (1, 2, 3):
                raise ValueError(f"hop_mix keys must lie in 1..3, got {hops}")
            if fraction < 0:
                raise ValueError(f"hop_mix fractions must be >= 0, got {fraction}")
        if abs(sum(value.values()) - 1.0) > 1e-9:
            raise ValueError(f"hop_mix must sum to 1, got {sum(value.values())}")
        return value
