"""Utility functions shared between CLI and API.

This module provides the line-delimited record IO used by every file format of
the package, YAML loading with consistent error messages, and resolution of
default directories from the environment.
"""

import json
import os
from collections.abc import Iterable, Iterator
from pathlib import Path
from typing import Any, Optional, Union

import yaml

from anyhop.client._client_vars import MODELS_DIR_ENV
from anyhop.client._exceptions import CorpusFormatError


def load_yaml_config(path: Union[str, Path]) -> dict[str, Any]:
    """Load a YAML mapping with error handling.

    Parameters
    ----------
    path : str or Path
        Path to the YAML file

    Returns
    -------
    dict[str, Any]
        Parsed mapping, empty when the file is empty

    Raises
    ------
    FileNotFoundError
        If the file does not exist
    ValueError
        If the file is not valid YAML or does not hold a mapping
    """
    path = Path(path)
    try:
        with path.open() as f:
            config = yaml.safe_load(f) or {}
    except FileNotFoundError as err:
        raise FileNotFoundError(f"Could not find config: {path}") from err
    except yaml.YAMLError as err:
        raise ValueError(f"Error parsing YAML config at {path}: {err}") from err
    if not isinstance(config, dict):
        raise ValueError(f"Expected a mapping in YAML config at {path}")
    return config


def iter_jsonl(path: Union[str, Path]) -> Iterator[tuple[int, dict[str, Any]]]:
    """Iterate over the records of a line-delimited JSON file.

    Blank lines are skipped. Line numbers are 1-based.

    Parameters
    ----------
    path : str or Path
        File to read

    Yields
    ------
    tuple[int, dict[str, Any]]
        Line number and decoded record

    Raises
    ------
    FileNotFoundError
        If the file does not exist
    CorpusFormatError
        If a line is not a JSON object
    """
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"Could not find file: {path}")
    with path.open(encoding="utf-8") as f:
        for line_number, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as err:
                raise CorpusFormatError(
                    f"invalid JSON in {path}: {err.msg}", line_number
                ) from err
            if not isinstance(record, dict):
                raise CorpusFormatError(
                    f"expected a JSON object in {path}", line_number
                )
            yield line_number, record


def read_jsonl(path: Union[str, Path]) -> list[dict[str, Any]]:
    """Read every record of a line-delimited JSON file."""
    return [record for _, record in iter_jsonl(path)]


def write_jsonl(path: Union[str, Path], records: Iterable[dict[str, Any]]) -> int:
    """Write records as line-delimited JSON with sorted keys.

    Parameters
    ----------
    path : str or Path
        Destination file, parent directories are created
    records : Iterable[dict[str, Any]]
        Records to write

    Returns
    -------
    int
        Number of records written
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    count = 0
    with path.open("w", encoding="utf-8") as f:
        for record in records:
            f.write(json.dumps(record, sort_keys=True, ensure_ascii=False))
            f.write("\n")
            count += 1
    return count


def resolve_models_dir(models_dir: Optional[Union[str, Path]] = None) -> Path:
    """Resolve the model directory from an argument or the environment.

    Parameters
    ----------
    models_dir : str or Path, optional
        Explicit model directory, takes precedence

    Returns
    -------
    Path
        The model directory

    Raises
    ------
    ValueError
        If neither an argument nor the environment variable is set
    """
    if models_dir is not None:
        return Path(models_dir)
    env_dir = os.getenv(MODELS_DIR_ENV)
    if env_dir:
        return Path(env_dir)
    raise ValueError(
        f"No model directory given, pass one explicitly or set {MODELS_DIR_ENV}"
    )
