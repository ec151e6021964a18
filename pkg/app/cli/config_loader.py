"""
Flat text form of ExperimentConfig.

One ``section.key = value`` per line. A ``#`` at the start of a line or after
whitespace starts a comment; inside a value it is kept. Values are JSON
literals where they parse as such (numbers, booleans, null, lists) and bare
strings otherwise. ``dump_config`` writes every field in a fixed order, so
load(dump(c)) == c and dump(load(text)) is canonical.
"""

import hashlib
import json
import re
from pathlib import Path
from typing import Any, Dict, List, Union

from pydantic import ValidationError

from app.cli.models.experiment_config import ExperimentConfig

COMMENT = re.compile(r"(?:^|\s)#")


def _parse_value(raw: str) -> Any:
    try:
        return json.loads(raw)
    except json.JSONDecodeError:
        return raw


def parse_config_text(text: str) -> ExperimentConfig:
    """
    Parse flat key-value text into a validated ExperimentConfig.

    Raises:
        ValueError: On malformed lines, repeated keys, or invalid values.
    """
    nested: Dict[str, Any] = {}
    seen = set()
    for number, line in enumerate(text.splitlines(), start=1):
        stripped = COMMENT.split(line, 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ValueError(f"config line {number}: expected 'key = value', got {line.strip()!r}")
        key, raw = (part.strip() for part in stripped.split("=", 1))
        if not key:
            raise ValueError(f"config line {number}: missing key")
        if key in seen:
            raise ValueError(f"config line {number}: key {key!r} given twice")
        seen.add(key)
        node = nested
        *sections, leaf = key.split(".")
        for section in sections:
            node = node.setdefault(section, {})
            if not isinstance(node, dict):
                raise ValueError(f"config line {number}: {key!r} nests under a scalar")
        node[leaf] = _parse_value(raw)
    try:
        return ExperimentConfig.model_validate(nested)
    except ValidationError as e:
        raise ValueError(f"Invalid configuration: {e}") from None


def _flatten(prefix: str, value: Any, lines: List[str]) -> None:
    if isinstance(value, dict):
        for key, inner in value.items():
            _flatten(f"{prefix}.{key}" if prefix else key, inner, lines)
    else:
        lines.append(f"{prefix} = {json.dumps(value)}")


def dump_config(config: ExperimentConfig) -> str:
    """Canonical text form: every field, section order as declared."""
    lines: List[str] = []
    _flatten("", config.model_dump(mode="json", by_alias=True), lines)
    return "\n".join(lines) + "\n"


def config_hash(config: ExperimentConfig) -> str:
    return hashlib.blake2b(dump_config(config).encode("utf-8"), digest_size=16).hexdigest()


def load_config(path: Union[str, Path, None]) -> ExperimentConfig:
    """
    Read a config file; ``None`` yields the all-defaults configuration.

    Raises:
        FileNotFoundError: If the path does not exist.
    """
    if path is None:
        return ExperimentConfig()
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"Config file not found: {path}")
    return parse_config_text(path.read_text(encoding="utf-8"))
