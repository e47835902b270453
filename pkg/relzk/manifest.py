"""
Run manifests
Every artefact starts with `#` lines describing the command that produced it, so the
artefact can be regenerated byte for byte.
"""

import json
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Union

from relzk import __version__
from relzk.errors import ConfigurationError

logger = logging.getLogger(__name__)

MANIFEST_PREFIX = "# relzk-manifest "


@dataclass
class RunManifest:
    subcommand: str
    seed: int
    params: Dict[str, Any] = field(default_factory=dict)
    inputs: Dict[str, Optional[str]] = field(default_factory=dict)
    outputs: Dict[str, Optional[str]] = field(default_factory=dict)
    version: str = __version__

    def to_header(self) -> List[str]:
        """Header lines; no wall-clock values so replays compare equal"""
        body = json.dumps(asdict(self), sort_keys=True, separators=(",", ":"))
        return [MANIFEST_PREFIX + body]

    def to_argv(self) -> List[str]:
        """Command-line arguments reproducing this run"""
        argv = [self.subcommand]
        merged = {**self.inputs, **self.outputs, **self.params, "seed": self.seed}
        for name in sorted(merged):
            value = merged[name]
            flag = "--" + name.replace("_", "-")
            if value is None or value is False:
                continue
            if value is True:
                argv.append(flag)
            else:
                argv.extend([flag, str(value)])
        return argv


def parse_manifest(lines: Iterable[str]) -> Optional[RunManifest]:
    """First manifest line among leading `#` lines, or None"""
    for line in lines:
        if not line.startswith("#"):
            break
        if line.startswith(MANIFEST_PREFIX):
            try:
                data = json.loads(line[len(MANIFEST_PREFIX):])
                return RunManifest(**data)
            except (json.JSONDecodeError, TypeError) as e:
                raise ConfigurationError(f"unreadable manifest line: {e}")
    return None


def read_manifest(path: Union[str, Path]) -> RunManifest:
    with open(path, "r", encoding="utf-8") as handle:
        manifest = parse_manifest(handle)
    if manifest is None:
        raise ConfigurationError(f"{path} has no run manifest")
    if manifest.version != __version__:
        logger.warning(f"Manifest written by relzk {manifest.version}, running {__version__}")
    return manifest
