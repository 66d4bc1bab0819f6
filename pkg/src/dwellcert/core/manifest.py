"""Run manifests: one JSON file per command run, listing what was produced
and from which inputs."""

from __future__ import annotations

import json
import logging
import typing
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from pathlib import Path

if typing.TYPE_CHECKING:
    from typing import Any, Dict, List, Optional

logger = logging.getLogger(__name__)

MANIFEST_DIR = "manifests"


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


@dataclass
class RunManifest:
    command: str
    out_dir: Path
    config_hash: Optional[str] = None
    """SHA-256 of the config file bytes"""
    seed: Optional[int] = None
    argv: List[str] = field(default_factory=list)
    started: str = field(default_factory=_now)
    finished: Optional[str] = None
    exit_code: Optional[int] = None
    artifacts: List[str] = field(default_factory=list)
    """Paths relative to ``out_dir``, in the order they were written."""

    def add(self, path: Path) -> Path:
        """Record an emitted file and return it."""
        path = Path(path)
        try:
            name = path.resolve().relative_to(self.out_dir.resolve()).as_posix()
        except ValueError:
            name = str(path)
        if name not in self.artifacts:
            self.artifacts.append(name)
        return path

    @property
    def path(self) -> Path:
        return self.out_dir / MANIFEST_DIR / f"{self.command}.json"

    def to_dict(self) -> Dict[str, Any]:
        from dwellcert import __version__

        data = asdict(self)
        data["out_dir"] = str(self.out_dir)
        data["version"] = __version__
        return data

    def write(self, exit_code: int) -> Path:
        """Stamp the finish time and exit code and write the manifest. The
        manifest itself is not listed among the artifacts."""
        self.finished = _now()
        self.exit_code = int(exit_code)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self.path.write_text(
            json.dumps(self.to_dict(), indent=2) + "\n", encoding="utf-8"
        )
        logger.info("Wrote manifest %s", self.path)
        return self.path
