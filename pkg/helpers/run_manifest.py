import hashlib
import json
import logging
import platform
import time
from importlib import metadata
from pathlib import Path
from typing import Dict, List, Optional

logger = logging.getLogger(__name__)

TRACKED_PACKAGES = ("beautifulsoup4", "lxml", "numpy", "pandas", "pyarrow", "Pillow", "python-dotenv")
MANIFEST_NAME = "manifest.json"


def file_digest(path: Path):
    """(sha256 hex, byte size) of a file, read in 64 KiB chunks."""
    h = hashlib.sha256()
    size = 0
    with Path(path).open("rb") as f:
        while chunk := f.read(65536):
            h.update(chunk)
            size += len(chunk)
    return h.hexdigest(), size


def package_versions() -> Dict[str, Optional[str]]:
    versions = {}
    for name in TRACKED_PACKAGES:
        try:
            versions[name] = metadata.version(name)
        except metadata.PackageNotFoundError:
            versions[name] = None
    return versions


class RunManifest:
    """
    Record of one CLI run, written as manifest.json beside its outputs.

    Holds the subcommand, argv, resolved configs and seed, package versions,
    a UTC timestamp, the run status (ok, failed, error, usage; incomplete
    until the CLI sets it) with any error message and, per output file, its
    size and sha256.
    """
    def __init__(self, outdir: Path, subcommand: str, argv: List[str], seed: Optional[int] = None):
        self.outdir = Path(outdir)
        self.subcommand = subcommand
        self.argv = list(argv)
        self.seed = seed
        self.configs: Dict[str, dict] = {}
        self.outputs: List[Path] = []
        self.created_at = time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime())
        self.status = "incomplete"
        self.error: Optional[str] = None

    def add_config(self, name: str, config: dict) -> None:
        self.configs[name] = config

    def add_output(self, path: Path) -> Path:
        path = Path(path)
        if path not in self.outputs:
            self.outputs.append(path)
        return path

    def to_dict(self) -> dict:
        files = []
        for path in self.outputs:
            if not path.exists():
                logger.warning(f"[skipped] manifest output {path} does not exist")
                continue
            sha256, size = file_digest(path)
            try:
                name = str(path.resolve().relative_to(self.outdir.resolve()))
            except ValueError:
                name = str(path)
            files.append({"path": name, "bytes": size, "sha256": sha256})
        return {
            "subcommand": self.subcommand,
            "argv": self.argv,
            "seed": self.seed,
            "configs": self.configs,
            "python": platform.python_version(),
            "packages": package_versions(),
            "created_at": self.created_at,
            "status": self.status,
            "error": self.error,
            "outputs": files,
        }

    def write(self) -> Path:
        self.outdir.mkdir(parents=True, exist_ok=True)
        path = self.outdir / MANIFEST_NAME
        path.write_text(json.dumps(self.to_dict(), indent=2), encoding="utf-8")
        logger.info(f"manifest written to {path} ({len(self.outputs)} output(s))")
        return path
