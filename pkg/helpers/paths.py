# paths.py
import os
import re
import time
from pathlib import Path

from dotenv import load_dotenv

load_dotenv()

# Every CLI run writes below this root unless --out is given
OUTPUT_ROOT = Path(os.environ.get("PAGEFRAG_OUTPUT_ROOT", "runs")).resolve()

REPO_ROOT = Path(__file__).resolve().parent.parent
FIXTURES_DIR = REPO_ROOT / "fixtures"
ADDRESSBOOK_DIR = FIXTURES_DIR / "addressbook"
APPS_DIR = FIXTURES_DIR / "apps"


# ============================================================================
# RUN OUTPUT PATHS
# ============================================================================

def default_run_name() -> str:
    """UTC timestamp like 20261019T120000Z."""
    return time.strftime("%Y%m%dT%H%M%SZ", time.gmtime())


def get_run_outdir(subcommand: str, run_name: str = None) -> Path:
    """
    Get output directory for one CLI run.

    Args:
        subcommand: e.g., "crawl", "runtest"
        run_name: e.g., "addressbook-mini"; defaults to a UTC timestamp

    Returns:
        Path like runs/crawl/addressbook-mini/
    """
    safe_name = re.sub(r'[\\/*?:"<>|\s]', '_', (run_name or default_run_name()).strip())
    path = OUTPUT_ROOT / subcommand / safe_name
    path.mkdir(parents=True, exist_ok=True)
    return path


# ============================================================================
# FIXTURE PATHS
# ============================================================================

def get_app_path(name_or_path: str) -> Path:
    """
    Resolve an app definition given either a file path or a fixture name.

    Args:
        name_or_path: e.g., "addressbook-mini" or "my_apps/shop.json"

    Returns:
        Path like fixtures/apps/addressbook-mini.json
    """
    candidate = Path(name_or_path)
    if candidate.suffix == ".json" or candidate.exists():
        return candidate
    return APPS_DIR / f"{name_or_path}.json"
