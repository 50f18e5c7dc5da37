# config.py
import os
from dataclasses import asdict, dataclass

from dotenv import load_dotenv

from pagefrag.errors import InvalidConfig

# Load environment variables from .env file
load_dotenv()

# Configs
DEFAULT_SEED = int(os.getenv("PAGEFRAG_SEED", "0"))
LOG_LEVEL = os.getenv("PAGEFRAG_LOG_LEVEL", "INFO").upper()
LOG_FORMAT = "%(asctime)s [%(levelname)s] %(message)s"

DEFAULT_VIEWPORT = (1024, 768)
DEFAULT_TAGS = ("a", "button", "input[type=submit]")


@dataclass(frozen=True)
class FragConfig:
    """
    Thresholds for the separator-based fragmentation.

    A fragment is useful when it holds at least min_nodes element nodes and its
    bbox covers at least min_area square pixels. Separators must be strictly
    wider than min_separator_px.
    """
    min_nodes: int = 3
    min_area: int = 2500
    min_separator_px: int = 10

    def __post_init__(self):
        if self.min_nodes < 1:
            raise InvalidConfig(f"min_nodes must be >= 1, got {self.min_nodes}")
        if self.min_area < 0:
            raise InvalidConfig(f"min_area must be >= 0, got {self.min_area}")
        if self.min_separator_px < 0:
            raise InvalidConfig(f"min_separator_px must be >= 0, got {self.min_separator_px}")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class CompareConfig:
    visual_epsilon: float = 0.0
    max_depth: int = 32

    def __post_init__(self):
        if not 0.0 <= self.visual_epsilon <= 1.0:
            raise InvalidConfig(f"visual_epsilon must lie in [0, 1], got {self.visual_epsilon}")
        if self.max_depth < 1:
            raise InvalidConfig(f"max_depth must be >= 1, got {self.max_depth}")

    def to_dict(self) -> dict:
        return asdict(self)
