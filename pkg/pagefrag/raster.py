# raster.py
"""
Synthetic rasterizer and the Raster container.

Pages are painted as solid boxes in document order. Text leaves add a
per-character glyph pattern so any text edit that fits in the node's box
changes pixels. Box colors are light (every channel >= 128) and glyph colors
dark (every channel < 128), so glyphs and boxes never share a histogram bin.
"""

import hashlib
import io
import zlib
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path
from typing import TYPE_CHECKING, Optional, Tuple

import numpy as np
from PIL import Image

from pagefrag.errors import InvalidConfig

if TYPE_CHECKING:
    from pagefrag.snapshot import DomTree

BBox = Tuple[int, int, int, int]

WHITE = (255, 255, 255)
# every channel sits in one of the two upper histogram levels (128-191,
# 192-255), so boxes of different tags usually land in different bins
PALETTE = (
    (235, 175, 160),
    (170, 215, 235),
    (235, 225, 205),
    (245, 225, 160),
    (160, 170, 220),
    (175, 230, 175),
    (245, 245, 245),
    (225, 180, 235),
    (180, 190, 240),
    (180, 180, 180),
)

GLYPH_CELL_W = 6
GLYPH_CELL_H = 8
GLYPH_W = 4
GLYPH_H = 6
TEXT_INSET = 2


@dataclass(frozen=True, eq=False)
class Raster:
    """Row-major RGB image backed by an (height, width, 3) uint8 array."""
    pixels: np.ndarray

    @property
    def width(self) -> int:
        return int(self.pixels.shape[1])

    @property
    def height(self) -> int:
        return int(self.pixels.shape[0])

    @property
    def empty(self) -> bool:
        return self.pixels.size == 0

    def clamp(self, bbox: Optional[BBox]) -> BBox:
        """Clamp a bbox to the image; a missing bbox yields an empty box."""
        if bbox is None:
            return (0, 0, 0, 0)
        x, y, w, h = bbox
        x0 = min(max(int(x), 0), self.width)
        y0 = min(max(int(y), 0), self.height)
        x1 = min(max(int(x + w), 0), self.width)
        y1 = min(max(int(y + h), 0), self.height)
        return (x0, y0, max(0, x1 - x0), max(0, y1 - y0))

    def crop(self, bbox: Optional[BBox]) -> "Raster":
        x, y, w, h = self.clamp(bbox)
        return Raster(self.pixels[y:y + h, x:x + w])

    def same_pixels(self, other: "Raster") -> bool:
        return self.pixels.shape == other.pixels.shape and bool(np.array_equal(self.pixels, other.pixels))

    def digest(self) -> str:
        h = hashlib.sha256()
        h.update(f"{self.width}x{self.height}".encode("ascii"))
        h.update(np.ascontiguousarray(self.pixels).tobytes())
        return h.hexdigest()

    def png_bytes(self) -> bytes:
        if self.empty:
            return b""
        buf = io.BytesIO()
        Image.fromarray(np.ascontiguousarray(self.pixels)).save(buf, format="PNG")
        return buf.getvalue()

    def save_png(self, path: Path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(self.png_bytes())
        return path

    @classmethod
    def from_png(cls, path: Path) -> "Raster":
        with Image.open(path) as img:
            return cls(np.asarray(img.convert("RGB"), dtype=np.uint8).copy())

    @classmethod
    def blank(cls, width: int, height: int) -> "Raster":
        pixels = np.empty((height, width, 3), dtype=np.uint8)
        pixels[:, :] = WHITE
        return cls(pixels)


def tag_color(tag: str) -> Tuple[int, int, int]:
    return PALETTE[zlib.crc32(tag.encode("utf-8")) % len(PALETTE)]


@lru_cache(maxsize=512)
def _glyph_mask(ch: str) -> np.ndarray:
    bits = zlib.crc32(ch.encode("utf-8")) | 1
    mask = np.zeros((GLYPH_H, GLYPH_W), dtype=bool)
    for i in range(GLYPH_H * GLYPH_W):
        if bits >> i & 1:
            mask[i // GLYPH_W, i % GLYPH_W] = True
    return mask


@lru_cache(maxsize=8192)
def _glyph_color(ch: str, pos: int) -> Tuple[int, int, int]:
    h = zlib.crc32(f"{ch}:{pos}".encode("utf-8"))
    return (h & 0x7F, (h >> 8) & 0x7F, (h >> 16) & 0x7F)


def _paint_text(pixels: np.ndarray, text: str, bbox: BBox) -> None:
    x, y, w, h = bbox
    cols = (w - 2 * TEXT_INSET) // GLYPH_CELL_W
    rows = (h - 2 * TEXT_INSET) // GLYPH_CELL_H
    if cols <= 0 or rows <= 0:
        return
    height, width = pixels.shape[:2]
    for pos, ch in enumerate(text[:cols * rows]):
        gx = x + TEXT_INSET + (pos % cols) * GLYPH_CELL_W
        gy = y + TEXT_INSET + (pos // cols) * GLYPH_CELL_H
        mask = _glyph_mask(ch)
        # clip the glyph to the canvas
        x0, y0 = max(gx, 0), max(gy, 0)
        x1, y1 = min(gx + GLYPH_W, width), min(gy + GLYPH_H, height)
        if x0 >= x1 or y0 >= y1:
            continue
        sub = mask[y0 - gy:y1 - gy, x0 - gx:x1 - gx]
        pixels[y0:y1, x0:x1][sub] = _glyph_color(ch, pos)


def rasterize(dom: "DomTree", width: int, height: int) -> Raster:
    """
    Paint a DOM tree onto a white width x height canvas.

    Visible nodes are drawn in document order, parent before child, as solid
    boxes in their fill color (or a palette color picked by tag). Hidden and
    zero-area nodes are skipped.
    """
    if width <= 0 or height <= 0:
        raise InvalidConfig(f"raster size must be positive, got {width}x{height}")
    raster = Raster.blank(width, height)
    pixels = raster.pixels
    for nid in dom.order:
        node = dom.nodes[nid]
        if not node.visible:
            continue
        x, y, w, h = raster.clamp(node.bbox)
        if w == 0 or h == 0:
            continue
        pixels[y:y + h, x:x + w] = node.fill if node.fill is not None else tag_color(node.tag)
        if node.text:
            _paint_text(pixels, node.text, node.bbox)
    return raster
