"""Block grid over high-resolution frames and 2x2-block window scoring.

An image is cut into an R x C grid of fixed-size blocks (floor division;
leftover pixels on the right/bottom are ignored).  Each interior block
anchors a window made of itself plus its right, bottom, and bottom-right
neighbours, giving (R-1)*(C-1) overlapping windows.  A window is mean-pooled
2x2 back to block resolution before classification, and per-anchor scores
are rendered as coloured block borders.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .arch import Network, forward_classify
from .errors import (
    BlockLargerThanImageError,
    DegenerateGridError,
    OddDimensionsError,
)

GREEN = (0.0, 1.0, 0.0)
RED = (1.0, 0.0, 0.0)
BORDER_PX = 3


def grid_dims(image_height: int, image_width: int,
              block_height: int, block_width: int) -> tuple[int, int]:
    """(R, C) block-row/column counts: exact floor division."""
    if min(image_height, image_width, block_height, block_width) <= 0:
        raise ValueError("all extents must be positive")
    rows = image_height // block_height
    cols = image_width // block_width
    if rows == 0 or cols == 0:
        raise BlockLargerThanImageError(
            f"{block_height}x{block_width} block does not fit in "
            f"{image_height}x{image_width} image"
        )
    return rows, cols


@dataclass(frozen=True)
class GridSpec:
    image_height: int
    image_width: int
    block_height: int = 224
    block_width: int = 224

    def __post_init__(self):
        grid_dims(self.image_height, self.image_width,
                  self.block_height, self.block_width)

    @property
    def rows(self) -> int:
        return self.image_height // self.block_height

    @property
    def cols(self) -> int:
        return self.image_width // self.block_width


@dataclass
class ScoreGrid:
    spec: GridSpec
    scores: np.ndarray
    threshold: float = 0.5
    fallback: bool = False

    def __post_init__(self):
        self.scores = np.asarray(self.scores, dtype=np.float64)
        if self.fallback:
            expected = (1, 1)
        else:
            expected = (self.spec.rows - 1, self.spec.cols - 1)
        if self.scores.shape != expected:
            raise ValueError(
                f"scores shape {self.scores.shape} != expected {expected}"
            )

    @property
    def any_detection(self) -> bool:
        return bool(np.any(self.scores >= self.threshold))


def extract_windows(image: np.ndarray, spec: GridSpec):
    """All ((r, c), window) pairs; window (r, c) covers blocks (r..r+1, c..c+1)."""
    rows, cols = spec.rows, spec.cols
    if rows < 2 or cols < 2:
        raise DegenerateGridError(
            f"grid {rows}x{cols} has no 2x2 window; need R >= 2 and C >= 2"
        )
    bh, bw = spec.block_height, spec.block_width
    out = []
    for r in range(rows - 1):
        for c in range(cols - 1):
            win = image[r * bh : (r + 2) * bh, c * bw : (c + 2) * bw]
            out.append(((r, c), win))
    return out


def mean_pool(image: np.ndarray, factor_y: int, factor_x: int) -> np.ndarray:
    """Integer-factor mean pooling per channel."""
    h, w = image.shape[:2]
    if h % factor_y or w % factor_x:
        raise OddDimensionsError(
            f"extents {h}x{w} not divisible by {factor_y}x{factor_x}"
        )
    shaped = image.reshape(h // factor_y, factor_y, w // factor_x, factor_x, -1)
    return shaped.mean(axis=(1, 3)).reshape(
        h // factor_y, w // factor_x, *image.shape[2:]
    )


def downsample_window(window: np.ndarray) -> np.ndarray:
    """2x2 mean pooling: a two-block-square window back to block resolution."""
    return mean_pool(window, 2, 2)


def score_grid(net: Network, image: np.ndarray, spec: GridSpec,
               threshold: float = 0.5) -> ScoreGrid:
    """Classify every 2x2-block window; scores land at their anchor index."""
    windows = extract_windows(image, spec)
    scores = np.zeros((spec.rows - 1, spec.cols - 1), dtype=np.float64)
    for (r, c), win in windows:
        patch = downsample_window(win)
        scores[r, c] = forward_classify(net, patch)[1]
    return ScoreGrid(spec, scores, threshold)


def whole_image_score(net: Network, image: np.ndarray, spec: GridSpec,
                      threshold: float = 0.5) -> ScoreGrid:
    """Degenerate-grid fallback: pool the whole block area to one patch."""
    rows, cols = spec.rows, spec.cols
    crop = image[: rows * spec.block_height, : cols * spec.block_width]
    patch = mean_pool(crop, rows, cols)
    score = forward_classify(net, patch)[1]
    return ScoreGrid(spec, np.array([[score]]), threshold, fallback=True)


# 5x7 bitmap glyphs for burned-in probabilities.
_FONT = {
    "0": ("01110", "10001", "10011", "10101", "11001", "10001", "01110"),
    "1": ("00100", "01100", "00100", "00100", "00100", "00100", "01110"),
    "2": ("01110", "10001", "00001", "00010", "00100", "01000", "11111"),
    "3": ("11110", "00001", "00001", "01110", "00001", "00001", "11110"),
    "4": ("00010", "00110", "01010", "10010", "11111", "00010", "00010"),
    "5": ("11111", "10000", "11110", "00001", "00001", "10001", "01110"),
    "6": ("00110", "01000", "10000", "11110", "10001", "10001", "01110"),
    "7": ("11111", "00001", "00010", "00100", "01000", "01000", "01000"),
    "8": ("01110", "10001", "10001", "01110", "10001", "10001", "01110"),
    "9": ("01110", "10001", "10001", "01111", "00001", "00010", "01100"),
    ".": ("00000", "00000", "00000", "00000", "00000", "01100", "01100"),
}


def _draw_text(canvas: np.ndarray, y: int, x: int, text: str,
               color, pixel: int) -> None:
    col = np.asarray(color, dtype=canvas.dtype)
    for ch in text:
        glyph = _FONT.get(ch)
        if glyph is None:
            x += 6 * pixel
            continue
        for gy, row in enumerate(glyph):
            for gx, bit in enumerate(row):
                if bit == "1":
                    y0, x0 = y + gy * pixel, x + gx * pixel
                    canvas[y0 : y0 + pixel, x0 : x0 + pixel] = col
        x += 6 * pixel


def render_overlay(image: np.ndarray, grid: ScoreGrid,
                   draw_scores: bool = False) -> np.ndarray:
    """Copy of the image with a 3-pixel border per block.

    Anchor blocks are coloured by their own window score (green below the
    threshold, red at or above it); the last block row/column carries the
    nearest anchor's colour but no burned-in score.  Pixels outside borders
    (and optional score digits) are untouched.
    """
    out = np.array(image, copy=True)
    spec = grid.spec
    bh, bw = spec.block_height, spec.block_width
    n_r, n_c = grid.scores.shape
    for r in range(spec.rows):
        for c in range(spec.cols):
            score = grid.scores[min(r, n_r - 1), min(c, n_c - 1)]
            color = np.asarray(
                RED if score >= grid.threshold else GREEN, dtype=out.dtype
            )
            y0, x0 = r * bh, c * bw
            y1, x1 = y0 + bh, x0 + bw
            out[y0 : y0 + BORDER_PX, x0:x1] = color
            out[y1 - BORDER_PX : y1, x0:x1] = color
            out[y0:y1, x0 : x0 + BORDER_PX] = color
            out[y0:y1, x1 - BORDER_PX : x1] = color
            is_anchor = grid.fallback or (r < n_r and c < n_c)
            if draw_scores and is_anchor:
                pixel = max(1, min(bh, bw) // 56)
                _draw_text(out, y0 + 2 * BORDER_PX, x0 + 2 * BORDER_PX,
                           f"{score:.2f}", color, pixel)
    return out


def border_mask(spec: GridSpec) -> np.ndarray:
    """Boolean (H, W) mask of all pixels any border may touch."""
    mask = np.zeros((spec.image_height, spec.image_width), dtype=bool)
    bh, bw = spec.block_height, spec.block_width
    for r in range(spec.rows):
        for c in range(spec.cols):
            y0, x0 = r * bh, c * bw
            y1, x1 = y0 + bh, x0 + bw
            mask[y0 : y0 + BORDER_PX, x0:x1] = True
            mask[y1 - BORDER_PX : y1, x0:x1] = True
            mask[y0:y1, x0 : x0 + BORDER_PX] = True
            mask[y0:y1, x1 - BORDER_PX : x1] = True
    return mask


def score_grid_json(grid: ScoreGrid, image_path: str) -> dict:
    """Stable machine-readable form: scores row-major at 6 decimal places."""
    spec = grid.spec
    return {
        "image": image_path,
        "block": [spec.block_height, spec.block_width],
        "grid": [spec.rows, spec.cols],
        "threshold": grid.threshold,
        "fallback": grid.fallback,
        "scores": [
            [round(float(s), 6) for s in row] for row in grid.scores
        ],
    }
