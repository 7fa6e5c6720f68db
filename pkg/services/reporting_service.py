#!/usr/bin/env python3
"""
Reporting Service
Renders sorted shape montages, reconstruction grids and rank scatter plots,
and reads/writes every CSV artifact with its metadata sidecar.
"""

import csv
import io
import logging
from html import escape
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Sequence, Union

import numpy as np

from models.config_models import RunMetadata
from models.error_models import ContractError, DataError
from models.mask_models import Mask
from models.ranking_models import RankScatter, Ranking, ReferenceComparison, SubsetExperimentResult
from models.score_models import SCORE_CSV_HEADER, Measure, RankKey, ScoreTable, ScoreVector
from models.vae_models import Reconstruction, TrainingMeta
from services.imaging_service import encode_png
from services.measures_service import combined_columns
from utils.bitmap_font import GLYPH_SPACING, GLYPH_WIDTH, draw_text

logger = logging.getLogger(__name__)

CELL_SCALE = 2
CELL = 64 * CELL_SCALE
PADDING = 8
LABEL_GAP = 4
FONT_SCALE = 2
LINE_HEIGHT = 16
MAX_LABEL_LINES = 3
BACKGROUND = (32, 32, 32)
LABEL_COLOR = (255, 165, 0)

LOSS_CSV_HEADER = ["epoch", "loss", "bce", "kl"]
REFERENCE_CSV_HEADER = ["measure", "spearman", "slope", "intercept"]

# Label order for the combined measure, top to bottom
COMBINED_LABEL_ORDER = [Measure.FFT, Measure.COMPRESSION, Measure.VAE]

SCATTER_SIZE = 480
SCATTER_MARGIN = 56
SCATTER_COLORS = ["#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b"]

# *** montages ***


def montage_size(count: int, lines: int, rows: int = 1) -> tuple:
    """(width, height) in pixels of a montage with `count` columns and `rows` image rows"""
    width = count * (CELL + PADDING)
    height = PADDING // 2 + rows * CELL + (rows - 1) * PADDING + LABEL_GAP + lines * LINE_HEIGHT + PADDING // 2
    return width, height


def _cell(pixels: np.ndarray) -> np.ndarray:
    gray = np.round(np.clip(pixels, 0.0, 1.0) * 255).astype(np.uint8)
    return np.kron(gray, np.ones((CELL_SCALE, CELL_SCALE), dtype=np.uint8))


def _fit_label(text: str) -> str:
    max_chars = (CELL + GLYPH_SPACING * FONT_SCALE) // ((GLYPH_WIDTH + GLYPH_SPACING) * FONT_SCALE)
    return text[:max_chars]


def _compose(columns: List[List[np.ndarray]], labels: List[List[str]]) -> np.ndarray:
    """columns[i] holds the stacked 64x64 images of column i; labels go under the last row"""
    if not columns:
        raise ContractError("nothing to render: no shapes given")
    rows = len(columns[0])
    lines = max((len(lab) for lab in labels), default=0)
    if lines > MAX_LABEL_LINES:
        raise ContractError(f"at most {MAX_LABEL_LINES} label lines per cell, got {lines}")
    width, height = montage_size(len(columns), lines, rows)
    canvas = np.empty((height, width, 3), dtype=np.uint8)
    canvas[:] = BACKGROUND

    for i, images in enumerate(columns):
        left = i * (CELL + PADDING) + PADDING // 2
        for r, pixels in enumerate(images):
            top = PADDING // 2 + r * (CELL + PADDING)
            canvas[top:top + CELL, left:left + CELL] = _cell(pixels)[:, :, None]
        label_top = PADDING // 2 + rows * CELL + (rows - 1) * PADDING + LABEL_GAP
        for j, line in enumerate(labels[i] if i < len(labels) else []):
            # glyphs are 14 px tall at scale 2, the 16 px line leaves a 2 px gap
            draw_text(canvas, _fit_label(line), label_top + j * LINE_HEIGHT, left, LABEL_COLOR, FONT_SCALE)
    return canvas


def _write(path: Union[str, Path], payload: bytes) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(payload)
    return path


def render_montage(
    ranking: Ranking,
    masks: Union[Mapping[str, Mask], Sequence[Mask]],
    labels: Optional[Mapping[str, Sequence[str]]] = None,
    path: Union[str, Path] = "montage.png",
) -> Path:
    """One row of shapes in ranking order with up to three orange label lines per cell"""
    by_id = masks if isinstance(masks, Mapping) else {m.id: m for m in masks}
    labels = labels or {}
    columns, cell_labels = [], []
    for shape_id in ranking.ordered_ids:
        if shape_id not in by_id:
            raise DataError(f"no mask for shape id '{shape_id}'")
        columns.append([by_id[shape_id].pixels])
        cell_labels.append(list(labels.get(shape_id, [])))
    path = _write(path, encode_png(_compose(columns, cell_labels)))
    logger.info("montage of %d shapes written to %s", len(columns), path)
    return path


def render_reconstructions(
    masks: Sequence[Mask],
    recon64: Sequence[Union[Reconstruction, np.ndarray]],
    recon16: Sequence[Union[Reconstruction, np.ndarray]],
    labels: Optional[Sequence[Sequence[str]]] = None,
    path: Union[str, Path] = "reconstructions.png",
) -> Path:
    """Ground truth, latent-64 and latent-16 rows, shapes in the given order"""
    if not (len(masks) == len(recon64) == len(recon16)):
        raise ContractError(
            f"need one reconstruction per mask, got {len(masks)} masks, {len(recon64)} and {len(recon16)} reconstructions"
        )
    columns = []
    for m, r64, r16 in zip(masks, recon64, recon16):
        columns.append([
            m.pixels,
            r64.pixels if isinstance(r64, Reconstruction) else np.asarray(r64),
            r16.pixels if isinstance(r16, Reconstruction) else np.asarray(r16),
        ])
    cell_labels = [list(lab) for lab in labels] if labels else []
    path = _write(path, encode_png(_compose(columns, cell_labels)))
    logger.info("reconstruction grid of %d shapes written to %s", len(columns), path)
    return path


def score_labels(scores: ScoreVector, key: RankKey, value: float) -> List[str]:
    """Single value for one measure; component values (FFT, compression, VAE) for combined keys"""
    key = RankKey(key)
    if key in (RankKey.COMBINED, RankKey.COMBINED_EQ):
        return [f"{scores.get(m):.3f}" for m in COMBINED_LABEL_ORDER if scores.get(m) is not None]
    return [f"{value:.3f}"]


# *** scatter plot ***


def _fmt(value: float) -> str:
    return f"{value:.2f}"


def render_scatter(data: RankScatter, path: Union[str, Path] = "scatter.svg") -> Path:
    """SVG 1.1 scatter of (reference rank, measure rank) with an OLS trendline per series"""
    if not data.series:
        raise ContractError("scatter plot needs at least one series")
    for series in data.series:
        if not series.points:
            raise ContractError(f"series '{series.measure}' has no points")

    plot = SCATTER_SIZE - 2 * SCATTER_MARGIN
    span = max(data.n - 1, 1)

    def sx(rank: float) -> float:
        return SCATTER_MARGIN + (rank - 1) / span * plot

    def sy(rank: float) -> float:
        return SCATTER_SIZE - SCATTER_MARGIN - (rank - 1) / span * plot

    out = io.StringIO()
    out.write('<?xml version="1.0" encoding="UTF-8"?>\n')
    out.write(f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{SCATTER_SIZE}" height="{SCATTER_SIZE}" '
              f'viewBox="0 0 {SCATTER_SIZE} {SCATTER_SIZE}">\n')
    out.write(f'<rect x="0" y="0" width="{SCATTER_SIZE}" height="{SCATTER_SIZE}" fill="white"/>\n')
    bottom, right = SCATTER_SIZE - SCATTER_MARGIN, SCATTER_SIZE - SCATTER_MARGIN
    out.write(f'<line x1="{SCATTER_MARGIN}" y1="{bottom}" x2="{right}" y2="{bottom}" stroke="black"/>\n')
    out.write(f'<line x1="{SCATTER_MARGIN}" y1="{SCATTER_MARGIN}" x2="{SCATTER_MARGIN}" y2="{bottom}" stroke="black"/>\n')
    for rank in (1, data.n):
        out.write(f'<text x="{_fmt(sx(rank))}" y="{bottom + 16}" font-size="11" text-anchor="middle">{rank}</text>\n')
        out.write(f'<text x="{SCATTER_MARGIN - 8}" y="{_fmt(sy(rank) + 4)}" font-size="11" text-anchor="end">{rank}</text>\n')
    out.write(f'<text x="{SCATTER_SIZE // 2}" y="{SCATTER_SIZE - 16}" font-size="12" text-anchor="middle">reference rank</text>\n')
    out.write(f'<text x="16" y="{SCATTER_SIZE // 2}" font-size="12" text-anchor="middle" '
              f'transform="rotate(-90 16 {SCATTER_SIZE // 2})">measure rank</text>\n')

    for index, series in enumerate(data.series):
        color = SCATTER_COLORS[index % len(SCATTER_COLORS)]
        name = escape(series.measure)
        out.write(f"<!-- trendline measure={name} slope={series.slope:.6f} intercept={series.intercept:.6f} -->\n")
        out.write(f'<g class="series" data-measure="{name}">\n')
        for x, y in series.points:
            out.write(f'<circle cx="{_fmt(sx(x))}" cy="{_fmt(sy(y))}" r="3" fill="{color}" fill-opacity="0.7"/>\n')
        y1 = series.slope * 1 + series.intercept
        yn = series.slope * data.n + series.intercept
        out.write(f'<line x1="{_fmt(sx(1))}" y1="{_fmt(sy(y1))}" x2="{_fmt(sx(data.n))}" y2="{_fmt(sy(yn))}" '
                  f'stroke="{color}" stroke-width="1.5"/>\n')
        out.write("</g>\n")

    for index, series in enumerate(data.series):
        color = SCATTER_COLORS[index % len(SCATTER_COLORS)]
        y = SCATTER_MARGIN + 4 + index * 16
        out.write(f'<rect x="{SCATTER_MARGIN + 8}" y="{y}" width="10" height="10" fill="{color}"/>\n')
        out.write(f'<text x="{SCATTER_MARGIN + 24}" y="{y + 9}" font-size="11">{escape(series.measure)}</text>\n')
    out.write("</svg>\n")

    path = _write(path, out.getvalue().encode("utf-8"))
    logger.info("scatter plot of %d series written to %s", len(data.series), path)
    return path


# *** CSV artifacts ***


def _cell_value(value: Optional[float]) -> str:
    return "" if value is None else f"{value:.6f}"


def _write_csv(path: Union[str, Path], header: List[str], rows: List[List[str]]) -> Path:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return _write(path, buffer.getvalue().encode("utf-8"))


def write_scores_csv(scores: Union[ScoreTable, Sequence[ScoreVector]], path: Union[str, Path]) -> Path:
    """id,fill,compression,fft,vae,combined,combined_eq; absent values are empty fields"""
    table = scores if isinstance(scores, ScoreTable) else combined_columns(list(scores))
    rows = []
    for s in table.scores:
        rows.append([s.shape_id] + [_cell_value(s.get(m)) for m in Measure]
                    + [_cell_value(table.combined.get(s.shape_id)), _cell_value(table.combined_eq.get(s.shape_id))])
    return _write_csv(path, SCORE_CSV_HEADER, rows)


def _parse_value(text: str, path: Path, line: int, column: str) -> Optional[float]:
    if text == "":
        return None
    try:
        return float(text)
    except ValueError:
        raise DataError(f"{path}:{line}: '{column}' is not a number: '{text}'")


def read_scores_csv(path: Union[str, Path]) -> ScoreTable:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except FileNotFoundError:
        raise FileNotFoundError(f"Scores file not found: {path}")
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    if header != SCORE_CSV_HEADER:
        raise DataError(f"{path}: expected header {','.join(SCORE_CSV_HEADER)}, got {','.join(header or [])}")

    scores, combined, combined_eq = [], {}, {}
    for line, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != len(SCORE_CSV_HEADER):
            raise DataError(f"{path}:{line}: expected {len(SCORE_CSV_HEADER)} fields, got {len(row)}")
        shape_id = row[0]
        if shape_id in combined:
            raise DataError(f"{path}:{line}: duplicate shape id '{shape_id}'")
        values = {col: _parse_value(cell, path, line, col) for col, cell in zip(SCORE_CSV_HEADER[1:], row[1:])}
        try:
            scores.append(ScoreVector(shape_id=shape_id, **{m.value: values[m.value] for m in Measure}))
        except ValueError as e:
            raise DataError(f"{path}:{line}: invalid scores for '{shape_id}': {e}")
        combined[shape_id] = values["combined"]
        combined_eq[shape_id] = values["combined_eq"]
    return ScoreTable(scores=scores, combined=combined, combined_eq=combined_eq)


def write_loss_csv(meta: TrainingMeta, path: Union[str, Path]) -> Path:
    rows = [[str(epoch), f"{loss:.6f}", f"{bce:.6f}", f"{kl:.6f}"]
            for epoch, (loss, bce, kl) in enumerate(zip(meta.losses, meta.bce, meta.kl), start=1)]
    return _write_csv(path, LOSS_CSV_HEADER, rows)


def write_reference_report(comparison: ReferenceComparison, path: Union[str, Path]) -> Path:
    rows = [[c.measure, f"{c.spearman:.6f}", f"{c.slope:.6f}", f"{c.intercept:.6f}"] for c in comparison.comparisons]
    return _write_csv(path, REFERENCE_CSV_HEADER, rows)


def write_subset_matrix(result: SubsetExperimentResult, path: Union[str, Path]) -> Path:
    """Upper triangle only: rows are measures[:-1], columns measures[1:], blank below the diagonal"""
    measures = result.measures
    rows = []
    for i, a in enumerate(measures[:-1]):
        rows.append([a] + [f"{result.matrix[i][j]:.6f}" if j > i else "" for j in range(1, len(measures))])
    return _write_csv(path, ["measure"] + measures[1:], rows)


def format_ranking(ranking: Ranking, values: Mapping[str, float]) -> str:
    """position,id,rank,score lines in ascending complexity"""
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(["position", "id", "rank", "score"])
    for position, shape_id in enumerate(ranking.ordered_ids, start=1):
        writer.writerow([position, shape_id, f"{ranking.ranks[shape_id]:g}", f"{values[shape_id]:.6f}"])
    return buffer.getvalue()


# *** metadata sidecars ***


def metadata_path(path: Union[str, Path]) -> Path:
    path = Path(path)
    return path.with_name(path.name + ".meta.json")


def write_metadata(path: Union[str, Path], metadata: RunMetadata) -> Path:
    return _write(metadata_path(path), (metadata.model_dump_json(indent=2) + "\n").encode("utf-8"))


def read_metadata(path: Union[str, Path]) -> Optional[RunMetadata]:
    sidecar = metadata_path(path)
    if not sidecar.exists():
        return None
    return RunMetadata.model_validate_json(sidecar.read_text(encoding="utf-8"))


def scores_by_id(table: ScoreTable) -> Dict[str, ScoreVector]:
    return {s.shape_id: s for s in table.scores}
