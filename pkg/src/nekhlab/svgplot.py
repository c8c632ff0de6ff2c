"""Static SVG plots for scan outputs, with no plotting dependency.

Output is built from the CSV text alone with fixed number formatting, so
a given input file always produces byte-identical SVG.
"""

from __future__ import annotations

import csv
import math

__all__ = ["plot_drift_scan", "plot_theorem2", "emit_plot"]

_WIDTH, _HEIGHT = 640, 480
_LEFT, _RIGHT, _TOP, _BOTTOM = 78, 614, 38, 414


def _fmt(x: float) -> str:
    return f"{x:.6g}"


def _read_columns(path, fields):
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise ValueError(f"{path}: empty CSV")
        missing = [f for f in fields if f not in reader.fieldnames]
        if missing:
            raise ValueError(f"{path}: missing column(s) {', '.join(missing)}")
        rows = []
        for row in reader:
            try:
                rows.append(tuple(float(row[f]) for f in fields))
            except (TypeError, ValueError) as exc:
                raise ValueError(f"{path}: non-numeric cell in row {row}") from exc
    if not rows:
        raise ValueError(f"{path}: no data rows")
    return rows


class _LogAxes:
    """Maps (log10 x, log10 y) data coordinates onto the pixel frame."""

    def __init__(self, xs, ys):
        self.x0, self.x1 = self._padded(min(xs), max(xs))
        self.y0, self.y1 = self._padded(min(ys), max(ys))

    @staticmethod
    def _padded(lo, hi):
        if hi - lo < 1e-9:
            lo, hi = lo - 0.5, hi + 0.5
        pad = 0.06 * (hi - lo)
        return lo - pad, hi + pad

    def px(self, x):
        return _LEFT + (x - self.x0) / (self.x1 - self.x0) * (_RIGHT - _LEFT)

    def py(self, y):
        return _BOTTOM - (y - self.y0) / (self.y1 - self.y0) * (_BOTTOM - _TOP)

    def ticks(self, lo, hi):
        decades = range(math.ceil(lo), math.floor(hi) + 1)
        ticks = [(float(d), f"1e{d:+03d}") for d in decades]
        if ticks:
            return ticks
        return [(lo, _fmt(10.0 ** lo)), (hi, _fmt(10.0 ** hi))]


def _frame(ax: _LogAxes, xlabel: str, ylabel: str) -> list[str]:
    parts = [
        f'<rect x="{_LEFT}" y="{_TOP}" width="{_RIGHT - _LEFT}" '
        f'height="{_BOTTOM - _TOP}" fill="none" stroke="#333" stroke-width="1"/>'
    ]
    for val, label in ax.ticks(ax.x0, ax.x1):
        x = _fmt(ax.px(val))
        parts.append(f'<line x1="{x}" y1="{_BOTTOM}" x2="{x}" y2="{_BOTTOM + 5}" '
                     f'stroke="#333" stroke-width="1"/>')
        parts.append(f'<text x="{x}" y="{_BOTTOM + 19}" text-anchor="middle" '
                     f'font-family="monospace" font-size="11">{label}</text>')
    for val, label in ax.ticks(ax.y0, ax.y1):
        y = _fmt(ax.py(val))
        parts.append(f'<line x1="{_LEFT - 5}" y1="{y}" x2="{_LEFT}" y2="{y}" '
                     f'stroke="#333" stroke-width="1"/>')
        parts.append(f'<text x="{_LEFT - 9}" y="{y}" text-anchor="end" '
                     f'dominant-baseline="middle" font-family="monospace" '
                     f'font-size="11">{label}</text>')
    parts.append(f'<text x="{(_LEFT + _RIGHT) // 2}" y="{_HEIGHT - 10}" '
                 f'text-anchor="middle" font-family="monospace" '
                 f'font-size="13">{xlabel}</text>')
    parts.append(f'<text x="16" y="{(_TOP + _BOTTOM) // 2}" text-anchor="middle" '
                 f'font-family="monospace" font-size="13" '
                 f'transform="rotate(-90 16 {(_TOP + _BOTTOM) // 2})">{ylabel}</text>')
    return parts


def _document(body: list[str]) -> str:
    head = (
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_WIDTH}" '
        f'height="{_HEIGHT}" viewBox="0 0 {_WIDTH} {_HEIGHT}">\n'
        f'<rect width="{_WIDTH}" height="{_HEIGHT}" fill="#ffffff"/>\n'
    )
    return head + "\n".join(body) + "\n</svg>\n"


def _fit_line(logx, logy):
    n = len(logx)
    mx = sum(logx) / n
    my = sum(logy) / n
    sxx = sum((x - mx) ** 2 for x in logx)
    if sxx == 0.0:
        return 0.0, my
    slope = sum((x - mx) * (y - my) for x, y in zip(logx, logy)) / sxx
    return slope, my - slope * mx


def _line_path(ax, slope, intercept, cls, dashed=False):
    y_at = lambda x: slope * x + intercept
    x0, x1 = ax.x0, ax.x1
    p = (f'M {_fmt(ax.px(x0))} {_fmt(ax.py(y_at(x0)))} '
         f'L {_fmt(ax.px(x1))} {_fmt(ax.py(y_at(x1)))}')
    dash = ' stroke-dasharray="7 5"' if dashed else ""
    color = "#888888" if dashed else "#c0392b"
    return (f'<path class="{cls}" d="{p}" fill="none" stroke="{color}" '
            f'stroke-width="1.5"{dash}/>')


def _scatter(ax, pts):
    return [
        f'<circle class="pt" cx="{_fmt(ax.px(x))}" cy="{_fmt(ax.py(y))}" '
        f'r="3.5" fill="#2c5f8a" fill-opacity="0.85"/>'
        for x, y in pts
    ]


def plot_drift_scan(csv_path, out_path) -> None:
    """Log-log scatter of sup drift against epsilon with the fitted line."""
    rows = _read_columns(csv_path, ["epsilon", "sup_drift"])
    pts = [(math.log10(e), math.log10(d)) for e, d in rows if e > 0 and d > 0]
    if not pts:
        raise ValueError(f"{csv_path}: no rows with positive epsilon and drift")
    ax = _LogAxes([p[0] for p in pts], [p[1] for p in pts])
    slope, intercept = _fit_line([p[0] for p in pts], [p[1] for p in pts])
    body = _frame(ax, "epsilon", "sup drift")
    body.append(_line_path(ax, slope, intercept, "fit"))
    body.extend(_scatter(ax, pts))
    body.append(f'<text x="{_RIGHT - 6}" y="{_TOP + 16}" text-anchor="end" '
                f'font-family="monospace" font-size="12">slope '
                f'{_fmt(slope)}</text>')
    with open(out_path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(_document(body))


def plot_theorem2(csv_path, out_path) -> None:
    """Original-variable drift against the scaling factor, log-log.

    The solid line is the least-squares fit; the dashed guide has the
    reference slope carried in the CSV itself.
    """
    rows = _read_columns(csv_path, ["R", "drift_original", "slope_prediction"])
    pts = [(math.log10(r), math.log10(d)) for r, d, _ in rows if r > 0 and d > 0]
    if not pts:
        raise ValueError(f"{csv_path}: no rows with positive R and drift")
    ax = _LogAxes([p[0] for p in pts], [p[1] for p in pts])
    logx = [p[0] for p in pts]
    logy = [p[1] for p in pts]
    slope, intercept = _fit_line(logx, logy)
    guide_slope = rows[0][2]
    mx = sum(logx) / len(logx)
    my = sum(logy) / len(logy)
    body = _frame(ax, "R", "drift (original variables)")
    body.append(_line_path(ax, guide_slope, my - guide_slope * mx, "guide",
                           dashed=True))
    body.append(_line_path(ax, slope, intercept, "fit"))
    body.extend(_scatter(ax, pts))
    body.append(f'<text x="{_RIGHT - 6}" y="{_TOP + 16}" text-anchor="end" '
                f'font-family="monospace" font-size="12">slope {_fmt(slope)} '
                f'(guide {_fmt(guide_slope)})</text>')
    with open(out_path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(_document(body))


_KINDS = {"drift-scan": plot_drift_scan, "theorem2": plot_theorem2}


def emit_plot(csv_path, kind: str, out_path=None) -> str:
    """Render the SVG for a known CSV kind; returns the output path.

    The plot is fully determined by the CSV bytes.  Errors (unknown
    kind, empty or malformed CSV) are raised before anything is
    written.
    """
    if kind not in _KINDS:
        raise ValueError(f"unknown plot kind {kind!r}; expected one of "
                         f"{sorted(_KINDS)}")
    out = str(out_path) if out_path is not None else str(csv_path)
    if out_path is None:
        out = out[:-4] + ".svg" if out.endswith(".csv") else out + ".svg"
    _KINDS[kind](csv_path, out)
    return out
