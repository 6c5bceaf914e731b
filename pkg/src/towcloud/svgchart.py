"""Static SVG charts for ladder reports, with no plotting dependency.

Charts are hand-assembled SVG text with a fixed axes policy: log10(eps) on
the x axis and log10(median metric) on the y axis, one polyline per metric,
and a vertical quartile whisker at every (level, metric) point.  All numbers
are printed with a fixed format, so for identical input data the SVG text is
byte-identical.  A generation timestamp is embedded as an SVG comment unless
``deterministic=True``, which suppresses it (reruns then produce identical
files).

Nonpositive medians cannot be drawn on a log axis; those points are dropped
and counted in a footnote rather than silently hidden.
"""

from __future__ import annotations

import math
import time

__all__ = ["PALETTE", "ladder_chart", "index_chart", "write_svg"]

PALETTE = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e",
           "#8c564b", "#17becf", "#7f7f7f"]

_W, _H = 640, 440
_ML, _MR, _MT, _MB = 72, 24, 48, 56  # margins: left/right/top/bottom


def _fmt(x):
    return "%.6g" % x


def _esc(text):
    return (str(text).replace("&", "&amp;").replace("<", "&lt;")
            .replace(">", "&gt;"))


def _stamp(deterministic):
    if deterministic:
        return ""
    return "<!-- generated %s -->\n" % time.strftime(
        "%Y-%m-%dT%H:%M:%S", time.gmtime())


def _ticks(lo, hi):
    """Tick positions in log10 space: integers when the span allows."""
    if hi - lo >= 1.0:
        first = math.ceil(lo - 1e-9)
        return [t for t in range(first, math.floor(hi + 1e-9) + 1)]
    step = (hi - lo) / 4.0
    return [lo + i * step for i in range(5)]


def _tick_label(t):
    if abs(t - round(t)) < 1e-9:
        return "1e%d" % round(t)
    return "%.3g" % (10.0 ** t)


class _Frame:
    """Affine map from log10 data space to the pixel plot area."""

    def __init__(self, xlo, xhi, ylo, yhi):
        if xhi - xlo < 1e-12:
            xlo, xhi = xlo - 0.5, xhi + 0.5
        if yhi - ylo < 1e-12:
            ylo, yhi = ylo - 0.5, yhi + 0.5
        padx = 0.05 * (xhi - xlo)
        pady = 0.08 * (yhi - ylo)
        self.xlo, self.xhi = xlo - padx, xhi + padx
        self.ylo, self.yhi = ylo - pady, yhi + pady

    def x(self, v):
        t = (v - self.xlo) / (self.xhi - self.xlo)
        return _ML + t * (_W - _ML - _MR)

    def y(self, v):
        t = (v - self.ylo) / (self.yhi - self.ylo)
        return _H - _MB - t * (_H - _MB - _MT)


def ladder_chart(report, metric_names=None, *, title=None,
                 deterministic=False):
    """Render a log-log chart of ladder medians with quartile whiskers.

    Parameters
    ----------
    report : LadderReport
        The run to chart; medians and quartiles come from
        ``report.aggregate()``.
    metric_names : sequence of str, optional
        Metrics to draw; defaults to every metric in the report.
    title : str, optional
        Chart title; defaults to the report kind.
    deterministic : bool
        Suppress the generation-timestamp comment.

    Returns
    -------
    str
        Complete SVG document text.
    """
    agg = report.aggregate()
    if metric_names is None:
        metric_names = report.metric_names()
    # (metric) -> list of (log10 eps, log10 med, log10 q1|None, log10 q3|None)
    series = {}
    dropped = {}
    for metric in metric_names:
        pts = []
        for level in range(report.schedule.levels):
            entry = agg.get((level, metric))
            if entry is None:
                continue
            med, q1, q3, _ = entry
            if med <= 0.0:
                dropped[metric] = dropped.get(metric, 0) + 1
                continue
            lx = math.log10(report.schedule.eps[level])
            pt = (lx, math.log10(med),
                  math.log10(q1) if q1 > 0.0 else None,
                  math.log10(q3) if q3 > 0.0 else None)
            pts.append(pt)
        if pts:
            series[metric] = pts

    out = ['<svg xmlns="http://www.w3.org/2000/svg" width="%d" height="%d" '
           'viewBox="0 0 %d %d" font-family="monospace" font-size="12">'
           % (_W, _H, _W, _H)]
    stamp = _stamp(deterministic).rstrip("\n")
    if stamp:
        out.append(stamp)
    out.append('<rect width="%d" height="%d" fill="white"/>' % (_W, _H))
    out.append('<text x="%d" y="24" font-size="15">%s</text>'
               % (_ML, _esc(title if title is not None else report.kind)))

    if not series:
        out.append('<text x="%d" y="%d">no positive data to chart</text>'
                   % (_ML, _H // 2))
        out.append("</svg>")
        return "\n".join(x for x in out if x) + "\n"

    xs = [p[0] for pts in series.values() for p in pts]
    ys = [v for pts in series.values() for p in pts
          for v in (p[1], p[2], p[3]) if v is not None]
    frame = _Frame(min(xs), max(xs), min(ys), max(ys))

    # axes box and ticks
    out.append('<rect x="%d" y="%d" width="%d" height="%d" fill="none" '
               'stroke="#333"/>' % (_ML, _MT, _W - _ML - _MR, _H - _MT - _MB))
    for t in _ticks(frame.xlo, frame.xhi):
        if not frame.xlo <= t <= frame.xhi:
            continue
        px = frame.x(t)
        out.append('<line x1="%s" y1="%d" x2="%s" y2="%d" stroke="#333"/>'
                   % (_fmt(px), _H - _MB, _fmt(px), _H - _MB + 5))
        out.append('<text x="%s" y="%d" text-anchor="middle">%s</text>'
                   % (_fmt(px), _H - _MB + 20, _tick_label(t)))
    for t in _ticks(frame.ylo, frame.yhi):
        if not frame.ylo <= t <= frame.yhi:
            continue
        py = frame.y(t)
        out.append('<line x1="%d" y1="%s" x2="%d" y2="%s" stroke="#333"/>'
                   % (_ML - 5, _fmt(py), _ML, _fmt(py)))
        out.append('<text x="%d" y="%s" text-anchor="end" dy="4">%s</text>'
                   % (_ML - 9, _fmt(py), _tick_label(t)))
    out.append('<text x="%d" y="%d" text-anchor="middle">eps</text>'
               % ((_ML + _W - _MR) // 2, _H - 16))
    out.append('<text x="18" y="%d" text-anchor="middle" '
               'transform="rotate(-90 18 %d)">median</text>'
               % ((_MT + _H - _MB) // 2, (_MT + _H - _MB) // 2))

    # series: whiskers first, then lines, then markers
    for i, metric in enumerate(m for m in metric_names if m in series):
        color = PALETTE[i % len(PALETTE)]
        pts = series[metric]
        for lx, lmed, lq1, lq3 in pts:
            if lq1 is None or lq3 is None:
                continue
            px = frame.x(lx)
            y1, y3 = frame.y(lq1), frame.y(lq3)
            out.append('<line x1="%s" y1="%s" x2="%s" y2="%s" stroke="%s" '
                       'stroke-width="1"/>' % (_fmt(px), _fmt(y1), _fmt(px),
                                               _fmt(y3), color))
            for yy in (y1, y3):
                out.append('<line x1="%s" y1="%s" x2="%s" y2="%s" '
                           'stroke="%s"/>' % (_fmt(px - 4), _fmt(yy),
                                              _fmt(px + 4), _fmt(yy), color))
        path = " ".join("%s,%s" % (_fmt(frame.x(p[0])), _fmt(frame.y(p[1])))
                        for p in pts)
        out.append('<polyline points="%s" fill="none" stroke="%s" '
                   'stroke-width="1.5"/>' % (path, color))
        for p in pts:
            out.append('<circle cx="%s" cy="%s" r="3" fill="%s"/>'
                       % (_fmt(frame.x(p[0])), _fmt(frame.y(p[1])), color))
        out.append('<text x="%d" y="%d" fill="%s">%s</text>'
                   % (_W - _MR - 150, _MT + 16 + 16 * i, color, _esc(metric)))

    # footnote: dropped nonpositive points, honesty flags count
    notes = []
    for metric in sorted(dropped):
        notes.append("%s: %d nonpositive median(s) dropped"
                     % (metric, dropped[metric]))
    if report.flags:
        notes.append("%d flag(s) in report header" % len(report.flags))
    if notes:
        out.append('<text x="%d" y="%d" font-size="10" fill="#555">%s</text>'
                   % (_ML, _H - 4, _esc("; ".join(notes))))
    out.append("</svg>")
    return "\n".join(x for x in out if x) + "\n"


def index_chart(entries, *, title, deterministic=False):
    """Render a plain index card: a title plus one text row per entry.

    Parameters
    ----------
    entries : sequence of (str, str)
        (name, note) rows, already in display order.
    title : str
        Heading text.
    deterministic : bool
        Suppress the generation-timestamp comment.
    """
    rows = list(entries)
    height = 64 + 18 * max(1, len(rows))
    out = ['<svg xmlns="http://www.w3.org/2000/svg" width="%d" height="%d" '
           'viewBox="0 0 %d %d" font-family="monospace" font-size="12">'
           % (_W, height, _W, height)]
    stamp = _stamp(deterministic).rstrip("\n")
    if stamp:
        out.append(stamp)
    out.append('<rect width="%d" height="%d" fill="white"/>' % (_W, height))
    out.append('<text x="16" y="28" font-size="15">%s</text>' % _esc(title))
    if not rows:
        out.append('<text x="16" y="52" fill="#555">(no artifacts)</text>')
    for i, (name, note) in enumerate(rows):
        y = 52 + 18 * i
        out.append('<text x="16" y="%d">%s</text>' % (y, _esc(name)))
        out.append('<text x="280" y="%d" fill="#555">%s</text>'
                   % (y, _esc(note)))
    out.append("</svg>")
    return "\n".join(out) + "\n"


def write_svg(path, text):
    """Write SVG ``text`` to ``path``."""
    with open(path, "w") as fh:
        fh.write(text)
