"""Chord-diagram layout and SVG rendering for importance tables.

Nodes (survey items or factors) sit on a circle, ordered by schema factor
order with specific items before their factor's overall item.  A node's
arc span is proportional to its total incident weight (in + out), and each
arc is tiled into sub-arcs, one per incident ribbon, ordered by the peer
node's position around the circle.  Ribbon width at an endpoint equals the
endpoint's sub-arc span, so chord thickness encodes relative importance.

Angles are degrees, 0 at twelve o'clock, increasing clockwise.  Ribbons
lighter than ``min_render_weight`` keep their angular slot (arc mass is
never dropped) but are skipped when rendering.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

from .errors import DataError
from .importance import ImportanceTable
from .schema import ConstructSchema


@dataclass(frozen=True)
class LayoutOptions:
    gap_deg: float = 2.0
    group_gap_deg: float = 6.0
    min_render_weight: float = 0.5
    start_deg: float = 0.0
    sum_tolerance: float = 0.5


@dataclass(frozen=True)
class ArcNode:
    code: str
    label: str
    factor: str
    color: str
    start_deg: float
    end_deg: float

    @property
    def span(self) -> float:
        return self.end_deg - self.start_deg


@dataclass(frozen=True)
class Ribbon:
    source: str
    target: str
    weight: float
    src_start: float
    src_end: float
    tgt_start: float
    tgt_end: float
    rendered: bool


@dataclass(frozen=True)
class ChordLayout:
    nodes: tuple[ArcNode, ...]
    ribbons: tuple[Ribbon, ...]
    gap_deg: float
    group_gap_deg: float
    radius: float = 1.0
    center: tuple[float, float] = (0.0, 0.0)

    def node(self, code: str) -> ArcNode:
        for n in self.nodes:
            if n.code == code:
                return n
        raise DataError(f"no node {code!r} in layout")

    def incident_spans(self, code: str) -> list[float]:
        out = []
        for r in self.ribbons:
            if r.target == code:
                out.append(r.tgt_end - r.tgt_start)
            if r.source == code:
                out.append(r.src_end - r.src_start)
        return out

    def to_dict(self) -> dict:
        return {
            "radius": self.radius,
            "center": list(self.center),
            "gap_deg": self.gap_deg,
            "group_gap_deg": self.group_gap_deg,
            "nodes": [
                {
                    "code": n.code,
                    "label": n.label,
                    "factor": n.factor,
                    "color": n.color,
                    "start_deg": n.start_deg,
                    "end_deg": n.end_deg,
                }
                for n in self.nodes
            ],
            "ribbons": [
                {
                    "source": r.source,
                    "target": r.target,
                    "weight": r.weight,
                    "src_start": r.src_start,
                    "src_end": r.src_end,
                    "tgt_start": r.tgt_start,
                    "tgt_end": r.tgt_end,
                    "rendered": r.rendered,
                }
                for r in self.ribbons
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"


def _node_order(codes: set[str], schema: ConstructSchema) -> list[str]:
    """Schema factor order; within a factor, items first, overall last."""
    ordered: list[str] = []
    seen: set[str] = set()

    def add(code: str) -> None:
        if code in codes and code not in seen:
            ordered.append(code)
            seen.add(code)

    for f in schema.factors:
        add(f.code)
        for item in f.item_codes:
            add(item)
        add(f.overall_item)
    leftover = codes - seen
    if leftover:
        raise DataError(f"codes not covered by schema: {sorted(leftover)}")
    return ordered


def layout(table: ImportanceTable, schema: ConstructSchema,
           opts: LayoutOptions = LayoutOptions()) -> ChordLayout:
    table.validate(tol=opts.sum_tolerance)
    # canonical sort makes the layout invariant to input row order
    rows = sorted((r for r in table.rows if r.weight > 0),
                  key=lambda r: (r.target, r.predictor))
    if not rows:
        raise DataError("importance table has no positive-weight rows")

    codes = {r.predictor for r in rows} | {r.target for r in rows}
    order = _node_order(codes, schema)
    pos = {c: i for i, c in enumerate(order)}

    mass = {c: 0.0 for c in order}
    for r in rows:
        mass[r.predictor] += r.weight
        mass[r.target] += r.weight
    total_mass = sum(mass.values())

    n = len(order)
    gaps = []
    for i in range(n):
        a = schema.owner_of(order[i]).code
        b = schema.owner_of(order[(i + 1) % n]).code
        gaps.append(opts.gap_deg if a == b else opts.group_gap_deg)
    total_gap = sum(gaps)
    if total_gap >= 360.0:
        raise DataError(f"gaps sum to {total_gap} degrees; no room for arcs")
    usable = 360.0 - total_gap

    nodes: list[ArcNode] = []
    cursor = opts.start_deg
    arc_start: dict[str, float] = {}
    arc_span: dict[str, float] = {}
    for i, code in enumerate(order):
        span = usable * mass[code] / total_mass
        factor = schema.owner_of(code)
        label = factor.display_name if code == factor.code else code
        nodes.append(
            ArcNode(
                code=code,
                label=label,
                factor=factor.code,
                color=factor.color,
                start_deg=cursor,
                end_deg=cursor + span,
            )
        )
        arc_start[code] = cursor
        arc_span[code] = span
        cursor += span + gaps[i]

    # tile each arc: one sub-arc per incident ribbon endpoint, ordered by
    # the peer node's circular position (incoming before outgoing on ties)
    endpoints: dict[str, list[tuple[int, int, int]]] = {c: [] for c in order}
    for ri, r in enumerate(rows):
        endpoints[r.target].append((pos[r.predictor], 0, ri))
        endpoints[r.predictor].append((pos[r.target], 1, ri))

    sub: dict[tuple[int, int], tuple[float, float]] = {}
    for code in order:
        cur = arc_start[code]
        for peer_pos, role, ri in sorted(endpoints[code]):
            width = arc_span[code] * rows[ri].weight / mass[code]
            sub[(ri, role)] = (cur, cur + width)
            cur += width

    ribbons = []
    for ri, r in enumerate(rows):
        t0, t1 = sub[(ri, 0)]
        s0, s1 = sub[(ri, 1)]
        ribbons.append(
            Ribbon(
                source=r.predictor,
                target=r.target,
                weight=r.weight,
                src_start=s0,
                src_end=s1,
                tgt_start=t0,
                tgt_end=t1,
                rendered=r.weight >= opts.min_render_weight,
            )
        )

    return ChordLayout(
        nodes=tuple(nodes),
        ribbons=tuple(ribbons),
        gap_deg=opts.gap_deg,
        group_gap_deg=opts.group_gap_deg,
    )


# ---------------------------------------------------------------------------
# SVG rendering


@dataclass(frozen=True)
class Style:
    size_px: int = 800
    font_family: str = "Helvetica, Arial, sans-serif"
    font_size_px: Optional[float] = None  # default: 1.6% of size
    label_mode: str = "code"  # code | name | none
    ribbon_opacity: float = 0.65
    source_inset: float = 0.96  # source endpoints sit slightly inside
    background: Optional[str] = "#ffffff"


def _f(v: float) -> str:
    s = f"{v:.4f}"
    return "0.0000" if s == "-0.0000" else s


def _esc(text: str) -> str:
    return (
        text.replace("&", "&amp;")
        .replace("<", "&lt;")
        .replace(">", "&gt;")
        .replace('"', "&quot;")
    )


def _point(cx: float, cy: float, angle_deg: float, r: float) -> tuple[float, float]:
    a = math.radians(angle_deg)
    return cx + r * math.sin(a), cy - r * math.cos(a)


def _arc_path(cx, cy, a0, a1, r_outer, r_inner) -> str:
    large = 1 if (a1 - a0) > 180.0 else 0
    x0, y0 = _point(cx, cy, a0, r_outer)
    x1, y1 = _point(cx, cy, a1, r_outer)
    x2, y2 = _point(cx, cy, a1, r_inner)
    x3, y3 = _point(cx, cy, a0, r_inner)
    return (
        f"M {_f(x0)} {_f(y0)} "
        f"A {_f(r_outer)} {_f(r_outer)} 0 {large} 1 {_f(x1)} {_f(y1)} "
        f"L {_f(x2)} {_f(y2)} "
        f"A {_f(r_inner)} {_f(r_inner)} 0 {large} 0 {_f(x3)} {_f(y3)} Z"
    )


def _ribbon_path(cx, cy, r: Ribbon, r_src: float, r_tgt: float) -> str:
    s_large = 1 if (r.src_end - r.src_start) > 180.0 else 0
    t_large = 1 if (r.tgt_end - r.tgt_start) > 180.0 else 0
    sx0, sy0 = _point(cx, cy, r.src_start, r_src)
    sx1, sy1 = _point(cx, cy, r.src_end, r_src)
    tx0, ty0 = _point(cx, cy, r.tgt_start, r_tgt)
    tx1, ty1 = _point(cx, cy, r.tgt_end, r_tgt)
    c = f"{_f(cx)} {_f(cy)}"
    return (
        f"M {_f(sx0)} {_f(sy0)} "
        f"A {_f(r_src)} {_f(r_src)} 0 {s_large} 1 {_f(sx1)} {_f(sy1)} "
        f"C {c} {c} {_f(tx0)} {_f(ty0)} "
        f"A {_f(r_tgt)} {_f(r_tgt)} 0 {t_large} 1 {_f(tx1)} {_f(ty1)} "
        f"C {c} {c} {_f(sx0)} {_f(sy0)} Z"
    )


def render_svg(lo: ChordLayout, style: Style = Style()) -> str:
    """Standalone SVG document; byte-identical for identical inputs."""
    size = style.size_px
    cx = cy = size / 2.0
    r_outer = 0.36 * size
    r_inner = r_outer - 0.030 * size
    r_attach = r_inner - 0.006 * size
    r_label = r_outer + 0.012 * size
    font_size = style.font_size_px if style.font_size_px is not None else 0.016 * size

    parts = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" '
        f'viewBox="0 0 {size} {size}">',
    ]
    if style.background is not None:
        parts.append(f'<rect width="{size}" height="{size}" fill="{style.background}"/>')

    parts.append('<g class="ribbons">')
    for r in lo.ribbons:
        if not r.rendered:
            continue
        color = lo.node(r.source).color
        d = _ribbon_path(cx, cy, r, style.source_inset * r_attach, r_attach)
        parts.append(
            f'<path class="ribbon" d="{d}" fill="{color}" '
            f'fill-opacity="{style.ribbon_opacity}" stroke="none"/>'
        )
    parts.append("</g>")

    parts.append('<g class="arcs">')
    for node in lo.nodes:
        d = _arc_path(cx, cy, node.start_deg, node.end_deg, r_outer, r_inner)
        parts.append(f'<path class="arc" d="{d}" fill="{node.color}" stroke="none"/>')
    parts.append("</g>")

    if style.label_mode != "none":
        parts.append(f'<g class="labels" font-family="{_esc(style.font_family)}" '
                     f'font-size="{_f(font_size)}">')
        for node in lo.nodes:
            mid = (node.start_deg + node.end_deg) / 2.0
            x, y = _point(cx, cy, mid, r_label)
            text = node.code if style.label_mode == "code" else node.label
            norm = mid % 360.0
            if norm <= 180.0:
                rot = norm - 90.0
                anchor = "start"
            else:
                rot = norm + 90.0
                anchor = "end"
            parts.append(
                f'<text x="{_f(x)}" y="{_f(y)}" text-anchor="{anchor}" '
                f'dominant-baseline="middle" '
                f'transform="rotate({_f(rot)} {_f(x)} {_f(y)})">{_esc(text)}</text>'
            )
        parts.append("</g>")

    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def write_svg(lo: ChordLayout, path, style: Style = Style(),
              layout_json_path=None) -> None:
    Path(path).write_text(render_svg(lo, style), encoding="utf-8")
    if layout_json_path is not None:
        Path(layout_json_path).write_text(lo.to_json(), encoding="utf-8")
