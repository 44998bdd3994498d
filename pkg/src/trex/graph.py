"""Text-box graph model with deterministic layout and SVG/TikZ emitters.

Nodes are boxes sized from their text by a shipped monospace metrics
table; they sit at absolute coordinates or relative to another node
(above/below/left/right at a gap). Layout, including edge clipping to
box boundaries, is resolved here once — both emitters draw the same
ResolvedGraph, so backends cannot drift apart.

Coordinates are y-up in the model and flipped only when writing SVG.
Internally all positions and extents are integer millipoints, so
placement constraints hold exactly, with no float drift.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .errors import (
    CyclicPlacement,
    DanglingReference,
    DuplicateNodeId,
    GraphError,
    SelfLoopEdge,
)
from .escape import escape_html, escape_tex

DEFAULT_FONT_SIZE_PT = 10.0
DEFAULT_PADDING_PT = 4.0
DEFAULT_ARROW_LENGTH_PT = 6.0

LINE_HEIGHT_EM = 1.2
DEFAULT_ADVANCE_EM = 0.6
# Per-character advance in em. Monospace: one value fits (nearly) all;
# the table exists so individual glyphs can be tuned without touching code.
ADVANCE_EM: dict[str, float] = {chr(c): DEFAULT_ADVANCE_EM for c in range(32, 127)}

CANVAS_MARGIN_PT = 10.0

DIRECTIONS = ("above", "below", "left", "right")


def _fmt(x: float) -> str:
    """Shortest round-tripping decimal; the one number format both backends use."""
    return str(float(x))


def _mp(x: float) -> int:
    """Points to integer millipoints."""
    return round(x * 1000)


def _pt(mp: int) -> float:
    return mp / 1000


# --- model ----------------------------------------------------------------


@dataclass(frozen=True)
class Absolute:
    x: float
    y: float


@dataclass(frozen=True)
class Relative:
    of: str
    direction: str  # above | below | left | right
    gap: float


@dataclass(frozen=True)
class Node:
    id: str
    text: tuple[str, ...]
    placement: Absolute | Relative
    font_size: float | None = None  # style overrides; None = document default
    padding: float | None = None


@dataclass(frozen=True)
class Edge:
    src: str
    dst: str
    tip: str = "arrow"  # arrow | none
    style: str = "solid"  # solid | dashed
    label: str | None = None
    self_loop: bool = False


@dataclass(frozen=True)
class GraphDoc:
    nodes: tuple[Node, ...]
    edges: tuple[Edge, ...] = ()
    font_size: float = DEFAULT_FONT_SIZE_PT
    padding: float = DEFAULT_PADDING_PT
    arrow_length: float = DEFAULT_ARROW_LENGTH_PT


@dataclass(frozen=True)
class ResolvedNode:
    id: str
    text: tuple[str, ...]
    font_size: float
    cx_mp: int
    cy_mp: int
    width_mp: int
    height_mp: int

    @property
    def cx(self) -> float:
        return _pt(self.cx_mp)

    @property
    def cy(self) -> float:
        return _pt(self.cy_mp)

    @property
    def width(self) -> float:
        return _pt(self.width_mp)

    @property
    def height(self) -> float:
        return _pt(self.height_mp)

    def top_mp(self) -> int:
        return self.cy_mp + self.height_mp // 2

    def bottom_mp(self) -> int:
        return self.cy_mp - self.height_mp // 2

    def left_mp(self) -> int:
        return self.cx_mp - self.width_mp // 2

    def right_mp(self) -> int:
        return self.cx_mp + self.width_mp // 2


@dataclass(frozen=True)
class ResolvedEdge:
    src: str
    dst: str
    x1: float
    y1: float
    x2: float  # clipped endpoint on the target boundary (tip end)
    y2: float
    tip: str
    style: str
    label: str | None
    label_x: float | None
    label_y: float | None


@dataclass
class ResolvedGraph:
    nodes: list[ResolvedNode]
    edges: list[ResolvedEdge]
    font_size: float
    padding: float
    arrow_length: float
    warnings: list[str] = field(default_factory=list)


# --- measurement and layout ------------------------------------------------


def measure_text(lines: list[str] | tuple[str, ...], font_size: float) -> tuple[float, float]:
    """Deterministic text extent (width, height) in points."""
    if not lines:
        return (0.0, 0.0)
    width_em = max(
        sum(ADVANCE_EM.get(ch, DEFAULT_ADVANCE_EM) for ch in line) for line in lines
    )
    return (width_em * font_size, len(lines) * LINE_HEIGHT_EM * font_size)


def _box_extent(node: Node, doc: GraphDoc) -> tuple[int, int]:
    font_size = node.font_size if node.font_size is not None else doc.font_size
    padding = node.padding if node.padding is not None else doc.padding
    tw, th = measure_text(node.text, font_size)
    # Keep extents even in millipoints so half-extents stay exact.
    w = 2 * ((_mp(tw) + 1) // 2) + 2 * _mp(padding)
    h = 2 * ((_mp(th) + 1) // 2) + 2 * _mp(padding)
    return (w, h)


def resolve_layout(doc: GraphDoc) -> ResolvedGraph:
    ids: dict[str, Node] = {}
    for node in doc.nodes:
        if node.id in ids:
            raise DuplicateNodeId(f"duplicate node id {node.id!r}")
        ids[node.id] = node

    for node in doc.nodes:
        placement = node.placement
        if isinstance(placement, Relative):
            if placement.of not in ids:
                raise DanglingReference(
                    f"node {node.id!r} is placed relative to unknown node "
                    f"{placement.of!r}"
                )
            if placement.direction not in DIRECTIONS:
                raise GraphError(
                    f"node {node.id!r} has unknown direction "
                    f"{placement.direction!r}"
                )
    for edge in doc.edges:
        for end in (edge.src, edge.dst):
            if end not in ids:
                raise DanglingReference(f"edge endpoint {end!r} is not a node")
        if edge.src == edge.dst and not edge.self_loop:
            raise SelfLoopEdge(
                f"edge {edge.src!r}->{edge.dst!r} loops back; "
                "set self_loop to allow it"
            )

    order = _placement_order(doc.nodes)

    extents = {node.id: _box_extent(node, doc) for node in doc.nodes}
    centers: dict[str, tuple[int, int]] = {}
    for node_id in order:
        node = ids[node_id]
        w, h = extents[node_id]
        placement = node.placement
        if isinstance(placement, Absolute):
            centers[node_id] = (_mp(placement.x), _mp(placement.y))
            continue
        ax, ay = centers[placement.of]
        aw, ah = extents[placement.of]
        gap = _mp(placement.gap)
        if placement.direction == "above":
            centers[node_id] = (ax, ay + ah // 2 + gap + h // 2)
        elif placement.direction == "below":
            centers[node_id] = (ax, ay - ah // 2 - gap - h // 2)
        elif placement.direction == "left":
            centers[node_id] = (ax - aw // 2 - gap - w // 2, ay)
        else:  # right
            centers[node_id] = (ax + aw // 2 + gap + w // 2, ay)

    resolved_nodes = []
    by_id: dict[str, ResolvedNode] = {}
    for node in doc.nodes:
        w, h = extents[node.id]
        cx, cy = centers[node.id]
        rn = ResolvedNode(
            id=node.id,
            text=node.text,
            font_size=node.font_size if node.font_size is not None else doc.font_size,
            cx_mp=cx,
            cy_mp=cy,
            width_mp=w,
            height_mp=h,
        )
        resolved_nodes.append(rn)
        by_id[node.id] = rn

    warnings: list[str] = []
    resolved_edges = [
        _resolve_edge(edge, by_id[edge.src], by_id[edge.dst], doc, warnings)
        for edge in doc.edges
    ]
    return ResolvedGraph(
        nodes=resolved_nodes,
        edges=resolved_edges,
        font_size=doc.font_size,
        padding=doc.padding,
        arrow_length=doc.arrow_length,
        warnings=warnings,
    )


def _placement_order(nodes: tuple[Node, ...]) -> list[str]:
    """Topological order of relative-placement dependencies; cycles reported."""
    anchor = {
        n.id: n.placement.of if isinstance(n.placement, Relative) else None
        for n in nodes
    }
    state: dict[str, int] = {}  # 0 visiting, 1 done
    order: list[str] = []

    for start in anchor:
        if state.get(start) == 1:
            continue
        chain: list[str] = []
        node = start
        while node is not None and state.get(node) is None:
            state[node] = 0
            chain.append(node)
            node = anchor[node]
        if node is not None and state.get(node) == 0:
            cycle = chain[chain.index(node):] + [node]
            raise CyclicPlacement(
                "relative placements form a cycle: " + " -> ".join(cycle),
                cycle=cycle[:-1],
            )
        for visited in reversed(chain):
            state[visited] = 1
            order.append(visited)
    return order


def _resolve_edge(
    edge: Edge,
    src: ResolvedNode,
    dst: ResolvedNode,
    doc: GraphDoc,
    warnings: list[str],
) -> ResolvedEdge:
    x1, y1 = src.cx, src.cy
    x2, y2 = dst.cx, dst.cy
    dx, dy = x2 - x1, y2 - y1

    t_exit = _boundary_param(src.width / 2, src.height / 2, dx, dy)
    s_exit = _boundary_param(dst.width / 2, dst.height / 2, dx, dy)
    degenerate = (
        t_exit is None or s_exit is None or t_exit >= 1 - s_exit
    )
    if degenerate:
        warnings.append(
            f"edge {edge.src!r}->{edge.dst!r}: boxes overlap; "
            "drawing center to center"
        )
        ex1, ey1, ex2, ey2 = x1, y1, x2, y2
    else:
        ex1, ey1 = x1 + t_exit * dx, y1 + t_exit * dy
        ex2, ey2 = x2 - s_exit * dx, y2 - s_exit * dy

    label_x = label_y = None
    if edge.label is not None:
        mx, my = (ex1 + ex2) / 2, (ey1 + ey2) / 2
        length = math.hypot(ex2 - ex1, ey2 - ey1)
        if length > 0:
            # Offset perpendicular (90° counter-clockwise) by one padding.
            px, py = -(ey2 - ey1) / length, (ex2 - ex1) / length
            label_x, label_y = mx + px * doc.padding, my + py * doc.padding
        else:
            label_x, label_y = mx, my + doc.padding

    return ResolvedEdge(
        src=edge.src,
        dst=edge.dst,
        x1=ex1,
        y1=ey1,
        x2=ex2,
        y2=ey2,
        tip=edge.tip,
        style=edge.style,
        label=edge.label,
        label_x=label_x,
        label_y=label_y,
    )


def _boundary_param(half_w: float, half_h: float, dx: float, dy: float) -> float | None:
    """Parameter t where center + t*(dx,dy) crosses the box boundary."""
    tx = half_w / abs(dx) if dx else math.inf
    ty = half_h / abs(dy) if dy else math.inf
    t = min(tx, ty)
    return None if math.isinf(t) else t


# --- emitters ---------------------------------------------------------------


def render_svg(resolved: ResolvedGraph) -> str:
    min_x, min_y, max_x, max_y = _bounds(resolved)
    width = (max_x - min_x) + 2 * CANVAS_MARGIN_PT
    height = (max_y - min_y) + 2 * CANVAS_MARGIN_PT
    ox = CANVAS_MARGIN_PT - min_x  # svg_x = ox + model_x
    oy = max_y + CANVAS_MARGIN_PT  # svg_y = oy - model_y

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" class="trex-graph" '
        f'width="{_fmt(width)}pt" height="{_fmt(height)}pt" '
        f'viewBox="0 0 {_fmt(width)} {_fmt(height)}" '
        f'data-flip-x="{_fmt(ox)}" data-flip-y="{_fmt(oy)}">'
    ]
    for node in resolved.nodes:
        parts.append(_svg_node(node, ox, oy))
    for edge in resolved.edges:
        parts.append(_svg_edge(edge, resolved, ox, oy))
    parts.append("</svg>")
    return "\n".join(parts)


def _svg_node(node: ResolvedNode, ox: float, oy: float) -> str:
    sx, sy = ox + node.cx, oy - node.cy
    w, h = node.width, node.height
    lines = [
        f'<g class="trex-graph-node" data-id="{escape_html(node.id)}" '
        f'transform="translate({_fmt(sx)} {_fmt(sy)})">',
        f'<rect x="{_fmt(-w / 2)}" y="{_fmt(-h / 2)}" width="{_fmt(w)}" '
        f'height="{_fmt(h)}" fill="none" stroke="currentColor"/>',
    ]
    line_height = LINE_HEIGHT_EM * node.font_size
    block = len(node.text) * line_height
    for i, text in enumerate(node.text):
        y = -block / 2 + (i + 0.5) * line_height
        lines.append(
            f'<text x="0" y="{_fmt(y)}" text-anchor="middle" '
            f'dominant-baseline="central" font-family="monospace" '
            f'font-size="{_fmt(node.font_size)}">{escape_html(text)}</text>'
        )
    lines.append("</g>")
    return "\n".join(lines)


def _svg_edge(edge: ResolvedEdge, resolved: ResolvedGraph, ox: float, oy: float) -> str:
    x1, y1 = ox + edge.x1, oy - edge.y1
    x2, y2 = ox + edge.x2, oy - edge.y2
    dash = ' stroke-dasharray="4 3"' if edge.style == "dashed" else ""
    length = math.hypot(x2 - x1, y2 - y1)
    parts = []
    draw_tip = edge.tip == "arrow" and length > 0
    if draw_tip:
        # Stop the shaft at the triangle base so it never pokes past the tip.
        ux, uy = (x2 - x1) / length, (y2 - y1) / length
        arrow = resolved.arrow_length
        bx, by = x2 - ux * arrow, y2 - uy * arrow
        px, py = -uy, ux
        half = arrow * 0.4
        parts.append(
            f'<line x1="{_fmt(x1)}" y1="{_fmt(y1)}" x2="{_fmt(bx)}" '
            f'y2="{_fmt(by)}" stroke="currentColor"{dash}/>'
        )
        parts.append(
            f'<polygon class="trex-graph-tip" points="'
            f"{_fmt(x2)},{_fmt(y2)} "
            f"{_fmt(bx + px * half)},{_fmt(by + py * half)} "
            f"{_fmt(bx - px * half)},{_fmt(by - py * half)}"
            f'" fill="currentColor"/>'
        )
    else:
        parts.append(
            f'<line x1="{_fmt(x1)}" y1="{_fmt(y1)}" x2="{_fmt(x2)}" '
            f'y2="{_fmt(y2)}" stroke="currentColor"{dash}/>'
        )
    if edge.label is not None and edge.label_x is not None:
        parts.append(
            f'<text x="{_fmt(ox + edge.label_x)}" y="{_fmt(oy - edge.label_y)}" '
            f'text-anchor="middle" dominant-baseline="central" '
            f'font-family="monospace" font-size="{_fmt(resolved.font_size)}">'
            f"{escape_html(edge.label)}</text>"
        )
    return "\n".join(parts)


def render_tikz(resolved: ResolvedGraph) -> str:
    parts = ["\\begin{tikzpicture}"]
    line_height = LINE_HEIGHT_EM
    for node in resolved.nodes:
        text = "\\\\".join(escape_tex(line) for line in node.text)
        font = (
            f"\\ttfamily\\fontsize{{{_fmt(node.font_size)}}}"
            f"{{{_fmt(line_height * node.font_size)}}}\\selectfont"
        )
        parts.append(
            f"\\node[draw, align=center, inner sep=0pt, "
            f"minimum width={_fmt(node.width)}pt, "
            f"minimum height={_fmt(node.height)}pt, "
            f"font={font}] "
            f"at ({_fmt(node.cx)}pt, {_fmt(node.cy)}pt) {{{text}}};"
        )
    for edge in resolved.edges:
        options = []
        if edge.tip == "arrow":
            options.append("-stealth")
        if edge.style == "dashed":
            options.append("dashed")
        opt = f"[{', '.join(options)}]" if options else ""
        parts.append(
            f"\\draw{opt} ({_fmt(edge.x1)}pt, {_fmt(edge.y1)}pt) -- "
            f"({_fmt(edge.x2)}pt, {_fmt(edge.y2)}pt);"
        )
        if edge.label is not None and edge.label_x is not None:
            font = (
                f"\\ttfamily\\fontsize{{{_fmt(resolved.font_size)}}}"
                f"{{{_fmt(line_height * resolved.font_size)}}}\\selectfont"
            )
            parts.append(
                f"\\node[font={font}] at "
                f"({_fmt(edge.label_x)}pt, {_fmt(edge.label_y)}pt) "
                f"{{{escape_tex(edge.label)}}};"
            )
    parts.append("\\end{tikzpicture}")
    return "\n".join(parts)


def _bounds(resolved: ResolvedGraph) -> tuple[float, float, float, float]:
    if not resolved.nodes:
        return (0.0, 0.0, 0.0, 0.0)
    min_x = min(n.cx - n.width / 2 for n in resolved.nodes)
    max_x = max(n.cx + n.width / 2 for n in resolved.nodes)
    min_y = min(n.cy - n.height / 2 for n in resolved.nodes)
    max_y = max(n.cy + n.height / 2 for n in resolved.nodes)
    return (min_x, min_y, max_x, max_y)


# --- wire-format construction ------------------------------------------------


def graph_doc_from_dict(data: dict) -> GraphDoc:
    """Build a GraphDoc from plain dicts (the plugin callback payload shape)."""
    if not isinstance(data, dict):
        raise GraphError("graph payload must be an object")
    nodes = []
    for i, raw in enumerate(data.get("nodes", [])):
        if not isinstance(raw, dict) or "id" not in raw:
            raise GraphError(f"node #{i} must be an object with an 'id'")
        placement_raw = raw.get("placement")
        if not isinstance(placement_raw, dict):
            raise GraphError(f"node {raw['id']!r} is missing its placement")
        if "of" in placement_raw:
            placement: Absolute | Relative = Relative(
                of=str(placement_raw["of"]),
                direction=str(placement_raw.get("direction", "right")),
                gap=float(placement_raw.get("gap", 10.0)),
            )
        elif "x" in placement_raw and "y" in placement_raw:
            placement = Absolute(
                x=float(placement_raw["x"]), y=float(placement_raw["y"])
            )
        else:
            raise GraphError(
                f"node {raw['id']!r} placement needs x/y or of/direction/gap"
            )
        text_raw = raw.get("text", [])
        if isinstance(text_raw, str):
            text_raw = [text_raw]
        nodes.append(
            Node(
                id=str(raw["id"]),
                text=tuple(str(line) for line in text_raw),
                placement=placement,
                font_size=(
                    float(raw["font_size"]) if "font_size" in raw else None
                ),
                padding=float(raw["padding"]) if "padding" in raw else None,
            )
        )
    edges = []
    for i, raw in enumerate(data.get("edges", [])):
        if not isinstance(raw, dict) or "from" not in raw or "to" not in raw:
            raise GraphError(f"edge #{i} must be an object with 'from' and 'to'")
        tip = str(raw.get("tip", "arrow"))
        style = str(raw.get("style", "solid"))
        if tip not in ("arrow", "none"):
            raise GraphError(f"edge #{i} has unknown tip {tip!r}")
        if style not in ("solid", "dashed"):
            raise GraphError(f"edge #{i} has unknown style {style!r}")
        edges.append(
            Edge(
                src=str(raw["from"]),
                dst=str(raw["to"]),
                tip=tip,
                style=style,
                label=str(raw["label"]) if raw.get("label") is not None else None,
                self_loop=bool(raw.get("self_loop", False)),
            )
        )
    doc = GraphDoc(
        nodes=tuple(nodes),
        edges=tuple(edges),
        font_size=float(data.get("font_size", DEFAULT_FONT_SIZE_PT)),
        padding=float(data.get("padding", DEFAULT_PADDING_PT)),
        arrow_length=float(data.get("arrow_length", DEFAULT_ARROW_LENGTH_PT)),
    )
    return doc
