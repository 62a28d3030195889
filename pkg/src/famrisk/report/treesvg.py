"""Headless family-tree renderer.

Produces a standalone SVG using standard pedigree conventions: squares
for males, circles for females, a filled symbol for anyone with a
recorded model cancer, a slash for the deceased, and the proband marked
with a box and arrow.  Layout is generation rows ordered by id, with
partners pulled adjacent so union connectors stay short; the drawing is a
pure function of the pedigree value.
"""

from __future__ import annotations

from xml.sax.saxutils import escape

from famrisk.pedigree.model import Individual, Pedigree, _norm_union

SYMBOL = 28
X_GAP = 86
Y_GAP = 110
MARGIN = 46


def _depths(p: Pedigree) -> dict[int, int]:
    depth = {m.id: 0 for m in p.members}
    # parent->child edges form a DAG even in looped pedigrees, so this
    # settles within len(members) sweeps
    for _ in range(len(p.members)):
        changed = False
        for m in p.members:
            if not m.has_parents:
                continue
            want = max(depth[m.father_id], depth[m.mother_id]) + 1
            if depth[m.id] < want:
                depth[m.id] = want
                changed = True
        if not changed:
            break
    # partners share a row so the union bar is horizontal
    for _ in range(len(p.members)):
        changed = False
        for a, b in _all_unions(p):
            row = max(depth[a], depth[b])
            if depth[a] != row or depth[b] != row:
                depth[a] = depth[b] = row
                changed = True
        if not changed:
            break
    return depth


def _all_unions(p: Pedigree) -> list[tuple[int, int]]:
    pairs = {_norm_union(*u) for u in p.unions}
    for m in p.members:
        if m.has_parents:
            pairs.add(_norm_union(m.father_id, m.mother_id))
    return sorted(pairs)


def _rows(p: Pedigree, depth: dict[int, int]) -> list[list[int]]:
    rows: dict[int, list[int]] = {}
    for m in p.members:
        rows.setdefault(depth[m.id], []).append(m.id)
    ordered = [sorted(rows[d]) for d in sorted(rows)]
    # pull each couple adjacent, keeping the earlier partner's slot
    for row in ordered:
        for a, b in _all_unions(p):
            if a in row and b in row:
                row.remove(b)
                row.insert(row.index(a) + 1, b)
    return ordered


def _positions(rows: list[list[int]]) -> dict[int, tuple[float, float]]:
    widest = max(len(r) for r in rows)
    pos = {}
    for ri, row in enumerate(rows):
        offset = (widest - len(row)) * X_GAP / 2
        for ci, member_id in enumerate(row):
            pos[member_id] = (
                MARGIN + offset + ci * X_GAP,
                MARGIN + ri * Y_GAP,
            )
    return pos


def _is_affected(ind: Individual) -> bool:
    return any(dx.is_model_cancer for dx in ind.cancers)


def _symbol(ind: Individual, x: float, y: float, proband: bool) -> list[str]:
    half = SYMBOL / 2
    fill = "#6b6b6b" if _is_affected(ind) else "#ffffff"
    parts = []
    if ind.sex == "male":
        parts.append(
            f'<rect class="member" data-id="{ind.id}" x="{x - half:.1f}" '
            f'y="{y - half:.1f}" width="{SYMBOL}" height="{SYMBOL}" '
            f'fill="{fill}" stroke="#222" stroke-width="1.5"/>'
        )
    else:
        parts.append(
            f'<circle class="member" data-id="{ind.id}" cx="{x:.1f}" '
            f'cy="{y:.1f}" r="{half}" fill="{fill}" stroke="#222" '
            f'stroke-width="1.5"/>'
        )
    if ind.deceased:
        parts.append(
            f'<line class="deceased" x1="{x - half - 4:.1f}" '
            f'y1="{y + half + 4:.1f}" x2="{x + half + 4:.1f}" '
            f'y2="{y - half - 4:.1f}" stroke="#222" stroke-width="1.5"/>'
        )
    if proband:
        pad = half + 6
        parts.append(
            f'<rect class="proband-box" x="{x - pad:.1f}" y="{y - pad:.1f}" '
            f'width="{2 * pad:.1f}" height="{2 * pad:.1f}" fill="none" '
            f'stroke="#c0392b" stroke-width="1.5"/>'
        )
        ax, ay = x - pad - 14, y + pad + 14
        parts.append(
            f'<line class="proband-arrow" x1="{ax:.1f}" y1="{ay:.1f}" '
            f'x2="{x - pad + 2:.1f}" y2="{y + pad - 2:.1f}" '
            f'stroke="#c0392b" stroke-width="2" '
            f'marker-end="url(#arrowhead)"/>'
        )
    label = str(ind.id)
    if ind.is_clone_of is not None:
        label += f" (={ind.is_clone_of})"
    parts.append(
        f'<text x="{x:.1f}" y="{y + half + 14:.1f}" font-size="10" '
        f'text-anchor="middle" font-family="sans-serif">{escape(label)}</text>'
    )
    if ind.age is not None:
        age = f"d. {ind.age}y" if ind.deceased else f"{ind.age}y"
        parts.append(
            f'<text x="{x:.1f}" y="{y + half + 26:.1f}" font-size="9" '
            f'fill="#555" text-anchor="middle" '
            f'font-family="sans-serif">{escape(age)}</text>'
        )
    return parts


def _connectors(p: Pedigree, pos: dict[int, tuple[float, float]]) -> list[str]:
    parts = []
    for a, b in _all_unions(p):
        (ax, ay), (bx, by) = pos[a], pos[b]
        parts.append(
            f'<line class="union" x1="{ax:.1f}" y1="{ay:.1f}" '
            f'x2="{bx:.1f}" y2="{by:.1f}" stroke="#222" stroke-width="1"/>'
        )
        children = p.children_of_union((a, b))
        if not children:
            continue
        mx, my = (ax + bx) / 2, (ay + by) / 2
        kid_xs = sorted(pos[c.id][0] for c in children)
        bar_y = min(pos[c.id][1] for c in children) - SYMBOL / 2 - 14
        parts.append(
            f'<line x1="{mx:.1f}" y1="{my:.1f}" x2="{mx:.1f}" '
            f'y2="{bar_y:.1f}" stroke="#222" stroke-width="1"/>'
        )
        lo, hi = min(kid_xs[0], mx), max(kid_xs[-1], mx)
        parts.append(
            f'<line x1="{lo:.1f}" y1="{bar_y:.1f}" x2="{hi:.1f}" '
            f'y2="{bar_y:.1f}" stroke="#222" stroke-width="1"/>'
        )
        for c in children:
            cx, cy = pos[c.id]
            parts.append(
                f'<line x1="{cx:.1f}" y1="{bar_y:.1f}" x2="{cx:.1f}" '
                f'y2="{cy - SYMBOL / 2:.1f}" stroke="#222" stroke-width="1"/>'
            )
    return parts


def family_tree_svg(p: Pedigree) -> str:
    rows = _rows(p, _depths(p))
    pos = _positions(rows)
    width = max(x for x, _ in pos.values()) + MARGIN + SYMBOL
    height = max(y for _, y in pos.values()) + MARGIN + SYMBOL
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0f}" '
        f'height="{height:.0f}" viewBox="0 0 {width:.0f} {height:.0f}">',
        "<defs>",
        '<marker id="arrowhead" markerWidth="8" markerHeight="8" refX="6" '
        'refY="3" orient="auto"><path d="M0,0 L6,3 L0,6 z" fill="#c0392b"/>'
        "</marker>",
        "</defs>",
        f'<rect width="{width:.0f}" height="{height:.0f}" fill="#ffffff"/>',
    ]
    parts.extend(_connectors(p, pos))
    for m in p.members:
        x, y = pos[m.id]
        parts.extend(_symbol(m, x, y, proband=m.id == p.proband_id))
    parts.append("</svg>")
    return "\n".join(parts)
