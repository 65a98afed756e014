"""Indented text and Graphviz renderings of behavior trees.

Text form, one node per line, two spaces of indent per level::

    ?
      {In(apple,drawer)}
      ->
        {Holding(apple), IsOpen(drawer)}
        PutIn

``?`` is a Fallback, ``->`` a Sequence, ``{...}`` a Condition (atoms in
universe order, ``{}`` for the empty condition) and anything else an Action
name.
"""

from __future__ import annotations

import re

from ..errors import ParseError
from ..symbolic import Action, BTNode, Condition, DomainUniverse, Fallback, Sequence

_ACTION = re.compile(r"[A-Za-z_][A-Za-z0-9_\-'.]*$")


def _cond_text(node: Condition) -> str:
    return "{" + ", ".join(node.condition.atoms()) + "}"


def render_bt(root: BTNode) -> str:
    lines: list[str] = []

    def walk(node: BTNode, depth: int) -> None:
        pad = "  " * depth
        if isinstance(node, Condition):
            lines.append(pad + _cond_text(node))
        elif isinstance(node, Action):
            lines.append(pad + node.name)
        elif isinstance(node, (Sequence, Fallback)):
            lines.append(pad + ("->" if isinstance(node, Sequence) else "?"))
            for child in node.children:
                walk(child, depth + 1)
        else:
            raise TypeError(f"not a BT node: {node!r}")

    walk(root, 0)
    return "\n".join(lines) + "\n"


def parse_bt(text: str, universe: DomainUniverse, source: str = "<bt>") -> BTNode:
    """Inverse of :func:`render_bt`."""
    entries: list[tuple[int, int, str]] = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        if not raw.strip():
            continue
        stripped = raw.lstrip(" ")
        indent = len(raw) - len(stripped)
        if indent % 2:
            raise ParseError("indentation must be a multiple of two spaces", lineno, indent + 1, source)
        entries.append((lineno, indent // 2, stripped.rstrip()))
    if not entries:
        raise ParseError("empty behavior tree", 1, 1, source)

    pos = 0

    def node_at(depth: int) -> BTNode:
        nonlocal pos
        lineno, d, body = entries[pos]
        if d != depth:
            raise ParseError(f"expected depth {depth}, found {d}", lineno, 2 * d + 1, source)
        pos += 1
        col = 2 * d + 1
        if body in ("?", "->"):
            kids = []
            while pos < len(entries) and entries[pos][1] > depth:
                kids.append(node_at(depth + 1))
            if not kids:
                raise ParseError("control node without children", lineno, col, source)
            return Fallback(tuple(kids)) if body == "?" else Sequence(tuple(kids))
        if body.startswith("{"):
            if not body.endswith("}"):
                raise ParseError("unterminated condition", lineno, col + len(body), source)
            inner = body[1:-1].strip()
            atoms = [a for a in re.split(r",\s+", inner) if a] if inner else []
            offset = col + 1
            bits = 0
            for atom in atoms:
                start = body.find(atom, offset - col)
                try:
                    bits |= 1 << universe.index(atom)
                except ParseError as err:
                    raise ParseError(err.message, lineno, col + start + max(err.column - 1, 0), source) from None
                except Exception as err:
                    raise ParseError(str(err), lineno, col + start, source) from None
            return Condition(universe.from_bits(bits))
        if _ACTION.match(body):
            return Action(body)
        raise ParseError(f"cannot parse node {body!r}", lineno, col, source)

    root = node_at(0)
    if pos != len(entries):
        lineno, d, _ = entries[pos]
        raise ParseError("trailing nodes after the root", lineno, 2 * d + 1, source)
    return root


def render_dot(root: BTNode, name: str = "bt") -> str:
    """Graphviz description for external renderers."""
    lines = [f"digraph {name} {{", "  node [fontname=monospace];"]
    counter = 0

    def walk(node: BTNode) -> str:
        nonlocal counter
        nid = f"n{counter}"
        counter += 1
        if isinstance(node, Condition):
            label, shape = _cond_text(node), "ellipse"
        elif isinstance(node, Action):
            label, shape = node.name, "box"
        else:
            label, shape = ("->" if isinstance(node, Sequence) else "?"), "square"
        label = label.replace('"', '\\"')
        lines.append(f'  {nid} [label="{label}", shape={shape}];')
        if isinstance(node, (Sequence, Fallback)):
            for child in node.children:
                lines.append(f"  {nid} -> {walk(child)};")
        return nid

    walk(root)
    lines.append("}")
    return "\n".join(lines) + "\n"
