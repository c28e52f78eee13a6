"""Generic AST traversal driven by a table of per-node-kind actions.

Each node kind has two slots: a pre-action that runs before the node's
children are traversed and a post-action that runs after. An action receives
the node and returns a replacement node, or ``None`` to keep it.

A pre-action may return a new node that *embeds* the original one (wrapping a
call in a comma expression, say). The original subtree is still traversed
exactly once and spliced back into the replacement where it appeared; nodes
synthesized by an action are never visited, so a wrapping action cannot
recurse into its own output.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields, replace
from typing import Callable, Dict, Optional, Tuple, Type

from .nodes import Node, walk

PRE_ACTION = 0
POST_ACTION = 1

Action = Callable[[Node], Optional[Node]]


class TransformError(Exception):
    """Raised by an action to abort a traversal."""


@dataclass
class TraverseTable:
    actions: Dict[Type[Node], Tuple[Optional[Action], Optional[Action]]] = field(
        default_factory=dict
    )

    def on(self, kind: Type[Node], pre: Optional[Action] = None,
           post: Optional[Action] = None) -> "TraverseTable":
        self.actions[kind] = (pre, post)
        return self

    def slot(self, kind: Type[Node], which: int) -> Optional[Action]:
        entry = self.actions.get(kind)
        return entry[which] if entry else None


def _map_children(node: Node, fn: Callable[[Node], Node]) -> Node:
    changes = {}
    for f in fields(node):  # type: ignore[arg-type]
        value = getattr(node, f.name)
        if isinstance(value, Node):
            new = fn(value)
            if new is not value:
                changes[f.name] = new
        elif isinstance(value, tuple) and any(isinstance(v, Node) for v in value):
            new_items = tuple(fn(v) if isinstance(v, Node) else v for v in value)
            if any(a is not b for a, b in zip(new_items, value)):
                changes[f.name] = new_items
    return replace(node, **changes) if changes else node  # type: ignore[type-var]


def _splice(tree: Node, target: Node, replacement: Node) -> Node:
    """Replace the object ``target`` (by identity) inside ``tree``."""
    if tree is target:
        return replacement
    return _map_children(tree, lambda c: _splice(c, target, replacement))


def _contains(tree: Node, target: Node) -> bool:
    return any(n is target for n in walk(tree))


def _descend(node: Node, table: TraverseTable) -> Node:
    done = _map_children(node, lambda c: traverse(c, table))
    post = table.slot(type(node), POST_ACTION)
    if post:
        result = post(done)
        if result is not None:
            done = result
    return done


def traverse(node: Node, table: TraverseTable) -> Node:
    """Rewrite ``node`` according to ``table``; returns the new tree.

    A pre-action result that does not embed the original node replaces it
    outright, and traversal continues into the replacement's children.
    With an empty table the result is the input tree itself.
    """
    pre = table.slot(type(node), PRE_ACTION)
    wrapper = pre(node) if pre else None
    if wrapper is None or wrapper is node:
        return _descend(node, table)
    if _contains(wrapper, node):
        return _splice(wrapper, node, _descend(node, table))
    return _descend(wrapper, table)
