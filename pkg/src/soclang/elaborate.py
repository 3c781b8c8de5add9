"""Elaboration: instantiate the module tree rooted at the root module,
enumerate state cells, and bind every callee to a concrete instance."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

from . import ast
from .diagnostics import ElabError
from .typecheck import TypedProgram


@dataclass
class InstanceNode:
    """One node of the instance tree: a user module or a primitive cell."""

    module: str                 # module name, or "State"/"Array" for primitives
    path: Tuple[str, ...]       # dot-path from the root (root itself is ())
    kind: str                   # "module" | "state" | "array"
    children: "Dict[str, InstanceNode]" = field(default_factory=dict)
    callees: Dict[str, Tuple[str, ...]] = field(default_factory=dict)
    value_type: Optional[ast.TypeExpr] = None
    key_type: Optional[ast.TypeExpr] = None
    span: ast.SourceSpan = ast.SYNTHETIC

    def dotted(self) -> str:
        return ".".join(self.path) if self.path else "(root)"


@dataclass
class Cell:
    path: Tuple[str, ...]
    kind: str  # "state" | "array"
    value_type: ast.TypeExpr
    key_type: Optional[ast.TypeExpr]
    init: Optional[ast.Expr]  # None for arrays (default-zero contents)

    def dotted(self) -> str:
        return ".".join(self.path)


@dataclass
class InstanceTree:
    root: InstanceNode
    by_path: Dict[Tuple[str, ...], InstanceNode]

    def node(self, path: Tuple[str, ...]) -> InstanceNode:
        return self.by_path[path]


@dataclass
class StateLayout:
    cells: List[Cell]
    by_path: Dict[Tuple[str, ...], Cell]

    def subtree(self, prefix: Tuple[str, ...]) -> List[Cell]:
        return [c for c in self.cells if c.path[:len(prefix)] == prefix]


def elaborate(tp: TypedProgram) -> Tuple[InstanceTree, StateLayout]:
    """Build the instance tree and the cell layout; resolves all wirings.

    Raises ElabError for unbound callees, wirings to nonexistent instances,
    module mismatches, and duplicate wirings.
    """
    by_path: Dict[Tuple[str, ...], InstanceNode] = {}
    cells: List[Cell] = []

    def instantiate(mod: ast.ModuleDecl, path: Tuple[str, ...],
                    span: ast.SourceSpan) -> InstanceNode:
        node = InstanceNode(mod.name, path, "module", span=span)
        by_path[path] = node
        for inst in mod.instances:
            child_path = path + (inst.name,)
            ref = inst.ref
            if isinstance(ref, ast.ModuleRef):
                node.children[inst.name] = instantiate(
                    tp.modules[ref.name], child_path, inst.span)
            elif isinstance(ref, ast.StatePrim):
                vt = _resolved(tp, ref.value_type, inst.span)
                cell = InstanceNode("State", child_path, "state", value_type=vt,
                                    span=inst.span)
                node.children[inst.name] = cell
                by_path[child_path] = cell
                cells.append(Cell(child_path, "state", vt, None, ref.init))
            else:
                assert isinstance(ref, ast.ArrayPrim)
                vt = _resolved(tp, ref.value_type, inst.span)
                kt = _resolved(tp, ref.key_type, inst.span)
                cell = InstanceNode("Array", child_path, "array",
                                    value_type=vt, key_type=kt, span=inst.span)
                node.children[inst.name] = cell
                by_path[child_path] = cell
                cells.append(Cell(child_path, "array", vt, kt, None))
        _wire(tp, mod, node)
        return node

    root_mod = tp.modules[tp.root_name]
    root = instantiate(root_mod, (), root_mod.span)
    _check_callees_bound(tp, root)
    tree = InstanceTree(root, by_path)
    layout = StateLayout(cells, {c.path: c for c in cells})
    return tree, layout


def _resolved(tp: TypedProgram, t: ast.TypeExpr, span) -> ast.TypeExpr:
    from .typecheck import Checker  # local import to reuse the resolver

    chk = Checker(tp.program)
    chk.aliases = tp.aliases
    chk.enums = tp.enums
    return chk.resolve_type(t, span)


def _wire(tp: TypedProgram, mod: ast.ModuleDecl, node: InstanceNode) -> None:
    for w in mod.wirings:
        if len(w.child_path) != 2:
            raise ElabError(w.span, "wiring source must be child.callee")
        child_name, callee_name = w.child_path
        child = node.children.get(child_name)
        if child is None or child.kind != "module":
            raise ElabError(w.span, f"wiring references nonexistent instance "
                                    f"{child_name!r}")
        child_mod = tp.modules[child.module]
        callee = next((c for c in child_mod.callees if c.name == callee_name), None)
        if callee is None:
            raise ElabError(w.span, f"module {child.module} has no callee "
                                    f"{callee_name!r}")
        if len(w.target_path) != 1:
            raise ElabError(w.span, "wiring target must be an instance of the "
                                    "wiring module")
        target = node.children.get(w.target_path[0])
        if target is None:
            raise ElabError(w.span, f"wiring target {w.target_path[0]!r} is not an "
                                    f"instance of {mod.name}")
        if target.module != callee.module:
            raise ElabError(w.span,
                            f"wiring target {target.dotted()} has module "
                            f"{target.module}, but callee {callee_name!r} expects "
                            f"{callee.module}")
        if callee_name in child.callees:
            raise ElabError(w.span, f"duplicate wiring for callee {callee_name!r} "
                                    f"of {child.dotted()}")
        child.callees[callee_name] = target.path


def _check_callees_bound(tp: TypedProgram, root: InstanceNode) -> None:
    def visit(node: InstanceNode) -> None:
        if node.kind == "module":
            mod = tp.modules[node.module]
            for c in mod.callees:
                if c.name not in node.callees:
                    raise ElabError(
                        node.span,
                        f"unbound callee {c.name!r} of instance {node.dotted()}")
            for child in node.children.values():
                visit(child)

    visit(root)


# ---------------------------------------------------------------------------
# Runtime path resolution (used by the execution engine)


def resolve_instance(tree: InstanceTree, frm: InstanceNode, prefix, is_root_code: bool
                     ) -> InstanceNode:
    """Resolve a dotted instance prefix starting at `frm`.

    First segment: local instance, then callee. Code in the root module may
    then descend freely through the instance tree (whole-system access);
    ordinary module code may not go deeper.
    """
    if not prefix:
        return frm
    current = frm
    for i, seg in enumerate(prefix):
        nxt = current.children.get(seg)
        if nxt is None and i == 0 and seg in current.callees:
            nxt = tree.node(current.callees[seg])
        if nxt is None:
            raise ElabError(ast.SYNTHETIC, f"unresolvable path segment {seg!r} "
                                           f"from {current.dotted()}")
        if i > 0 and not is_root_code:
            raise ElabError(ast.SYNTHETIC, "path escapes module encapsulation")
        current = nxt
    return current


def dump_tree(tp: TypedProgram, tree: InstanceTree) -> str:
    """Indented text rendering of the instance tree, one path per line."""
    lines: List[str] = []

    def describe(node: InstanceNode) -> str:
        if node.kind == "state":
            return f"State<{node.value_type}>"
        if node.kind == "array":
            return f"Array<{node.key_type}, {node.value_type}>"
        return node.module

    def visit(node: InstanceNode, depth: int) -> None:
        name = node.dotted() if node.path else tp.root_name
        lines.append("  " * depth + f"{name} : {describe(node)}")
        for child in node.children.values():
            visit(child, depth + 1)

    visit(tree.root, 0)
    return "\n".join(lines) + "\n"
