"""
Refinement hierarchy of mesh patches: each part that failed the patch
checks points to the child parts it was split into
"""

import json
from typing import Dict, List, Optional


class PatchNode:
    """One part at one refinement depth"""

    def __init__(self, label: int, triangle_count: int, genus: int, boundary_loop_count: int,
                 depth: int = 0):
        self.label = label
        self.triangle_count = triangle_count
        self.genus = genus
        self.boundary_loop_count = boundary_loop_count
        self.depth = depth
        self.parent: Optional[int] = None
        self.children: Dict[int, "PatchNode"] = {}
        self.final_label: Optional[int] = None
        self.unresolved = False

    @property
    def passes(self) -> bool:
        return self.genus == 0 and self.boundary_loop_count <= 2

    def add_child(self, child: "PatchNode") -> None:
        if child.label in self.children:
            raise ValueError(f"Part {child.label} is already a child of part {self.label}")
        child.parent = self.label
        child.depth = self.depth + 1
        self.children[child.label] = child

    def leaves(self) -> List["PatchNode"]:
        if not self.children:
            return [self]
        out = []
        for child in self.children.values():
            out.extend(child.leaves())
        return out

    def to_dict(self) -> Dict:
        return {
            "label": self.label,
            "final_label": self.final_label,
            "depth": self.depth,
            "triangle_count": self.triangle_count,
            "genus": self.genus,
            "boundary_loops": self.boundary_loop_count,
            "unresolved": self.unresolved,
            "children": [c.to_dict() for c in self.children.values()],
        }

    def display_tree(self, indent: int = 0) -> str:
        prefix = "  " * indent
        status = "ok" if self.passes else ("unresolved" if self.unresolved else "split")
        final = f" -> {self.final_label}" if self.final_label is not None else ""
        lines = [f"{prefix}├─ part {self.label}{final}: {self.triangle_count} triangles, "
                 f"genus {self.genus}, {self.boundary_loop_count} boundaries [{status}]"]
        for child in self.children.values():
            lines.append(child.display_tree(indent + 1))
        return "\n".join(lines)


class PatchTree:
    """Forest of refinement histories, one root per part of the initial segmentation"""

    def __init__(self):
        self.roots: Dict[int, PatchNode] = {}
        self._nodes: Dict[int, PatchNode] = {}

    def add_root(self, node: PatchNode) -> None:
        if node.label in self._nodes:
            raise ValueError(f"Part {node.label} already exists")
        self.roots[node.label] = node
        self._nodes[node.label] = node

    def add_child(self, parent_label: int, node: PatchNode) -> None:
        if node.label in self._nodes:
            raise ValueError(f"Part {node.label} already exists")
        self._nodes[parent_label].add_child(node)
        self._nodes[node.label] = node

    def get(self, label: int) -> Optional[PatchNode]:
        return self._nodes.get(label)

    def get_by_path(self, path: str) -> Optional[PatchNode]:
        """
        Node by label path from a root, e.g. "3/9/12"
        Returns None if path not found
        """
        parts = [int(p) for p in path.split("/") if p]
        if not parts or parts[0] not in self.roots:
            return None
        current = self.roots[parts[0]]
        for label in parts[1:]:
            if label not in current.children:
                return None
            current = current.children[label]
        return current

    def leaves(self) -> List[PatchNode]:
        out = []
        for root in self.roots.values():
            out.extend(root.leaves())
        return out

    def max_depth(self) -> int:
        return max((leaf.depth for leaf in self.leaves()), default=0)

    def relabel(self, mapping: Dict[int, int]) -> None:
        """Record the compacted label of every leaf"""
        for leaf in self.leaves():
            leaf.final_label = mapping.get(leaf.label)

    def display_tree(self) -> str:
        return "\n".join(root.display_tree() for root in self.roots.values())

    def to_dict(self) -> Dict:
        return {"max_depth": self.max_depth(), "parts": [r.to_dict() for r in self.roots.values()]}

    def export_hierarchy_json(self, filename: str) -> None:
        """Export the complete hierarchy to JSON"""
        with open(filename, "w") as f:
            json.dump(self.to_dict(), f, indent=2)
