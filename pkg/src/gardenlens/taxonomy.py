"""Three-level scene taxonomy and its declarative mapping rules.

The node tree and the rules that route enriched images into it are
data, not code: they live in a block-structured config file (see
data/taxonomy.cfg for the shipped one). The engine here only parses,
validates, and evaluates.

Assignment picks the deepest level with a matching rule and derives the
ancestor levels from the tree, so a sub assignment is always consistent
with its medium and major.
"""

from __future__ import annotations

from dataclasses import dataclass
from importlib import resources
from typing import Iterable

from .errors import (DanglingParent, DuplicateNodeId, SchemaError,
                     UnknownClassInRule)
from .jsonutil import sha256_hex
from .vision import N_ELEMENT_CLASSES, EnrichedImage, EnrichedRecord

LEVELS = ("major", "medium", "sub")
UNCLASSIFIED = "unclassified"

# level counts the shipped config must have
SHIPPED_LEVEL_COUNTS = {"major": 17, "medium": 102, "sub": 139}


@dataclass(frozen=True)
class TaxonomyNode:
    id: str
    level: str
    name: str
    parent: str | None = None


@dataclass(frozen=True)
class MappingRule:
    """Conjunction of atoms over (tier labels, keywords, seg fractions)."""

    node: str
    priority: int
    label_in: tuple[str, ...] = ()
    keyword_in: tuple[str, ...] = ()
    fraction_ge: tuple[tuple[int, float], ...] = ()
    fraction_le: tuple[tuple[int, float], ...] = ()

    def matches(self, image: EnrichedImage) -> bool:
        if self.label_in:
            labels = set(image.tiers.labels())
            if labels.isdisjoint(self.label_in):
                return False
        if self.keyword_in:
            if set(image.keywords).isdisjoint(self.keyword_in):
                return False
        for class_id, threshold in self.fraction_ge:
            if image.profile.fraction(class_id) < threshold:
                return False
        for class_id, threshold in self.fraction_le:
            if image.profile.fraction(class_id) > threshold:
                return False
        return True


@dataclass
class Taxonomy:
    nodes: dict[str, TaxonomyNode]
    rules: list[MappingRule]
    version: str
    checksum: str

    def level_counts(self) -> dict[str, int]:
        counts = {level: 0 for level in LEVELS}
        for node in self.nodes.values():
            counts[node.level] += 1
        return counts

    def ancestors(self, node_id: str) -> tuple[str | None, str | None]:
        """(major, medium) above the node; None entries for higher levels."""
        node = self.nodes[node_id]
        if node.level == "major":
            return node.id, None
        if node.level == "medium":
            return node.parent, node.id
        medium = self.nodes[node.parent]
        return medium.parent, medium.id

    def rules_for_level(self, level: str) -> list[MappingRule]:
        return [r for r in self.rules if self.nodes[r.node].level == level]


# --- config parsing -------------------------------------------------------------

_NODE_KEYS = {"id", "level", "name", "parent"}
_RULE_KEYS = {"node", "priority", "label_in", "keyword_in", "fraction_ge", "fraction_le"}


def _parse_blocks(text: str) -> tuple[dict[str, str], list[tuple[str, dict[str, str], int]]]:
    """Split the config into top-level assignments and [node]/[rule] blocks."""
    top: dict[str, str] = {}
    blocks: list[tuple[str, dict[str, str], int]] = []
    current: dict[str, str] | None = None
    for line_no, raw_line in enumerate(text.splitlines(), start=1):
        line = raw_line.strip()
        if not line or line.startswith("#"):
            continue
        if line.startswith("[") and line.endswith("]"):
            kind = line[1:-1].strip()
            if kind not in ("node", "rule"):
                raise SchemaError(f"line {line_no}: unknown block [{kind}]")
            current = {}
            blocks.append((kind, current, line_no))
            continue
        if "=" not in line:
            raise SchemaError(f"line {line_no}: expected 'key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        if current is None:
            top[key] = value
        else:
            if key in current:
                raise SchemaError(f"line {line_no}: duplicate key {key!r} in block")
            current[key] = value
    return top, blocks


def _parse_csv(value: str) -> tuple[str, ...]:
    return tuple(part.strip() for part in value.split(",") if part.strip())


def _parse_fraction_atoms(value: str, line_no: int) -> tuple[tuple[int, float], ...]:
    atoms = []
    for part in _parse_csv(value):
        try:
            class_part, threshold_part = part.split(":")
            atoms.append((int(class_part), float(threshold_part)))
        except ValueError:
            raise SchemaError(f"line {line_no}: bad fraction atom {part!r}, expected class:threshold")
    return tuple(atoms)


def load_taxonomy(
    config: bytes | str,
    known_labels: Iterable[str] | None = None,
    expected_counts: dict[str, int] | None = None,
) -> Taxonomy:
    """Parse and validate a taxonomy config; structural violations are errors."""
    if isinstance(config, bytes):
        config = config.decode("utf-8")
    checksum = "sha256:" + sha256_hex(config)
    top, blocks = _parse_blocks(config)
    version = top.get("version", "unversioned")

    nodes: dict[str, TaxonomyNode] = {}
    rules: list[MappingRule] = []
    for kind, entries, line_no in blocks:
        if kind == "node":
            unknown = set(entries) - _NODE_KEYS
            if unknown:
                raise SchemaError(f"line {line_no}: unknown node keys {sorted(unknown)}")
            for required in ("id", "level", "name"):
                if required not in entries:
                    raise SchemaError(f"line {line_no}: node missing {required!r}")
            node = TaxonomyNode(
                id=entries["id"], level=entries["level"],
                name=entries["name"], parent=entries.get("parent"))
            if node.level not in LEVELS:
                raise SchemaError(f"line {line_no}: bad level {node.level!r}")
            if node.id in nodes:
                raise DuplicateNodeId(node.id)
            if node.id == UNCLASSIFIED:
                raise SchemaError(f"line {line_no}: node id {UNCLASSIFIED!r} is reserved")
            nodes[node.id] = node
        else:
            unknown = set(entries) - _RULE_KEYS
            if unknown:
                raise SchemaError(f"line {line_no}: unknown rule keys {sorted(unknown)}")
            for required in ("node", "priority"):
                if required not in entries:
                    raise SchemaError(f"line {line_no}: rule missing {required!r}")
            try:
                priority = int(entries["priority"])
            except ValueError:
                raise SchemaError(f"line {line_no}: priority must be an integer")
            rule = MappingRule(
                node=entries["node"],
                priority=priority,
                label_in=_parse_csv(entries.get("label_in", "")),
                keyword_in=_parse_csv(entries.get("keyword_in", "")),
                fraction_ge=_parse_fraction_atoms(entries.get("fraction_ge", ""), line_no),
                fraction_le=_parse_fraction_atoms(entries.get("fraction_le", ""), line_no),
            )
            if not (rule.label_in or rule.keyword_in or rule.fraction_ge or rule.fraction_le):
                raise SchemaError(f"line {line_no}: rule for {rule.node!r} has no atoms")
            rules.append(rule)

    _validate_tree(nodes)
    _validate_rules(rules, nodes, known_labels)
    taxonomy = Taxonomy(nodes=nodes, rules=rules, version=version, checksum=checksum)
    if expected_counts:
        counts = taxonomy.level_counts()
        if counts != expected_counts:
            raise SchemaError(f"level counts {counts} do not match expected {expected_counts}")
    return taxonomy


def _validate_tree(nodes: dict[str, TaxonomyNode]) -> None:
    parent_level = {"medium": "major", "sub": "medium"}
    for node in nodes.values():
        if node.level == "major":
            if node.parent is not None:
                raise SchemaError(f"major node {node.id!r} must not have a parent")
            continue
        if node.parent is None:
            raise DanglingParent(f"{node.level} node {node.id!r} has no parent")
        parent = nodes.get(node.parent)
        if parent is None:
            raise DanglingParent(f"node {node.id!r} references missing parent {node.parent!r}")
        if parent.level != parent_level[node.level]:
            raise SchemaError(
                f"node {node.id!r} ({node.level}) has parent {parent.id!r} "
                f"of level {parent.level!r}, expected {parent_level[node.level]!r}")


def _validate_rules(rules: list[MappingRule], nodes: dict[str, TaxonomyNode],
                    known_labels: Iterable[str] | None) -> None:
    label_set = set(known_labels) if known_labels is not None else None
    priorities_per_level: dict[str, set[int]] = {level: set() for level in LEVELS}
    for rule in rules:
        node = nodes.get(rule.node)
        if node is None:
            raise SchemaError(f"rule references unknown node {rule.node!r}")
        for class_id, _ in rule.fraction_ge + rule.fraction_le:
            if not 0 <= class_id < N_ELEMENT_CLASSES:
                raise UnknownClassInRule(f"class {class_id} outside [0, {N_ELEMENT_CLASSES})")
        if label_set is not None:
            unknown = set(rule.label_in) - label_set
            if unknown:
                raise SchemaError(f"rule for {rule.node!r} references unknown labels {sorted(unknown)}")
        seen = priorities_per_level[node.level]
        if rule.priority in seen:
            raise SchemaError(
                f"duplicate priority {rule.priority} at level {node.level!r} (node {rule.node!r})")
        seen.add(rule.priority)


def load_default_taxonomy(known_labels: Iterable[str] | None = None) -> Taxonomy:
    """Load the shipped config; its level counts are part of the contract."""
    text = resources.files("gardenlens").joinpath("data").joinpath("taxonomy.cfg").read_text(encoding="utf-8")
    return load_taxonomy(text, known_labels=known_labels, expected_counts=SHIPPED_LEVEL_COUNTS)


# --- assignment --------------------------------------------------------------------

@dataclass(frozen=True)
class Assignment:
    major: str
    medium: str
    sub: str

    def as_dict(self) -> dict[str, str]:
        return {"major": self.major, "medium": self.medium, "sub": self.sub}


def _best_node(image: EnrichedImage, rules: list[MappingRule]) -> str | None:
    best: MappingRule | None = None
    for rule in rules:
        if (best is None or rule.priority > best.priority) and rule.matches(image):
            best = rule
    return best.node if best else None


def assign_image(image: EnrichedImage, taxonomy: Taxonomy) -> Assignment:
    """Deepest matching level wins; ancestors come from the tree."""
    sub = _best_node(image, taxonomy.rules_for_level("sub"))
    if sub is not None:
        major, medium = taxonomy.ancestors(sub)
        return Assignment(major=major, medium=medium, sub=sub)
    medium = _best_node(image, taxonomy.rules_for_level("medium"))
    if medium is not None:
        major, _ = taxonomy.ancestors(medium)
        return Assignment(major=major, medium=medium, sub=UNCLASSIFIED)
    major = _best_node(image, taxonomy.rules_for_level("major"))
    if major is not None:
        return Assignment(major=major, medium=UNCLASSIFIED, sub=UNCLASSIFIED)
    return Assignment(major=UNCLASSIFIED, medium=UNCLASSIFIED, sub=UNCLASSIFIED)


@dataclass
class ImageAssignment:
    record_id: str
    image_ref: str
    assignment: Assignment

    def to_json_dict(self) -> dict:
        return {"id": self.record_id, "image": self.image_ref, "nodes": self.assignment.as_dict()}

    @classmethod
    def from_json_dict(cls, d: dict) -> "ImageAssignment":
        nodes = d["nodes"]
        return cls(record_id=d["id"], image_ref=d["image"],
                   assignment=Assignment(major=nodes["major"], medium=nodes["medium"], sub=nodes["sub"]))


def assign_record(enriched: EnrichedRecord, taxonomy: Taxonomy) -> list[ImageAssignment]:
    return [
        ImageAssignment(record_id=enriched.id, image_ref=image.ref,
                        assignment=assign_image(image, taxonomy))
        for image in enriched.images
    ]


def assign_all(enriched_records: Iterable[EnrichedRecord], taxonomy: Taxonomy) -> list[ImageAssignment]:
    rows: list[ImageAssignment] = []
    for enriched in enriched_records:
        rows.extend(assign_record(enriched, taxonomy))
    return rows
