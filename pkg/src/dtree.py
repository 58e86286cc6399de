"""
C4.5-style decision tree: gain-ratio splits over categorical and continuous attributes
"""

import csv
import io
import json
import logging
import math
from dataclasses import dataclass, replace
from enum import Enum
from pathlib import Path
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

from .errors import ConfigError, DomainError, UsageError

logger = logging.getLogger(__name__)

MISSING = "?"
GAIN_EPS = 1e-9
RATIO_EPS = 1e-9

Value = Union[str, float, None]
Row = Tuple[Value, ...]


class AttributeKind(str, Enum):
    CATEGORICAL = "CAT"
    CONTINUOUS = "NUM"


@dataclass(frozen=True)
class Attribute:
    name: str
    kind: AttributeKind
    values: Tuple[str, ...] = ()

    def __post_init__(self):
        if not self.name:
            raise UsageError("attribute name must be non-empty")
        if self.kind is AttributeKind.CATEGORICAL:
            if not self.values:
                raise UsageError(f"categorical attribute {self.name} needs a value set")
            if len(set(self.values)) != len(self.values):
                raise UsageError(f"categorical attribute {self.name} has duplicate values")
        elif self.values:
            raise UsageError(f"continuous attribute {self.name} takes no value set")

    @property
    def is_categorical(self) -> bool:
        return self.kind is AttributeKind.CATEGORICAL


@dataclass(frozen=True)
class AttributeSchema:
    attributes: Tuple[Attribute, ...]
    label_domain: Tuple[str, ...]

    def __post_init__(self):
        names = [a.name for a in self.attributes]
        if len(set(names)) != len(names):
            raise UsageError(f"attribute names must be unique: {names}")
        if not self.label_domain or len(set(self.label_domain)) != len(self.label_domain):
            raise UsageError("label domain must be a non-empty set")

    def index(self, name: str) -> int:
        for i, attribute in enumerate(self.attributes):
            if attribute.name == name:
                return i
        raise UsageError(f"no attribute named {name}")

    def check_row(self, values: Sequence[Value]) -> None:
        if len(values) != len(self.attributes):
            raise UsageError(f"row has {len(values)} values, schema has {len(self.attributes)} attributes")
        for attribute, value in zip(self.attributes, values):
            if value is None:
                continue
            if attribute.is_categorical:
                if value not in attribute.values:
                    raise UsageError(f"{attribute.name}: {value!r} is not in {attribute.values}")
            elif isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
                raise UsageError(f"{attribute.name}: {value!r} is not a finite number")


@dataclass(frozen=True)
class Dataset:
    schema: AttributeSchema
    rows: Tuple[Tuple[Row, str], ...]

    def __post_init__(self):
        for values, label in self.rows:
            self.schema.check_row(values)
            if label not in self.schema.label_domain:
                raise UsageError(f"label {label!r} is not in {self.schema.label_domain}")

    def __len__(self) -> int:
        return len(self.rows)


@dataclass(frozen=True)
class TreeParams:
    min_leaf: int = 2
    max_depth: int = 12
    prune: bool = False

    def __post_init__(self):
        if self.min_leaf < 1 or self.max_depth < 1:
            raise UsageError("min_leaf and max_depth must be at least 1")


@dataclass(frozen=True)
class Leaf:
    label: str
    counts: Tuple[int, ...]

    @property
    def weight(self) -> int:
        return sum(self.counts)


@dataclass(frozen=True)
class Node:
    attribute: int
    threshold: Optional[float]
    children: Tuple["TreeNode", ...]
    majority_branch: int
    counts: Tuple[int, ...]


TreeNode = Union[Leaf, Node]


@dataclass(frozen=True)
class SplitScore:
    attribute: int
    threshold: Optional[float]
    info_gain: float
    split_info: float
    ratio: float


@dataclass(frozen=True)
class DecisionTree:
    root: TreeNode
    schema: AttributeSchema
    trained_on: int

    def classify(self, row: Sequence[Value]) -> Tuple[str, float]:
        return classify(self, row)

    def depth(self) -> int:
        def _depth(node: TreeNode) -> int:
            if isinstance(node, Leaf):
                return 0
            return 1 + max(_depth(child) for child in node.children)
        return _depth(self.root)

    def leaf_count(self) -> int:
        def _leaves(node: TreeNode) -> int:
            if isinstance(node, Leaf):
                return 1
            return sum(_leaves(child) for child in node.children)
        return _leaves(self.root)

    def class_counts(self) -> Dict[str, int]:
        return dict(zip(self.schema.label_domain, self.root.counts))


def entropy(class_counts: Union[Mapping[str, float], Sequence[float]]) -> float:
    """Shannon entropy in bits."""
    counts = list(class_counts.values()) if isinstance(class_counts, Mapping) else list(class_counts)
    if any(c < 0 for c in counts):
        raise DomainError(f"counts must be non-negative: {counts}")
    total = sum(counts)
    if total <= 0:
        raise DomainError("entropy needs at least one positive count")
    result = 0.0
    for c in counts:
        if c > 0:
            p = c / total
            result -= p * math.log2(p)
    return max(result, 0.0)


def _class_counts(rows: Sequence[Tuple[Row, str]], domain: Tuple[str, ...]) -> Tuple[int, ...]:
    position = {label: i for i, label in enumerate(domain)}
    counts = [0] * len(domain)
    for _, label in rows:
        counts[position[label]] += 1
    return tuple(counts)


def _majority(counts: Sequence[int], domain: Tuple[str, ...]) -> str:
    best = max(range(len(domain)), key=lambda i: (counts[i], -i))
    return domain[best]


def _branch_index(attribute: Attribute, threshold: Optional[float], value: Value) -> int:
    if attribute.is_categorical:
        return attribute.values.index(value)
    return 0 if value <= threshold else 1


def _partition(
    schema: AttributeSchema,
    rows: Sequence[Tuple[Row, str]],
    attr_index: int,
    threshold: Optional[float],
) -> Tuple[List[List[Tuple[Row, str]]], int]:
    """Split rows by one test; rows missing the attribute join the largest branch."""
    attribute = schema.attributes[attr_index]
    width = len(attribute.values) if attribute.is_categorical else 2
    branches: List[List[Tuple[Row, str]]] = [[] for _ in range(width)]
    missing = []
    for row in rows:
        value = row[0][attr_index]
        if value is None:
            missing.append(row)
        else:
            branches[_branch_index(attribute, threshold, value)].append(row)
    majority_branch = max(range(width), key=lambda i: (len(branches[i]), -i))
    branches[majority_branch].extend(missing)
    return branches, majority_branch


def _check_split(schema: AttributeSchema, attr_index: int, threshold: Optional[float]) -> Attribute:
    if not 0 <= attr_index < len(schema.attributes):
        raise UsageError(f"attribute index {attr_index} out of range")
    attribute = schema.attributes[attr_index]
    if attribute.is_categorical and threshold is not None:
        raise UsageError(f"{attribute.name} is categorical; a threshold makes no sense")
    if not attribute.is_categorical and (threshold is None or not math.isfinite(threshold)):
        raise UsageError(f"{attribute.name} is continuous and needs a finite threshold")
    return attribute


def _score(schema: AttributeSchema, rows: Sequence[Tuple[Row, str]], attr_index: int, threshold: Optional[float]) -> SplitScore:
    domain = schema.label_domain
    parent = entropy(_class_counts(rows, domain))
    branches, _ = _partition(schema, rows, attr_index, threshold)
    total = len(rows)
    children = 0.0
    sizes = []
    for branch in branches:
        if branch:
            sizes.append(len(branch))
            children += len(branch) / total * entropy(_class_counts(branch, domain))
    gain = parent - children
    if abs(gain) < GAIN_EPS:
        gain = 0.0
    split_info = entropy(sizes)
    ratio = gain / split_info if split_info > 0 else 0.0
    return SplitScore(attr_index, threshold, gain, split_info, ratio)


def gain_ratio(data: Dataset, attr_index: int, threshold: Optional[float] = None) -> Tuple[float, float, float]:
    """(info_gain, split_info, gain_ratio) of one candidate test."""
    _check_split(data.schema, attr_index, threshold)
    if not data.rows:
        raise UsageError("gain_ratio needs a non-empty dataset")
    score = _score(data.schema, data.rows, attr_index, threshold)
    return score.info_gain, score.split_info, score.ratio


def candidate_thresholds(values: Iterable[Value]) -> List[float]:
    distinct = sorted({float(v) for v in values if v is not None})
    return [(a + b) / 2.0 for a, b in zip(distinct, distinct[1:])]


def candidate_splits(schema: AttributeSchema, rows: Sequence[Tuple[Row, str]]) -> List[Tuple[int, Optional[float]]]:
    candidates: List[Tuple[int, Optional[float]]] = []
    for i, attribute in enumerate(schema.attributes):
        if attribute.is_categorical:
            candidates.append((i, None))
        else:
            candidates.extend((i, t) for t in candidate_thresholds(row[0][i] for row in rows))
    return candidates


def _choose(schema: AttributeSchema, rows: Sequence[Tuple[Row, str]]) -> Optional[SplitScore]:
    scores = [_score(schema, rows, i, t) for i, t in candidate_splits(schema, rows)]
    positive = [s for s in scores if s.info_gain > GAIN_EPS]
    if not positive:
        return None
    mean_gain = sum(s.info_gain for s in positive) / len(positive)
    eligible = [s for s in positive if s.info_gain >= mean_gain - GAIN_EPS]
    best_ratio = max(s.ratio for s in eligible)
    # candidates are already ordered by attribute index, then threshold
    for s in eligible:
        if s.ratio >= best_ratio - RATIO_EPS:
            return s
    return None


def _first_separating(schema: AttributeSchema, rows: Sequence[Tuple[Row, str]]) -> Optional[SplitScore]:
    """Zero-gain impasse (XOR-like labels): the first test that splits the rows at all."""
    for i, t in candidate_splits(schema, rows):
        score = _score(schema, rows, i, t)
        if score.split_info > 0:
            return score
    return None


def choose_split(data: Dataset) -> Optional[Tuple[int, Optional[float]]]:
    if not data.rows:
        raise UsageError("choose_split needs a non-empty dataset")
    best = _choose(data.schema, data.rows)
    return (best.attribute, best.threshold) if best else None


def _grow(schema: AttributeSchema, rows: List[Tuple[Row, str]], depth: int, params: TreeParams) -> TreeNode:
    domain = schema.label_domain
    counts = _class_counts(rows, domain)
    label = _majority(counts, domain)
    pure = sum(1 for c in counts if c > 0) <= 1
    if pure or depth >= params.max_depth or len(rows) < params.min_leaf:
        return Leaf(label, counts)

    best = _choose(schema, rows) or _first_separating(schema, rows)
    if best is None:
        return Leaf(label, counts)

    branches, majority_branch = _partition(schema, rows, best.attribute, best.threshold)
    children = tuple(
        _grow(schema, branch, depth + 1, params) if branch else Leaf(label, counts)
        for branch in branches
    )
    return Node(best.attribute, best.threshold, children, majority_branch, counts)


def _route(schema: AttributeSchema, node: Node, value: Value) -> int:
    if value is None:
        return node.majority_branch
    return _branch_index(schema.attributes[node.attribute], node.threshold, value)


def _walk(schema: AttributeSchema, node: TreeNode, values: Sequence[Value]) -> Leaf:
    while isinstance(node, Node):
        node = node.children[_route(schema, node, values[node.attribute])]
    return node


def _prune(schema: AttributeSchema, node: TreeNode, rows: List[Tuple[Row, str]]) -> TreeNode:
    """Bottom-up subtree replacement on training error."""
    if isinstance(node, Leaf) or not rows:
        return node
    routed: List[List[Tuple[Row, str]]] = [[] for _ in node.children]
    for row in rows:
        routed[_route(schema, node, row[0][node.attribute])].append(row)
    pruned = replace(node, children=tuple(_prune(schema, child, part) for child, part in zip(node.children, routed)))

    subtree_errors = sum(1 for values, label in rows if _walk(schema, pruned, values).label != label)
    leaf_errors = len(rows) - max(node.counts)
    if leaf_errors <= subtree_errors:
        return Leaf(_majority(node.counts, schema.label_domain), node.counts)
    return pruned


def train(data: Dataset, params: TreeParams = TreeParams()) -> DecisionTree:
    if not data.rows:
        raise UsageError("cannot train on an empty dataset")
    rows = list(data.rows)
    root = _grow(data.schema, rows, 0, params)
    if params.prune:
        root = _prune(data.schema, root, rows)
    tree = DecisionTree(root=root, schema=data.schema, trained_on=len(rows))
    logger.debug("Trained tree on %d rows: depth %d, %d leaves", len(rows), tree.depth(), tree.leaf_count())
    return tree


def classify(tree: DecisionTree, row: Sequence[Value]) -> Tuple[str, float]:
    """Label and leaf purity for one row; missing attributes follow the majority branch."""
    tree.schema.check_row(row)
    leaf = _walk(tree.schema, tree.root, row)
    position = tree.schema.label_domain.index(leaf.label)
    return leaf.label, leaf.counts[position] / leaf.weight


def accuracy(tree: DecisionTree, rows: Sequence[Tuple[Row, str]]) -> float:
    if not rows:
        return 0.0
    hits = sum(1 for values, label in rows if classify(tree, values)[0] == label)
    return hits / len(rows)


def is_sufficiently_trained(store_size: int, holdout_accuracy: float, min_rows: int, min_accuracy: float) -> bool:
    if not 0 <= holdout_accuracy <= 1:
        raise DomainError(f"holdout accuracy must be in [0, 1], got {holdout_accuracy}")
    return store_size >= min_rows and holdout_accuracy >= min_accuracy


# Dataset files: "name:kind,...|label:CAT(v1;v2),..." then one CSV record per instance.

@dataclass(frozen=True)
class Column:
    name: str
    kind: AttributeKind
    values: Optional[Tuple[str, ...]] = None  # None on CAT means "infer from the rows"


def _parse_column(spec: str) -> Column:
    name, sep, kind = spec.strip().partition(":")
    name, kind = name.strip(), kind.strip()
    if not sep or not name:
        raise ConfigError(f"bad column spec {spec!r}")
    if kind == "NUM":
        return Column(name, AttributeKind.CONTINUOUS)
    if kind == "CAT":
        return Column(name, AttributeKind.CATEGORICAL)
    if kind.startswith("CAT(") and kind.endswith(")"):
        values = tuple(v.strip() for v in kind[4:-1].split(";") if v.strip())
        if not values:
            raise ConfigError(f"empty value list in {spec!r}")
        return Column(name, AttributeKind.CATEGORICAL, values)
    raise ConfigError(f"unknown kind {kind!r} in {spec!r}")


def parse_header(line: str) -> Tuple[List[Column], List[Column]]:
    attrs, sep, labels = line.strip().partition("|")
    if not sep:
        raise ConfigError("dataset header needs a '|' before the label columns")
    attr_columns = [_parse_column(spec) for spec in attrs.split(",") if spec.strip()]
    label_columns = [_parse_column(spec) for spec in _split_top(labels)]
    if not label_columns or any(c.kind is not AttributeKind.CATEGORICAL for c in label_columns):
        raise ConfigError("label columns must be categorical")
    return attr_columns, label_columns


def _split_top(text: str) -> List[str]:
    """Split on commas that sit outside CAT(...) lists."""
    parts, depth, current = [], 0, []
    for ch in text:
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
        if ch == "," and depth == 0:
            parts.append("".join(current))
            current = []
        else:
            current.append(ch)
    parts.append("".join(current))
    return [p for p in parts if p.strip()]


def _format_column(column: Column) -> str:
    if column.kind is AttributeKind.CONTINUOUS:
        return f"{column.name}:NUM"
    if column.values is None:
        return f"{column.name}:CAT"
    return f"{column.name}:CAT({';'.join(column.values)})"


def format_header(attr_columns: Sequence[Column], label_columns: Sequence[Column]) -> str:
    return ",".join(_format_column(c) for c in attr_columns) + "|" + ",".join(_format_column(c) for c in label_columns)


def parse_record(line: str) -> List[str]:
    return next(csv.reader([line]))


def format_record(fields: Sequence[str]) -> str:
    buffer = io.StringIO()
    csv.writer(buffer, lineterminator="").writerow(fields)
    return buffer.getvalue()


def format_value(value: Value) -> str:
    if value is None:
        return MISSING
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _convert(column: Column, raw: str) -> Value:
    raw = raw.strip()
    if raw == MISSING:
        return None
    if column.kind is AttributeKind.CONTINUOUS:
        try:
            value = float(raw)
        except ValueError as e:
            raise ConfigError(f"{column.name}: {raw!r} is not a number") from e
        if not math.isfinite(value):
            raise ConfigError(f"{column.name}: {raw!r} is not finite")
        return value
    return raw


def parse_row(text: str, schema: AttributeSchema) -> Row:
    """One CSV attribute row (no labels) typed against a schema."""
    fields = parse_record(text)
    if len(fields) != len(schema.attributes):
        raise UsageError(f"expected {len(schema.attributes)} values, got {len(fields)}")
    columns = [Column(a.name, a.kind, a.values or None) for a in schema.attributes]
    return tuple(_convert(c, f) for c, f in zip(columns, fields))


def read_table(lines: Iterable[str]) -> Tuple[List[Column], List[Column], List[Tuple[Row, Tuple[str, ...]]]]:
    """Header plus typed records; CAT values are not yet checked."""
    header = None
    records = []
    for number, raw in enumerate(lines, 1):
        line = raw.rstrip("\n")
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        if header is None:
            header = parse_header(line)
            continue
        attr_columns, label_columns = header
        fields = parse_record(line)
        if len(fields) != len(attr_columns) + len(label_columns):
            raise ConfigError(f"line {number}: expected {len(attr_columns) + len(label_columns)} fields, got {len(fields)}")
        values = tuple(_convert(c, f) for c, f in zip(attr_columns, fields))
        labels = tuple(f.strip() for f in fields[len(attr_columns):])
        if MISSING in labels:
            raise ConfigError(f"line {number}: labels cannot be missing")
        records.append((values, labels))
    if header is None:
        raise ConfigError("dataset has no header line")
    return header[0], header[1], records


def _close(column: Column, observed: Iterable[Value]) -> Tuple[str, ...]:
    if column.values is not None:
        return column.values
    values = tuple(sorted({v for v in observed if v is not None}))
    return values or (MISSING,)


def dataset_from_table(attr_columns, label_columns, records, label: Optional[str] = None) -> Dataset:
    names = [c.name for c in label_columns]
    if label is not None and label not in names:
        raise UsageError(f"no label column named {label}; have {names}")
    target = names.index(label) if label is not None else 0
    attributes = []
    for i, column in enumerate(attr_columns):
        if column.kind is AttributeKind.CATEGORICAL:
            values = _close(column, (values[i] for values, _ in records))
            attributes.append(Attribute(column.name, column.kind, values))
        else:
            attributes.append(Attribute(column.name, column.kind))
    label_column = label_columns[target]
    domain = _close(label_column, (labels[target] for _, labels in records))
    schema = AttributeSchema(tuple(attributes), domain)
    try:
        return Dataset(schema, tuple((values, labels[target]) for values, labels in records))
    except UsageError as e:
        raise ConfigError(f"dataset does not match its header: {e}") from e


def read_dataset(path: Union[str, Path], label: Optional[str] = None) -> Dataset:
    with open(path, "r", encoding="utf-8") as f:
        attr_columns, label_columns, records = read_table(f)
    dataset = dataset_from_table(attr_columns, label_columns, records, label)
    logger.info("Read %d rows from %s", len(dataset), path)
    return dataset


def write_dataset(path: Union[str, Path], data: Dataset, label_name: str = "label") -> None:
    attr_columns = [Column(a.name, a.kind, a.values or None) for a in data.schema.attributes]
    label_column = Column(label_name, AttributeKind.CATEGORICAL, data.schema.label_domain)
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(format_header(attr_columns, [label_column]) + "\n")
        for values, label in data.rows:
            f.write(format_record([format_value(v) for v in values] + [label]) + "\n")


def _schema_to_dict(schema: AttributeSchema) -> Dict:
    return {
        "attributes": [
            {"name": a.name, "kind": a.kind.value, "values": list(a.values)} for a in schema.attributes
        ],
        "labels": list(schema.label_domain),
    }


def _schema_from_dict(data: Dict) -> AttributeSchema:
    attributes = tuple(
        Attribute(a["name"], AttributeKind(a["kind"]), tuple(a.get("values", ()))) for a in data["attributes"]
    )
    return AttributeSchema(attributes, tuple(data["labels"]))


def _node_to_dict(node: TreeNode) -> Dict:
    if isinstance(node, Leaf):
        return {"leaf": node.label, "counts": list(node.counts)}
    return {
        "attribute": node.attribute,
        "threshold": node.threshold,
        "majority_branch": node.majority_branch,
        "counts": list(node.counts),
        "children": [_node_to_dict(child) for child in node.children],
    }


def _node_from_dict(data: Dict) -> TreeNode:
    if "leaf" in data:
        return Leaf(data["leaf"], tuple(data["counts"]))
    return Node(
        attribute=data["attribute"],
        threshold=data["threshold"],
        children=tuple(_node_from_dict(child) for child in data["children"]),
        majority_branch=data["majority_branch"],
        counts=tuple(data["counts"]),
    )


def tree_to_dict(tree: DecisionTree) -> Dict:
    return {"schema": _schema_to_dict(tree.schema), "trained_on": tree.trained_on, "root": _node_to_dict(tree.root)}


def tree_from_dict(data: Dict) -> DecisionTree:
    try:
        return DecisionTree(
            root=_node_from_dict(data["root"]),
            schema=_schema_from_dict(data["schema"]),
            trained_on=int(data["trained_on"]),
        )
    except (KeyError, TypeError, ValueError) as e:
        raise ConfigError(f"not a cosmos model: {e}") from e


def save_tree(tree: DecisionTree, path: Union[str, Path]) -> None:
    with open(path, "w", encoding="utf-8") as f:
        json.dump(tree_to_dict(tree), f, indent=2)


def load_tree(path: Union[str, Path]) -> DecisionTree:
    with open(path, "r", encoding="utf-8") as f:
        try:
            data = json.load(f)
        except json.JSONDecodeError as e:
            raise ConfigError(f"{path}: not valid JSON ({e})") from e
    return tree_from_dict(data)
