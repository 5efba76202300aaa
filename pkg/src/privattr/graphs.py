"""Social graph, behavior matrix, and label containers plus file I/O.

File formats (UTF-8 text, lines starting with '#' are comments):

* graph file: one edge per line ``"u v"`` with whitespace-separated decimal
  node ids.  An optional ``"# nodes=N"`` header declares isolated nodes.
  Without the header, node ids must be dense (every id in 0..max appears).
* behavior file: lines ``"user object value"`` with value in [0, 1].
  Optional ``"# users=U objects=O"`` header declares matrix dimensions.
* label file: lines ``"user label"``.  Labels are "+1"/"-1" (binary mode)
  or unsigned integers 1..m (multiclass mode).  Optional ``"# classes=m"``
  header pins the class count.

All randomness flows through numpy's PCG64 generator
(``np.random.default_rng(seed)``); branch decisions during synthetic
generation compare 53-bit integers so generation is bitwise reproducible
across platforms.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy import sparse

from .errors import ValidationError

# Integer coin flips: an event of probability p fires when a uniform draw
# from [0, 2^53) falls below round(p * 2^53).
_COIN_BITS = 53
_COIN_RANGE = 1 << _COIN_BITS


def _coin_threshold(p: float) -> int:
    return int(round(p * _COIN_RANGE))


@dataclass(frozen=True, eq=False)
class SocialGraph:
    """Undirected simple graph stored as a sparse symmetric 0/1 matrix.

    ``edges`` is a sorted tuple of (u, v) pairs with u < v; ``adjacency``
    is the |V| x |V| CSR matrix with both orientations; ``degrees`` are the
    row sums.  Instances are immutable after construction and safe to share
    across threads.
    """

    node_count: int
    edges: tuple
    adjacency: sparse.csr_matrix
    degrees: np.ndarray

    @classmethod
    def from_edges(cls, node_count: int, edges) -> "SocialGraph":
        if node_count < 1:
            raise ValidationError("node_count must be a positive integer")
        canonical = []
        seen = set()
        for u, v in edges:
            u, v = int(u), int(v)
            if u == v:
                raise ValidationError(f"self-loop on node {u}")
            if not (0 <= u < node_count and 0 <= v < node_count):
                raise ValidationError(f"edge ({u}, {v}) references a node id outside 0..{node_count - 1}")
            key = (min(u, v), max(u, v))
            if key in seen:
                raise ValidationError(f"duplicate edge ({key[0]}, {key[1]})")
            seen.add(key)
            canonical.append(key)
        canonical.sort()
        if canonical:
            arr = np.asarray(canonical, dtype=np.int64)
            rows = np.concatenate([arr[:, 0], arr[:, 1]])
            cols = np.concatenate([arr[:, 1], arr[:, 0]])
            data = np.ones(rows.shape[0], dtype=np.float64)
        else:
            rows = cols = np.zeros(0, dtype=np.int64)
            data = np.zeros(0, dtype=np.float64)
        adjacency = sparse.csr_matrix((data, (rows, cols)), shape=(node_count, node_count))
        degrees = np.asarray(adjacency.sum(axis=1)).ravel().astype(np.int64)
        return cls(node_count, tuple(canonical), adjacency, degrees)

    @property
    def edge_count(self) -> int:
        return len(self.edges)

    @property
    def max_degree(self) -> int:
        return int(self.degrees.max()) if self.node_count else 0

    @property
    def avg_degree(self) -> float:
        return float(self.degrees.mean()) if self.node_count else 0.0

    def neighbors(self, u: int) -> np.ndarray:
        return self.adjacency.indices[self.adjacency.indptr[u]:self.adjacency.indptr[u + 1]]


@dataclass(frozen=True, eq=False)
class BehaviorMatrix:
    """Sparse user x object matrix with values in [0, 1].

    ``triplets`` holds the stored (user, object, value) entries sorted
    lexicographically; the CSR ``matrix`` mirrors them.  A user "has
    behaviors" when at least one triplet is stored for it, including
    explicit zero values.
    """

    user_count: int
    object_count: int
    triplets: tuple
    matrix: sparse.csr_matrix

    @classmethod
    def from_triplets(cls, user_count: int, object_count: int, triplets) -> "BehaviorMatrix":
        if user_count < 1 or object_count < 1:
            raise ValidationError("user_count and object_count must be positive")
        seen = set()
        canonical = []
        for u, o, val in triplets:
            u, o, val = int(u), int(o), float(val)
            if not (0 <= u < user_count):
                raise ValidationError(f"user id {u} outside 0..{user_count - 1}")
            if not (0 <= o < object_count):
                raise ValidationError(f"object id {o} outside 0..{object_count - 1}")
            if not (0.0 <= val <= 1.0):
                raise ValidationError(f"value {val} out of range [0, 1] for entry ({u}, {o})")
            if (u, o) in seen:
                raise ValidationError(f"duplicate entry for (user={u}, object={o})")
            seen.add((u, o))
            canonical.append((u, o, val))
        canonical.sort()
        if canonical:
            arr_u = np.asarray([t[0] for t in canonical], dtype=np.int64)
            arr_o = np.asarray([t[1] for t in canonical], dtype=np.int64)
            arr_v = np.asarray([t[2] for t in canonical], dtype=np.float64)
        else:
            arr_u = arr_o = np.zeros(0, dtype=np.int64)
            arr_v = np.zeros(0, dtype=np.float64)
        matrix = sparse.csr_matrix((arr_v, (arr_u, arr_o)), shape=(user_count, object_count))
        return cls(user_count, object_count, tuple(canonical), matrix)

    def row(self, u: int) -> np.ndarray:
        """Dense view of user u's behavior vector."""
        if not (0 <= u < self.user_count):
            raise ValidationError(f"unknown user id {u}")
        return np.asarray(self.matrix.getrow(u).todense()).ravel()

    def has_entries(self, u: int) -> bool:
        if not (0 <= u < self.user_count):
            raise ValidationError(f"unknown user id {u}")
        return bool(self._entry_mask[u])

    @cached_property
    def _entry_mask(self) -> np.ndarray:
        mask = np.zeros(self.user_count, dtype=bool)
        for u, _, _ in self.triplets:
            mask[u] = True
        return mask

    @property
    def users_with_entries(self) -> np.ndarray:
        return np.flatnonzero(self._entry_mask)

    def dense(self) -> np.ndarray:
        return self.matrix.toarray()


@dataclass(frozen=True)
class LabelSet:
    """Partial map from user ids to labels.

    Binary mode stores +1/-1 (attribute present / absent); multiclass mode
    stores values in 1..class_count.
    """

    labels: dict
    binary: bool
    class_count: int

    @classmethod
    def from_dict(cls, labels: dict, binary: bool, class_count: int | None = None) -> "LabelSet":
        if binary:
            for u, lab in labels.items():
                if lab not in (-1, 1):
                    raise ValidationError(f"binary label for user {u} must be +1 or -1, got {lab}")
            return cls(dict(labels), True, 2)
        if class_count is None:
            if not labels:
                raise ValidationError("empty multiclass label set needs an explicit class_count")
            class_count = max(labels.values())
        if class_count < 2:
            raise ValidationError("multiclass label sets need class_count >= 2")
        for u, lab in labels.items():
            if not (1 <= lab <= class_count):
                raise ValidationError(f"label {lab} for user {u} outside 1..{class_count}")
        return cls(dict(labels), False, int(class_count))

    def __len__(self) -> int:
        return len(self.labels)

    @property
    def users(self) -> np.ndarray:
        return np.asarray(sorted(self.labels), dtype=np.int64)

    def vector(self, users) -> np.ndarray:
        """Labels for the given users, in order."""
        out = np.empty(len(users), dtype=np.int64)
        for k, u in enumerate(users):
            if u not in self.labels:
                raise ValidationError(f"user {u} has no label")
            out[k] = self.labels[u]
        return out

    def restrict(self, users) -> "LabelSet":
        keep = {int(u): self.labels[int(u)] for u in users if int(u) in self.labels}
        return LabelSet(keep, self.binary, self.class_count)


# ---------------------------------------------------------------------------
# File I/O


def _data_lines(path):
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            yield lineno, line


def _header_value(line: str, key: str):
    # matches comments of the form "# key=value"
    body = line[1:].strip()
    if body.startswith(key + "="):
        return body[len(key) + 1:].strip()
    return None


def load_graph(path) -> SocialGraph:
    """Read an edge-list file into a SocialGraph.

    Rejects self-loops, duplicate edges, ids beyond a declared node count,
    and (without a header) non-dense node ids.
    """
    declared = None
    edges = []
    max_id = -1
    seen = set()
    touched = set()
    for lineno, line in _data_lines(path):
        if line.startswith("#"):
            val = _header_value(line, "nodes")
            if val is not None:
                try:
                    declared = int(val)
                except ValueError:
                    raise ValidationError(f"{path}: bad node count {val!r} at line {lineno}") from None
                if declared < 1:
                    raise ValidationError(f"{path}: node count must be positive at line {lineno}")
            continue
        parts = line.split()
        if len(parts) != 2:
            raise ValidationError(f"{path}: expected 'u v' at line {lineno}, got {line!r}")
        try:
            u, v = int(parts[0]), int(parts[1])
        except ValueError:
            raise ValidationError(f"{path}: non-integer node id at line {lineno}") from None
        if u < 0 or v < 0:
            raise ValidationError(f"{path}: negative node id at line {lineno}")
        if u == v:
            raise ValidationError(f"{path}: self-loop at line {lineno}")
        key = (min(u, v), max(u, v))
        if key in seen:
            raise ValidationError(f"{path}: duplicate edge at line {lineno}")
        seen.add(key)
        edges.append(key)
        touched.update(key)
        max_id = max(max_id, u, v)

    if declared is not None:
        if max_id >= declared:
            raise ValidationError(f"{path}: node id {max_id} exceeds declared nodes={declared}")
        node_count = declared
    else:
        if max_id < 0:
            raise ValidationError(f"{path}: empty graph file without a '# nodes=N' header")
        node_count = max_id + 1
        missing = set(range(node_count)) - touched
        if missing:
            raise ValidationError(
                f"{path}: node ids are not dense (missing id {min(missing)}); "
                "declare isolated nodes with a '# nodes=N' header"
            )
    return SocialGraph.from_edges(node_count, edges)


def save_graph(graph: SocialGraph, path) -> None:
    """Write the canonical edge-list form (header plus sorted edges)."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# nodes={graph.node_count}\n")
        for u, v in graph.edges:
            fh.write(f"{u} {v}\n")


def load_behaviors(path) -> BehaviorMatrix:
    declared_u = declared_o = None
    triplets = []
    seen = set()
    max_u = max_o = -1
    for lineno, line in _data_lines(path):
        if line.startswith("#"):
            val = _header_value(line, "users")
            if val is not None:
                # header form "# users=U objects=O"
                pieces = line[1:].split()
                for piece in pieces:
                    if piece.startswith("users="):
                        declared_u = int(piece[6:])
                    elif piece.startswith("objects="):
                        declared_o = int(piece[8:])
            continue
        parts = line.split()
        if len(parts) != 3:
            raise ValidationError(f"{path}: expected 'user object value' at line {lineno}")
        try:
            u, o, val = int(parts[0]), int(parts[1]), float(parts[2])
        except ValueError:
            raise ValidationError(f"{path}: unparseable entry at line {lineno}") from None
        if not (0.0 <= val <= 1.0):
            raise ValidationError(f"{path}: value out of range at line {lineno}")
        if (u, o) in seen:
            raise ValidationError(f"{path}: duplicate (user, object) entry at line {lineno}")
        seen.add((u, o))
        triplets.append((u, o, val))
        max_u, max_o = max(max_u, u), max(max_o, o)

    user_count = declared_u if declared_u is not None else max_u + 1
    object_count = declared_o if declared_o is not None else max_o + 1
    if user_count < 1 or object_count < 1:
        raise ValidationError(f"{path}: cannot determine matrix dimensions")
    return BehaviorMatrix.from_triplets(user_count, object_count, triplets)


def save_behaviors(behaviors: BehaviorMatrix, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# users={behaviors.user_count} objects={behaviors.object_count}\n")
        for u, o, val in behaviors.triplets:
            fh.write(f"{u} {o} {val!r}\n")


def load_labels(path) -> LabelSet:
    declared_m = None
    labels = {}
    signed = None
    for lineno, line in _data_lines(path):
        if line.startswith("#"):
            val = _header_value(line, "classes")
            if val is not None:
                declared_m = int(val)
            continue
        parts = line.split()
        if len(parts) != 2:
            raise ValidationError(f"{path}: expected 'user label' at line {lineno}")
        try:
            u = int(parts[0])
        except ValueError:
            raise ValidationError(f"{path}: non-integer user id at line {lineno}") from None
        tok = parts[1]
        tok_signed = tok.startswith(("+", "-"))
        if signed is None:
            signed = tok_signed
        elif signed != tok_signed:
            raise ValidationError(f"{path}: mixed binary and multiclass labels at line {lineno}")
        try:
            lab = int(tok)
        except ValueError:
            raise ValidationError(f"{path}: unparseable label at line {lineno}") from None
        if signed and lab not in (-1, 1):
            raise ValidationError(f"{path}: binary labels must be +1 or -1 at line {lineno}")
        if not signed and lab < 1:
            raise ValidationError(f"{path}: multiclass labels start at 1, got {lab} at line {lineno}")
        if u in labels:
            raise ValidationError(f"{path}: duplicate label for user {u} at line {lineno}")
        labels[u] = lab
    if not labels:
        raise ValidationError(f"{path}: no labels found")
    if signed:
        return LabelSet.from_dict(labels, binary=True)
    return LabelSet.from_dict(labels, binary=False, class_count=declared_m)


def save_labels(labels: LabelSet, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        if not labels.binary:
            fh.write(f"# classes={labels.class_count}\n")
        for u in sorted(labels.labels):
            lab = labels.labels[u]
            if labels.binary:
                fh.write(f"{u} {'+1' if lab == 1 else '-1'}\n")
            else:
                fh.write(f"{u} {lab}\n")


# ---------------------------------------------------------------------------
# Synthetic worlds


@dataclass(frozen=True)
class SynthConfig:
    """Parameters for the planted-partition synthetic world.

    The graph places an edge inside a class with probability ``intra_p``
    and across classes with probability ``inter_p`` (homophily requires
    intra_p >= inter_p).  Behaviors use one object block per class plus a
    shared block; a user rates its own class block with probability
    ``signal_strength`` and foreign blocks with a tenth of that.
    """

    node_count: int
    intra_p: float
    inter_p: float
    proportions: tuple
    objects_per_class: int = 6
    signal_strength: float = 0.8
    seed: int = 0

    def __post_init__(self):
        if self.node_count < 1:
            raise ValidationError("node_count must be positive")
        for name, p in (("intra_p", self.intra_p), ("inter_p", self.inter_p),
                        ("signal_strength", self.signal_strength)):
            if not (0.0 <= p <= 1.0):
                raise ValidationError(f"{name} must lie in [0, 1]")
        if self.intra_p < self.inter_p:
            raise ValidationError("homophily requires intra_p >= inter_p")
        props = tuple(float(p) for p in self.proportions)
        if len(props) < 2:
            raise ValidationError("at least two classes are required")
        if any(p < 0 for p in props):
            raise ValidationError("class proportions must be nonnegative")
        if abs(sum(props) - 1.0) > 1e-9:
            raise ValidationError("class proportions must sum to 1")
        object.__setattr__(self, "proportions", props)
        if self.objects_per_class < 1:
            raise ValidationError("objects_per_class must be positive")

    @property
    def class_count(self) -> int:
        return len(self.proportions)

    @property
    def object_count(self) -> int:
        # one signal block per class plus one shared block
        return (self.class_count + 1) * self.objects_per_class


def _apportion(node_count: int, proportions) -> np.ndarray:
    """Largest-remainder class sizes; deterministic, sums to node_count."""
    raw = np.asarray(proportions) * node_count
    base = np.floor(raw).astype(np.int64)
    short = node_count - int(base.sum())
    order = np.argsort(-(raw - base), kind="stable")
    for k in range(short):
        base[order[k]] += 1
    return base


def gen_synthetic(cfg: SynthConfig):
    """Generate a homophilic world: (SocialGraph, BehaviorMatrix, LabelSet).

    Deterministic for a fixed seed: class assignment is contiguous by node
    id, edge and rating coin flips compare 53-bit integers against fixed
    thresholds, and values are drawn afterwards from the same PCG64 stream.
    Two-class configs produce binary +1/-1 labels (class 1 maps to +1);
    otherwise labels are multiclass 1..m.
    """
    rng = np.random.default_rng(cfg.seed)
    n = cfg.node_count
    m = cfg.class_count
    sizes = _apportion(n, cfg.proportions)
    classes = np.repeat(np.arange(m, dtype=np.int64), sizes)

    thr_intra = _coin_threshold(cfg.intra_p)
    thr_inter = _coin_threshold(cfg.inter_p)
    edges = []
    for u in range(n - 1):
        targets = np.arange(u + 1, n)
        thr = np.where(classes[targets] == classes[u], thr_intra, thr_inter)
        draws = rng.integers(0, _COIN_RANGE, size=targets.shape[0], dtype=np.int64)
        for v in targets[draws < thr]:
            edges.append((u, int(v)))
    graph = SocialGraph.from_edges(n, edges)

    k = cfg.objects_per_class
    thr_own = _coin_threshold(cfg.signal_strength)
    thr_foreign = _coin_threshold(cfg.signal_strength * 0.1)
    thr_shared = _coin_threshold(0.3)
    triplets = []
    for u in range(n):
        c = int(classes[u])
        for block in range(m + 1):
            if block == m:
                thr = thr_shared
            elif block == c:
                thr = thr_own
            else:
                thr = thr_foreign
            draws = rng.integers(0, _COIN_RANGE, size=k, dtype=np.int64)
            chosen = np.flatnonzero(draws < thr)
            if chosen.shape[0] == 0:
                continue
            vals = rng.random(chosen.shape[0])
            if block == m:
                pass  # shared block: uniform on [0, 1]
            elif block == c:
                vals = 0.6 + 0.4 * vals
            else:
                vals = 0.4 * vals
            for j, val in zip(chosen, vals):
                triplets.append((u, block * k + int(j), float(val)))
    behaviors = BehaviorMatrix.from_triplets(n, cfg.object_count, triplets)

    if m == 2:
        labels = LabelSet.from_dict(
            {u: (1 if classes[u] == 0 else -1) for u in range(n)}, binary=True)
    else:
        labels = LabelSet.from_dict(
            {u: int(classes[u]) + 1 for u in range(n)}, binary=False, class_count=m)
    return graph, behaviors, labels


# ---------------------------------------------------------------------------
# Small deterministic graph builders (tests, demos, benchmarks)


def cycle_graph(n: int) -> SocialGraph:
    if n < 3:
        raise ValidationError("a cycle needs at least 3 nodes")
    return SocialGraph.from_edges(n, [(i, (i + 1) % n) for i in range(n)])


def path_graph(n: int) -> SocialGraph:
    if n < 2:
        raise ValidationError("a path needs at least 2 nodes")
    return SocialGraph.from_edges(n, [(i, i + 1) for i in range(n - 1)])


def star_graph(leaves: int) -> SocialGraph:
    if leaves < 1:
        raise ValidationError("a star needs at least 1 leaf")
    return SocialGraph.from_edges(leaves + 1, [(0, i) for i in range(1, leaves + 1)])


def complete_graph(n: int) -> SocialGraph:
    if n < 2:
        raise ValidationError("a complete graph needs at least 2 nodes")
    return SocialGraph.from_edges(n, [(i, j) for i in range(n) for j in range(i + 1, n)])


def ring_lattice(n: int, k: int) -> SocialGraph:
    """Ring of n nodes, each linked to its k nearest neighbors per side.

    2k-regular with exactly n*k edges; handy for scaling benchmarks.
    """
    if n < 2 * k + 1:
        raise ValidationError("ring_lattice needs n >= 2k + 1")
    edges = [(i, (i + j) % n) for i in range(n) for j in range(1, k + 1)]
    return SocialGraph.from_edges(n, edges)
