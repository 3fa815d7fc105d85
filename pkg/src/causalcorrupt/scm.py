"""Structural causal models over corruption operators.

A graph node owns one corruption operator and one mechanism expression per
operator parameter. Sampling walks nodes in topological order; each node
draws its full exogenous vector from a Generator seeded by an avalanche mix
of (global_seed, scene_id, node name), so traces are independent of
declaration order, sampling order, and worker scheduling.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from functools import lru_cache

from .distributions import Distribution, PointMass, Uniform
from .errors import (
    ArityError,
    CyclicGraphError,
    GraphStructureError,
    MechanismDomainError,
    UnknownNodeError,
    UnknownParamError,
)
from .ops import operator_info
from .rng import STREAM_TRACE, generator_for

logger = logging.getLogger(__name__)

RENDER_FROM_PARENT = "parent"
RENDER_FROM_CLEAN = "clean"

_CMP_OPS = ("<", "<=", ">", ">=", "==")


# ---------------------------------------------------------------------------
# mechanism expressions


@dataclass(frozen=True)
class Const:
    value: float


@dataclass(frozen=True)
class EpsRef:
    """Reference to a named exogenous draw of the owning node."""

    name: str


@dataclass(frozen=True)
class Draw:
    """Anonymous exogenous draw from a distribution.

    The label is the key under which the draw is recorded in the trace;
    it is assigned when the owning node is built.
    """

    dist: Distribution
    label: str


@dataclass(frozen=True)
class Affine:
    """coeff * term + offset, where term is an EpsRef or a Draw."""

    coeff: float
    term: EpsRef | Draw
    offset: float


@dataclass(frozen=True)
class ParentRef:
    node: str
    param: str


@dataclass(frozen=True)
class Comparison:
    operand: ParentRef | EpsRef
    op: str
    threshold: float

    def __post_init__(self) -> None:
        if self.op not in _CMP_OPS:
            raise MechanismDomainError(f"unknown comparison operator {self.op!r}")


@dataclass(frozen=True)
class Branch:
    """Two-way branch on an or-chain of comparisons; arms may nest."""

    conditions: tuple[Comparison, ...]
    then: "Expr"
    otherwise: "Expr"


Expr = Const | EpsRef | Draw | Affine | Branch


def _walk(expr: Expr):
    """Pre-order traversal of an expression tree."""
    yield expr
    if isinstance(expr, Affine):
        yield expr.term
    elif isinstance(expr, Branch):
        for cmp_ in expr.conditions:
            yield cmp_
        yield from _walk(expr.then)
        yield from _walk(expr.otherwise)


def referenced_parents(expr: Expr) -> list[ParentRef]:
    refs = []
    for item in _walk(expr):
        if isinstance(item, Comparison) and isinstance(item.operand, ParentRef):
            refs.append(item.operand)
    return refs


def _canonical_expr(expr: Expr) -> Expr:
    """Rewrite to the unique form the text grammar can express.

    Identity affine wrappers collapse to their atom and constant terms fold,
    so structurally equal mechanisms always serialize to equal text. Affine
    terms other than atoms have no written form and are rejected.
    """
    if isinstance(expr, Affine):
        term = _canonical_expr(expr.term)
        if isinstance(term, Const):
            return Const(expr.coeff * term.value + expr.offset)
        if isinstance(term, (Affine, Branch)):
            raise MechanismDomainError(
                "affine terms must be a draw, an eps reference, or a constant"
            )
        if expr.coeff == 1.0 and expr.offset == 0.0:
            return term
        return Affine(expr.coeff, term, expr.offset)
    if isinstance(expr, Branch):
        return Branch(expr.conditions, _canonical_expr(expr.then), _canonical_expr(expr.otherwise))
    return expr


def _eval_atom(atom: Expr, eps: dict[str, float]) -> float:
    if isinstance(atom, EpsRef):
        if atom.name not in eps:
            raise MechanismDomainError(f"exogenous value {atom.name!r} was not drawn")
        return eps[atom.name]
    if isinstance(atom, Draw):
        if atom.label not in eps:
            raise MechanismDomainError(f"exogenous value {atom.label!r} was not drawn")
        return eps[atom.label]
    raise MechanismDomainError(f"not an atom: {atom!r}")


def _compare(value: float, op: str, threshold: float) -> bool:
    if op == "<":
        return value < threshold
    if op == "<=":
        return value <= threshold
    if op == ">":
        return value > threshold
    if op == ">=":
        return value >= threshold
    return value == threshold


def eval_expr(expr: Expr, parent_values: dict[str, dict[str, float]], eps: dict[str, float]) -> float:
    """Evaluate a mechanism expression given parent values and exogenous draws."""
    if isinstance(expr, Const):
        return expr.value
    if isinstance(expr, (EpsRef, Draw)):
        return _eval_atom(expr, eps)
    if isinstance(expr, Affine):
        return expr.coeff * _eval_atom(expr.term, eps) + expr.offset
    if isinstance(expr, Branch):
        taken = False
        for cmp_ in expr.conditions:
            if isinstance(cmp_.operand, ParentRef):
                node_vals = parent_values.get(cmp_.operand.node)
                if node_vals is None or cmp_.operand.param not in node_vals:
                    raise MechanismDomainError(
                        f"parent value {cmp_.operand.node}.{cmp_.operand.param} unavailable"
                    )
                operand = node_vals[cmp_.operand.param]
            else:
                operand = _eval_atom(cmp_.operand, eps)
            if _compare(operand, cmp_.op, cmp_.threshold):
                taken = True
                break
        return eval_expr(expr.then if taken else expr.otherwise, parent_values, eps)
    raise MechanismDomainError(f"cannot evaluate {expr!r}")


# ---------------------------------------------------------------------------
# nodes and graphs


DEFAULT_EPS_DIST = Uniform(0.0, 1.0)


@dataclass(frozen=True)
class CorruptionNode:
    """One corruption stage: an operator plus a mechanism per parameter.

    eps_dists declares distributions for named exogenous variables; names
    referenced without a declaration default to Uniform(0, 1). render_from
    of None resolves at graph level (parent when the node has exactly one
    parent, clean otherwise).
    """

    name: str
    operator_id: str
    params: dict[str, Expr]
    eps_dists: dict[str, Distribution] = field(default_factory=dict)
    render_from: str | None = None

    def __post_init__(self) -> None:
        info = operator_info(self.operator_id)
        expected = list(info.param_names())
        got = list(self.params)
        if sorted(got) != sorted(expected):
            raise ArityError(
                f"node {self.name!r}: operator {self.operator_id!r} takes parameters "
                f"{expected}, got {got}"
            )
        if self.render_from not in (None, RENDER_FROM_PARENT, RENDER_FROM_CLEAN):
            raise GraphStructureError(
                f"node {self.name!r}: render_from must be parent or clean, got {self.render_from!r}"
            )
        # Freeze parameter order to the operator's declaration order,
        # canonicalize each mechanism, and drop eps declarations that restate
        # the default: identity rewrites that make structural equality and
        # text serialization canonical.
        ordered = {name: _canonical_expr(self.params[name]) for name in expected}
        object.__setattr__(self, "params", ordered)
        eps = {k: d for k, d in self.eps_dists.items() if d != DEFAULT_EPS_DIST}
        object.__setattr__(self, "eps_dists", eps)

    def exogenous_plan(self) -> list[tuple[str, Distribution]]:
        """Exogenous draw order: first reference order, then unused declarations.

        The plan is a pure function of the node definition, which keeps the
        draw sequence stable no matter which branches later evaluation takes.
        """
        plan: list[tuple[str, Distribution]] = []
        seen: set[str] = set()
        for expr in self.params.values():
            for item in _walk(expr):
                key = None
                if isinstance(item, EpsRef):
                    key, dist = item.name, self.eps_dists.get(item.name, DEFAULT_EPS_DIST)
                elif isinstance(item, Draw):
                    key, dist = item.label, item.dist
                elif isinstance(item, Comparison) and isinstance(item.operand, EpsRef):
                    key = item.operand.name
                    dist = self.eps_dists.get(key, DEFAULT_EPS_DIST)
                if key is not None and key not in seen:
                    seen.add(key)
                    plan.append((key, dist))
        for name, dist in self.eps_dists.items():
            if name not in seen:
                seen.add(name)
                plan.append((name, dist))
        return plan

    def referenced_parent_params(self) -> list[ParentRef]:
        refs = []
        for expr in self.params.values():
            refs.extend(referenced_parents(expr))
        return refs


@dataclass(frozen=True)
class CausalGraph:
    """Immutable DAG of corruption nodes.

    Structural rules are enforced at construction: unique names, known edge
    endpoints, acyclicity, mechanisms referencing declared parents only, and
    render_from = parent only on single-parent nodes.
    """

    nodes: tuple[CorruptionNode, ...]
    edges: tuple[tuple[str, str], ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "nodes", tuple(self.nodes))
        object.__setattr__(self, "edges", tuple((str(a), str(b)) for a, b in self.edges))
        names = [n.name for n in self.nodes]
        dupes = {n for n in names if names.count(n) > 1}
        if dupes:
            raise GraphStructureError(f"duplicate node names: {sorted(dupes)}")
        known = set(names)
        for a, b in self.edges:
            for end in (a, b):
                if end not in known:
                    raise UnknownNodeError(f"edge endpoint {end!r} is not a node")
            if a == b:
                raise CyclicGraphError([a])
        if len(set(self.edges)) != len(self.edges):
            raise GraphStructureError("duplicate edges")
        # Derived lookups are cached at construction; they are pure functions
        # of (nodes, edges), so equality and pickling stay field-based.
        object.__setattr__(self, "_node_map", {n.name: n for n in self.nodes})
        parents_map: dict[str, list[str]] = {n: [] for n in names}
        children_map: dict[str, list[str]] = {n: [] for n in names}
        for a, b in self.edges:
            parents_map[b].append(a)
            children_map[a].append(b)
        object.__setattr__(self, "_parents_map", parents_map)
        object.__setattr__(self, "_children_map", children_map)
        object.__setattr__(self, "_topo", _kahn_order(self))  # raises on cycles
        object.__setattr__(
            self, "_plans", {n.name: tuple(n.exogenous_plan()) for n in self.nodes}
        )
        for node in self.nodes:
            parents = set(self.parents(node.name))
            for ref in node.referenced_parent_params():
                if ref.node not in known:
                    raise UnknownNodeError(f"node {node.name!r} references unknown node {ref.node!r}")
                if ref.node not in parents:
                    raise GraphStructureError(
                        f"node {node.name!r} references {ref.node!r} which is not a parent"
                    )
                if ref.param not in self.node(ref.node).params:
                    raise UnknownParamError(
                        f"node {node.name!r} references unknown parameter "
                        f"{ref.node}.{ref.param}"
                    )
            if node.render_from == RENDER_FROM_PARENT and len(parents) != 1:
                raise GraphStructureError(
                    f"node {node.name!r}: render_from = parent requires exactly one parent, "
                    f"has {len(parents)}"
                )

    def node(self, name: str) -> CorruptionNode:
        try:
            return self._node_map[name]
        except KeyError:
            raise UnknownNodeError(f"unknown node {name!r}") from None

    def parents(self, name: str) -> list[str]:
        self.node(name)
        return list(self._parents_map[name])

    def children(self, name: str) -> list[str]:
        self.node(name)
        return list(self._children_map[name])

    def render_source(self, name: str) -> str:
        """Resolved image source for a node: a parent's render or the clean scene."""
        node = self.node(name)
        if node.render_from is not None:
            return node.render_from
        return RENDER_FROM_PARENT if len(self.parents(name)) == 1 else RENDER_FROM_CLEAN

    def descendants(self, name: str) -> set[str]:
        out: set[str] = set()
        frontier = [name]
        while frontier:
            cur = frontier.pop()
            for child in self.children(cur):
                if child not in out:
                    out.add(child)
                    frontier.append(child)
        return out


def _kahn_order(graph: CausalGraph) -> tuple[str, ...]:
    names = [n.name for n in graph.nodes]
    indegree = {n: 0 for n in names}
    for _, b in graph.edges:
        indegree[b] += 1
    order: list[str] = []
    remaining = set(names)
    while remaining:
        ready = [n for n in names if n in remaining and indegree[n] == 0]
        if not ready:
            raise CyclicGraphError(_find_cycle(names, graph.edges, remaining))
        head = ready[0]
        remaining.discard(head)
        order.append(head)
        for a, b in graph.edges:
            if a == head:
                indegree[b] -= 1
    return tuple(order)


def topological_order(graph: CausalGraph) -> list[str]:
    """Topological order with ties broken by declaration order.

    Raises CyclicGraphError carrying one offending cycle.
    """
    cached = getattr(graph, "_topo", None)
    if cached is None:
        return list(_kahn_order(graph))
    return list(cached)


def _find_cycle(names: list[str], edges: tuple[tuple[str, str], ...], remaining: set[str]) -> list[str]:
    succ: dict[str, list[str]] = {n: [] for n in names}
    for a, b in edges:
        if a in remaining and b in remaining:
            succ[a].append(b)
    start = next(n for n in names if n in remaining)
    seen: dict[str, int] = {}
    path: list[str] = []
    cur = start
    while cur not in seen:
        seen[cur] = len(path)
        path.append(cur)
        cur = succ[cur][0]
    return path[seen[cur] :]


# ---------------------------------------------------------------------------
# sampling


@lru_cache(maxsize=None)
def _operator_bounds(op_id: str) -> dict[str, tuple[float, float]]:
    info = operator_info(op_id)
    return {p.name: (p.lo, p.hi) for p in info.params}


@dataclass(frozen=True)
class SampledTrace:
    """One joint assignment of every node's parameters and exogenous draws."""

    scene_id: int
    seed: int
    values: dict[str, dict[str, float]]
    exogenous: dict[str, dict[str, float]]


def sample_trace(graph: CausalGraph, scene_id: int, global_seed: int) -> SampledTrace:
    """Sample every node's parameters in topological order.

    Per-node draws come from a Generator keyed by (global_seed, scene_id,
    node name), so a node's exogenous vector does not depend on any other
    node. Sampled values are clamped to the operator's declared parameter
    domains.
    """
    values: dict[str, dict[str, float]] = {}
    exogenous: dict[str, dict[str, float]] = {}
    plans = graph._plans
    for name in graph._topo:
        node = graph._node_map[name]
        rng = generator_for(global_seed, scene_id, name, STREAM_TRACE)
        eps = {key: dist.sample(rng) for key, dist in plans[name]}
        exogenous[name] = eps
        node_values: dict[str, float] = {}
        bounds = _operator_bounds(node.operator_id)
        for param, expr in node.params.items():
            raw = eval_expr(expr, values, eps)
            lo, hi = bounds[param]
            clamped = min(max(raw, lo), hi)
            if clamped != raw:
                logger.debug("trace clamp %s.%s: %r -> %r", name, param, raw, clamped)
            node_values[param] = clamped
        values[name] = node_values
    return SampledTrace(scene_id=scene_id, seed=global_seed, values=values, exogenous=exogenous)


# ---------------------------------------------------------------------------
# interventions


HARD = "hard"
SOFT = "soft"


@dataclass(frozen=True)
class Intervention:
    """do-operation on one node parameter.

    Hard interventions pin the parameter to a constant; soft ones replace
    its mechanism with a parent-independent distribution draw.
    """

    node: str
    param: str
    value: float | None = None
    dist: Distribution | None = None

    def __post_init__(self) -> None:
        if (self.value is None) == (self.dist is None):
            raise GraphStructureError("intervention needs exactly one of value or dist")

    @property
    def kind(self) -> str:
        return HARD if self.value is not None else SOFT

    @classmethod
    def hard(cls, node: str, param: str, value: float) -> "Intervention":
        return cls(node=node, param=param, value=float(value))

    @classmethod
    def soft(cls, node: str, param: str, dist: Distribution) -> "Intervention":
        return cls(node=node, param=param, dist=dist)


def apply_intervention(graph: CausalGraph, intervention: Intervention) -> CausalGraph:
    """Return a new graph with the target mechanism replaced.

    Incoming edges are kept (descendant mechanisms stay untouched and read
    the intervened value); only the target parameter's mechanism changes.
    """
    target = graph.node(intervention.node)
    if intervention.param not in target.params:
        raise UnknownParamError(
            f"node {intervention.node!r} has no parameter {intervention.param!r}"
        )
    if intervention.kind == HARD:
        new_expr: Expr = Const(float(intervention.value))
    else:
        new_expr = Draw(intervention.dist, label=f"{intervention.param}.do")
    new_params = dict(target.params)
    new_params[intervention.param] = new_expr
    new_node = replace(target, params=new_params)
    nodes = tuple(new_node if n.name == target.name else n for n in graph.nodes)
    return CausalGraph(nodes=nodes, edges=graph.edges)


def point_mass_graph(graph: CausalGraph, node: str, param: str, value: float) -> CausalGraph:
    """Mutilated graph where the parameter's mechanism is a point mass draw.

    Used to check intervention consistency: hard do(param = value) must give
    descendants the same distribution as this graph.
    """
    return apply_intervention(graph, Intervention.soft(node, param, PointMass(float(value))))
