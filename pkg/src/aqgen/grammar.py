"""Graph-level operation grammar for building AQGs step by step.

An AQG is produced by one ``AddVertex`` followed by iterations of
``AddVertex`` / ``SelectVertex`` / ``AddEdge``; the process stops when
``AddVertex`` receives the ``End`` label.  Only the last argument of each
operation is recorded, so an action sequence looks like::

    ["Var", "Var", 0, "Rel", "Ent", 1, "Rel", "End"]
"""

from __future__ import annotations

import random
from collections import deque
from dataclasses import dataclass, replace
from enum import Enum
from typing import Sequence, Union

from .graph import AQG, AQGEdge, EdgeClass, VertexClass

END = "End"
VERTEX_LABELS: tuple[str, ...] = ("Ent", "Type", "Num", "Var", END)
EDGE_LABELS: tuple[str, ...] = ("Rel", "Ord", "Cmp", "Cnt", "Isa")

Action = Union[str, int]


class OperatorKind(str, Enum):
    ADD_VERTEX = "AddVertex"
    SELECT_VERTEX = "SelectVertex"
    ADD_EDGE = "AddEdge"


class GrammarError(ValueError):
    pass


_CYCLE = (OperatorKind.ADD_VERTEX, OperatorKind.SELECT_VERTEX, OperatorKind.ADD_EDGE)


def operator_at(t: int) -> OperatorKind:
    """Operator applied at (1-indexed) step ``t``."""
    if t < 1:
        raise ValueError("steps start at 1")
    if t == 1:
        return OperatorKind.ADD_VERTEX
    return _CYCLE[(t - 2) % 3]


@dataclass(frozen=True)
class GenerationState:
    vertices: tuple[VertexClass, ...] = ()
    edges: tuple[AQGEdge, ...] = ()
    pending_vertex: int | None = None
    pending_selection: int | None = None
    step: int = 1
    finished: bool = False

    @property
    def operator(self) -> OperatorKind:
        return operator_at(self.step)

    def graph(self) -> AQG:
        """Current graph g^t (pending vertex included, answer slot = first vertex)."""
        return AQG(self.vertices, self.edges, 0)

    def completed(self) -> AQG:
        """Graph without an unconnected pending vertex."""
        if self.pending_vertex is None:
            return self.graph()
        return AQG(self.vertices[: self.pending_vertex], self.edges, 0)


def apply(state: GenerationState, action: Action) -> GenerationState:
    if state.finished:
        raise GrammarError("generation already ended")
    op = state.operator
    nxt = state.step + 1
    if op is OperatorKind.ADD_VERTEX:
        if isinstance(action, int) or action not in VERTEX_LABELS:
            raise GrammarError(f"step {state.step}: AddVertex expects a vertex label, got {action!r}")
        if action == END:
            return replace(state, step=nxt, finished=True)
        new_id = len(state.vertices)
        vertices = state.vertices + (VertexClass(action),)
        if state.step == 1:
            return replace(state, vertices=vertices, step=nxt)
        return replace(state, vertices=vertices, pending_vertex=new_id, step=nxt)
    if op is OperatorKind.SELECT_VERTEX:
        if isinstance(action, bool) or not isinstance(action, int):
            raise GrammarError(f"step {state.step}: SelectVertex expects a vertex id, got {action!r}")
        if not 0 <= action < len(state.vertices) or action == state.pending_vertex:
            raise GrammarError(f"step {state.step}: vertex {action} is not selectable")
        return replace(state, pending_selection=action, step=nxt)
    if isinstance(action, int) or action not in EDGE_LABELS:
        raise GrammarError(f"step {state.step}: AddEdge expects an edge label, got {action!r}")
    assert state.pending_vertex is not None and state.pending_selection is not None
    edge = AQGEdge(EdgeClass(action), state.pending_selection, state.pending_vertex)
    return replace(
        state, edges=state.edges + (edge,), pending_vertex=None, pending_selection=None, step=nxt
    )


def replay(actions: Sequence[Action]) -> AQG:
    state = GenerationState()
    for i, a in enumerate(actions):
        state = apply(state, a)
        if state.finished:
            if i != len(actions) - 1:
                raise GrammarError("actions after End")
            if not state.vertices:
                raise GrammarError("End before any vertex")
            return state.graph()
    raise GrammarError("action sequence is not terminated by End")


def build_ground_truth(g: AQG, strategy: str = "dfs", seed: int | None = None) -> list[Action]:
    """Traverse ``g`` from its answer vertex and record the generating actions.

    ``strategy`` is ``"dfs"``, ``"bfs"`` or ``"random"`` (a depth-first walk that
    picks the next unvisited neighbor at random; deterministic for a given seed).
    Siblings are visited in ascending vertex-id order for dfs/bfs.
    Selection arguments refer to ids in the *generated* graph (visit order).
    """
    g.validate()
    adj = [sorted(nb) for nb in g.adjacency()]
    new_id = {g.answer: 0}
    actions: list[Action] = [g.vertices[g.answer].value]

    def visit(u: int, v: int, eid: int) -> None:
        actions.extend([g.vertices[v].value, new_id[u], g.edges[eid].cls.value])
        new_id[v] = len(new_id)

    if strategy == "bfs":
        queue = deque([g.answer])
        while queue:
            u = queue.popleft()
            for v, eid in adj[u]:
                if v not in new_id:
                    visit(u, v, eid)
                    queue.append(v)
    elif strategy in ("dfs", "random"):
        rng = random.Random(seed)
        stack = [g.answer]
        order = {g.answer: _order(adj[g.answer], strategy, rng)}
        while stack:
            u = stack[-1]
            nbrs = order[u]
            while nbrs and nbrs[0][0] in new_id:
                nbrs.pop(0)
            if not nbrs:
                stack.pop()
                continue
            v, eid = nbrs.pop(0)
            visit(u, v, eid)
            order[v] = _order(adj[v], strategy, rng)
            stack.append(v)
    else:
        raise ValueError(f"unknown traversal strategy {strategy!r}")
    actions.append(END)
    return actions


def _order(nbrs: list[tuple[int, int]], strategy: str, rng: random.Random) -> list[tuple[int, int]]:
    nbrs = list(nbrs)
    if strategy == "random":
        rng.shuffle(nbrs)
    return nbrs


def operators_agree(actions: Sequence[Action]) -> bool:
    """True iff every action has the argument type of its step's operator."""
    for t, a in enumerate(actions, start=1):
        op = operator_at(t)
        if op is OperatorKind.SELECT_VERTEX:
            if isinstance(a, bool) or not isinstance(a, int):
                return False
        elif op is OperatorKind.ADD_VERTEX:
            if a not in VERTEX_LABELS:
                return False
        elif a not in EDGE_LABELS:
            return False
    return True
