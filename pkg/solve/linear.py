"""
Exact linear systems of the form x(u) = c(u) + Σ a(u, v)·x(v), solved block by
block along the strongly connected components of the dependency graph.
"""

from __future__ import annotations

import logging

import networkx as nx
import sympy as sp

logger = logging.getLogger(__name__)

ZERO = sp.Integer(0)
ONE = sp.Integer(1)


def solve_fixed_point(equations):
    """
    equations: {u: (constant, [(coef, v), ...])} where every v is a key of
    equations. The system must have a unique solution (I - A invertible).
    Returns {u: Rational}.
    """
    graph = nx.DiGraph()
    graph.add_nodes_from(equations)
    for u, (_, terms) in equations.items():
        for coef, v in terms:
            if coef != 0:
                graph.add_edge(u, v)

    condensed = nx.condensation(graph)
    solution = {}
    # successors first
    for block_id in reversed(list(nx.topological_sort(condensed))):
        block = sorted(condensed.nodes[block_id]["members"], key=repr)
        if len(block) == 1:
            u = block[0]
            constant, terms = equations[u]
            self_coef = ZERO
            acc = sp.Rational(constant)
            for coef, v in terms:
                if v == u:
                    self_coef += coef
                else:
                    acc += coef * solution[v]
            if self_coef == ONE:
                raise ValueError(f"singular equation at {u!r}")
            solution[u] = acc / (ONE - self_coef)
            continue

        position = {u: i for i, u in enumerate(block)}
        size = len(block)
        matrix = sp.zeros(size, size)
        rhs = sp.zeros(size, 1)
        for u in block:
            row = position[u]
            constant, terms = equations[u]
            matrix[row, row] += ONE
            rhs[row] += sp.Rational(constant)
            for coef, v in terms:
                if v in position:
                    matrix[row, position[v]] -= coef
                else:
                    rhs[row] += coef * solution[v]
        values = matrix.LUsolve(rhs)
        for u in block:
            solution[u] = sp.Rational(values[position[u]])
        logger.debug("solved block of %d unknowns", size)
    return solution
