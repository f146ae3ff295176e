"""
This module defines the SymmetryService: colored symmetry detection graphs for
permutation and signed permutation symmetries, a small individualization-
refinement automorphism search, an algebraic symmetry check, orbits and
first-level SST cuts.
"""

import logging
import math
from collections import Counter, deque
from dataclasses import dataclass, field
from typing import Dict, Hashable, List, Optional, Sequence, Tuple, Union

import networkx as nx

from ..config import SYMMETRY_NODE_LIMIT
from ..exceptions import BudgetExceededError, SymmetryError
from ..models import Cut, CutOrigin, Problem, SymmetryMode

logger = logging.getLogger(__name__)


def _num(value: float) -> Union[float, str]:
    """Color key of a number: rounded to a 1e-9 grid, infinities as strings."""
    if math.isinf(value):
        return "inf" if value > 0 else "-inf"
    rounded = round(value, 9)
    return 0.0 if rounded == 0 else rounded


def _center(lower: float, upper: float) -> float:
    if math.isfinite(lower) and math.isfinite(upper):
        return (lower + upper) / 2.0
    return 0.0


@dataclass(frozen=True)
class Permutation:
    """image[j] is the position variable j is moved to."""

    image: Tuple[int, ...]

    def is_identity(self) -> bool:
        return all(j == k for j, k in enumerate(self.image))

    def signed(self) -> "SignedPermutation":
        return SignedPermutation(tuple((k, 1) for k in self.image))


@dataclass(frozen=True)
class SignedPermutation:
    """image[j] = (k, s) means e_j is mapped to s * e_k."""

    image: Tuple[Tuple[int, int], ...]

    def is_identity(self) -> bool:
        return all(k == j and s == 1 for j, (k, s) in enumerate(self.image))

    def is_pure_permutation(self) -> bool:
        return all(s == 1 for _, s in self.image)

    def compose(self, other: "SignedPermutation") -> "SignedPermutation":
        """Applies ``other`` first, then ``self``."""
        return SignedPermutation(
            tuple((self.image[k][0], s * self.image[k][1]) for k, s in other.image)
        )

    def apply(self, x: Sequence[float]) -> List[float]:
        out = [0.0] * len(x)
        for j, (k, s) in enumerate(self.image):
            out[k] = s * x[j]
        return out


Generator = Union[Permutation, SignedPermutation]


@dataclass
class SymGraph:
    """Colored graph whose color-preserving automorphisms encode symmetries."""

    graph: nx.Graph
    num_vars: int
    signed: bool
    node_colors: Dict[Hashable, int] = field(default_factory=dict)
    edge_colors: Dict[Hashable, int] = field(default_factory=dict)

    def color(self, node: int) -> int:
        return self.graph.nodes[node]["color"]

    def kind(self, node: int) -> str:
        return self.graph.nodes[node]["kind"]

    def edge_color(self, u: int, v: int) -> Optional[int]:
        data = self.graph.get_edge_data(u, v)
        return None if data is None else data["color"]


class _GraphBuilder:
    def __init__(self, num_vars: int, signed: bool):
        self.sym = SymGraph(nx.Graph(), num_vars, signed)

    def node(self, kind: str, key: Hashable) -> int:
        v = self.sym.graph.number_of_nodes()
        color = self.sym.node_colors.setdefault(key, len(self.sym.node_colors))
        self.sym.graph.add_node(v, kind=kind, color=color, key=key)
        return v

    def edge(self, u: int, v: int, key: Hashable) -> None:
        color = self.sym.edge_colors.setdefault(key, len(self.sym.edge_colors))
        self.sym.graph.add_edge(u, v, color=color)


class _AutomorphismSearch:
    def __init__(self, sym: SymGraph, limit: int):
        self.size = sym.graph.number_of_nodes()
        self.base = [sym.color(v) for v in range(self.size)]
        self.adj: List[List[Tuple[int, int]]] = [[] for _ in range(self.size)]
        self.edges: Dict[Tuple[int, int], int] = {}
        for u, v, data in sym.graph.edges(data=True):
            self.adj[u].append((v, data["color"]))
            self.adj[v].append((u, data["color"]))
            self.edges[(u, v)] = self.edges[(v, u)] = data["color"]
        self.limit = limit
        self.visited = 0
        self.invariants: List[List[int]] = []
        self.first_leaf: List[int] = []

    def refine(self, colors: List[int]) -> List[int]:
        self.visited += 1
        if self.visited > self.limit:
            raise BudgetExceededError(f"Automorphism search exceeded {self.limit} refinement steps.")
        cells = len(set(colors))
        while True:
            signatures = [
                (colors[v], tuple(sorted((ec, colors[u]) for u, ec in self.adj[v]))) for v in range(self.size)
            ]
            rank = {s: i for i, s in enumerate(sorted(set(signatures)))}
            refined = [rank[s] for s in signatures]
            if len(rank) == cells:
                return refined
            cells = len(rank)
            colors = refined

    @staticmethod
    def individualize(colors: List[int], v: int) -> List[int]:
        return [2 * c + (0 if u == v else 1) for u, c in enumerate(colors)]

    @staticmethod
    def target_cell(colors: List[int]) -> Optional[List[int]]:
        counts = Counter(colors)
        shared = [c for c, k in counts.items() if k > 1]
        if not shared:
            return None
        target = min(shared)
        return [v for v, c in enumerate(colors) if c == target]

    def run(self) -> List[List[int]]:
        if self.size == 0:
            return []
        colors = self.refine(list(self.base))
        parts = [colors]
        cells: List[List[int]] = []
        while (cell := self.target_cell(colors)) is not None:
            cells.append(cell)
            colors = self.refine(self.individualize(colors, cell[0]))
            parts.append(colors)
        self.first_leaf = colors
        self.invariants = [sorted(p) for p in parts]

        generators: List[List[int]] = []
        for level in reversed(range(len(cells))):
            v = cells[level][0]
            for w in cells[level][1:]:
                if w in self._orbit(v, generators):
                    continue
                gamma = self._search(self.refine(self.individualize(parts[level], w)), level + 1)
                if gamma is not None:
                    generators.append(gamma)
        return generators

    @staticmethod
    def _orbit(v: int, generators: List[List[int]]) -> set:
        seen = {v}
        queue = deque([v])
        while queue:
            u = queue.popleft()
            for gamma in generators:
                w = gamma[u]
                if w not in seen:
                    seen.add(w)
                    queue.append(w)
        return seen

    def _search(self, colors: List[int], depth: int) -> Optional[List[int]]:
        if depth >= len(self.invariants) or sorted(colors) != self.invariants[depth]:
            return None
        cell = self.target_cell(colors)
        if cell is None:
            return self._leaf(colors)
        for u in cell:
            gamma = self._search(self.refine(self.individualize(colors, u)), depth + 1)
            if gamma is not None:
                return gamma
        return None

    def _leaf(self, colors: List[int]) -> Optional[List[int]]:
        position = {c: v for v, c in enumerate(colors)}
        gamma = [position[c] for c in self.first_leaf]
        if any(self.base[v] != self.base[gamma[v]] for v in range(self.size)):
            return None
        for (u, v), ec in self.edges.items():
            if self.edges.get((gamma[u], gamma[v])) != ec:
                return None
        return gamma


class SymmetryService:
    """Detects formulation symmetries and derives symmetry handling cuts."""

    def __init__(self, node_limit: int = SYMMETRY_NODE_LIMIT):
        self.node_limit = node_limit

    # --- graphs ---

    def build_perm_graph(self, problem: Problem) -> SymGraph:
        return self._build(problem, signed=False)

    def build_signed_graph(self, problem: Problem) -> SymGraph:
        return self._build(problem, signed=True)

    def _build(self, problem: Problem, signed: bool) -> SymGraph:
        if problem.signomials:
            raise SymmetryError("Signomial constraints are not supported by symmetry detection.")
        n = problem.num_vars
        builder = _GraphBuilder(n, signed)
        centers = [_center(problem.lower[j], problem.upper[j]) if signed else 0.0 for j in range(n)]

        for j in range(n):
            lo, up = problem.lower[j] - centers[j], problem.upper[j] - centers[j]
            is_int = j in problem.integer_set
            builder.node("var", ("var", is_int, _num(problem.objective[j]), _num(lo), _num(up)))
        if signed:
            for j in range(n):
                lo, up = problem.lower[j] - centers[j], problem.upper[j] - centers[j]
                is_int = j in problem.integer_set
                builder.node("negvar", ("var", is_int, _num(-problem.objective[j]), _num(-up), _num(-lo)))
            for j in range(n):
                builder.edge(j, n + j, ("negation",))

        for row in problem.rows:
            shift = sum(a * centers[j] for j, a in row.coeffs)
            rhs_node = builder.node("rhs", ("rhs", _num(row.lhs - shift), _num(row.rhs - shift)))
            cons_node = builder.node("cons", ("cons", "linear"))
            builder.edge(cons_node, rhs_node, ("link",))
            for j, a in row.coeffs:
                builder.edge(j, rhs_node, ("coef", _num(a)))
                if signed:
                    builder.edge(n + j, rhs_node, ("coef", _num(-a)))

        for ind in problem.indicators:
            cons_node = builder.node("cons", ("cons", "indicator", _num(ind.activation)))
            builder.edge(cons_node, ind.binvar, ("binvar",))
            builder.edge(cons_node, ind.var, ("slackvar",))

        graph = builder.sym
        logger.debug(
            f"{'Signed' if signed else 'Permutation'} symmetry graph: {graph.graph.number_of_nodes()} nodes, "
            f"{graph.graph.number_of_edges()} edges, {len(graph.node_colors)} node colors."
        )
        return graph

    # --- automorphisms ---

    def find_automorphisms(self, graph: SymGraph, limit: Optional[int] = None) -> List[Generator]:
        """
        Returns generators of the color-preserving automorphism group restricted
        to the variable nodes; restrictions that are the identity are dropped.

        Raises:
            BudgetExceededError: If the search needs more refinement steps than allowed.
        """
        search = _AutomorphismSearch(graph, self.node_limit if limit is None else limit)
        n = graph.num_vars
        result: List[Generator] = []
        seen = set()
        for gamma in search.run():
            if graph.signed:
                generator: Generator = SignedPermutation(
                    tuple((gamma[j], 1) if gamma[j] < n else (gamma[j] - n, -1) for j in range(n))
                )
            else:
                generator = Permutation(tuple(gamma[j] for j in range(n)))
            if generator.is_identity() or generator in seen:
                continue
            seen.add(generator)
            result.append(generator)
        logger.debug(f"Automorphism search: {len(result)} generators, {search.visited} refinements.")
        return result

    # --- verification ---

    def verify_symmetry(self, problem: Problem, gamma: Generator) -> bool:
        """Checks the algebraic definition of a formulation symmetry exactly (1e-9 grid)."""
        n = problem.num_vars
        signed_mode = isinstance(gamma, SignedPermutation)
        image = gamma.image if signed_mode else tuple((k, 1) for k in gamma.image)
        if len(image) != n or sorted(k for k, _ in image) != list(range(n)):
            return False
        centers = [_center(problem.lower[j], problem.upper[j]) if signed_mode else 0.0 for j in range(n)]

        for j, (k, s) in enumerate(image):
            if (j in problem.integer_set) != (k in problem.integer_set):
                return False
            if _num(problem.objective[k]) != _num(s * problem.objective[j]):
                return False
            lo_j, up_j = problem.lower[j] - centers[j], problem.upper[j] - centers[j]
            if s < 0:
                lo_j, up_j = -up_j, -lo_j
            if (_num(lo_j), _num(up_j)) != (_num(problem.lower[k] - centers[k]), _num(problem.upper[k] - centers[k])):
                return False

        def row_key(coeffs, lhs, rhs):
            return (tuple(sorted((k, _num(a)) for k, a in coeffs)), _num(lhs), _num(rhs))

        original = Counter()
        mapped = Counter()
        for row in problem.rows:
            shift = sum(a * centers[j] for j, a in row.coeffs)
            original[row_key(row.coeffs, row.lhs - shift, row.rhs - shift)] += 1
            mapped[row_key(
                [(image[j][0], image[j][1] * a) for j, a in row.coeffs], row.lhs - shift, row.rhs - shift
            )] += 1
        if original != mapped:
            return False

        originals = Counter((ind.binvar, ind.var, _num(ind.activation)) for ind in problem.indicators)
        images = Counter()
        for ind in problem.indicators:
            (z, sz), (x, sx) = image[ind.binvar], image[ind.var]
            if sz < 0 or sx < 0:
                return False
            images[(z, x, _num(ind.activation))] += 1
        return originals == images

    # --- orbits and cuts ---

    def orbits(self, generators: Sequence[Generator], num_vars: int) -> List[List[int]]:
        """Connected components of the generator mappings (targets taken by absolute index)."""
        graph = nx.Graph()
        graph.add_nodes_from(range(num_vars))
        for gamma in generators:
            targets = [k for k, _ in gamma.image] if isinstance(gamma, SignedPermutation) else list(gamma.image)
            graph.add_edges_from((j, k) for j, k in enumerate(targets) if j != k)
        return sorted((sorted(orbit) for orbit in nx.connected_components(graph)), key=lambda orbit: orbit[0])

    def sst_first_level(self, orbit: Sequence[int], leader: Optional[int] = None) -> List[Cut]:
        """Cuts x_leader >= x_j for every other orbit member, as x_j - x_leader <= 0."""
        if leader is None:
            leader = min(orbit)
        return [
            Cut(coeffs=((j, 1.0), (leader, -1.0)), rhs=0.0, origin=CutOrigin.SST, source_var=leader)
            for j in sorted(orbit)
            if j != leader
        ]

    def symmetry_cuts(self, problem: Problem, mode: SymmetryMode) -> Tuple[List[Generator], List[Cut]]:
        """
        Detects symmetries in the given mode and returns the verified generators
        together with first-level SST cuts for the largest orbit. In signed mode
        only generators without sign changes contribute to that orbit.
        """
        if mode == SymmetryMode.NONE or problem.num_vars == 0:
            return [], []
        try:
            graph = self.build_signed_graph(problem) if mode == SymmetryMode.SIGNED else self.build_perm_graph(problem)
            generators = self.find_automorphisms(graph)
        except (SymmetryError, BudgetExceededError) as e:
            logger.warning(f"Symmetry detection skipped: {e}")
            return [], []

        verified = [g for g in generators if self.verify_symmetry(problem, g)]
        if len(verified) != len(generators):
            logger.warning(f"Dropped {len(generators) - len(verified)} generators that failed verification.")
        permutations: List[Generator] = []
        for g in verified:
            if isinstance(g, SignedPermutation):
                if not g.is_pure_permutation():
                    continue
                # centered symmetries may translate variables; keep only true permutations
                g = Permutation(tuple(k for k, _ in g.image))
                if not self.verify_symmetry(problem, g):
                    continue
            permutations.append(g)
        orbit_list = [o for o in self.orbits(permutations, problem.num_vars) if len(o) > 1]
        if not orbit_list:
            return verified, []
        largest = max(orbit_list, key=lambda o: (len(o), -o[0]))
        cuts = self.sst_first_level(largest)
        logger.info(f"Symmetry: {len(verified)} generators, SST cuts on an orbit of size {len(largest)}.")
        return verified, cuts
