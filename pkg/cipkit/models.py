"""
This module defines the data models shared by all solver services.
"""

import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Dict, FrozenSet, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from .config import INFINITY, MAX_CUT_DEPTH, MAX_CUT_ROUNDS, NODE_LIMIT, SIGNOMIAL_MAX_UNDERVARS, TIME_LIMIT
from .exceptions import CutError, ModelError


def is_pos_inf(value: float) -> bool:
    return value >= INFINITY


def is_neg_inf(value: float) -> bool:
    return value <= -INFINITY


def clip_inf(value: float) -> float:
    """Maps anything beyond the infinity sentinel onto +-inf."""
    if value >= INFINITY:
        return math.inf
    if value <= -INFINITY:
        return -math.inf
    return float(value)


@dataclass(frozen=True)
class Tolerances:
    """Feasibility, integrality and zero tolerances used across the solver."""

    feasibility: float = 1e-6
    integrality: float = 1e-6
    zero: float = 1e-9

    def __post_init__(self):
        if min(self.feasibility, self.integrality, self.zero) <= 0:
            raise ModelError("Tolerances must be strictly positive.")
        if self.zero >= self.feasibility:
            raise ModelError("Zero tolerance must be smaller than the feasibility tolerance.")

    def is_integral(self, value: float) -> bool:
        return abs(value - round(value)) <= self.integrality


@dataclass(frozen=True)
class LinRow:
    """A two-sided linear row lhs <= a.x <= rhs stored sparsely."""

    coeffs: Tuple[Tuple[int, float], ...]
    lhs: float
    rhs: float
    name: str = ""

    def __post_init__(self):
        clean = tuple((int(j), float(a)) for j, a in self.coeffs)
        indices = [j for j, _ in clean]
        if any(b <= a for a, b in zip(indices, indices[1:])):
            raise ModelError(f"Row '{self.name}' indices must be strictly increasing.")
        if any(a == 0.0 for _, a in clean):
            raise ModelError(f"Row '{self.name}' stores a zero coefficient.")
        if clip_inf(self.lhs) > clip_inf(self.rhs):
            raise ModelError(f"Row '{self.name}' has lhs {self.lhs} > rhs {self.rhs}.")
        object.__setattr__(self, "coeffs", clean)
        object.__setattr__(self, "lhs", clip_inf(self.lhs))
        object.__setattr__(self, "rhs", clip_inf(self.rhs))

    @classmethod
    def from_mapping(cls, coeffs: Mapping[int, float], lhs: float, rhs: float, name: str = "") -> "LinRow":
        """Builds a row from an unordered coefficient map, dropping zeros."""
        items = tuple(sorted((j, float(a)) for j, a in coeffs.items() if a != 0.0))
        return cls(items, lhs, rhs, name)

    @property
    def indices(self) -> List[int]:
        return [j for j, _ in self.coeffs]

    @property
    def values(self) -> List[float]:
        return [a for _, a in self.coeffs]

    def activity(self, x: Sequence[float]) -> float:
        return float(sum(a * x[j] for j, a in self.coeffs))

    def dense(self, num_vars: int) -> np.ndarray:
        vec = np.zeros(num_vars)
        for j, a in self.coeffs:
            vec[j] = a
        return vec

    def is_integral(self, integer_set: FrozenSet[int]) -> bool:
        """True if every slack value of this row is integral on integer points."""
        if any(j not in integer_set or a != round(a) for j, a in self.coeffs):
            return False
        return all(math.isinf(side) or side == round(side) for side in (self.lhs, self.rhs))


@dataclass(frozen=True)
class IndicatorCons:
    """Indicator constraint z = 0 => x <= 0 with activation bound ell for z = 1."""

    binvar: int
    var: int
    activation: float
    name: str = ""


@dataclass(frozen=True)
class SignomialTerm:
    """Lifted signomial relation between t and prod_j x_j^alpha_j on a positive box."""

    exponents: Tuple[float, ...]
    var_indices: Tuple[int, ...]
    aux: int
    lower: Tuple[float, ...]
    upper: Tuple[float, ...]
    sense: str = "eq"
    aux_lower: Optional[float] = None
    aux_upper: Optional[float] = None
    name: str = ""

    def value(self, x: Sequence[float]) -> float:
        return float(np.prod([x[j] ** a for j, a in zip(self.var_indices, self.exponents)]))


@dataclass(frozen=True)
class Problem:
    """
    A mixed-integer linear problem min c.x s.t. lhs <= Ax <= rhs, l <= x <= u,
    x_j integer for j in the integer set, plus indicator and signomial constraints.

    Instances are immutable; use the ``with_*`` helpers to derive modified copies.
    """

    num_vars: int
    objective: Tuple[float, ...]
    rows: Tuple[LinRow, ...]
    lower: Tuple[float, ...]
    upper: Tuple[float, ...]
    integer_set: FrozenSet[int]
    indicators: Tuple[IndicatorCons, ...] = ()
    signomials: Tuple[SignomialTerm, ...] = ()
    var_names: Tuple[str, ...] = ()
    name: str = ""
    sense_flipped: bool = False

    def __post_init__(self):
        n = self.num_vars
        if len(self.objective) != n or len(self.lower) != n or len(self.upper) != n:
            raise ModelError("Objective and bound vectors must have num_vars entries.")
        if self.var_names and len(self.var_names) != n:
            raise ModelError("var_names must have num_vars entries.")
        for j in range(n):
            lo, up = self.lower[j], self.upper[j]
            if lo > up:
                raise ModelError(f"Variable {self.var_label(j)} has lower bound {lo} > upper bound {up}.")
            if is_pos_inf(lo) or is_neg_inf(up):
                raise ModelError(f"Variable {self.var_label(j)} is fixed to an infinite value.")
        if any(j < 0 or j >= n for j in self.integer_set):
            raise ModelError("Integer set references an unknown variable.")
        for row in self.rows:
            if any(j >= n for j in row.indices):
                raise ModelError(f"Row '{row.name}' references an unknown variable.")
        for ind in self.indicators:
            if ind.binvar not in self.integer_set or self.lower[ind.binvar] < 0 or self.upper[ind.binvar] > 1:
                raise ModelError(f"Indicator '{ind.name}' needs a binary indicator variable.")
            if ind.activation <= 0:
                raise ModelError(f"Indicator '{ind.name}' needs a positive activation bound.")

    @classmethod
    def create(
        cls,
        objective: Sequence[float],
        rows: Iterable[LinRow],
        lower: Sequence[float],
        upper: Sequence[float],
        integer_set: Iterable[int] = (),
        indicators: Iterable[IndicatorCons] = (),
        signomials: Iterable[SignomialTerm] = (),
        var_names: Sequence[str] = (),
        name: str = "",
        sense_flipped: bool = False,
    ) -> "Problem":
        """Normalizes raw data (infinite sentinels, integer bounds) and builds a Problem."""
        ints = frozenset(int(j) for j in integer_set)
        lo = [clip_inf(v) for v in lower]
        up = [clip_inf(v) for v in upper]
        for j in ints:
            if j < len(lo):
                lo[j] = math.ceil(lo[j] - 1e-9) if math.isfinite(lo[j]) else lo[j]
                up[j] = math.floor(up[j] + 1e-9) if math.isfinite(up[j]) else up[j]
        return cls(
            num_vars=len(objective),
            objective=tuple(float(c) for c in objective),
            rows=tuple(rows),
            lower=tuple(float(v) for v in lo),
            upper=tuple(float(v) for v in up),
            integer_set=ints,
            indicators=tuple(indicators),
            signomials=tuple(signomials),
            var_names=tuple(var_names),
            name=name,
            sense_flipped=sense_flipped,
        )

    def var_label(self, j: int) -> str:
        if self.var_names and j < len(self.var_names):
            return self.var_names[j]
        return f"x{j}"

    def var_index(self, label: str) -> int:
        try:
            return self.var_names.index(label)
        except ValueError:
            raise ModelError(f"Unknown variable '{label}'.") from None

    def is_integer(self, j: int) -> bool:
        return j in self.integer_set

    def objective_value(self, x: Sequence[float]) -> float:
        return float(sum(c * v for c, v in zip(self.objective, x)))

    def reported_objective(self, value: float) -> float:
        """Converts an internal (minimization) value back to the original sense."""
        return -value if self.sense_flipped else value

    def with_bounds(self, lower: Sequence[float], upper: Sequence[float]) -> "Problem":
        return replace(self, lower=tuple(float(v) for v in lower), upper=tuple(float(v) for v in upper))

    def with_rows(self, extra: Iterable[LinRow]) -> "Problem":
        return replace(self, rows=self.rows + tuple(extra))

    def with_objective(self, objective: Sequence[float]) -> "Problem":
        return replace(self, objective=tuple(float(c) for c in objective))

    def integer_lattice_size(self) -> float:
        """Number of integer assignments, inf if some integer variable is unbounded."""
        size = 1.0
        for j in self.integer_set:
            if not (math.isfinite(self.lower[j]) and math.isfinite(self.upper[j])):
                return math.inf
            size *= self.upper[j] - self.lower[j] + 1
        return size


@dataclass
class Solution:
    """A primal assignment with its internal (minimization) objective value."""

    values: List[float]
    objective: float

    def __post_init__(self):
        self.values = [float(v) for v in self.values]


SOLVED_STATUSES = frozenset({"optimal", "infeasible", "unbounded"})


def _finite_or_none(value: Optional[float]) -> Optional[float]:
    if value is None or not math.isfinite(value):
        return None
    return float(value)


@dataclass
class BenchRecord:
    """One (instance, seed, config) run of a benchmark."""

    instance: str
    seed: int
    config: str
    status: str
    time_s: float = 0.0
    nodes: int = 0
    objective: Optional[float] = None
    dual_bound: Optional[float] = None

    def __post_init__(self):
        if self.time_s < 0 or self.nodes < 0:
            raise ModelError("Bench records need nonnegative time and node counts.")
        self.objective = _finite_or_none(self.objective)
        self.dual_bound = _finite_or_none(self.dual_bound)

    @property
    def solved(self) -> bool:
        return self.status in SOLVED_STATUSES

    @property
    def key(self) -> Tuple[str, int]:
        return self.instance, self.seed

    def to_dict(self) -> Dict[str, object]:
        return {
            "instance": self.instance,
            "seed": self.seed,
            "config": self.config,
            "status": self.status,
            "time_s": self.time_s,
            "nodes": self.nodes,
            "objective": self.objective,
            "dual_bound": self.dual_bound,
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, object]) -> "BenchRecord":
        return cls(
            instance=str(data["instance"]),
            seed=int(data["seed"]),
            config=str(data["config"]),
            status=str(data["status"]),
            time_s=float(data.get("time_s") or 0.0),
            nodes=int(data.get("nodes") or 0),
            objective=data.get("objective"),
            dual_bound=data.get("dual_bound"),
        )


class CutOrigin(str, Enum):
    GMI = "gmi"
    SST = "sst"
    SIGNOMIAL = "signomial"
    USER = "user"


@dataclass
class Cut:
    """A linear inequality a.x <= rhs with origin metadata and selection scores."""

    coeffs: Tuple[Tuple[int, float], ...]
    rhs: float
    origin: CutOrigin = CutOrigin.USER
    source_var: Optional[int] = None
    efficacy: float = 0.0
    density: float = 0.0
    local: bool = False
    score: float = 0.0

    def __post_init__(self):
        self.coeffs = tuple(sorted((int(j), float(a)) for j, a in self.coeffs if a != 0.0))
        if self.norm() <= 0.0:
            raise CutError("Cut has an all-zero coefficient vector.")

    def norm(self) -> float:
        return math.sqrt(sum(a * a for _, a in self.coeffs))

    @property
    def nnz(self) -> int:
        return len(self.coeffs)

    def dense(self, num_vars: int) -> np.ndarray:
        vec = np.zeros(num_vars)
        for j, a in self.coeffs:
            vec[j] = a
        return vec

    def activity(self, x: Sequence[float]) -> float:
        return float(sum(a * x[j] for j, a in self.coeffs))

    def violation(self, x: Sequence[float]) -> float:
        return self.activity(x) - self.rhs

    def to_row(self, name: str = "") -> LinRow:
        return LinRow(self.coeffs, -math.inf, self.rhs, name)

    def scaled(self, factor: float) -> "Cut":
        return replace(self, coeffs=tuple((j, a * factor) for j, a in self.coeffs), rhs=self.rhs * factor)

    def key(self, digits: int = 9) -> Tuple:
        """Scale-free identity used to deduplicate cuts."""
        norm = self.norm()
        return tuple((j, round(a / norm, digits)) for j, a in self.coeffs) + (round(self.rhs / norm, digits),)


# --- Configuration types ---


@dataclass(frozen=True)
class HybridWeights:
    """Weights of the hybrid cut score."""

    w_eff: float = 1.0
    w_intsup: float = 0.1
    w_objpar: float = 0.1
    w_dcd: float = 0.0

    def __post_init__(self):
        weights = (self.w_eff, self.w_intsup, self.w_objpar, self.w_dcd)
        if min(weights) < 0 or max(weights) == 0:
            raise ModelError("Hybrid weights must be nonnegative and not all zero.")


class FilterMode(str, Enum):
    NORMAL = "normal"
    F = "f"


@dataclass(frozen=True)
class DynamicConfig:
    mingain: float = 0.01
    filtermode: FilterMode = FilterMode.NORMAL

    def __post_init__(self):
        if self.mingain < 0:
            raise ModelError("mingain must be nonnegative.")


@dataclass(frozen=True)
class EnsembleConfig:
    # Placeholder values; the tuned parameters are not published.
    max_density: float = 0.4
    parallelism_penalty: float = 0.2
    nnz_budget: Optional[int] = None
    w_pseudo: float = 0.5
    w_sparsity: float = 0.5

    def __post_init__(self):
        if not 0 < self.max_density <= 1:
            raise ModelError("max_density must lie in (0, 1].")
        if self.nnz_budget is not None and self.nnz_budget <= 0:
            raise ModelError("nnz_budget must be positive.")

    def budget_for(self, num_vars: int) -> int:
        return self.nnz_budget if self.nnz_budget is not None else 10 * max(num_vars, 1)


@dataclass(frozen=True)
class HybridBranchWeights:
    # Only the two GMI weights are documented defaults; the rest are placeholders.
    w_pseudo: float = 1.0
    w_conflict_freq: float = 0.01
    w_conflict_len: float = 0.01
    w_fixfreq: float = 0.01
    w_infeasfreq: float = 0.01
    w_nlcount: float = 0.01
    gmiavgeffweight: float = 0.0
    gmilasteffweight: float = 1e-5

    def __post_init__(self):
        if min(vars(self).values()) < 0:
            raise ModelError("Branching weights must be nonnegative.")


@dataclass(frozen=True)
class DiveConfig:
    max_depth: int = 50
    lp_iter_budget: int = 5000
    backtrack: bool = True

    def __post_init__(self):
        if self.max_depth < 1:
            raise ModelError("max_depth must be at least 1.")


class Regularization(str, Enum):
    NONE = "none"
    L1 = "l1-ball"
    L2 = "l2-ball"


@dataclass(frozen=True)
class LagromoryConfig:
    degeneracy_threshold: float = 0.5
    max_iters: int = 20
    cuts_per_basis: int = 5
    stabilization: float = 0.3
    regularization: Regularization = Regularization.L2
    radius: float = 10.0
    stall_iters: int = 5

    def __post_init__(self):
        if not 0 <= self.stabilization <= 1:
            raise ModelError("Stabilization weight must lie in [0, 1].")
        if self.radius <= 0:
            raise ModelError("Regularization radius must be positive.")


class CutSelectorKind(str, Enum):
    HYBRID = "hybrid"
    DYNAMIC = "dynamic"
    ENSEMBLE = "ensemble"


class BranchingKind(str, Enum):
    HYBRID = "hybrid"
    GMI = "gmi"
    MOSTFRAC = "mostfrac"


class SymmetryMode(str, Enum):
    NONE = "none"
    PERM = "perm"
    SIGNED = "signed"


class SymmetryHandling(str, Enum):
    NONE = "none"
    SST = "sst"


@dataclass(frozen=True)
class SolverConfig:
    """Everything a single solve can be configured with."""

    cutsel: CutSelectorKind = CutSelectorKind.HYBRID
    branching: BranchingKind = BranchingKind.HYBRID
    symmetry: SymmetryMode = SymmetryMode.NONE
    symmetry_handling: SymmetryHandling = SymmetryHandling.NONE
    lagromory_freq: int = -1
    indicator_diving: Optional[bool] = None
    time_limit: float = TIME_LIMIT
    node_limit: int = NODE_LIMIT
    max_cut_rounds: int = MAX_CUT_ROUNDS
    max_cut_depth: int = MAX_CUT_DEPTH
    max_cuts_per_round: int = 20
    min_orthogonality: float = 0.9
    gmi_max_cands: int = 20
    signomial_max_undervars: int = SIGNOMIAL_MAX_UNDERVARS
    tolerances: Tolerances = field(default_factory=Tolerances)
    hybrid_weights: HybridWeights = field(default_factory=HybridWeights)
    dynamic: DynamicConfig = field(default_factory=DynamicConfig)
    ensemble: EnsembleConfig = field(default_factory=EnsembleConfig)
    branch_weights: HybridBranchWeights = field(default_factory=HybridBranchWeights)
    dive: DiveConfig = field(default_factory=DiveConfig)
    lagromory: LagromoryConfig = field(default_factory=LagromoryConfig)

    def describe(self) -> Dict[str, str]:
        return {
            "cutsel": self.cutsel.value,
            "branching": self.branching.value,
            "symmetry": self.symmetry.value,
            "symmetry_handling": self.symmetry_handling.value,
            "lagromory_freq": str(self.lagromory_freq),
        }
