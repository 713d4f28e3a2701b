"""Mixed-integer solver for the lot-sizing instances.

The LP kernel delegates to scipy's HiGHS interface; branch and bound over
the binary setup variables lives here: most-fractional branching, round-up
child first with depth-first plunging, remaining nodes by best bound. A
round-up probe at the root proves optimality immediately whenever integral
setups cost nothing extra, which is the common case for these models.

Everything is deterministic: ties break on variable index and node sequence
number, and the LP kernel is single threaded.
"""
from __future__ import annotations

import heapq
import re
import time
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np
from scipy import sparse
from scipy.optimize import linprog

INT_TOL = 1e-6
FEAS_TOL = 1e-7
DIVE_ROUND_TOL = 0.1


class LpStatus(Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"
    ERROR = "error"


class MipStatus(Enum):
    OPTIMAL = "optimal"
    FEASIBLE = "feasible"  # stopped on a limit with an incumbent
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"
    NO_SOLUTION = "no_solution"  # stopped on a limit before any incumbent


@dataclass
class LpProblem:
    """min c'x s.t. rows (sense in {'<', '=', '>'}), lb <= x <= ub."""

    c: np.ndarray
    a: sparse.csr_matrix
    senses: np.ndarray
    rhs: np.ndarray
    lb: np.ndarray
    ub: np.ndarray
    binary: np.ndarray
    names: list[str]
    row_names: list[str]
    _split: tuple | None = field(default=None, repr=False)

    @property
    def n_vars(self) -> int:
        return self.c.size

    @property
    def n_rows(self) -> int:
        return self.rhs.size

    def split_rows(self):
        """Cache (a_ub, b_ub, a_eq, b_eq) with '>' rows negated."""
        if self._split is None:
            senses = np.asarray(self.senses)
            le = senses == "<"
            ge = senses == ">"
            eq = senses == "="
            a = self.a.tocsr()
            parts_a, parts_b = [], []
            if le.any():
                parts_a.append(a[le])
                parts_b.append(self.rhs[le])
            if ge.any():
                parts_a.append(-a[ge])
                parts_b.append(-self.rhs[ge])
            a_ub = sparse.vstack(parts_a, format="csr") if parts_a else None
            b_ub = np.concatenate(parts_b) if parts_b else None
            a_eq = a[eq] if eq.any() else None
            b_eq = self.rhs[eq] if eq.any() else None
            self._split = (a_ub, b_ub, a_eq, b_eq)
        return self._split

    def row_activity(self, x: np.ndarray) -> np.ndarray:
        return self.a @ x


class LpBuilder:
    """Incremental COO assembly for one LpProblem."""

    def __init__(self):
        self.obj: list[float] = []
        self.lb: list[float] = []
        self.ub: list[float] = []
        self.binary: list[bool] = []
        self.names: list[str] = []
        self._rows_i: list[int] = []
        self._rows_j: list[int] = []
        self._rows_v: list[float] = []
        self.senses: list[str] = []
        self.rhs: list[float] = []
        self.row_names: list[str] = []

    def add_var(self, name: str, obj: float = 0.0, lb: float = 0.0, ub: float = np.inf, binary: bool = False) -> int:
        self.names.append(name)
        self.obj.append(float(obj))
        self.lb.append(float(lb))
        self.ub.append(float(ub))
        self.binary.append(binary)
        return len(self.names) - 1

    def add_row(self, name: str, coeffs: dict[int, float], sense: str, rhs: float) -> int:
        if sense not in ("<", "=", ">"):
            raise ValueError(f"bad sense {sense!r}")
        row = len(self.rhs)
        for j, v in coeffs.items():
            if v != 0.0:
                self._rows_i.append(row)
                self._rows_j.append(j)
                self._rows_v.append(float(v))
        self.senses.append(sense)
        self.rhs.append(float(rhs))
        self.row_names.append(name)
        return row

    def build(self) -> LpProblem:
        n = len(self.names)
        a = sparse.coo_matrix(
            (self._rows_v, (self._rows_i, self._rows_j)), shape=(len(self.rhs), n)
        ).tocsr()
        return LpProblem(
            c=np.asarray(self.obj, dtype=float),
            a=a,
            senses=np.asarray(self.senses, dtype=object),
            rhs=np.asarray(self.rhs, dtype=float),
            lb=np.asarray(self.lb, dtype=float),
            ub=np.asarray(self.ub, dtype=float),
            binary=np.asarray(self.binary, dtype=bool),
            names=list(self.names),
            row_names=list(self.row_names),
        )


@dataclass
class LpResult:
    status: LpStatus
    objective: float
    x: np.ndarray | None
    lower_marginals: np.ndarray | None = None
    upper_marginals: np.ndarray | None = None


_LINPROG_STATUS = {
    0: LpStatus.OPTIMAL,
    1: LpStatus.ERROR,
    2: LpStatus.INFEASIBLE,
    3: LpStatus.UNBOUNDED,
    4: LpStatus.ERROR,
}


def solve_lp(problem: LpProblem, lb: np.ndarray | None = None, ub: np.ndarray | None = None) -> LpResult:
    """LP relaxation solve; optional bound overrides leave the problem untouched."""
    a_ub, b_ub, a_eq, b_eq = problem.split_rows()
    lo = problem.lb if lb is None else lb
    hi = problem.ub if ub is None else ub
    res = linprog(
        problem.c,
        A_ub=a_ub,
        b_ub=b_ub,
        A_eq=a_eq,
        b_eq=b_eq,
        bounds=np.column_stack((lo, hi)),
        method="highs",
    )
    status = _LINPROG_STATUS.get(res.status, LpStatus.ERROR)
    if status is LpStatus.OPTIMAL:
        lower = getattr(res, "lower", None)
        upper = getattr(res, "upper", None)
        return LpResult(
            status,
            float(res.fun),
            np.asarray(res.x, dtype=float),
            None if lower is None else np.asarray(lower.marginals, dtype=float),
            None if upper is None else np.asarray(upper.marginals, dtype=float),
        )
    return LpResult(status, np.nan, None)


@dataclass(frozen=True)
class SolverLimits:
    gap: float = 1e-6
    time_limit_s: float | None = None
    node_limit: int | None = None


@dataclass
class MipResult:
    status: MipStatus
    objective: float
    x: np.ndarray | None
    bound: float
    gap: float
    nodes: int
    wall_time: float
    limit_hit: bool = False


def _fractionality(x: np.ndarray, bin_idx: np.ndarray) -> np.ndarray:
    y = x[bin_idx]
    return np.abs(y - np.round(y))


def solve_mip(
    problem: LpProblem,
    limits: SolverLimits = SolverLimits(),
    warm_binary: np.ndarray | None = None,
) -> MipResult:
    """Branch and bound over the binary variables.

    Most-fractional branching (ties on lowest index), round-up child explored
    first by depth-first plunging, remaining nodes by best parent bound. Node
    LPs are solved lazily at pop time so queued nodes killed by a later
    incumbent never pay for an LP. Nonbasic binaries whose reduced cost
    already exceeds the gap to the incumbent are fixed for the subtree.

    Primal side, before the tree: an optional caller-provided warm pattern
    (`warm_binary`, one LP to evaluate), an all-at-once round-up probe, and
    an LP-guided dive that bulk-fixes near-integral binaries and pushes the
    most fractional one up each round until a leaf. Warm patterns matter in
    rolling use: yesterday's plan shifted one period is usually feasible and
    close, which both prunes the tree and keeps consecutive solves consistent.
    """
    t0 = time.perf_counter()
    bin_idx = np.flatnonzero(problem.binary)
    nodes = 0

    def out_of_budget() -> bool:
        if limits.time_limit_s is not None and time.perf_counter() - t0 > limits.time_limit_s:
            return True
        if limits.node_limit is not None and nodes >= limits.node_limit:
            return True
        return False

    root = solve_lp(problem)
    nodes += 1
    if root.status is LpStatus.INFEASIBLE:
        return MipResult(MipStatus.INFEASIBLE, np.nan, None, np.nan, np.nan, nodes, time.perf_counter() - t0)
    if root.status is not LpStatus.OPTIMAL:
        status = MipStatus.UNBOUNDED if root.status is LpStatus.UNBOUNDED else MipStatus.NO_SOLUTION
        return MipResult(status, np.nan, None, np.nan, np.nan, nodes, time.perf_counter() - t0)

    def gap_of(inc: float, bound: float) -> float:
        return max(0.0, (inc - bound) / max(1.0, abs(inc)))

    if bin_idx.size == 0 or _fractionality(root.x, bin_idx).max(initial=0.0) <= INT_TOL:
        return MipResult(MipStatus.OPTIMAL, root.objective, root.x, root.objective, 0.0, nodes, time.perf_counter() - t0)

    incumbent_obj = np.inf
    incumbent_x: np.ndarray | None = None

    def cutoff() -> float:
        return incumbent_obj - limits.gap * max(1.0, abs(incumbent_obj))

    def try_pattern(values: np.ndarray) -> None:
        """Fix the binaries to a 0/1 pattern and keep the LP result if it wins."""
        nonlocal incumbent_obj, incumbent_x, nodes
        lo = problem.lb.copy()
        hi = problem.ub.copy()
        lo[bin_idx] = values
        hi[bin_idx] = values
        trial = solve_lp(problem, lo, hi)
        nodes += 1
        if trial.status is LpStatus.OPTIMAL and trial.objective < incumbent_obj:
            incumbent_obj = trial.objective
            incumbent_x = trial.x

    def certified() -> MipResult | None:
        if incumbent_x is not None and gap_of(incumbent_obj, root.objective) <= limits.gap:
            return MipResult(
                MipStatus.OPTIMAL, incumbent_obj, incumbent_x, root.objective,
                gap_of(incumbent_obj, root.objective), nodes, time.perf_counter() - t0,
            )
        return None

    if warm_binary is not None and bin_idx.size:
        warm = np.clip(np.round(np.asarray(warm_binary, dtype=float)[bin_idx]), 0.0, 1.0)
        try_pattern(warm)
        done = certified()
        if done is not None:
            return done

    # round-up probe: integral setups are often free, proving the root bound tight
    try_pattern((root.x[bin_idx] > INT_TOL).astype(float))
    done = certified()
    if done is not None:
        return done

    dive_lb = problem.lb.copy()
    dive_ub = problem.ub.copy()
    dived = root
    while not out_of_budget():
        y = dived.x[bin_idx]
        frac = np.abs(y - np.round(y))
        if frac.max(initial=0.0) <= INT_TOL:
            if dived.objective < incumbent_obj:
                incumbent_obj = dived.objective
                incumbent_x = dived.x
            break
        near = frac <= DIVE_ROUND_TOL
        for var, value in zip(bin_idx[near], np.round(y[near])):
            dive_lb[var] = value
            dive_ub[var] = value
        if frac.max() > DIVE_ROUND_TOL:
            up = int(bin_idx[int(np.argmax(frac))])
            dive_lb[up] = 1.0
            dive_ub[up] = 1.0
        dived = solve_lp(problem, dive_lb, dive_ub)
        nodes += 1
        if dived.status is not LpStatus.OPTIMAL or dived.objective >= cutoff():
            break
    done = certified()
    if done is not None:
        return done

    def reduced_cost_fixes(result: LpResult, fixed: set[int]) -> tuple:
        """Binaries whose bound flip provably costs more than the remaining gap."""
        if (
            incumbent_x is None
            or result.lower_marginals is None
            or result.upper_marginals is None
        ):
            return ()
        slack = cutoff() - result.objective
        if not np.isfinite(slack):
            return ()
        extra = []
        for j in bin_idx:
            if j in fixed:
                continue
            xj = result.x[j]
            if xj <= INT_TOL and result.lower_marginals[j] > slack:
                extra.append((int(j), 0.0))
            elif xj >= 1.0 - INT_TOL and -result.upper_marginals[j] > slack:
                extra.append((int(j), 1.0))
        return tuple(extra)

    def branch_and_children(result: LpResult, fixings: tuple) -> tuple | None:
        """Pick the branch variable; returns (j, child fixings base)."""
        frac = _fractionality(result.x, bin_idx)
        if frac.max(initial=0.0) <= INT_TOL:
            return None
        fixed = {var for var, _ in fixings}
        base = fixings + reduced_cost_fixes(result, fixed)
        j = int(bin_idx[int(np.argmax(frac))])
        return j, base

    seq = 0
    # lazy nodes: (parent bound, seq, fixings); the LP is solved at pop time
    heap: list[tuple[float, int, tuple]] = []
    stack: list[tuple[float, int, tuple]] = []
    branched = branch_and_children(root, ())
    if branched is not None:
        j, base = branched
        seq += 1
        heapq.heappush(heap, (root.objective, seq, base + ((j, 0.0),)))
        seq += 1
        stack.append((root.objective, seq, base + ((j, 1.0),)))
    limit_hit = False
    best_open = root.objective

    while stack or heap:
        if out_of_budget():
            limit_hit = True
            break
        entry = stack.pop() if stack else heapq.heappop(heap)
        parent_bound, _, fixings = entry
        if parent_bound >= cutoff():
            continue
        lo = problem.lb.copy()
        hi = problem.ub.copy()
        for var, v in fixings:
            lo[var] = v
            hi[var] = v
        node = solve_lp(problem, lo, hi)
        nodes += 1
        if node.status is not LpStatus.OPTIMAL:
            continue
        if node.objective >= cutoff():
            continue
        branched = branch_and_children(node, fixings)
        if branched is None:
            if node.objective < incumbent_obj:
                incumbent_obj = node.objective
                incumbent_x = node.x
            continue
        j, base = branched
        seq += 1
        heapq.heappush(heap, (node.objective, seq, base + ((j, 0.0),)))
        seq += 1
        stack.append((node.objective, seq, base + ((j, 1.0),)))

    open_bounds = [e[0] for e in heap] + [e[0] for e in stack]
    best_open = min(open_bounds) if open_bounds else incumbent_obj
    best_bound = min(best_open, incumbent_obj) if limit_hit else incumbent_obj
    wall = time.perf_counter() - t0
    if incumbent_x is None:
        status = MipStatus.NO_SOLUTION if limit_hit else MipStatus.INFEASIBLE
        return MipResult(status, np.nan, None, np.nan, np.nan, nodes, wall, limit_hit)
    if limit_hit:
        return MipResult(
            MipStatus.FEASIBLE, incumbent_obj, incumbent_x, best_bound,
            gap_of(incumbent_obj, best_bound), nodes, wall, True,
        )
    return MipResult(MipStatus.OPTIMAL, incumbent_obj, incumbent_x, best_bound, 0.0, nodes, wall)


def _format_terms(coeffs: list[tuple[float, str]]) -> str:
    if not coeffs:
        return "0"
    parts = []
    for i, (v, name) in enumerate(coeffs):
        sign = "-" if v < 0 else ("+" if i else "")
        parts.append(f"{sign} {abs(v):.12g} {name}".strip())
    return " ".join(parts)


def write_lp(problem: LpProblem, path: str | Path) -> None:
    """Serialize to the standard LP interchange format."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    a = problem.a.tocsr()
    lines = ["Minimize"]
    obj_terms = [(problem.c[j], problem.names[j]) for j in range(problem.n_vars) if problem.c[j] != 0]
    lines.append(" obj: " + _format_terms(obj_terms))
    lines.append("Subject To")
    sense_map = {"<": "<=", ">": ">=", "=": "="}
    for i in range(problem.n_rows):
        row = a.getrow(i)
        terms = [(row.data[k], problem.names[row.indices[k]]) for k in range(row.nnz)]
        lines.append(
            f" {problem.row_names[i]}: {_format_terms(terms)} {sense_map[str(problem.senses[i])]} {problem.rhs[i]:.12g}"
        )
    lines.append("Bounds")
    for j in range(problem.n_vars):
        if problem.binary[j]:
            continue
        lo, hi = problem.lb[j], problem.ub[j]
        if np.isinf(hi):
            lines.append(f" {problem.names[j]} >= {lo:.12g}")
        else:
            lines.append(f" {lo:.12g} <= {problem.names[j]} <= {hi:.12g}")
    if problem.binary.any():
        lines.append("Binaries")
        lines.append(" " + " ".join(problem.names[j] for j in np.flatnonzero(problem.binary)))
    lines.append("End")
    path.write_text("\n".join(lines) + "\n")


def read_solution_file(problem: LpProblem, path: str | Path) -> np.ndarray:
    """Escape hatch: ingest '<name> <value>' lines from an external solver."""
    index = {name: j for j, name in enumerate(problem.names)}
    x = np.zeros(problem.n_vars)
    for line in Path(path).read_text().splitlines():
        line = line.strip()
        if not line or line.startswith(("#", "\\")):
            continue
        parts = re.split(r"\s+", line)
        if len(parts) >= 2 and parts[0] in index:
            x[index[parts[0]]] = float(parts[1])
    return x
