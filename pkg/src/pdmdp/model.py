"""Model primitives: finite-mode drift models with table rate/cost kernels.

A model state is a pair (mode, position): finitely many modes, one real
coordinate that drifts linearly at a per-mode velocity between jumps.
Jump rates and cost rates are piecewise constant in position over a
per-mode cell grid and depend on a finite action set.  This family keeps
every integral along a flow piecewise linear, hence exactly computable,
while containing constant-flow (zero drift) chains as a special case.

Positions outside the declared grid take the nearest cell's values
(constant extrapolation), so integrated intensities stay finite on any
finite horizon.
"""

from __future__ import annotations

from collections import namedtuple
from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np


class Cemetery:
    """Isolated absorbing point reached when no further jump occurs."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "<cemetery>"


CEMETERY = Cemetery()

# Post-jump landing rules for the position coordinate.
KEEP, RESET, SET = 0, 1, 2
_RULE_NAMES = {KEEP: "keep", RESET: "reset", SET: "set"}


@dataclass(frozen=True)
class StatePoint:
    """A live state: mode label plus position on the flow axis."""

    mode: str
    position: float

    def __post_init__(self):
        if not np.isfinite(self.position):
            raise ValueError(f"position must be finite, got {self.position}")


@dataclass(frozen=True)
class ActionSet:
    actions: tuple[str, ...]

    def __post_init__(self):
        if not self.actions:
            raise ValueError("action set must be nonempty")
        if len(set(self.actions)) != len(self.actions):
            raise ValueError("action labels must be unique")

    def index(self, label: str) -> int:
        return self.actions.index(label)

    def __len__(self):
        return len(self.actions)


class ActionDistribution:
    """Probability weights over action labels (sum to 1 within 1e-12)."""

    __slots__ = ("weights",)

    def __init__(self, weights: Mapping[str, float]):
        w = {a: float(p) for a, p in weights.items() if p != 0.0}
        if any(p < 0 for p in w.values()):
            raise ValueError("action weights must be nonnegative")
        total = sum(w.values())
        if abs(total - 1.0) > 1e-12:
            raise ValueError(f"action weights sum to {total}, expected 1")
        self.weights = w

    @classmethod
    def dirac(cls, action: str) -> "ActionDistribution":
        return cls({action: 1.0})

    @classmethod
    def uniform(cls, actions: Iterable[str]) -> "ActionDistribution":
        labels = list(actions)
        return cls({a: 1.0 / len(labels) for a in labels})

    def as_array(self, action_set: ActionSet) -> np.ndarray:
        out = np.zeros(len(action_set))
        for a, p in self.weights.items():
            out[action_set.index(a)] = p
        return out

    def __eq__(self, other):
        return isinstance(other, ActionDistribution) and self.weights == other.weights

    def __repr__(self):
        return f"ActionDistribution({self.weights})"


@dataclass(frozen=True)
class Flow:
    """Per-mode linear drift; the deterministic motion between jumps."""

    drift: Mapping[str, float]

    def advance(self, x: StatePoint, t: float) -> StatePoint:
        if t < 0:
            raise ValueError("flow time must be nonnegative")
        return StatePoint(x.mode, x.position + self.drift[x.mode] * t)


@dataclass(frozen=True)
class PostJump:
    """Where the position lands after a jump into some mode."""

    rule: int  # KEEP | RESET | SET
    value: float = 0.0

    @classmethod
    def keep(cls):
        return cls(KEEP)

    @classmethod
    def reset(cls):
        return cls(RESET)

    @classmethod
    def set_to(cls, value: float):
        return cls(SET, float(value))

    def landing(self, position: float) -> float:
        if self.rule == KEEP:
            return position
        if self.rule == RESET:
            return 0.0
        return self.value


@dataclass(frozen=True)
class RateEntry:
    from_mode: str
    cell: int
    action: str
    to_mode: str
    rate: float
    post_jump: PostJump


@dataclass(frozen=True)
class CostEntry:
    mode: str
    cell: int
    action: str
    cost: float


@dataclass(frozen=True)
class RateKernel:
    """Off-diagonal jump rates per (mode, cell, action, target).

    The diagonal is minus the off-diagonal row sum by construction, so the
    signed kernel carries zero total mass.  ``intensity_override`` exists
    only to let validation be exercised against an inconsistent diagonal;
    regular construction leaves it None.
    """

    grids: Mapping[str, tuple[float, ...]]  # per-mode sorted cell lower edges
    entries: tuple[RateEntry, ...]
    intensity_override: Mapping[tuple[str, int, str], float] | None = None


@dataclass(frozen=True)
class CostRate:
    entries: tuple[CostEntry, ...]


@dataclass(frozen=True)
class Violation:
    where: str
    message: str

    def __str__(self):
        return f"{self.where}: {self.message}"


# Flat-array view of a model, shared by the simulation kernels and the
# integrators.  Entry arrays are ragged over (mode, cell, action) via
# ent_off; cell_base flattens (mode, cell) to a single row index.
ModelTables = namedtuple(
    "ModelTables",
    [
        "n_modes",
        "n_actions",
        "drift",      # [M]
        "grid_flat",  # concatenated per-mode cell edges
        "grid_off",   # [M+1]
        "cell_base",  # [M] row index of (mode, cell 0)
        "n_rows",     # total cells over all modes
        "q",          # [rows*A] intensity per (row, action)
        "cost",       # [rows*A]
        "ent_off",    # [rows*A + 1]
        "ent_mode",   # [E] target mode
        "ent_rule",   # [E] KEEP/RESET/SET
        "ent_val",    # [E] SET landing value
        "ent_rate",   # [E]
    ],
)


class PdmdpModel:
    """Immutable bundle of the five primitives; shareable across workers."""

    def __init__(self, modes, action_set: ActionSet, flow: Flow,
                 rate_kernel: RateKernel, cost_rate: CostRate):
        self.modes = tuple(modes)
        self.action_set = action_set
        self.flow = flow
        self.rate_kernel = rate_kernel
        self.cost_rate = cost_rate
        self._tables = None

    # -- lookups ---------------------------------------------------------

    def mode_index(self, mode: str) -> int:
        return self.modes.index(mode)

    def grid(self, mode: str) -> np.ndarray:
        return np.asarray(self.rate_kernel.grids[mode], dtype=float)

    def n_cells(self, mode: str) -> int:
        return len(self.rate_kernel.grids[mode])

    def cell_index(self, mode: str, position: float) -> int:
        """Cell containing the position; clamped below the first edge."""
        g = self.grid(mode)
        return max(int(np.searchsorted(g, position, side="right")) - 1, 0)

    def intensity(self, x: StatePoint, action: str) -> float:
        key = (x.mode, self.cell_index(x.mode, x.position), action)
        return self._row_rates().get(key, (0.0, ()))[0]

    def cost(self, x: StatePoint, action: str) -> float:
        key = (x.mode, self.cell_index(x.mode, x.position), action)
        return self._cost_map().get(key, 0.0)

    def jump_atoms(self, x: StatePoint, action: str):
        """Post-jump atoms [(StatePoint, rate), ...] from x under action."""
        key = (x.mode, self.cell_index(x.mode, x.position), action)
        atoms = []
        for e in self._row_rates().get(key, (0.0, ()))[1]:
            atoms.append((StatePoint(e.to_mode, e.post_jump.landing(x.position)),
                          e.rate))
        return atoms

    # -- caches ----------------------------------------------------------

    def _row_rates(self):
        if not hasattr(self, "_row_rates_cache"):
            by_key: dict = {}
            for e in self.rate_kernel.entries:
                if e.rate == 0.0:
                    continue
                key = (e.from_mode, e.cell, e.action)
                by_key.setdefault(key, []).append(e)
            self._row_rates_cache = {
                k: (sum(e.rate for e in v), tuple(v)) for k, v in by_key.items()
            }
        return self._row_rates_cache

    def _cost_map(self):
        if not hasattr(self, "_cost_cache"):
            self._cost_cache = {
                (c.mode, c.cell, c.action): c.cost for c in self.cost_rate.entries
            }
        return self._cost_cache

    def tables(self) -> ModelTables:
        """Flat-array view used by the jitted kernels (built once, cached)."""
        if self._tables is None:
            self._tables = _compile_tables(self)
        return self._tables


def _compile_tables(model: PdmdpModel) -> ModelTables:
    modes = model.modes
    acts = model.action_set.actions
    M, A = len(modes), len(acts)
    drift = np.array([model.flow.drift[m] for m in modes], dtype=float)

    grids = [model.grid(m) for m in modes]
    grid_off = np.zeros(M + 1, dtype=np.int64)
    for i, g in enumerate(grids):
        grid_off[i + 1] = grid_off[i] + len(g)
    grid_flat = np.concatenate(grids) if grids else np.zeros(0)

    n_cells = np.array([len(g) for g in grids], dtype=np.int64)
    cell_base = np.concatenate(([0], np.cumsum(n_cells)[:-1])).astype(np.int64)
    n_rows = int(n_cells.sum())

    q = np.zeros(n_rows * A)
    cost = np.zeros(n_rows * A)
    ent_lists: list[list[RateEntry]] = [[] for _ in range(n_rows * A)]

    for (m, c, a), (total, entries) in model._row_rates().items():
        idx = (cell_base[modes.index(m)] + c) * A + acts.index(a)
        q[idx] = total
        # canonical atom order: target mode index, rule, landing value
        ent_lists[idx] = sorted(
            entries, key=lambda e: (modes.index(e.to_mode), e.post_jump.rule,
                                    e.post_jump.value))
    for (m, c, a), v in model._cost_map().items():
        cost[(cell_base[modes.index(m)] + c) * A + acts.index(a)] = v

    ent_off = np.zeros(n_rows * A + 1, dtype=np.int64)
    for i, lst in enumerate(ent_lists):
        ent_off[i + 1] = ent_off[i] + len(lst)
    E = int(ent_off[-1])
    ent_mode = np.zeros(E, dtype=np.int64)
    ent_rule = np.zeros(E, dtype=np.int64)
    ent_val = np.zeros(E)
    ent_rate = np.zeros(E)
    k = 0
    for lst in ent_lists:
        for e in lst:
            ent_mode[k] = modes.index(e.to_mode)
            ent_rule[k] = e.post_jump.rule
            ent_val[k] = e.post_jump.value
            ent_rate[k] = e.rate
            k += 1

    return ModelTables(M, A, drift, grid_flat, grid_off, cell_base, n_rows,
                       q, cost, ent_off, ent_mode, ent_rule, ent_val, ent_rate)


# -- operations ------------------------------------------------------------


def validate_model(model: PdmdpModel) -> list[Violation]:
    """Collect every invariant violation; an empty list means valid."""
    out: list[Violation] = []
    modes = set(model.modes)
    acts = set(model.action_set.actions)

    if len(modes) != len(model.modes):
        out.append(Violation("modes", "duplicate mode labels"))
    for m in model.modes:
        if m not in model.flow.drift:
            out.append(Violation(f"drift[{m}]", "missing drift velocity"))
        elif not np.isfinite(model.flow.drift[m]):
            out.append(Violation(f"drift[{m}]", "drift must be finite"))
        g = model.rate_kernel.grids.get(m)
        if g is None or len(g) == 0:
            out.append(Violation(f"grid[{m}]", "grid needs at least one cell edge"))
        else:
            ga = np.asarray(g, dtype=float)
            if not np.all(np.isfinite(ga)):
                out.append(Violation(f"grid[{m}]", "grid edges must be finite"))
            if np.any(np.diff(ga) <= 0):
                out.append(Violation(f"grid[{m}]", "grid edges must be strictly increasing"))

    def loc(mode, cell, action):
        return f"mode={mode} cell={cell} action={action}"

    for e in model.rate_kernel.entries:
        where = f"rate[{loc(e.from_mode, e.cell, e.action)} -> {e.to_mode}]"
        if e.from_mode not in modes:
            out.append(Violation(where, f"unknown source mode {e.from_mode!r}"))
            continue
        if e.to_mode not in modes:
            out.append(Violation(where, f"unknown target mode {e.to_mode!r}"))
        if e.action not in acts:
            out.append(Violation(where, f"unknown action {e.action!r}"))
        if not 0 <= e.cell < model.n_cells(e.from_mode):
            out.append(Violation(where, f"cell index {e.cell} out of range"))
        if not np.isfinite(e.rate) or e.rate < 0:
            out.append(Violation(where, f"rate must be finite and >= 0, got {e.rate}"))
        if e.post_jump.rule == SET and not np.isfinite(e.post_jump.value):
            out.append(Violation(where, "set-to landing value must be finite"))
        if e.to_mode == e.from_mode and e.post_jump.rule == KEEP and e.rate > 0:
            # mass at the pre-jump point itself: diagonal mass, so the
            # implied kernel no longer sums to zero off the diagonal
            out.append(Violation(
                where, "same-mode keep-position entry places jump mass on the "
                       "pre-jump state (diagonal mass breaks the zero row sum)"))

    for c in model.cost_rate.entries:
        where = f"cost[{loc(c.mode, c.cell, c.action)}]"
        if c.mode not in modes:
            out.append(Violation(where, f"unknown mode {c.mode!r}"))
            continue
        if c.action not in acts:
            out.append(Violation(where, f"unknown action {c.action!r}"))
        if not 0 <= c.cell < model.n_cells(c.mode):
            out.append(Violation(where, f"cell index {c.cell} out of range"))
        if not np.isfinite(c.cost) or c.cost < 0:
            out.append(Violation(where, f"cost must be finite and >= 0, got {c.cost}"))

    seen = set()
    for c in model.cost_rate.entries:
        key = (c.mode, c.cell, c.action)
        if key in seen:
            out.append(Violation(f"cost[{loc(*key)}]", "duplicate cost record"))
        seen.add(key)

    if model.rate_kernel.intensity_override is not None:
        for key, val in model.rate_kernel.intensity_override.items():
            m, c, a = key
            row = model._row_rates().get(key, (0.0, ()))[0]
            if abs(val - row) > 1e-12:
                out.append(Violation(
                    f"intensity[{loc(m, c, a)}]",
                    f"declared intensity {val} != off-diagonal row sum {row}"))
    return out


def flow_advance(model: PdmdpModel, x: StatePoint, t: float) -> StatePoint:
    """Move x along the deterministic flow for time t >= 0."""
    if x.mode not in model.flow.drift:
        raise KeyError(f"unknown mode {x.mode!r}")
    return model.flow.advance(x, t)


def mix_kernel(model: PdmdpModel, x: StatePoint, mu: ActionDistribution):
    """Mix rates, post-jump measure and cost under an action distribution.

    Returns (intensity, atoms, cost) where atoms is a list of
    ((mode, position) StatePoint, mass) pairs whose total mass equals the
    intensity.  Everything is linear in mu.
    """
    intensity = 0.0
    cost = 0.0
    atoms: list[tuple[StatePoint, float]] = []
    for a, p in mu.weights.items():
        intensity += p * model.intensity(x, a)
        cost += p * model.cost(x, a)
        for y, r in model.jump_atoms(x, a):
            atoms.append((y, p * r))
    merged: dict[tuple[str, float], float] = {}
    for y, m in atoms:
        key = (y.mode, y.position)
        merged[key] = merged.get(key, 0.0) + m
    out = [(StatePoint(m, pos), mass) for (m, pos), mass in sorted(merged.items())]
    return intensity, out, cost
