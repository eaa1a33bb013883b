"""History-dependent relaxed policies, piecewise constant in elapsed time.

A policy answers, for the sojourn that starts after the current history,
with a step function of elapsed time s: a finite breakpoint vector and one
action distribution per segment (the last segment extends to infinity).
That step-function contract is what keeps every integrated intensity
piecewise linear and exactly invertible.

Stationary policies read only the most recent mark; the jump-indexed
piecewise kind reads (jump count, s); the scripted kind is an arbitrary
callback on (history, s), constrained to be constant between its declared
breakpoints.
"""

from __future__ import annotations

from collections import namedtuple
from typing import Callable, Mapping, Sequence

import numpy as np

from .model import ActionDistribution, PdmdpModel, StatePoint

# Flat-array view for the jitted batch kernel. kind: 0 stationary (weights
# per (mode, cell) row), 1 jump-indexed piecewise (row r = min(jump count,
# rows-1), shared breakpoints).
PolicyTables = namedtuple("PolicyTables", ["kind", "stat_w", "pw_breaks", "pw_w"])

_EMPTY_F = np.zeros(0)
_EMPTY_W = np.zeros((0, 0))
_EMPTY_PW = np.zeros((0, 0, 0))


def _base_state(state) -> StatePoint:
    # accept auxiliary states transparently: policies on the doubled state
    # space that depend only on the base coordinate
    return getattr(state, "base", state)


class Policy:
    """Interface: control step function for the upcoming sojourn."""

    def control_segments(self, model: PdmdpModel, history):
        """Return (breaks, dists): len(dists) == len(breaks) + 1."""
        raise NotImplementedError

    def as_tables(self, model: PdmdpModel) -> PolicyTables | None:
        """Flat-array form for the batch kernel; None if not encodable."""
        return None


class DeterministicStationary(Policy):
    """Action chosen by the state at the last jump, held for the sojourn.

    The mapping may name actions per mode (all cells) or per (mode, cell);
    every (mode, cell) of the model must be covered when tables are built.
    """

    def __init__(self, mapping: Mapping):
        self.mapping = dict(mapping)

    def action_for(self, model: PdmdpModel, state: StatePoint) -> str:
        state = _base_state(state)
        cell = model.cell_index(state.mode, state.position)
        if (state.mode, cell) in self.mapping:
            return self.mapping[(state.mode, cell)]
        if state.mode in self.mapping:
            return self.mapping[state.mode]
        raise KeyError(f"no action mapped for mode={state.mode} cell={cell}")

    def control_segments(self, model, history):
        a = self.action_for(model, history.current_state())
        return np.zeros(0), [ActionDistribution.dirac(a)]

    def as_tables(self, model):
        w = np.zeros((model.tables().n_rows, len(model.action_set)))
        for mi, m in enumerate(model.modes):
            base = int(model.tables().cell_base[mi])
            for c in range(model.n_cells(m)):
                a = self.mapping.get((m, c), self.mapping.get(m))
                if a is None:
                    raise KeyError(f"no action mapped for mode={m} cell={c}")
                w[base + c, model.action_set.index(a)] = 1.0
        return PolicyTables(0, w, _EMPTY_F, _EMPTY_PW)


class RandomizedStationary(Policy):
    """Action distribution chosen by the state at the last jump."""

    def __init__(self, mapping: Mapping):
        self.mapping = dict(mapping)

    def dist_for(self, model: PdmdpModel, state: StatePoint) -> ActionDistribution:
        state = _base_state(state)
        cell = model.cell_index(state.mode, state.position)
        if (state.mode, cell) in self.mapping:
            return self.mapping[(state.mode, cell)]
        if state.mode in self.mapping:
            return self.mapping[state.mode]
        raise KeyError(f"no distribution mapped for mode={state.mode} cell={cell}")

    def control_segments(self, model, history):
        return np.zeros(0), [self.dist_for(model, history.current_state())]

    def as_tables(self, model):
        w = np.zeros((model.tables().n_rows, len(model.action_set)))
        for mi, m in enumerate(model.modes):
            base = int(model.tables().cell_base[mi])
            for c in range(model.n_cells(m)):
                mu = self.mapping.get((m, c), self.mapping.get(m))
                if mu is None:
                    raise KeyError(f"no distribution mapped for mode={m} cell={c}")
                w[base + c, :] = mu.as_array(model.action_set)
        return PolicyTables(0, w, _EMPTY_F, _EMPTY_PW)


class MarkovPiecewise(Policy):
    """Distribution depending on (jump index, elapsed time segment).

    rows[r] holds the segment distributions used during the sojourn after
    jump r; the last row repeats for all later jumps.  All rows share one
    breakpoint vector.
    """

    def __init__(self, breakpoints: Sequence[float],
                 rows: Sequence[Sequence[ActionDistribution]]):
        self.breakpoints = np.asarray(sorted(breakpoints), dtype=float)
        if np.any(self.breakpoints <= 0) or np.any(np.diff(self.breakpoints) <= 0):
            raise ValueError("breakpoints must be positive and strictly increasing")
        self.rows = [list(r) for r in rows]
        if not self.rows:
            raise ValueError("need at least one row of segment distributions")
        for r in self.rows:
            if len(r) != len(self.breakpoints) + 1:
                raise ValueError("each row needs len(breakpoints)+1 distributions")

    def control_segments(self, model, history):
        r = min(history.n_jumps(), len(self.rows) - 1)
        return self.breakpoints, list(self.rows[r])

    def as_tables(self, model):
        A = len(model.action_set)
        R, S = len(self.rows), len(self.breakpoints) + 1
        pw = np.zeros((R, S, A))
        for r in range(R):
            for s in range(S):
                pw[r, s, :] = self.rows[r][s].as_array(model.action_set)
        return PolicyTables(1, _EMPTY_W, self.breakpoints, pw)


class ScriptedPolicy(Policy):
    """Arbitrary callback on (history, elapsed time).

    The callback must be constant between the declared breakpoints; it is
    sampled once per segment (at the midpoint, and one unit into the tail).
    Scripted policies always run on the object-level simulator.
    """

    def __init__(self, breakpoints: Sequence[float],
                 fn: Callable[[object, float], ActionDistribution]):
        self.breakpoints = np.asarray(sorted(breakpoints), dtype=float)
        if np.any(self.breakpoints <= 0):
            raise ValueError("breakpoints must be positive")
        self.fn = fn

    def control_segments(self, model, history):
        b = self.breakpoints
        reps = []
        lo = 0.0
        for hi in b:
            reps.append(0.5 * (lo + hi))
            lo = hi
        reps.append(lo + 1.0)
        return b, [self.fn(history, s) for s in reps]


def segments_to_weights(model: PdmdpModel, dists) -> np.ndarray:
    """Stack segment ActionDistributions into a (n_segments, A) array."""
    return np.stack([d.as_array(model.action_set) for d in dists])
