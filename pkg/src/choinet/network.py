"""Line networks and the trusted end-point ensembles they prepare.

A line network is a subject (a state, or a measurement flanked by its two
neighbouring states) with a chain of measurement/state building blocks on
each side.  Block lists are ordered innermost-first: ``left_blocks[0]`` and
``right_blocks[0]`` attach directly to the subject.  Outcome tuples are
enumerated row-major over ``(i, b_1..b_m, c_1..c_n)`` with the subject
outcome ``i`` present only for measurement subjects.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from .linalg import kron_all, partial_trace
from .maps import BuildingBlockOp, building_block
from .objects import Povm, QuantumState, SubnormalizedState

ENSEMBLE_TRACE_TOL = 1e-8
DEFAULT_TUPLE_CAP = 4096


class TupleCapExceeded(RuntimeError):
    """The outcome-tuple count of a network exceeds the configured cap."""


@dataclass(frozen=True)
class BlockSpec:
    """A measurement/state pair forming one building block of the line."""

    povm: Povm
    state: QuantumState

    def __post_init__(self):
        if len(self.povm.dims) != 2:
            raise ValueError(f"block POVM must be bipartite, got dims {self.povm.dims}")
        if len(self.state.dims) != 2:
            raise ValueError(f"block state must be bipartite, got dims {self.state.dims}")
        if self.povm.dims[1] != self.state.dims[0]:
            raise ValueError(
                f"block interface mismatch: POVM second factor {self.povm.dims[1]} "
                f"vs state first factor {self.state.dims[0]}"
            )

    @property
    def in_dim(self) -> int:
        return self.povm.dims[0]

    @property
    def out_dim(self) -> int:
        return self.state.dims[1]

    def ops(self) -> tuple[BuildingBlockOp, ...]:
        return tuple(building_block(e, self.povm.dims, self.state) for e in self.povm.effects)


@dataclass(frozen=True)
class StateSubject:
    rho: QuantumState

    def __post_init__(self):
        if len(self.rho.dims) != 2:
            raise ValueError(f"subject state must be bipartite, got dims {self.rho.dims}")


@dataclass(frozen=True)
class MeasSubject:
    """A measurement under test with its two neighbouring states.

    ``omega0`` sits on the left, dims [d_A, d_B]; ``xi0`` on the right,
    dims [d_B', d_C]; the POVM acts on [d_B, d_B'].
    """

    povm: Povm
    omega0: QuantumState
    xi0: QuantumState

    def __post_init__(self):
        if len(self.povm.dims) != 2:
            raise ValueError(f"subject POVM must be bipartite, got dims {self.povm.dims}")
        if len(self.omega0.dims) != 2 or len(self.xi0.dims) != 2:
            raise ValueError("neighbouring states must be bipartite")
        if self.omega0.dims[1] != self.povm.dims[0]:
            raise ValueError(
                f"omega0 second factor {self.omega0.dims[1]} does not match "
                f"POVM first factor {self.povm.dims[0]}"
            )
        if self.xi0.dims[0] != self.povm.dims[1]:
            raise ValueError(
                f"xi0 first factor {self.xi0.dims[0]} does not match "
                f"POVM second factor {self.povm.dims[1]}"
            )


Subject = Union[StateSubject, MeasSubject]


@dataclass(frozen=True)
class LineNetwork:
    subject: Subject
    left_blocks: tuple[BlockSpec, ...] = ()
    right_blocks: tuple[BlockSpec, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "left_blocks", tuple(self.left_blocks))
        object.__setattr__(self, "right_blocks", tuple(self.right_blocks))
        left_leg, right_leg = self._subject_legs()
        _check_chain(self.left_blocks, left_leg, "left")
        _check_chain(self.right_blocks, right_leg, "right")

    def _subject_legs(self) -> tuple[int, int]:
        if isinstance(self.subject, StateSubject):
            return self.subject.rho.dims[0], self.subject.rho.dims[1]
        return self.subject.omega0.dims[0], self.subject.xi0.dims[1]

    @property
    def endpoint_dims(self) -> tuple[int, int]:
        left_leg, right_leg = self._subject_legs()
        if self.left_blocks:
            left_leg = self.left_blocks[-1].out_dim
        if self.right_blocks:
            right_leg = self.right_blocks[-1].out_dim
        return left_leg, right_leg

    @property
    def outcome_shape(self) -> tuple[int, ...]:
        shape = []
        if isinstance(self.subject, MeasSubject):
            shape.append(self.subject.povm.n_outcomes)
        shape.extend(b.povm.n_outcomes for b in self.left_blocks)
        shape.extend(b.povm.n_outcomes for b in self.right_blocks)
        return tuple(shape)

    @property
    def n_tuples(self) -> int:
        return int(np.prod(self.outcome_shape)) if self.outcome_shape else 1


def _check_chain(blocks: Sequence[BlockSpec], leg: int, side: str) -> None:
    for j, block in enumerate(blocks):
        if block.in_dim != leg:
            raise ValueError(
                f"{side} block {j} expects input dimension {block.in_dim}, "
                f"but the chain provides {leg}"
            )
        leg = block.out_dim


@dataclass
class StateEnsemble:
    """Outcome-tuple-indexed collection of subnormalized end-point states."""

    entries: dict[tuple[int, ...], SubnormalizedState]
    dims: tuple[int, int]

    def __post_init__(self):
        total = sum(e.trace for e in self.entries.values())
        if abs(total - 1.0) > ENSEMBLE_TRACE_TOL:
            raise ValueError(f"ensemble traces sum to {total!r}, not 1")

    def traces(self) -> dict[tuple[int, ...], float]:
        return {k: v.trace for k, v in self.entries.items()}

    def items(self):
        return self.entries.items()

    def __getitem__(self, key) -> SubnormalizedState:
        return self.entries[key]

    def __len__(self) -> int:
        return len(self.entries)


@dataclass(frozen=True)
class SharedRandomnessScenario:
    """Probabilistic mixture of line networks driven by shared randomness."""

    branches: tuple[tuple[float, LineNetwork], ...]

    def __post_init__(self):
        object.__setattr__(self, "branches", tuple((float(p), n) for p, n in self.branches))
        probs = [p for p, _ in self.branches]
        if not probs:
            raise ValueError("scenario needs at least one branch")
        if any(p < 0 for p in probs):
            raise ValueError(f"branch probabilities must be nonnegative, got {probs}")
        if abs(sum(probs) - 1.0) > 1e-10:
            raise ValueError(f"branch probabilities sum to {sum(probs)!r}, not 1")


# ---------------------------------------------------------------------------
# evaluation


def _apply_block_right(mat: np.ndarray, dims: tuple[int, int], op: BuildingBlockOp):
    """(id x E)(mat): apply a building block to the second factor, blockwise."""
    dl, dr = dims
    out_dim = op.out_dim
    m4 = mat.reshape(dl, dr, dl, dr)
    out = np.zeros((dl, out_dim, dl, out_dim), dtype=np.complex128)
    for x1 in range(dl):
        for x2 in range(dl):
            out[x1, :, x2, :] = op._act(np.ascontiguousarray(m4[x1, :, x2, :]))
    return out.reshape(dl * out_dim, dl * out_dim), (dl, out_dim)


def _apply_block_left(mat: np.ndarray, dims: tuple[int, int], op: BuildingBlockOp):
    """(E x id)(mat): apply a building block to the first factor, blockwise."""
    dl, dr = dims
    out_dim = op.out_dim
    m4 = mat.reshape(dl, dr, dl, dr)
    out = np.zeros((out_dim, dr, out_dim, dr), dtype=np.complex128)
    for y1 in range(dr):
        for y2 in range(dr):
            out[:, y1, :, y2] = op._act(np.ascontiguousarray(m4[:, y1, :, y2]))
    return out.reshape(out_dim * dr, out_dim * dr), (out_dim, dr)


def _expand_chain(partial, blocks, side):
    applier = _apply_block_right if side == "right" else _apply_block_left
    for block in blocks:
        ops = block.ops()
        new = {}
        for key, (mat, dims) in partial.items():
            for outcome, op in enumerate(ops):
                new[key + (outcome,)] = applier(mat, dims, op)
        partial = new
    return partial


def _check_cap(n_tuples: int, tuple_cap: int) -> None:
    if n_tuples > tuple_cap:
        raise TupleCapExceeded(
            f"network enumerates {n_tuples} outcome tuples, above the cap {tuple_cap}"
        )


def _assemble(raw, net: LineNetwork) -> StateEnsemble:
    """Freeze raw {key: (mat, dims)} results into an ensemble, row-major key order."""
    dims = net.endpoint_dims
    entries = {}
    for key in itertools.product(*[range(n) for n in net.outcome_shape]):
        mat, _ = raw[key]
        entries[key] = SubnormalizedState(mat, dims)
    return StateEnsemble(entries, dims)


def evaluate_state_network(net: LineNetwork, tuple_cap: int = DEFAULT_TUPLE_CAP) -> StateEnsemble:
    """End-point ensemble for a state subject: one entry per block-outcome tuple.

    The right chain is applied innermost-first, then the left chain; entry
    keys are ``(b_1..b_m, c_1..c_n)`` in row-major enumeration order.
    """
    if not isinstance(net.subject, StateSubject):
        raise ValueError("evaluate_state_network needs a state subject")
    _check_cap(net.n_tuples, tuple_cap)
    rho = net.subject.rho
    partial = {(): (np.asarray(rho.mat), rho.dims)}
    partial = _expand_chain(partial, net.right_blocks, "right")
    partial = _expand_chain(partial, net.left_blocks, "left")
    # keys built as (c_1..c_n) then extended by (b_1..b_m): reorder to (b, c)
    n = len(net.right_blocks)
    reordered = {key[n:] + key[:n]: val for key, val in partial.items()}
    return _assemble(reordered, net)


def evaluate_meas_network(net: LineNetwork, tuple_cap: int = DEFAULT_TUPLE_CAP) -> StateEnsemble:
    """End-point ensemble for a measurement subject, keys ``(i, b.., c..)``."""
    if not isinstance(net.subject, MeasSubject):
        raise ValueError("evaluate_meas_network needs a measurement subject")
    _check_cap(net.n_tuples, tuple_cap)
    sub = net.subject
    seeds = {}
    for i, effect in enumerate(sub.povm.effects):
        seeds[i] = _steer_both(sub.omega0, sub.xi0, effect, sub.povm.dims)
    out = {}
    for i, (mat, dims) in seeds.items():
        partial = {(): (mat, dims)}
        partial = _expand_chain(partial, net.right_blocks, "right")
        partial = _expand_chain(partial, net.left_blocks, "left")
        n = len(net.right_blocks)
        for key, val in partial.items():
            out[(i,) + key[n:] + key[:n]] = val
    return _assemble(out, net)


def _steer_both(omega0: QuantumState, xi0: QuantumState, effect: np.ndarray, effect_dims):
    """(S*_omega0 x S*_xi0)(effect): steer a composite effect to both end points."""
    da, db = omega0.dims
    dbp, dc = xi0.dims
    if effect_dims != (db, dbp):
        raise ValueError(f"effect dims {effect_dims} do not match neighbouring states ({db},{dbp})")
    w4 = np.asarray(omega0.mat).reshape(da, db, da, db)
    x4 = np.asarray(xi0.mat).reshape(dbp, dc, dbp, dc)
    e4 = np.asarray(effect).reshape(db, dbp, db, dbp)
    # sigma[a,c,A,C] = sum omega[a,b2,A,b1] xi[p2,c,p1,C] effect[b1,p1,b2,p2]
    sigma = np.einsum("aqAb,rcpC,bpqr->acAC", w4, x4, e4)
    return sigma.reshape(da * dc, da * dc), (da, dc)


def evaluate_bilocality(rho1: QuantumState, rho2: QuantumState, povm: Povm) -> StateEnsemble:
    """End-point ensemble of the bilocality scenario, by direct contraction.

    Factor order is A,B,B',C with ``rho1`` on [A,B], ``rho2`` on [B',C] and
    the POVM on [B,B']; the middle factors are traced out.
    """
    if len(rho1.dims) != 2 or len(rho2.dims) != 2:
        raise ValueError("bilocality sources must be bipartite")
    da, db = rho1.dims
    dbp, dc = rho2.dims
    if povm.dims != (db, dbp):
        raise ValueError(f"POVM dims {povm.dims} do not match source inner factors ({db},{dbp})")
    big = np.kron(np.asarray(rho1.mat), np.asarray(rho2.mat))
    dims4 = (da, db, dbp, dc)
    entries = {}
    eye_a = np.eye(da)
    eye_c = np.eye(dc)
    for b, effect in enumerate(povm.effects):
        op = kron_all([eye_a, np.asarray(effect), eye_c])
        sigma = partial_trace(op @ big, dims4, {0, 3})
        entries[(b,)] = SubnormalizedState(sigma, (da, dc))
    return StateEnsemble(entries, (da, dc))


def evaluate_network(net: LineNetwork, tuple_cap: int = DEFAULT_TUPLE_CAP) -> StateEnsemble:
    if isinstance(net.subject, StateSubject):
        return evaluate_state_network(net, tuple_cap)
    return evaluate_meas_network(net, tuple_cap)


def evaluate_shared_randomness(
    scenario: SharedRandomnessScenario, tuple_cap: int = DEFAULT_TUPLE_CAP
) -> StateEnsemble:
    """Entrywise probability mixture of the branch ensembles."""
    branch_ensembles = []
    shape = scenario.branches[0][1].outcome_shape
    kind = type(scenario.branches[0][1].subject)
    dims = scenario.branches[0][1].endpoint_dims
    for p, net in scenario.branches:
        if net.outcome_shape != shape or type(net.subject) is not kind:
            raise ValueError(
                f"branch outcome structure {net.outcome_shape} does not match {shape}"
            )
        if net.endpoint_dims != dims:
            raise ValueError(f"branch endpoint dims {net.endpoint_dims} do not match {dims}")
        branch_ensembles.append((p, evaluate_network(net, tuple_cap)))
    keys = list(branch_ensembles[0][1].entries)
    mixed = {}
    for key in keys:
        acc = np.zeros((dims[0] * dims[1], dims[0] * dims[1]), dtype=np.complex128)
        for p, ens in branch_ensembles:
            acc = acc + p * np.asarray(ens[key].mat)
        mixed[key] = SubnormalizedState(acc, dims)
    return StateEnsemble(mixed, dims)
