"""Local operations induced by states and measurement effects.

A bipartite state used as a resource acts on operators in two pictures:

- Heisenberg: effects on the far factor map to subnormalized states on the
  near one, ``B -> tr_B(rho (1 x B))``.
- Schrodinger: operators on the near factor are transmitted through the
  state, ``tau -> tr_A(rho (tau x 1))``.

A measurement effect on a composite space induces the map
``tau -> tr_B(E (tau x 1))``; composing it with Schrodinger steering gives
the network building block.  All maps are completely positive by
construction and are kept as unevaluated composition chains, applied by
direct contraction.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .linalg import as_complex, check_dims, min_eig, tolerances
from .objects import QuantumState, SubnormalizedState


class SingularMarginalError(ValueError):
    """Marginal of the steering state is rank deficient."""


def _contract_second(mat: np.ndarray, dims: tuple[int, int], x: np.ndarray) -> np.ndarray:
    """tr_2(mat (1 x x)) for mat on dims, x on the second factor."""
    da, db = dims
    m4 = mat.reshape(da, db, da, db)
    return np.einsum("abcd,db->ac", m4, x)


def _contract_first(mat: np.ndarray, dims: tuple[int, int], x: np.ndarray) -> np.ndarray:
    """tr_1(mat (x x 1)) for mat on dims, x on the first factor."""
    da, db = dims
    m4 = mat.reshape(da, db, da, db)
    return np.einsum("abcd,ca->bd", m4, x)


def _require_effect(effect: np.ndarray, dim: int, what: str = "effect") -> np.ndarray:
    effect = as_complex(effect)
    if effect.shape[0] != dim:
        raise ValueError(f"{what} dimension {effect.shape[0]} does not match expected {dim}")
    lam = min_eig(effect)
    if lam < -tolerances.psd:
        raise ValueError(f"{what} has negative eigenvalue {lam:.3e}")
    return effect


def steer_heisenberg(rho: QuantumState, effect: np.ndarray) -> SubnormalizedState:
    """tr_B(rho (1 x B)): the state left on the first factor after B fires."""
    if len(rho.dims) != 2:
        raise ValueError(f"steering needs a bipartite state, got dims {rho.dims}")
    effect = _require_effect(effect, rho.dims[1])
    out = _contract_second(np.asarray(rho.mat), rho.dims, effect)
    return SubnormalizedState(out, (rho.dims[0],))


def steer_schrodinger(rho: QuantumState, tau: np.ndarray) -> np.ndarray:
    """tr_A(rho (tau x 1)): transmit tau through the state onto the second factor."""
    if len(rho.dims) != 2:
        raise ValueError(f"steering needs a bipartite state, got dims {rho.dims}")
    tau = as_complex(tau)
    if tau.shape[0] != rho.dims[0]:
        raise ValueError(f"input dimension {tau.shape[0]} does not match first factor {rho.dims[0]}")
    return _contract_first(np.asarray(rho.mat), rho.dims, tau)


def meas_op(effect: np.ndarray, dims: Sequence[int], tau: np.ndarray) -> np.ndarray:
    """tr_B(E (tau x 1)) for an effect E on [d_B, d_B']; output lives on d_B'."""
    effect = as_complex(effect)
    dims = check_dims(effect, dims)
    if len(dims) != 2:
        raise ValueError(f"measurement-induced map needs a bipartite effect, got dims {dims}")
    tau = as_complex(tau)
    if tau.shape[0] != dims[0]:
        raise ValueError(f"input dimension {tau.shape[0]} does not match effect factor {dims[0]}")
    return _contract_first(effect, dims, tau)


@dataclass(frozen=True)
class ChannelPair:
    """A steering state together with the cached eigensystem of its marginal."""

    state: QuantumState
    eigvals: np.ndarray
    eigvecs: np.ndarray
    full_rank: bool

    @classmethod
    def from_state(cls, state: QuantumState) -> "ChannelPair":
        if len(state.dims) != 2:
            raise ValueError(f"channel construction needs a bipartite state, got dims {state.dims}")
        rho_a = state.marginal(0)
        w, v = np.linalg.eigh(rho_a)
        return cls(state, w.astype(float), v, bool(w[0] > tolerances.psd))


def channel_heisenberg(cp: ChannelPair, effect: np.ndarray) -> np.ndarray:
    """The Heisenberg channel of the generalized Choi isomorphism.

    Returns ``rho_A^{-1/2} (tr_B(rho (1 x B)))^{T_e} rho_A^{-1/2}`` where the
    transpose is taken in the eigenbasis of ``rho_A``.  Unital on full-rank
    marginals.  For degenerate ``rho_A`` the eigenbasis (hence the output) is
    fixed by the eigensolver's returned basis; the sandwiched product that
    reproduces the steering map is basis independent either way.
    """
    if not cp.full_rank:
        raise SingularMarginalError(
            f"marginal is rank deficient (min eigenvalue {cp.eigvals[0]:.3e}); "
            "the Heisenberg channel needs an invertible marginal"
        )
    sigma = np.asarray(steer_heisenberg(cp.state, effect).mat)
    v = cp.eigvecs
    # transpose in the eigenbasis of rho_A
    sigma_te = v @ (v.conj().T @ sigma @ v).T @ v.conj().T
    inv_sqrt = (v * (1.0 / np.sqrt(cp.eigvals))) @ v.conj().T
    return inv_sqrt @ sigma_te @ inv_sqrt


def steer_sandwich(cp: ChannelPair, channel_output: np.ndarray) -> np.ndarray:
    """Inverse direction of :func:`channel_heisenberg`: rebuild tr_B(rho (1 x B))."""
    v = cp.eigvecs
    x_te = v @ (v.conj().T @ as_complex(channel_output) @ v).T @ v.conj().T
    sqrt = (v * np.sqrt(np.maximum(cp.eigvals, 0.0))) @ v.conj().T
    return sqrt @ x_te @ sqrt


# ---------------------------------------------------------------------------
# local operations as composable values


class LocalOp:
    """A completely positive map kept as its generating data."""

    in_dim: int
    out_dim: int

    def apply(self, x: np.ndarray) -> np.ndarray:
        x = as_complex(x)
        if x.shape[0] != self.in_dim:
            raise ValueError(f"operand dimension {x.shape[0]} does not match op input {self.in_dim}")
        return self._act(x)

    def _act(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError


class IdentityOp(LocalOp):
    def __init__(self, dim: int):
        self.in_dim = self.out_dim = int(dim)

    def _act(self, x):
        return x


class HeisenbergSteeringOp(LocalOp):
    """Effects on the second factor of the state map to operators on the first."""

    def __init__(self, state: QuantumState):
        if len(state.dims) != 2:
            raise ValueError(f"steering needs a bipartite state, got dims {state.dims}")
        self.state = state
        self.in_dim = state.dims[1]
        self.out_dim = state.dims[0]

    def _act(self, x):
        return _contract_second(np.asarray(self.state.mat), self.state.dims, x)


class SchrodingerSteeringOp(LocalOp):
    """Operators on the first factor of the state are transmitted to the second."""

    def __init__(self, state: QuantumState):
        if len(state.dims) != 2:
            raise ValueError(f"steering needs a bipartite state, got dims {state.dims}")
        self.state = state
        self.in_dim = state.dims[0]
        self.out_dim = state.dims[1]

    def _act(self, x):
        return _contract_first(np.asarray(self.state.mat), self.state.dims, x)


class MeasurementOp(LocalOp):
    """The map tau -> tr_B(E (tau x 1)) induced by one POVM effect."""

    def __init__(self, effect: np.ndarray, dims: Sequence[int]):
        effect = as_complex(effect)
        dims = check_dims(effect, dims)
        if len(dims) != 2:
            raise ValueError(f"measurement-induced map needs a bipartite effect, got dims {dims}")
        self.effect = effect
        self.dims = dims
        self.in_dim, self.out_dim = dims

    def _act(self, x):
        return _contract_first(self.effect, self.dims, x)


class BuildingBlockOp(LocalOp):
    """Measure one effect, then steer through a state: the network building block."""

    def __init__(self, effect: np.ndarray, effect_dims: Sequence[int], state: QuantumState):
        meas = MeasurementOp(effect, effect_dims)
        steer = SchrodingerSteeringOp(state)
        if meas.out_dim != steer.in_dim:
            raise ValueError(
                f"effect output {meas.out_dim} does not match steering state input {steer.in_dim}"
            )
        self.meas = meas
        self.steer = steer
        self.in_dim = meas.in_dim
        self.out_dim = steer.out_dim

    def _act(self, x):
        return self.steer._act(self.meas._act(x))


class ChainOp(LocalOp):
    """Composition of local ops, applied left-to-right; empty chain = identity."""

    def __init__(self, ops: Sequence[LocalOp]):
        self.ops = tuple(ops)
        for a, b in zip(self.ops, self.ops[1:]):
            if a.out_dim != b.in_dim:
                raise ValueError(f"chain interface mismatch: {a.out_dim} -> {b.in_dim}")
        self.in_dim = self.ops[0].in_dim if self.ops else -1
        self.out_dim = self.ops[-1].out_dim if self.ops else -1

    def apply(self, x: np.ndarray) -> np.ndarray:
        x = as_complex(x)
        if self.ops and x.shape[0] != self.in_dim:
            raise ValueError(f"operand dimension {x.shape[0]} does not match chain input {self.in_dim}")
        return self._act(x)

    def _act(self, x):
        for op in self.ops:
            x = op._act(x)
        return x


def building_block(effect: np.ndarray, effect_dims: Sequence[int], state: QuantumState) -> BuildingBlockOp:
    """Construct the building block for one effect and its downstream state."""
    return BuildingBlockOp(effect, effect_dims, state)


def apply(op: LocalOp, x: np.ndarray) -> np.ndarray:
    return op.apply(x)


def choi_matrix(op: LocalOp) -> np.ndarray:
    """(id x op) applied to the projector onto the maximally entangled state.

    PSD of this matrix certifies complete positivity of the op; every op
    built from the constructors here is CP by construction, so this is a
    validation probe rather than a representation used for evaluation.
    """
    d = op.in_dim
    if d <= 0:
        raise ValueError("choi probe needs an op with a fixed input dimension")
    out = np.zeros((d * op.out_dim, d * op.out_dim), dtype=np.complex128)
    basis = np.zeros((d, d), dtype=np.complex128)
    blocks = np.empty((d, d), dtype=object)
    for i in range(d):
        for j in range(d):
            basis[i, j] = 1.0
            blocks[i, j] = op._act(basis) / d
            basis[i, j] = 0.0
    do = op.out_dim
    for i in range(d):
        for j in range(d):
            out[i * do : (i + 1) * do, j * do : (j + 1) * do] = blocks[i, j]
    return out


def is_completely_positive(op: LocalOp, tol: float | None = None) -> bool:
    tol = tolerances.psd if tol is None else tol
    return min_eig(choi_matrix(op)) >= -tol
