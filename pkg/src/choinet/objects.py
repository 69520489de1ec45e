"""Physical objects: density operators, POVMs, pure states, canonical families.

Every constructor validates its output; random instances take an explicit
64-bit seed and are generated with numpy's PCG64 so property suites are
reproducible bit-for-bit on one platform.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .linalg import (
    as_complex,
    check_dims,
    embed_matrix,
    herm_deviation,
    kron,
    partial_trace,
    tolerances,
)

TRACE_TOL = 1e-9
COMPLETENESS_TOL = 1e-8


def _freeze(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=np.complex128, copy=True)
    a.setflags(write=False)
    return a


def _validate_operator(mat: np.ndarray, dims: Sequence[int], what: str) -> tuple[np.ndarray, tuple[int, ...]]:
    mat = as_complex(mat)
    dims = check_dims(mat, dims)
    dev = herm_deviation(mat)
    if dev > tolerances.herm:
        raise ValueError(f"{what} is not Hermitian: max |m - m^dag| = {dev:.3e}")
    lam_min = float(np.linalg.eigvalsh(mat)[0])
    if lam_min < -tolerances.psd:
        raise ValueError(f"{what} is not PSD: min eigenvalue {lam_min:.3e}")
    return mat, dims


@dataclass(frozen=True)
class QuantumState:
    """Density operator with an explicit subsystem-dimension list."""

    mat: np.ndarray
    dims: tuple[int, ...]

    def __post_init__(self):
        mat, dims = _validate_operator(self.mat, self.dims, "state")
        tr = float(np.trace(mat).real)
        if abs(tr - 1.0) > TRACE_TOL:
            raise ValueError(f"state trace {tr!r} deviates from 1 by more than {TRACE_TOL:.0e}")
        object.__setattr__(self, "mat", _freeze(mat))
        object.__setattr__(self, "dims", dims)

    @property
    def dim(self) -> int:
        return self.mat.shape[0]

    def marginal(self, keep: int) -> np.ndarray:
        return partial_trace(self.mat, self.dims, {keep})


@dataclass(frozen=True)
class SubnormalizedState:
    """PSD operator with trace in [0, 1]; an entry of a state ensemble."""

    mat: np.ndarray
    dims: tuple[int, ...]

    def __post_init__(self):
        mat, dims = _validate_operator(self.mat, self.dims, "subnormalized state")
        tr = float(np.trace(mat).real)
        if tr < -TRACE_TOL or tr > 1.0 + TRACE_TOL:
            raise ValueError(f"subnormalized state trace {tr!r} outside [0, 1]")
        object.__setattr__(self, "mat", _freeze(mat))
        object.__setattr__(self, "dims", dims)

    @property
    def trace(self) -> float:
        return float(np.trace(self.mat).real)

    def normalized(self) -> QuantumState:
        tr = self.trace
        if tr <= 0.0:
            raise ValueError("cannot normalize a trace-zero state")
        return QuantumState(np.asarray(self.mat) / tr, self.dims)


@dataclass(frozen=True)
class Povm:
    """Finite outcome-indexed list of PSD effects summing to the identity."""

    effects: tuple[np.ndarray, ...]
    dims: tuple[int, ...]

    def __post_init__(self):
        if not self.effects:
            raise ValueError("a POVM needs at least one effect")
        frozen = []
        dims = None
        for i, eff in enumerate(self.effects):
            mat, dims = _validate_operator(eff, self.dims, f"effect {i}")
            frozen.append(_freeze(mat))
        total = sum(np.asarray(e) for e in frozen)
        dev = float(np.max(np.abs(total - np.eye(total.shape[0]))))
        if dev > COMPLETENESS_TOL:
            idx = np.unravel_index(np.argmax(np.abs(total - np.eye(total.shape[0]))), total.shape)
            raise ValueError(
                f"effects do not sum to identity: max deviation {dev:.3e} at entry {tuple(int(k) for k in idx)}"
            )
        object.__setattr__(self, "effects", tuple(frozen))
        object.__setattr__(self, "dims", dims)

    @property
    def n_outcomes(self) -> int:
        return len(self.effects)

    @property
    def dim(self) -> int:
        return self.effects[0].shape[0]


@dataclass(frozen=True)
class PureState:
    """Unit vector on a composite space."""

    vec: np.ndarray
    dims: tuple[int, ...]

    def __post_init__(self):
        v = np.asarray(self.vec, dtype=np.complex128).reshape(-1)
        dims = tuple(int(d) for d in self.dims)
        if int(np.prod(dims)) != v.size:
            raise ValueError(f"dims {dims} do not match vector length {v.size}")
        norm = float(np.linalg.norm(v))
        if abs(norm - 1.0) > TRACE_TOL:
            raise ValueError(f"pure state norm {norm!r} deviates from 1")
        v = v.copy()
        v.setflags(write=False)
        object.__setattr__(self, "vec", v)
        object.__setattr__(self, "dims", dims)

    def projector(self) -> np.ndarray:
        return np.outer(self.vec, self.vec.conj())

    def to_state(self) -> QuantumState:
        return QuantumState(self.projector(), self.dims)


# ---------------------------------------------------------------------------
# canonical families


def max_entangled(d: int) -> PureState:
    """(1/sqrt(d)) sum_i |ii> on dims [d, d]."""
    if d < 2:
        raise ValueError(f"local dimension must be >= 2, got {d}")
    v = np.zeros(d * d, dtype=np.complex128)
    v[:: d + 1] = 1.0 / np.sqrt(d)
    return PureState(v, (d, d))


def weyl_unitary(d: int, a: int, b: int) -> np.ndarray:
    """Discrete Weyl unitary shift^a @ clock^b with clock = diag(omega^k)."""
    shift = np.zeros((d, d), dtype=np.complex128)
    shift[(np.arange(d) + 1) % d, np.arange(d)] = 1.0
    omega = np.exp(2j * np.pi / d)
    clock = np.diag(omega ** np.arange(d))
    return np.linalg.matrix_power(shift, a) @ np.linalg.matrix_power(clock, b)


def bell_povm(d: int) -> Povm:
    """The d^2 rank-1 projectors onto (1 x W_ab)|psi+_d>."""
    if d < 2:
        raise ValueError(f"local dimension must be >= 2, got {d}")
    psi = max_entangled(d).vec
    eye = np.eye(d, dtype=np.complex128)
    effects = []
    for a in range(d):
        for b in range(d):
            u = kron(eye, weyl_unitary(d, a, b))
            vec = u @ psi
            effects.append(np.outer(vec, vec.conj()))
    return Povm(tuple(effects), (d, d))


def isotropic(d: int, p: float) -> QuantumState:
    """p |psi+_d><psi+_d| + (1-p) I/d^2 on dims [d, d]."""
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"visibility p must lie in [0, 1], got {p}")
    proj = max_entangled(d).projector()
    mat = p * proj + (1.0 - p) * np.eye(d * d) / d**2
    return QuantumState(mat, (d, d))


def isotropic_with_loss(d: int, p: float, q: float) -> QuantumState:
    """Visibility-p isotropic state that is lost (flagged vacuum) with probability 1-q.

    The d-dimensional second factor is embedded in the first d levels of a
    (d+1)-dimensional space; the vacuum flag |0̸> sits at level d.  Returned
    dims are [d, d+1].
    """
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"visibility p must lie in [0, 1], got {p}")
    if not 0.0 <= q <= 1.0:
        raise ValueError(f"transmission q must lie in [0, 1], got {q}")
    iso = isotropic(d, p).mat
    mat = q * embed_matrix(iso, (d, d), (d, d + 1))
    vac = np.zeros((d + 1, d + 1), dtype=np.complex128)
    vac[d, d] = 1.0
    mat = mat + (1.0 - q) * kron(np.eye(d) / d, vac)
    return QuantumState(mat, (d, d + 1))


# ---------------------------------------------------------------------------
# random instances


def random_state(dims: Sequence[int], seed: int) -> QuantumState:
    """Normalized G G^dag with G complex Gaussian (full rank almost surely)."""
    dims = tuple(int(d) for d in dims)
    n = int(np.prod(dims))
    rng = np.random.default_rng(seed)
    g = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    mat = g @ g.conj().T
    return QuantumState(mat / np.trace(mat).real, dims)


def random_povm(dims: Sequence[int], outcomes: int, seed: int) -> Povm:
    """Random POVM {S^-1/2 G_i G_i^dag S^-1/2} with S the unnormalized sum."""
    if outcomes < 1:
        raise ValueError(f"need at least one outcome, got {outcomes}")
    dims = tuple(int(d) for d in dims)
    n = int(np.prod(dims))
    rng = np.random.default_rng(seed)
    raw = []
    for _ in range(outcomes):
        g = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
        raw.append(g @ g.conj().T)
    total = sum(raw)
    w, v = np.linalg.eigh(total)
    inv_sqrt = (v * (1.0 / np.sqrt(w))) @ v.conj().T
    effects = tuple(inv_sqrt @ r @ inv_sqrt for r in raw)
    return Povm(effects, dims)


def random_pure(dims: Sequence[int], schmidt_rank: int, seed: int) -> PureState:
    """Random bipartite pure state with exactly the requested Schmidt rank."""
    dims = tuple(int(d) for d in dims)
    if len(dims) != 2:
        raise ValueError(f"random_pure needs a bipartite dimension list, got {dims}")
    da, db = dims
    if not 1 <= schmidt_rank <= min(da, db):
        raise ValueError(f"schmidt_rank {schmidt_rank} infeasible for dims {dims}")
    rng = np.random.default_rng(seed)

    def _orth_cols(n, k):
        g = rng.standard_normal((n, k)) + 1j * rng.standard_normal((n, k))
        q, _ = np.linalg.qr(g)
        return q[:, :k]

    u = _orth_cols(da, schmidt_rank)
    w = _orth_cols(db, schmidt_rank)
    # strictly positive coefficients keep the rank exact
    coeff = rng.uniform(0.2, 1.0, size=schmidt_rank)
    coeff = coeff / np.linalg.norm(coeff)
    vec = np.zeros(da * db, dtype=np.complex128)
    for c, uk, wk in zip(coeff, u.T, w.T):
        vec += c * np.kron(uk, wk)
    return PureState(vec / np.linalg.norm(vec), dims)


def random_separable_state(dims: Sequence[int], terms: int, seed: int) -> QuantumState:
    """Convex mixture of ``terms`` random product pure states."""
    dims = tuple(int(d) for d in dims)
    if len(dims) != 2:
        raise ValueError(f"separable construction needs two factors, got {dims}")
    rng = np.random.default_rng(seed)
    da, db = dims
    mat = np.zeros((da * db, da * db), dtype=np.complex128)
    probs = rng.dirichlet(np.ones(terms))
    for p in probs:
        a = rng.standard_normal(da) + 1j * rng.standard_normal(da)
        b = rng.standard_normal(db) + 1j * rng.standard_normal(db)
        v = np.kron(a / np.linalg.norm(a), b / np.linalg.norm(b))
        mat += p * np.outer(v, v.conj())
    return QuantumState(mat, dims)


def random_separable_povm(dims: Sequence[int], outcomes: int, seed: int) -> Povm:
    """Random separable POVM: coarse-grained product of local POVMs.

    Each effect is a sum of products A x B, so separability holds by
    construction and completeness is inherited from the local POVMs.
    """
    dims = tuple(int(d) for d in dims)
    if len(dims) != 2:
        raise ValueError(f"separable construction needs two factors, got {dims}")
    if outcomes < 1:
        raise ValueError(f"need at least one outcome, got {outcomes}")
    rng = np.random.default_rng(seed)
    da, db = dims
    pa = random_povm((da,), max(2, outcomes), int(rng.integers(2**63)))
    pb = random_povm((db,), max(2, outcomes), int(rng.integers(2**63)))
    products = [kron(a, b) for a in pa.effects for b in pb.effects]
    # random surjective assignment of product outcomes to coarse outcomes
    n = len(products)
    if outcomes > n:
        raise ValueError(f"cannot split {n} product outcomes into {outcomes} groups")
    labels = np.concatenate([np.arange(outcomes), rng.integers(0, outcomes, size=n - outcomes)])
    rng.shuffle(labels)
    effects = [np.zeros((da * db, da * db), dtype=np.complex128) for _ in range(outcomes)]
    for lab, prod in zip(labels, products):
        effects[int(lab)] += prod
    return Povm(tuple(effects), dims)
