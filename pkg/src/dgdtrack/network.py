"""Agent graphs and gossip mixing matrices.

Generates connected random geometric graphs on the unit disk, builds the
doubly stochastic Metropolis mixing matrix for a graph, and computes the
spectral quantities (lambda2, lambdaN, topology factor) that the tracking
bounds consume.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NumericalError, ParameterError

__all__ = [
    "Graph",
    "MixingMatrix",
    "graph_at_radius",
    "graph_from_positions",
    "generate_rgg",
    "metropolis_mixing",
    "max_stable_step",
    "graph_to_csv",
    "mixing_to_csv",
]

# Growth attempts are capped well past the point where the radius covers the
# unit disk (diameter 2), so a non-terminating loop indicates corrupt input.
_MAX_GROWTH_STEPS = 200

_SYM_TOL = 1e-12
_ROWSUM_TOL = 1e-12
_LAMBDA1_TOL = 1e-10
_EIG_RESIDUAL_TOL = 1e-8


@dataclass(frozen=True)
class Graph:
    """Undirected geometric graph: agent positions plus a connection radius."""

    n_agents: int
    positions: np.ndarray  # (N, 2), points in the unit disk
    edges: tuple  # sorted tuple of (i, j) pairs with i < j
    radius_used: float

    def __post_init__(self):
        self.positions.setflags(write=False)

    @property
    def degrees(self) -> np.ndarray:
        deg = np.zeros(self.n_agents, dtype=np.int64)
        for i, j in self.edges:
            deg[i] += 1
            deg[j] += 1
        return deg

    def neighbors(self, i: int) -> list:
        out = []
        for a, b in self.edges:
            if a == i:
                out.append(b)
            elif b == i:
                out.append(a)
        return sorted(out)

    @property
    def is_connected(self) -> bool:
        return _component_count(self.n_agents, self.edges) == 1


@dataclass(frozen=True)
class MixingMatrix:
    """Symmetric doubly stochastic mixing matrix with cached spectrum.

    ``spectrum`` is sorted descending, ``topology_factor`` is
    1 / (1 - lambda2).  For a single agent the spectrum is [1.0], lambda2
    is NaN and the topology factor is the +inf sentinel; the bias bound is
    reported as zero in that case because the weighted global gradient
    vanishes at the optimizer.
    """

    entries: np.ndarray  # (N, N)
    spectrum: np.ndarray  # eigenvalues, descending
    lambda2: float
    lambdaN: float
    topology_factor: float

    def __post_init__(self):
        self.entries.setflags(write=False)
        self.spectrum.setflags(write=False)

    @property
    def n_agents(self) -> int:
        return self.entries.shape[0]


def _component_count(n, edges):
    """Union-find component count over an edge list."""
    parent = list(range(n))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for i, j in edges:
        ri, rj = find(i), find(j)
        if ri != rj:
            parent[ri] = rj
    return len({find(i) for i in range(n)})


def _edges_at_radius(positions, radius):
    diff = positions[:, None, :] - positions[None, :, :]
    dist = np.sqrt(np.sum(diff * diff, axis=-1))
    n = positions.shape[0]
    edges = []
    for i in range(n):
        for j in range(i + 1, n):
            if dist[i, j] <= radius:
                edges.append((i, j))
    return tuple(edges)


def _check_radius(radius):
    if not np.isfinite(radius) or radius <= 0:
        raise ParameterError(f"connection radius must be finite and positive, got {radius}")


def graph_at_radius(positions, radius: float) -> Graph:
    """Build a Graph with a fixed connection radius (may be disconnected)."""
    _check_radius(radius)
    positions = np.array(positions, dtype=np.float64)
    if positions.ndim != 2 or positions.shape[1] != 2:
        raise ParameterError("positions must be an (N, 2) array")
    return Graph(
        n_agents=positions.shape[0],
        positions=positions,
        edges=_edges_at_radius(positions, radius),
        radius_used=float(radius),
    )


def graph_from_positions(positions, initial_radius: float, growth_factor: float = 1.1) -> Graph:
    """Grow the radius geometrically, positions fixed, until the graph connects.

    Returns the graph at radius ``initial_radius * growth_factor**k`` for the
    smallest integer k >= 0 that yields a single connected component.
    """
    _check_radius(initial_radius)
    if not np.isfinite(growth_factor) or growth_factor <= 1.0:
        raise ParameterError(f"growth_factor must be > 1, got {growth_factor}")
    positions = np.array(positions, dtype=np.float64)
    radius = float(initial_radius)
    for _ in range(_MAX_GROWTH_STEPS):
        graph = graph_at_radius(positions, radius)
        if graph.is_connected:
            return graph
        radius *= growth_factor
    raise NumericalError("radius growth did not reach connectivity; positions corrupt?")


def generate_rgg(
    n_agents: int,
    initial_radius: float,
    growth_factor: float = 1.1,
    rng: np.random.Generator | None = None,
) -> Graph:
    """Sample a connected random geometric graph on the unit disk.

    Positions are area-uniform on the disk (angle uniform, radius as the
    square root of a uniform draw).  The connection threshold starts at
    ``initial_radius`` and is grown geometrically until connected, with the
    sampled positions held fixed across retries.
    """
    if n_agents < 1:
        raise ParameterError(f"n_agents must be >= 1, got {n_agents}")
    if rng is None:
        rng = np.random.default_rng()
    theta = rng.uniform(0.0, 2.0 * np.pi, size=n_agents)
    r = np.sqrt(rng.uniform(0.0, 1.0, size=n_agents))
    positions = np.column_stack((r * np.cos(theta), r * np.sin(theta)))
    return graph_from_positions(positions, initial_radius, growth_factor)


def metropolis_mixing(graph: Graph) -> MixingMatrix:
    """Metropolis mixing matrix for a connected graph.

    Off-diagonal weight between neighbors i, j is 1 / (1 + max(d_i, d_j));
    the diagonal absorbs the remainder so every row sums to one.  The
    spectrum comes from a symmetric eigensolver and is self-checked against
    the eigenvalue residual before the matrix is accepted.
    """
    n = graph.n_agents
    if not graph.is_connected:
        raise ParameterError("graph must be connected (lambda2 would hit 1, breaking the topology factor)")

    m = np.zeros((n, n), dtype=np.float64)
    deg = graph.degrees
    for i, j in graph.edges:
        w = 1.0 / (1.0 + max(deg[i], deg[j]))
        m[i, j] = w
        m[j, i] = w
    for i in range(n):
        m[i, i] = 1.0 - np.sum(m[i])  # diagonal still zero here

    eigvals, eigvecs = np.linalg.eigh(m)
    residual = m @ eigvecs - eigvecs * eigvals
    worst = float(np.max(np.linalg.norm(residual, axis=0))) if n > 0 else 0.0
    if worst > _EIG_RESIDUAL_TOL:
        raise NumericalError(f"eigendecomposition residual {worst:.3e} above {_EIG_RESIDUAL_TOL}")
    spectrum = eigvals[::-1].copy()

    if n == 1:
        mix = MixingMatrix(
            entries=m,
            spectrum=spectrum,
            lambda2=float("nan"),
            lambdaN=float(spectrum[-1]),
            topology_factor=float("inf"),
        )
    else:
        lambda2 = float(spectrum[1])
        mix = MixingMatrix(
            entries=m,
            spectrum=spectrum,
            lambda2=lambda2,
            lambdaN=float(spectrum[-1]),
            topology_factor=1.0 / (1.0 - lambda2),
        )
    _check_mixing_invariants(mix, graph)
    return mix


def _check_mixing_invariants(mix: MixingMatrix, graph: Graph):
    m = mix.entries
    n = mix.n_agents
    if np.max(np.abs(m - m.T)) > _SYM_TOL:
        raise NumericalError("mixing matrix not symmetric within tolerance")
    if np.max(np.abs(m.sum(axis=1) - 1.0)) > _ROWSUM_TOL:
        raise NumericalError("mixing matrix rows do not sum to 1 within tolerance")
    if abs(mix.spectrum[0] - 1.0) > _LAMBDA1_TOL:
        raise NumericalError(f"leading eigenvalue {mix.spectrum[0]} differs from 1")
    if mix.lambdaN <= -1.0:
        raise NumericalError(f"smallest eigenvalue {mix.lambdaN} not above -1")
    if n > 1 and not mix.lambda2 < 1.0:
        raise NumericalError(f"lambda2 {mix.lambda2} not below 1")
    edge_set = set(graph.edges)
    for i in range(n):
        for j in range(i + 1, n):
            if (i, j) not in edge_set and m[i, j] != 0.0:
                raise NumericalError(f"nonzero weight on non-edge ({i}, {j})")


def max_stable_step(mix: MixingMatrix, mu: float, L: float) -> float:
    """Largest step size for which the DGD map is a contraction: (1 + lambdaN) / (L + mu)."""
    if not (0 < mu <= L):
        raise ParameterError(f"need 0 < mu <= L, got mu={mu}, L={L}")
    return (1.0 + mix.lambdaN) / (L + mu)


def graph_to_csv(graph: Graph, path):
    """Write the edge list as CSV rows ``i,j``."""
    with open(path, "w") as fh:
        fh.write("i,j\n")
        for i, j in graph.edges:
            fh.write(f"{i},{j}\n")


def mixing_to_csv(mix: MixingMatrix, path):
    """Write the dense mixing matrix as CSV with 17-significant-digit floats."""
    with open(path, "w") as fh:
        for row in mix.entries:
            fh.write(",".join(f"{v:.17g}" for v in row) + "\n")
