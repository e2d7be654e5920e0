"""Three-population divergence model with microsatellite loci.

Genealogies follow the continuous-time structured coalescent: inside each
deme every pair of lineages merges at rate 1/(2 Ne) per generation. At time
``t`` population 3 joins its source population, at ``t_prime`` the two
remaining demes join. Mutations follow the stepwise model (+1 or -1 with
equal probability) at ``theta`` per generation along every branch.

The simulators are vectorised over a batch of independent genealogies, one
per locus (and per dataset when building reference tables).
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from ..numerics import DomainError, SeedSpec
from ..stats import MicrosatDataset
from .base import ModelSpec, UnsupportedError

__all__ = [
    "PopGenConfig",
    "Genealogy",
    "GenealogyBatch",
    "simulate_genealogy",
    "simulate_genealogies",
    "drop_mutations",
    "mutate_batch",
    "popgen_model",
    "THETA_PRIOR",
]

THETA_PRIOR = (1e-4, 1e-2)
TOPOLOGIES = ("pop3_from_pop1", "pop3_from_pop2")


@dataclass(frozen=True)
class PopGenConfig:
    Ne: float = 60.0
    t_prime: float = 60.0
    t: float = 30.0
    n_diploid: int = 50
    n_loci: int = 100
    topology: str = "pop3_from_pop1"

    def __post_init__(self):
        if not 0 < self.t < self.t_prime:
            raise DomainError("need 0 < t < t_prime")
        if self.Ne < 1 or self.n_diploid < 1 or self.n_loci < 1:
            raise DomainError("Ne, n_diploid and n_loci must be >= 1")
        if self.topology not in TOPOLOGIES:
            raise DomainError(f"topology must be one of {TOPOLOGIES}")

    @property
    def copies(self) -> int:
        return 2 * self.n_diploid

    @property
    def n_leaves(self) -> int:
        return 3 * self.copies

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "PopGenConfig":
        return cls(**d)


@dataclass(frozen=True)
class Genealogy:
    """A rooted binary tree. Leaves are nodes ``0..n_leaves-1``; internal
    nodes are numbered in order of creation, so a parent always has a
    larger id than its children and the root is the last node."""

    parent: np.ndarray
    time: np.ndarray
    leaf_pop: np.ndarray

    @property
    def n_leaves(self) -> int:
        return len(self.leaf_pop)

    @property
    def root(self) -> int:
        return len(self.parent) - 1

    def branch_lengths(self) -> np.ndarray:
        """Length of the branch above each non-root node."""
        p = self.parent[:-1]
        return self.time[p] - self.time[:-1]

    def total_branch_length(self) -> float:
        return float(self.branch_lengths().sum())

    def tmrca(self, a: int, b: int) -> float:
        ancestors = set()
        node = a
        while node >= 0:
            ancestors.add(node)
            node = self.parent[node]
        node = b
        while node not in ancestors:
            node = self.parent[node]
        return float(self.time[node])


@dataclass(frozen=True)
class GenealogyBatch:
    parent: np.ndarray  # (B, 2N-1)
    time: np.ndarray  # (B, 2N-1)
    leaf_pop: np.ndarray  # (N,)

    def __len__(self):
        return self.parent.shape[0]

    def __getitem__(self, i) -> Genealogy:
        return Genealogy(self.parent[i], self.time[i], self.leaf_pop)


def _move_lineages(lin, cnt, rows, src, dst):
    cs = cnt[src, rows]
    cd = cnt[dst, rows]
    k = np.arange(int(cs.max()) if rows.size else 0)
    r, kk = np.nonzero(k[None, :] < cs[:, None])
    lin[dst, rows[r], cd[r] + kk] = lin[src, rows[r], kk]
    cnt[dst, rows] += cs
    cnt[src, rows] = 0


def simulate_genealogies(cfg: PopGenConfig, count: int, rng: np.random.Generator) -> GenealogyBatch:
    """Simulate ``count`` independent genealogies for one sampling design."""
    k0 = cfg.copies
    N = 3 * k0
    n_nodes = 2 * N - 1
    B = int(count)

    # lin[deme, b, slot] holds node ids of live lineages; cnt[deme, b] counts them
    lin = np.zeros((3, B, N), dtype=np.int64)
    for d in range(3):
        lin[d, :, :k0] = d * k0 + np.arange(k0)
    cnt = np.zeros((3, B), dtype=np.int64)
    cnt[:, :] = k0
    parent = np.full((B, n_nodes), -1, dtype=np.int64)
    ntime = np.zeros((B, n_nodes))
    now = np.zeros(B)
    phase = np.zeros(B, dtype=np.int64)
    next_id = np.full(B, N, dtype=np.int64)
    boundary = np.array([cfg.t, cfg.t_prime, np.inf])
    source = TOPOLOGIES.index(cfg.topology)
    pair_rate = 1.0 / (2.0 * cfg.Ne)

    while True:
        live = np.nonzero((phase < 2) | (cnt.sum(axis=0) > 1))[0]
        if live.size == 0:
            break
        c = cnt[:, live]
        pairs = 0.5 * c * (c - 1)
        rate = pairs.sum(axis=0) * pair_rate
        with np.errstate(divide="ignore"):
            wait = rng.standard_exponential(live.size) / rate
        hit = now[live] + wait >= boundary[phase[live]]

        crossed = live[hit]
        if crossed.size:
            now[crossed] = boundary[phase[crossed]]
            first = crossed[phase[crossed] == 0]
            second = crossed[phase[crossed] == 1]
            _move_lineages(lin, cnt, first, 2, source)
            _move_lineages(lin, cnt, second, 1, 0)
            phase[crossed] += 1

        co = live[~hit]
        if co.size:
            now[co] += wait[~hit]
            pc = pairs[:, ~hit]
            u = rng.random(co.size) * pc.sum(axis=0)
            deme = (u >= pc[0]).astype(np.int64) + (u >= pc[0] + pc[1])
            cc = cnt[deme, co]
            i = (rng.random(co.size) * cc).astype(np.int64)
            j = (rng.random(co.size) * (cc - 1)).astype(np.int64)
            j += j >= i
            a = lin[deme, co, i]
            b = lin[deme, co, j]
            new = next_id[co]
            parent[co, a] = new
            parent[co, b] = new
            ntime[co, new] = now[co]
            lin[deme, co, i] = new
            lin[deme, co, j] = lin[deme, co, cc - 1]
            cnt[deme, co] -= 1
            next_id[co] += 1

    leaf_pop = np.repeat(np.arange(1, 4), k0)
    return GenealogyBatch(parent, ntime, leaf_pop)


def simulate_genealogy(cfg: PopGenConfig, seed: SeedSpec) -> Genealogy:
    return simulate_genealogies(cfg, 1, seed.rng())[0]


def mutate_batch(batch: GenealogyBatch, thetas, rng: np.random.Generator) -> np.ndarray:
    """Stepwise mutations on every genealogy; returns ``(B, n_leaves)`` allele sizes.

    The root carries allele size 0.
    """
    thetas = np.broadcast_to(np.asarray(thetas, dtype=float), (len(batch),))
    if np.any(thetas < 0):
        raise DomainError("mutation rate must be non-negative")
    B, n_nodes = batch.parent.shape
    N = len(batch.leaf_pop)
    cols = np.arange(B)
    par = batch.parent.T[:-1]  # (n_nodes-1, B), root excluded
    length = batch.time.T[par, cols] - batch.time.T[:-1]
    n_mut = rng.poisson(length * thetas)
    step = 2 * rng.binomial(n_mut, 0.5) - n_mut
    allele = np.zeros((n_nodes, B), dtype=np.int64)
    for node in range(n_nodes - 2, -1, -1):
        allele[node] = allele[par[node], cols] + step[node]
    return allele[:N].T.copy()


def drop_mutations(g: Genealogy, theta: float, seed: SeedSpec) -> np.ndarray:
    if theta < 0:
        raise DomainError("mutation rate must be non-negative")
    batch = GenealogyBatch(g.parent[None], g.time[None], g.leaf_pop)
    return mutate_batch(batch, theta, seed.rng())[0]


def _split_time_mean(cfg: PopGenConfig):
    # E (delta mu)^2 between populations: 2 theta x (time since the pair of demes split)
    pairs = {
        "pop3_from_pop1": {(1, 2): cfg.t_prime, (1, 3): cfg.t, (2, 3): cfg.t_prime},
        "pop3_from_pop2": {(1, 2): cfg.t_prime, (1, 3): cfg.t_prime, (2, 3): cfg.t},
    }[cfg.topology]

    def mean(thetas, spec):
        if spec.func.__name__ != "stat_delta_mu_sq":
            raise UnsupportedError(f"popgen model has no mean map for {spec.name!r}")
        key = tuple(sorted(spec.params))
        return 2.0 * thetas[..., 0] * pairs[key]

    return mean


def popgen_model(cfg: PopGenConfig, prior_lo: float = THETA_PRIOR[0],
                 prior_hi: float = THETA_PRIOR[1]) -> ModelSpec:
    """Microsatellite model with a uniform prior on the mutation rate theta.

    Simulated datasets have shape ``(n_loci, 3, 2*n_diploid)``; the sample
    size argument of the simulator is the number of loci.
    """
    if not 0 < prior_lo < prior_hi:
        raise DomainError("need 0 < prior_lo < prior_hi")

    def prior(rng, m):
        return prior_lo + (prior_hi - prior_lo) * rng.random((m, 1))

    def simulate(thetas, n_loci, rng):
        thetas = np.asarray(thetas, dtype=float).reshape(-1)
        m = thetas.size
        batch = simulate_genealogies(cfg, m * n_loci, rng)
        alleles = mutate_batch(batch, np.repeat(thetas, n_loci), rng)
        return alleles.reshape(m, n_loci, 3, cfg.copies)

    name = "popgen1" if cfg.topology == "pop3_from_pop1" else "popgen2"
    return ModelSpec(name, 1, "microsat", prior, simulate, ((prior_lo, prior_hi),),
                     _split_time_mean(cfg), ("theta",))


def as_dataset(alleles) -> MicrosatDataset:
    return MicrosatDataset(np.asarray(alleles))
