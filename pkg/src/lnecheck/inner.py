"""Inner distances: arc length by quadrature and geodesics on sample graphs.

Graph geodesics use chordal edge weights, so on curves they approach the
true inner distance from below as the sample is refined.  Most samples of
arc networks are long chains of degree-two vertices; :class:`GeodesicEngine`
contracts those chains so that any pair distance costs a handful of array
lookups instead of a shortest-path search.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.sparse import coo_matrix, csr_matrix
from scipy.sparse.csgraph import connected_components, dijkstra
from scipy.spatial import cKDTree

from .errors import QuadratureFailure, ScaleError, Unreachable
from .geometry import PROJECTIVE, ambient_distance
from .sets import ARCS, JUNCTION_TOL, ParamArc, Sample, SetDescriptor, median_spacing

QUAD_TOL = 1e-9
QUAD_DEPTH = 40
MAX_SKELETON_NODES = 3000


# --------------------------------------------------------------------------
# quadrature


def adaptive_simpson(f, a: float, b: float, tol: float = QUAD_TOL, max_depth: int = QUAD_DEPTH) -> float:
    """Adaptive Simpson rule with absolute tolerance ``tol``.

    All intervals of one refinement level are evaluated in a single
    vectorized call of ``f``.  The tolerance is floored at the rounding
    level of the running total, below which no rule can make progress.
    """
    if b == a:
        return 0.0
    sign = 1.0
    if b < a:
        a, b, sign = b, a, -1.0
    lo, hi = np.array([a]), np.array([b])
    mid = 0.5 * (lo + hi)
    flo, fmid, fhi = f(lo), f(mid), f(hi)
    whole = (hi - lo) / 6.0 * (flo + 4 * fmid + fhi)
    tols = np.array([tol])
    total = 0.0
    scale = abs(float(whole[0]))
    for depth in range(max_depth + 1):
        lm, rm = 0.5 * (lo + mid), 0.5 * (mid + hi)
        flm, frm = f(lm), f(rm)
        left = (mid - lo) / 6.0 * (flo + 4 * flm + fmid)
        right = (hi - mid) / 6.0 * (fmid + 4 * frm + fhi)
        with np.errstate(invalid="ignore"):
            err = left + right - whole
        floor = 64 * np.finfo(float).eps * scale * (hi - lo) / (b - a)
        done = np.abs(err) <= np.maximum(15.0 * tols, floor)
        total += float(np.sum((left + right + err / 15.0)[done]))
        k = ~done
        if not np.any(k):
            return sign * total
        if depth == max_depth:
            break
        lo, mid, hi = np.concatenate([lo[k], mid[k]]), np.concatenate([lm[k], rm[k]]), np.concatenate([mid[k], hi[k]])
        flo, fmid, fhi = (np.concatenate([flo[k], fmid[k]]), np.concatenate([flm[k], frm[k]]),
                          np.concatenate([fmid[k], fhi[k]]))
        whole = np.concatenate([left[k], right[k]])
        tols = np.concatenate([tols[k], tols[k]]) / 2
    raise QuadratureFailure(f"adaptive Simpson did not converge within depth {max_depth}")


def arc_length(arc: ParamArc, a: float, b: float, tol: float = QUAD_TOL) -> float:
    """Length of ``arc`` restricted to ``[a, b]``."""
    if not tol > 0:
        raise ValueError("tolerance must be positive")
    if not (math.isfinite(a) and math.isfinite(b)):
        raise ValueError("arc length needs a bounded parameter interval")
    lo, hi = min(a, b), max(a, b)
    if lo < arc.a - 1e-12 or hi > arc.b + 1e-12:
        raise ValueError(f"[{lo}, {hi}] is outside the domain of arc {arc.label!r}")
    # split into pieces so oscillating arcs are not sampled by aliasing
    pieces = max(1, min(4096, int(math.ceil((hi - lo) / 0.5))))
    knots = np.linspace(lo, hi, pieces + 1)
    total = 0.0
    for u, v in zip(knots[:-1], knots[1:]):
        total += adaptive_simpson(arc.speed, u, v, tol / pieces)
    return total


# --------------------------------------------------------------------------
# graphs


@dataclass(frozen=True, eq=False)
class ProximityGraph:
    """Symmetric weighted graph over the points of a sample."""

    sample: Sample
    edges: np.ndarray
    weights: np.ndarray
    eps: float | None
    labels: np.ndarray
    n_components: int

    @property
    def n(self) -> int:
        return len(self.sample)

    def matrix(self) -> csr_matrix:
        n = self.n
        e, w = self.edges, self.weights
        m = coo_matrix((np.concatenate([w, w]), (np.concatenate([e[:, 0], e[:, 1]]),
                                                 np.concatenate([e[:, 1], e[:, 0]]))), shape=(n, n))
        return m.tocsr()

    def with_edges(self, extra: np.ndarray) -> "ProximityGraph":
        extra = np.asarray(extra, dtype=np.int64).reshape(-1, 2)
        return _make_graph(self.sample, np.concatenate([self.edges, extra]), self.eps)


def _make_graph(s: Sample, edges: np.ndarray, eps: float | None) -> ProximityGraph:
    edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    edges = np.sort(edges, axis=1)
    edges = edges[edges[:, 0] != edges[:, 1]]
    edges = np.unique(edges, axis=0)
    if len(edges):
        w = np.atleast_1d(ambient_distance(s.metric, s.points[edges[:, 0]], s.points[edges[:, 1]]))
    else:
        w = np.zeros(0)
    # coincident points still need a positive weight for sparse storage
    w = np.maximum(w, 1e-300)
    n = len(s)
    if len(edges):
        m = coo_matrix((np.ones(len(edges)), (edges[:, 0], edges[:, 1])), shape=(n, n))
        ncomp, labels = connected_components(m, directed=False)
    else:
        ncomp, labels = n, np.arange(n)
    return ProximityGraph(s, edges, w, eps, labels, ncomp)


def build_graph(s: Sample, eps: float | None = None, relative: bool = False) -> ProximityGraph:
    """The ``eps``-neighborhood graph of ``s`` under its ambient metric.

    ``eps`` defaults to three times the median nearest-neighbor spacing.
    With ``relative`` the threshold for a pair is ``eps`` times the smaller
    of their radial tags (floored at the sample floor).
    """
    pts = s.points
    n = len(pts)
    proj = s.metric.kind == PROJECTIVE
    scale = None
    if relative:
        scale = np.maximum(np.nan_to_num(s.tags, nan=1.0), max(s.floor, 1e-300))
    if eps is None:
        eps = 3.0 * median_spacing(pts, scale)
    if not eps > 0:
        raise ValueError("eps must be positive")
    # projective pairs are found as chord pairs among the representatives and their negatives
    chord = 2.0 * math.sin(min(eps, math.pi / 2) / 2.0) if proj else eps
    search = np.concatenate([pts, -pts]) if proj else pts
    tree = cKDTree(search)
    if scale is None:
        pairs = tree.query_pairs(chord, output_type="ndarray")
    else:
        rows = []
        for i, js in enumerate(tree.query_ball_point(pts, chord * scale)):
            js = np.asarray(js, dtype=np.int64)
            js = js[js > i]
            rows.append(np.stack([np.full(len(js), i), js], axis=1))
        pairs = np.concatenate(rows) if rows else np.zeros((0, 2), dtype=np.int64)
    if proj:
        pairs = pairs % n
    pairs = np.sort(pairs.reshape(-1, 2), axis=1)
    pairs = pairs[pairs[:, 0] != pairs[:, 1]]
    if len(pairs):
        d = np.atleast_1d(ambient_distance(s.metric, pts[pairs[:, 0]], pts[pairs[:, 1]]))
        lim = eps if scale is None else eps * np.minimum(scale[pairs[:, 0]], scale[pairs[:, 1]])
        pairs = pairs[d <= lim * (1 + 1e-12)]
    if len(pairs) == 0 and n > 1:
        raise ScaleError(f"eps={eps:g} leaves the graph fully disconnected")
    return _make_graph(s, pairs, eps)


def chain_graph(s: Sample) -> ProximityGraph:
    """Graph whose edges are the structural links of ``s``."""
    if s.links is None:
        raise ValueError("sample carries no links")
    return _make_graph(s, s.links, None)


def sample_graph(s: Sample, eps: float | None = None) -> ProximityGraph:
    """Links when the sample has them, an eps-graph otherwise."""
    if s.links is not None and eps is None:
        return chain_graph(s)
    return build_graph(s, eps, relative=s.relative)


# --------------------------------------------------------------------------
# geodesics


class GeodesicEngine:
    """Shortest-path distances on a :class:`ProximityGraph`.

    Vertices of degree other than two become skeleton nodes; every other
    vertex sits on a chain between two nodes at known offsets.  Node-to-node
    distances come from Dijkstra on the contracted graph, after which
    ``d(v, w)`` is a minimum over the four ways of leaving the two chains.
    Graphs with too many nodes fall back to plain Dijkstra rows.
    """

    def __init__(self, graph: ProximityGraph, max_nodes: int = MAX_SKELETON_NODES):
        self.graph = graph
        self.n = graph.n
        self.labels = graph.labels
        self._csr = graph.matrix()
        self.skeleton = self._contract(max_nodes)

    def _contract(self, max_nodes: int) -> bool:
        n = self.n
        csr = self._csr
        deg = np.diff(csr.indptr)
        is_node = deg != 2
        # pure cycles have no node: promote their smallest vertex
        comp = self.labels
        has_node = np.zeros(self.graph.n_components, dtype=bool)
        has_node[comp[is_node]] = True
        for c in np.flatnonzero(~has_node):
            is_node[np.flatnonzero(comp == c)[0]] = True
        nodes = np.flatnonzero(is_node)
        if len(nodes) > max_nodes:
            return False
        node_id = np.full(n, -1, dtype=np.int64)
        node_id[nodes] = np.arange(len(nodes))
        start = np.empty(n, dtype=np.int64)
        end = np.empty(n, dtype=np.int64)
        off_a = np.zeros(n)
        off_b = np.zeros(n)
        chain = np.full(n, -1, dtype=np.int64)
        start[nodes] = node_id[nodes]
        end[nodes] = node_id[nodes]
        indptr, indices, data = csr.indptr, csr.indices, csr.data
        visited = np.zeros(n, dtype=bool)
        edges_u, edges_v, edges_w = [], [], []
        n_chain = 0
        for s in nodes:
            for k in range(indptr[s], indptr[s + 1]):
                nxt, w = indices[k], data[k]
                if is_node[nxt]:
                    if s < nxt:
                        edges_u.append(node_id[s]); edges_v.append(node_id[nxt]); edges_w.append(w)
                    continue
                if visited[nxt]:
                    continue
                path = []
                offs = []
                prev, cur, acc = s, nxt, w
                while not is_node[cur]:
                    visited[cur] = True
                    path.append(cur)
                    offs.append(acc)
                    a0, a1 = indptr[cur], indptr[cur + 1]
                    nb = indices[a0:a1]
                    wb = data[a0:a1]
                    j = 0 if nb[0] != prev else 1
                    prev, cur, acc = cur, nb[j], acc + wb[j]
                path = np.array(path, dtype=np.int64)
                offs = np.array(offs)
                start[path] = node_id[s]
                end[path] = node_id[cur]
                off_a[path] = offs
                off_b[path] = acc - offs
                chain[path] = n_chain
                n_chain += 1
                edges_u.append(node_id[s]); edges_v.append(node_id[cur]); edges_w.append(acc)
        m = len(nodes)
        W = np.full((m, m), np.inf)
        for u, v, w in zip(edges_u, edges_v, edges_w):
            if w < W[u, v]:
                W[u, v] = W[v, u] = w
        np.fill_diagonal(W, 0.0)
        finite = np.isfinite(W) & (W > 0)
        G = csr_matrix((W[finite], np.nonzero(finite)), shape=(m, m))
        self.node_dist = dijkstra(G, directed=False) if m else np.zeros((0, 0))
        self.start, self.end, self.off_a, self.off_b, self.chain = start, end, off_a, off_b, chain
        self.nodes = nodes
        return True

    def rows(self, sources, targets=None) -> np.ndarray:
        """Distance matrix of shape ``(len(sources), len(targets))``."""
        sources = np.atleast_1d(np.asarray(sources, dtype=np.int64))
        targets = np.arange(self.n) if targets is None else np.atleast_1d(np.asarray(targets, dtype=np.int64))
        if not self.skeleton:
            d = dijkstra(self._csr, directed=False, indices=sources)
            return d[:, targets]
        D = self.node_dist
        sa, sb = self.start[sources][:, None], self.end[sources][:, None]
        ta, tb = self.start[targets][None, :], self.end[targets][None, :]
        oa, ob = self.off_a[sources][:, None], self.off_b[sources][:, None]
        pa, pb = self.off_a[targets][None, :], self.off_b[targets][None, :]
        out = oa + D[sa, ta] + pa
        np.minimum(out, oa + D[sa, tb] + pb, out=out)
        np.minimum(out, ob + D[sb, ta] + pa, out=out)
        np.minimum(out, ob + D[sb, tb] + pb, out=out)
        cs, ct = self.chain[sources][:, None], self.chain[targets][None, :]
        same = (cs == ct) & (cs >= 0)
        if np.any(same):
            direct = np.abs(oa - pa)
            out = np.where(same, np.minimum(out, direct), out)
        out[sources[:, None] == targets[None, :]] = 0.0
        return out

    def distance(self, i: int, j: int) -> float:
        return float(self.rows([i], [j])[0, 0])


def inner_distance(g: ProximityGraph | GeodesicEngine, i: int, j: int) -> float:
    """Graph geodesic between vertices ``i`` and ``j`` (``inf`` across components)."""
    engine = g if isinstance(g, GeodesicEngine) else GeodesicEngine(g)
    return engine.distance(i, j)


@dataclass
class GeodesicTable:
    sources: np.ndarray
    rows: np.ndarray

    @classmethod
    def compute(cls, g: ProximityGraph, sources=None) -> "GeodesicTable":
        sources = np.arange(g.n) if sources is None else np.asarray(sources, dtype=np.int64)
        return cls(sources, GeodesicEngine(g).rows(sources))

    def to_csv(self) -> str:
        lines = []
        for src, row in zip(self.sources, self.rows):
            cells = ["inf" if not np.isfinite(v) else repr(float(v)) for v in row]
            lines.append(",".join([str(int(src))] + cells))
        return "\n".join(lines) + "\n"


# --------------------------------------------------------------------------
# exact inner distance on arc networks


def _network_nodes(d: SetDescriptor):
    """Endpoint nodes of every arc: junction names or free-end names."""
    ends = {}
    for arc in d.arcs:
        for side, t in (("a", arc.a), ("b", arc.b)):
            if side == "b" and not arc.bounded:
                ends[(arc.label, side)] = None
                continue
            p = arc(np.array([t]))[0]
            name = f"{arc.label}:{side}"
            for jname, q in d.junctions:
                if np.linalg.norm(p - q) <= JUNCTION_TOL:
                    name = f"junction:{jname}"
                    break
            ends[(arc.label, side)] = name
    return ends


def network_inner_distance(d: SetDescriptor, p: tuple[str, float], q: tuple[str, float],
                           tol: float = QUAD_TOL) -> float:
    """Inner distance between two points of an arc network given as
    ``(arc label, parameter)`` pairs, through arcs and junctions."""
    if d.kind != ARCS:
        raise ValueError("exact inner distances need an arc network")
    ends = _network_nodes(d)
    names = sorted({v for v in ends.values() if v is not None})
    index = {nm: k for k, nm in enumerate(names)}
    m = len(names)
    W = np.full((m, m), np.inf)
    for arc in d.arcs:
        if not arc.bounded:
            continue
        u, v = index[ends[(arc.label, "a")]], index[ends[(arc.label, "b")]]
        if u == v:
            continue
        w = arc_length(arc, arc.a, arc.b, tol)
        if w < W[u, v]:
            W[u, v] = W[v, u] = w
    finite = np.isfinite(W)
    D = dijkstra(csr_matrix((W[finite], np.nonzero(finite)), shape=(m, m)), directed=False) if m else W

    def exits(label, t):
        arc = d.arc(label)
        if not arc.a - 1e-12 <= t <= arc.b:
            raise ValueError(f"parameter {t} is outside arc {label!r}")
        out = [(index[ends[(label, "a")]], arc_length(arc, arc.a, t, tol))]
        if arc.bounded:
            out.append((index[ends[(label, "b")]], arc_length(arc, t, arc.b, tol)))
        return out

    best = math.inf
    if p[0] == q[0]:
        best = arc_length(d.arc(p[0]), p[1], q[1], tol)
    for u, lu in exits(*p):
        for v, lv in exits(*q):
            best = min(best, lu + D[u, v] + lv)
    if not math.isfinite(best):
        raise Unreachable(f"{p} and {q} lie in different components of the network")
    return best
