"""Min-cost max-flow over a time-expanded network, used to pick t_isl.

Each hybrid task is one unit of flow.  Satellites involved in an epoch get
a storage line (nodes at breakpoint slots joined by holdover arcs whose
capacity is the free storage in units of task volume).  A task enters its
source line at its creation slot, crosses to its tail line through one of
its candidate ISL arcs, and leaves at its offload slot.
"""

import heapq
import io
from dataclasses import dataclass, field

import numpy as np

# delay is scaled so that the slot rank only breaks ties
_DELAY_WEIGHT = 1000


@dataclass
class HybridRequest:
    task_id: int
    source: int
    tail: int
    created_at: int
    candidates: list  # [(slot, completion)] sorted by slot
    path: tuple = ()
    volume: float = 1.0


@dataclass
class FlowSolution:
    t_isl: dict
    total_cost: float
    arc_flow: list
    unscheduled: list
    flow_value: int = 0


class FlowNetwork:
    def __init__(self):
        self.labels = []
        self.index = {}
        self.adj = []
        self.head = []
        self.cap = []
        self.cost = []
        self.orig_cap = []
        self.task_arcs = {}  # task id -> [(arc, slot, completion)]
        self.excluded = []
        self.requests = {}
        self.capacities = {}
        self.tx_capacity = None
        self.consistent = True  # flow decoded into one own arc per task
        self.source = self.node(("source",))
        self.sink = self.node(("sink",))

    def node(self, label):
        k = self.index.get(label)
        if k is None:
            k = len(self.labels)
            self.labels.append(label)
            self.index[label] = k
            self.adj.append([])
        return k

    def add_arc(self, u, v, capacity, cost):
        e = len(self.head)
        for a, b, c, w in ((u, v, capacity, cost), (v, u, 0, -cost)):
            self.adj[a].append(len(self.head))
            self.head.append(b)
            self.cap.append(c)
            self.orig_cap.append(c)
            self.cost.append(w)
        return e

    def tail_of(self, e):
        return self.head[e ^ 1]

    @property
    def num_arcs(self):
        return len(self.head) // 2

    def flow(self, e):
        return self.orig_cap[e] - self.cap[e]

    def is_empty(self):
        return not self.task_arcs


def build_network(requests, capacities, tx_capacity=None):
    """Time-expanded network for the given hybrid requests.

    capacities maps satellite -> (base_slot, units) with units[k] the free
    storage, in task units, during slot base_slot + k.  tx_capacity, if
    given, maps (satellite, slot) -> free transmit units for the source and
    tail endpoints of each candidate crossing.
    """
    net = FlowNetwork()
    net.capacities = capacities
    net.tx_capacity = tx_capacity
    points = {}
    for r in requests:
        if not r.candidates:
            net.excluded.append(r.task_id)
            continue
        net.requests[r.task_id] = r
        points.setdefault(r.source, set()).add(r.created_at)
        for s, d in r.candidates:
            points[r.source].add(s)
            points.setdefault(r.tail, set()).update((s, d))
    for sat in sorted(points):
        slots = sorted(points[sat])
        base, units = capacities[sat]
        for a, b in zip(slots, slots[1:]):
            seg = units[a - base:b - base]
            c = int(seg.min()) if len(seg) else 0
            net.add_arc(net.node((sat, a)), net.node((sat, b)), max(c, 0), 0)
    for r in sorted(net.requests.values(), key=lambda q: q.task_id):
        t_in = net.node(("task", r.task_id))
        t_out = net.node(("done", r.task_id))
        net.add_arc(net.source, t_in, 1, 0)
        net.add_arc(t_in, net.node((r.source, r.created_at)), 1, 0)
        net.add_arc(t_out, net.sink, 1, 0)
        arcs = []
        exits = set()
        for rank, (s, d) in enumerate(r.candidates):
            src_node = net.node((r.source, s))
            dst_node = net.node((r.tail, s))
            cost = int(round(d - r.created_at)) * _DELAY_WEIGHT + rank
            if tx_capacity is not None:
                out_key, in_key = ("txo", r.source, s), ("txi", r.tail, s)
                if out_key not in net.index:
                    net.add_arc(src_node, net.node(out_key), int(tx_capacity.get((r.source, s), 1 << 30)), 0)
                if in_key not in net.index:
                    net.add_arc(net.node(in_key), dst_node, int(tx_capacity.get((r.tail, s), 1 << 30)), 0)
                e = net.add_arc(net.index[out_key], net.index[in_key], 1, cost)
            else:
                e = net.add_arc(src_node, dst_node, 1, cost)
            arcs.append((e, s, d))
            exits.add(d)
        for d in sorted(exits):
            net.add_arc(net.node((r.tail, d)), t_out, 1, 0)
        net.task_arcs[r.task_id] = arcs
    return net


def _dijkstra(net, potential):
    n = len(net.labels)
    inf = float("inf")
    dist = [inf] * n
    prev = [-1] * n
    dist[net.source] = 0
    heap = [(0, net.source)]
    while heap:
        d, u = heapq.heappop(heap)
        if d > dist[u]:
            continue
        pu = potential[u]
        for e in net.adj[u]:
            if net.cap[e] <= 0:
                continue
            v = net.head[e]
            nd = d + net.cost[e] + pu - potential[v]
            if nd < dist[v]:
                dist[v] = nd
                prev[v] = e
                heapq.heappush(heap, (nd, v))
    return dist, prev


def min_cost_max_flow(net: FlowNetwork):
    """Successive shortest augmenting paths with Johnson potentials."""
    n = len(net.labels)
    potential = [0] * n
    flow = cost = 0
    while True:
        dist, prev = _dijkstra(net, potential)
        if dist[net.sink] == float("inf"):
            break
        for v in range(n):
            if dist[v] < float("inf"):
                potential[v] += dist[v]
        push = 1 << 30
        v = net.sink
        while v != net.source:
            e = prev[v]
            push = min(push, net.cap[e])
            v = net.tail_of(e)
        v = net.sink
        while v != net.source:
            e = prev[v]
            net.cap[e] -= push
            net.cap[e ^ 1] += push
            cost += push * net.cost[e]
            v = net.tail_of(e)
        flow += push
    return flow, cost


def has_negative_cycle(net: FlowNetwork):
    """One Bellman-Ford pass over the residual graph."""
    n = len(net.labels)
    dist = [0] * n
    for it in range(n):
        changed = False
        for e in range(len(net.head)):
            if net.cap[e] > 0:
                u, v = net.tail_of(e), net.head[e]
                if dist[u] + net.cost[e] < dist[v]:
                    dist[v] = dist[u] + net.cost[e]
                    changed = True
        if not changed:
            return False
    return True


def _path_owners(net, flows):
    """Walk one unit of flow from each task entry; returns task -> (crossing
    arc owner, slot, exit owner).  Units on shared storage lines are
    interchangeable, so a walk may pick up another task's arcs."""
    owner = {}
    for tid, arcs in net.task_arcs.items():
        for e, s, d in arcs:
            owner[e] = (tid, s)
    exits = {net.index[("done", tid)]: tid for tid in net.task_arcs}
    out = {}
    for tid in sorted(net.task_arcs):
        u = net.index[("task", tid)]
        cross = None
        seen = 0
        while u != net.sink and seen < len(net.labels):
            seen += 1
            own = [e for e in net.adj[u] if e % 2 == 0 and flows[e] > 0 and
                   owner.get(e, (tid,))[0] == tid]
            cands = own or [e for e in net.adj[u] if e % 2 == 0 and flows[e] > 0]
            if not cands:
                break
            nxt = cands[0]
            flows[nxt] -= 1
            if nxt in owner:
                cross = owner[nxt]
            v = net.head[nxt]
            if v in exits:
                out[tid] = (cross, exits[v])
            u = v
    return out


def _occupancy_ok(net, choice):
    """Direct check of a slot choice against storage and transmit capacity."""
    load = {}
    tx = {}
    for tid, s in choice.items():
        r = net.requests[tid]
        d = dict(r.candidates)[s]
        for sat, a, b in ((r.source, r.created_at, s), (r.tail, s, d)):
            for k in range(a, b):
                load[(sat, k)] = load.get((sat, k), 0) + 1
        for key in (("o", r.source, s), ("i", r.tail, s)):
            tx[key] = tx.get(key, 0) + 1
    for (sat, k), n in load.items():
        base, units = net.capacities[sat]
        i = k - base
        if i < 0 or i >= len(units) or n > units[i]:
            return False
    if net.tx_capacity is not None:
        for (_, sat, s), n in tx.items():
            if n > net.tx_capacity.get((sat, s), 1 << 30):
                return False
    return True


def _choice_cost(net, choice):
    cost = 0
    for tid, s in choice.items():
        r = net.requests[tid]
        rank = [c[0] for c in r.candidates].index(s)
        cost += int(round(dict(r.candidates)[s] - r.created_at)) * _DELAY_WEIGHT + rank
    return cost


def _exact(net, limit):
    """Best slot tuple by enumeration (most tasks, then least cost), or None
    when the search space exceeds limit."""
    tids = sorted(net.requests)
    space = 1
    for tid in tids:
        space *= len(net.requests[tid].candidates) + 1
        if space > limit:
            return None
    best = [(-1, 0), {}]

    def dfs(i, choice):
        if len(choice) + (len(tids) - i) < best[0][0]:
            return
        if i == len(tids):
            key = (len(choice), -_choice_cost(net, choice))
            if key > best[0]:
                best[0], best[1] = key, dict(choice)
            return
        tid = tids[i]
        for s, _ in net.requests[tid].candidates:
            choice[tid] = s
            if _occupancy_ok(net, choice):
                dfs(i + 1, choice)
            del choice[tid]
        dfs(i + 1, choice)

    dfs(0, {})
    return best[1]


def _repair(net, clean):
    """Keep the jointly feasible part of the decoded choice, then place the
    other tasks greedily at their earliest feasible slot."""
    choice = {}
    for tid in sorted(clean):
        choice[tid] = clean[tid]
        if not _occupancy_ok(net, choice):
            del choice[tid]
    for tid in sorted(net.requests):
        if tid in choice:
            continue
        for s, _ in net.requests[tid].candidates:
            choice[tid] = s
            if _occupancy_ok(net, choice):
                break
            del choice[tid]
    return choice


def solve(net: FlowNetwork, exact_limit=20000):
    """Decode per-task t_isl from a min-cost max-flow.

    When the flow decomposes into one own candidate arc per task the flow
    optimum is returned as is.  Otherwise (units swapped between tasks on a
    shared storage line) small epochs are settled by enumeration and large
    ones repaired greedily from the decoded part.
    """
    value, cost = min_cost_max_flow(net)
    flows = [net.flow(e) if e % 2 == 0 else 0 for e in range(len(net.head))]
    walks = _path_owners(net, flows)
    clean = {}
    for tid, (cross, exit_owner) in walks.items():
        if cross is not None and cross[0] == tid and exit_owner == tid:
            clean[tid] = cross[1]
    choice = clean
    consistent = (len(clean) == value and _occupancy_ok(net, clean)
                  and _choice_cost(net, clean) == cost)
    if not consistent:
        choice = _exact(net, exact_limit)
        if choice is None:
            choice = _repair(net, clean)
    net.consistent = consistent
    t_isl = {}
    total = 0.0
    for tid in sorted(choice):
        s = choice[tid]
        t_isl[tid] = s
        total += dict(net.requests[tid].candidates)[s] - net.requests[tid].created_at
    unscheduled = sorted(set(net.excluded) | (set(net.requests) - set(t_isl)))
    arc_flow = [net.flow(2 * k) for k in range(net.num_arcs)]
    return FlowSolution(t_isl, total, arc_flow, unscheduled, value)


def solve_tisl(requests, capacities, tx_capacity=None):
    return solve(build_network(requests, capacities, tx_capacity))


def dump_csv(net: FlowNetwork):
    buf = io.StringIO()
    buf.write("arc,from,to,capacity,cost,flow\n")
    for k in range(net.num_arcs):
        e = 2 * k
        buf.write("%d,%s,%s,%d,%d,%d\n" % (k, "/".join(map(str, net.labels[net.tail_of(e)])),
                                          "/".join(map(str, net.labels[net.head[e]])),
                                          net.orig_cap[e], net.cost[e], net.flow(e)))
    return buf.getvalue()
