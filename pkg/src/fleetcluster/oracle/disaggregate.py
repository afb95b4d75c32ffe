"""Recover per-vehicle schedules from a clustered solution.

Two stages per (vehicle type, day):

1. Assignment. Blocks are taken in departure order and each goes to an idle
   vehicle holding the most energy, with energy tracked by sharing the pooled
   charging power among plugged-in vehicles in proportion to their headroom.
2. Energy split. With the assignment fixed, a small LP finds per-vehicle SOE,
   charging power and charger occupancy that add up exactly to the pooled
   values. When that LP is infeasible an elastic copy measures the per-vehicle
   energy deficit and the first block touched by it is reported.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import RecoveryFailed
from ..milp import LinExpr, ModelInstance, SolveConfig, lin_sum, solve_model, value_of
from ..scenario import BuiltModel

_TOL = 1e-6
_BOUND_WEIGHT = 10.0


@dataclass
class VehicleSchedule:
    vehicle: str
    vtype: str
    day: int
    blocks: list[tuple[str, float]] = field(default_factory=list)  # (block id, departure kWh)
    soe_kwh: list[float] = field(default_factory=list)  # t = 1..T_d+1
    charge_kw: list[float] = field(default_factory=list)  # t = 1..T_d
    plugged: dict[str, list[float]] = field(default_factory=dict)  # charger -> per-interval occupancy


@dataclass
class DisaggregatedSchedule:
    vehicles: list[VehicleSchedule]

    def for_type(self, vtype: str, day: int) -> list[VehicleSchedule]:
        return [v for v in self.vehicles if v.vtype == vtype and v.day == day]


def _rounded(x: float) -> int:
    return int(round(x))


def assign_blocks(bm: BuiltModel, x: np.ndarray, vtype: str, day: int, count: int) -> dict[str, list[str]]:
    """Greedy interval scheduling of the type's blocks onto ``count`` vehicles."""
    fh, tm, g = bm.fleet, bm.trips, bm.scenario.grid
    dT = g.interval_hours
    R = fh.vtype(vtype).energy_capacity_kwh
    dist = {b.id: b.distance_km for b in fh.blocks}
    ks = [
        k for (k, i) in fh.pairs
        if i == vtype and int(tm.days[tm.index(k)]) == day and value_of(fh.assign[(k, i)], x) > 0.5
    ]
    ks.sort(key=lambda k: (int(tm.t0[tm.index(k)]), k))
    veh = [f"{vtype}#{n}" for n in range(count)]
    plan: dict[str, list[str]] = {u: [] for u in veh}
    busy_until = {u: 0 for u in veh}  # last active interval
    n0 = value_of(fh.at_depot[(vtype, day, 1)], x)
    q1 = value_of(fh.soe[(vtype, day, 1)], x)
    soe = {u: min(R, q1 / n0) if n0 > 0.5 else 0.0 for u in veh}
    order = iter(ks)
    pending = next(order, None)
    for t in g.intervals:
        while pending is not None and int(tm.t0[tm.index(pending)]) == t:
            idle = [u for u in veh if busy_until[u] < t]
            if not idle:
                raise RecoveryFailed(
                    f"no idle {vtype} vehicle for block {pending}",
                    {"block": pending, "vtype": vtype, "day": day, "reason": "no idle vehicle", "deficit_kwh": None},
                )
            u = max(idle, key=lambda w: (soe[w], -veh.index(w)))
            plan[u].append(pending)
            kk = tm.index(pending)
            busy_until[u] = int(tm.t1[kk])
            # the vehicle keeps whatever the trip does not burn
            soe[u] = max(0.0, soe[u] - fh.eta[(pending, vtype)] * dist[pending])
            pending = next(order, None)
        home = [u for u in veh if busy_until[u] < t]
        pooled = value_of(fh.charge_power[(vtype, day, t)], x) * dT
        room = {u: max(0.0, R - soe[u]) for u in home}
        total = sum(room.values())
        if total > 0:
            for u in home:
                soe[u] += pooled * room[u] / total
    return plan


def _nonneg(obj, x) -> float:
    # solver output may sit a hair below zero on nonnegative quantities
    return max(0.0, value_of(obj, x))


def _split_lp(bm: BuiltModel, x: np.ndarray, vtype: str, day: int, plan: dict[str, list[str]], elastic: bool,
              free_assignment: bool = False):
    """Per-vehicle SOE, power and occupancy summing to the pooled values.

    With ``free_assignment`` the block-to-vehicle map is itself a decision
    (binary per block and vehicle, the blocks being those in ``plan``), which
    turns the LP into a small MILP; the chosen map comes back as ``plan``.
    """
    fh, tm, g = bm.fleet, bm.trips, bm.scenario.grid
    T, dT = g.intervals_per_day, g.interval_hours
    v = fh.vtype(vtype)
    R = v.energy_capacity_kwh
    js = [j for (i, j) in fh.compatible() if i == vtype]
    rating = {c.id: c.rating(vtype) for c in fh.chargers}
    dist = {b.id: b.distance_km for b in fh.blocks}
    m = ModelInstance(f"split-{vtype}-{day}")
    E, P, Z, slack = {}, {}, {}, []
    veh = list(plan)
    blocks = sorted({k for ks in plan.values() for k in ks})
    if free_assignment:
        X = {(k, u): m.add_var(f"x[{k},{u}]", "binary") for k in blocks for u in veh}
        for k in blocks:
            m.eq(lin_sum(X[(k, u)] for u in veh), 1.0, f"split.cover[{k}]")
    else:
        X = {(k, u): (1.0 if k in plan[u] else 0.0) for k in blocks for u in veh}
    for u in veh:
        for t in range(1, T + 2):
            E[(u, t)] = m.add_var(f"e[{u},{t}]", lb=-np.inf if elastic else 0.0)
        for t in g.intervals:
            P[(u, t)] = m.add_var(f"p[{u},{t}]")
            for j in js:
                Z[(u, j, t)] = m.add_var(f"z[{u},{j},{t}]", ub=1.0)
        for t in g.intervals:
            home = LinExpr(const=1.0)
            for k in blocks:
                if tm.is_active(tm.index(k), t):
                    home.add_term(X[(k, u)], -1.0)
            if free_assignment:
                m.ge(home, 0.0, f"split.busy[{u},{t}]")
            cap = LinExpr().add_term(E[(u, t)]) - home * R
            low = LinExpr().add_term(E[(u, t)])
            if elastic:
                over = m.add_var(f"over[{u},{t}]")
                under = m.add_var(f"under[{u},{t}]")
                cap.add_term(over, -1.0)
                low.add_term(under, 1.0)
                slack += [(u, t, over, None), (u, t, under, None)]
                m.ge(low, 0.0, f"split.soe_lo[{u},{t}]")
            m.le(cap, 0.0, f"split.soe_cap[{u},{t}]")
            m.le(lin_sum(Z[(u, j, t)] for j in js), home, f"split.plug[{u},{t}]")
            m.le(P[(u, t)], lin_sum(Z[(u, j, t)] * rating[j] for j in js), f"split.power[{u},{t}]")
        for t in g.intervals:
            rhs = LinExpr().add_term(E[(u, t)]).add_term(P[(u, t)], dT)
            for k in blocks:
                kk = tm.index(k)
                d = _nonneg(fh.departure[(k, vtype)], x)
                if tm.depart_index(kk) == t + 1:
                    rhs = rhs - X[(k, u)] * d
                if tm.arrive_index(kk) == t + 1:
                    rhs = rhs + X[(k, u)] * (d - fh.eta[(k, vtype)] * dist[k])
            if elastic:
                # energy may be conjured only as one of the vehicle's own
                # blocks departs, so any shortfall is charged to that block;
                # surplus may be discarded anywhere
                loss = m.add_var(f"loss[{u},{t}]")
                rhs.add_term(loss, -1.0)
                slack.append((u, t, loss, None))
                for k in plan[u]:
                    if tm.depart_index(tm.index(k)) == t + 1:
                        gain = m.add_var(f"gain[{u},{k}]")
                        rhs.add_term(gain)
                        slack.append((u, t, gain, k))
            m.eq(E[(u, t + 1)], rhs, f"split.dyn[{u},{t}]")
        m.eq(E[(u, 1)], E[(u, T + 1)], f"split.cyclic[{u}]")
    for t in range(1, T + 2):
        m.eq(lin_sum(E[(u, t)] for u in veh), _nonneg(fh.soe[(vtype, day, t)], x), f"split.pool_soe[{t}]")
    for t in g.intervals:
        m.eq(lin_sum(P[(u, t)] for u in veh), _nonneg(fh.charge_power[(vtype, day, t)], x), f"split.pool_p[{t}]")
        for j in js:
            m.eq(
                lin_sum(Z[(u, j, t)] for u in veh),
                _nonneg(fh.charging_count[(vtype, j, day, t)], x),
                f"split.pool_m[{j},{t}]",
            )
    # bound violations cost more than departure top-ups so deficits surface at blocks
    m.set_objective(lin_sum(sv * (1.0 if k is not None else _BOUND_WEIGHT) for (_, _, sv, k) in slack))
    m.freeze()
    res = solve_model(m, SolveConfig(mip_gap=0.0, polish=free_assignment, time_limit=60.0))
    if free_assignment and res.x is not None:
        plan = {u: [k for k in blocks if res.x[X[(k, u)].index] > 0.5] for u in veh}
    return m, res, E, P, Z, slack, plan


def _certificate(bm, x, vtype, day, plan, slack_vals) -> dict:
    """Report the earliest-departing block that needed energy its vehicle
    could not hold. Without such a top-up, the remaining slack is attributed
    to the vehicle's next block after the slack occurs."""
    tm = bm.trips
    total = float(sum(v for (_, _, v, _) in slack_vals))
    topups: dict[tuple[str, str], float] = {}
    events = []
    for (u, t, val, k) in slack_vals:
        if val <= _TOL:
            continue
        if k is not None:
            topups[(k, u)] = topups.get((k, u), 0.0) + val
            continue
        spans = sorted((int(tm.t0[tm.index(b)]), int(tm.t1[tm.index(b)]), b) for b in plan.get(u, []))
        if spans:
            target = next((sp for sp in spans if t <= sp[1] + 1), spans[0])
            events.append((target[0], target[2], u, val))
    if topups:
        (k, u), amount = min(topups.items(), key=lambda kv: (int(tm.t0[tm.index(kv[0][0])]), kv[0][0]))
        return {"block": k, "vehicle": u, "vtype": vtype, "day": day, "deficit_kwh": float(amount),
                "total_slack_kwh": total, "reason": "energy deficit at departure"}
    if not events:
        return {"block": None, "vtype": vtype, "day": day, "deficit_kwh": None, "total_slack_kwh": total,
                "reason": "energy split infeasible"}
    events.sort(key=lambda e: (e[0], e[1]))
    t0, k, u, _ = events[0]
    amount = sum(v for (tt, kk, uu, v) in events if kk == k and uu == u)
    return {"block": k, "vehicle": u, "vtype": vtype, "day": day, "deficit_kwh": float(amount),
            "total_slack_kwh": total, "reason": "state of energy out of bounds"}


def disaggregate(bm: BuiltModel, x: np.ndarray, exact_fallback: bool = True) -> DisaggregatedSchedule:
    """Per-vehicle schedule reproducing the clustered solution, or
    :class:`RecoveryFailed` with a certificate naming the first deficit block.

    The greedy assignment is tried first. If its energy split is infeasible and
    ``exact_fallback`` is set, the block-to-vehicle map is re-chosen by a small
    MILP under the same pooled equalities before giving up; the certificate
    always refers to the greedy map.
    """
    fh, g = bm.fleet, bm.scenario.grid
    out: list[VehicleSchedule] = []
    for v in fh.vtypes:
        count = _rounded(value_of(fh.vehicle_count[v.id], x))
        for s in g.days:
            plan = assign_blocks(bm, x, v.id, s, count)
            if not plan:
                continue
            m, res, E, P, Z, _, _ = _split_lp(bm, x, v.id, s, plan, elastic=False)
            if res.x is None and exact_fallback:
                m, res, E, P, Z, _, plan = _split_lp(bm, x, v.id, s, plan, elastic=False, free_assignment=True)
            if res.x is None:
                m2, res2, _, _, _, slack, _ = _split_lp(bm, x, v.id, s, plan, elastic=True)
                vals = [(u, t, float(res2.x[sv.index]), k) for (u, t, sv, k) in slack] if res2.x is not None else []
                cert = _certificate(bm, x, v.id, s, plan, vals)
                raise RecoveryFailed(f"cannot realise {v.id} day {s} per vehicle: {cert['reason']} at block {cert['block']}", cert)
            js = [j for (i, j) in fh.compatible() if i == v.id]
            for u, ks in plan.items():
                out.append(
                    VehicleSchedule(
                        vehicle=u,
                        vtype=v.id,
                        day=s,
                        blocks=[(k, value_of(fh.departure[(k, v.id)], x)) for k in ks],
                        soe_kwh=[float(res.x[E[(u, t)].index]) for t in range(1, g.intervals_per_day + 2)],
                        charge_kw=[float(res.x[P[(u, t)].index]) for t in g.intervals],
                        plugged={j: [float(res.x[Z[(u, j, t)].index]) for t in g.intervals] for j in js},
                    )
                )
    return DisaggregatedSchedule(out)


def aggregation_residual(bm: BuiltModel, x: np.ndarray, sched: DisaggregatedSchedule) -> dict[str, float]:
    """Max absolute mismatch between summed per-vehicle quantities and the
    clustered solution, per quantity."""
    fh, tm, g = bm.fleet, bm.trips, bm.scenario.grid
    out = {"soe": 0.0, "charge_power": 0.0, "charging_count": 0.0, "at_depot": 0.0}
    for v in fh.vtypes:
        for s in g.days:
            rows = sched.for_type(v.id, s)
            count = _rounded(value_of(fh.vehicle_count[v.id], x))
            for t in range(1, g.intervals_per_day + 2):
                tot = sum(r.soe_kwh[t - 1] for r in rows)
                out["soe"] = max(out["soe"], abs(tot - value_of(fh.soe[(v.id, s, t)], x)))
            for t in g.intervals:
                tot = sum(r.charge_kw[t - 1] for r in rows)
                out["charge_power"] = max(out["charge_power"], abs(tot - value_of(fh.charge_power[(v.id, s, t)], x)))
                for j in (j for (i, j) in fh.compatible() if i == v.id):
                    tot = sum(r.plugged.get(j, [0.0] * g.intervals_per_day)[t - 1] for r in rows)
                    ref = value_of(fh.charging_count[(v.id, j, s, t)], x)
                    out["charging_count"] = max(out["charging_count"], abs(tot - ref))
                away = sum(
                    1 for r in rows for (k, _) in r.blocks if tm.is_active(tm.index(k), t)
                )
                out["at_depot"] = max(out["at_depot"], abs((count - away) - value_of(fh.at_depot[(v.id, s, t)], x)))
    return out


def schedule_violations(bm: BuiltModel, sched: DisaggregatedSchedule, tol: float = _TOL) -> list[str]:
    """Individual feasibility of a recovered schedule."""
    fh, tm = bm.fleet, bm.trips
    problems = []
    for r in sched.vehicles:
        R = fh.vtype(r.vtype).energy_capacity_kwh
        if min(r.soe_kwh, default=0.0) < -tol or max(r.soe_kwh, default=0.0) > R + tol:
            problems.append(f"{r.vehicle} day {r.day}: SOE outside [0, {R}]")
        spans = sorted((int(tm.t0[tm.index(k)]), int(tm.t1[tm.index(k)]), k) for k, _ in r.blocks)
        for a, b in zip(spans, spans[1:]):
            if b[0] <= a[1]:
                problems.append(f"{r.vehicle} day {r.day}: blocks {a[2]} and {b[2]} overlap")
    return problems
