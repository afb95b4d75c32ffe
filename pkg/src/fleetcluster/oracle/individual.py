"""Per-vehicle reference formulation.

Every potential vehicle gets its own purchase flag, block assignments, state
of energy and charger occupancy. A vehicle carries all of its energy when it
leaves (its SOE is pinned to zero while away), which is what makes this
formulation individually realizable. The per-vehicle variables are summed
into the same handle slots the clustered model fills, so DER, hydrogen and
objective emission are shared verbatim.
"""

from __future__ import annotations

from collections import defaultdict

from ..errors import TooLarge
from ..fleet import FleetHandles, add_assignment_constraints
from ..milp import BINARY, CONTINUOUS, INTEGER, LinExpr, ModelInstance, lin_sum
from ..time_grid import TripMatrices

DEFAULT_BUDGET = 60_000


def vehicle_slots(fh: FleetHandles, tm: TripMatrices) -> dict[str, int]:
    """Vehicles worth modelling per type: an unused vehicle adds nothing, so
    at most the largest number of same-day blocks the type can serve, further
    limited by the type's ``max_count``."""
    per_day: dict[tuple[str, int], int] = defaultdict(int)
    for k, i in fh.pairs:
        per_day[(i, int(tm.days[tm.index(k)]))] += 1
    out = {}
    for v in fh.vtypes:
        n = max((c for (i, _), c in per_day.items() if i == v.id), default=0)
        out[v.id] = n if v.max_count is None else min(n, v.max_count)
    return out


def individual_size(fh: FleetHandles, tm: TripMatrices) -> int:
    slots = sum(vehicle_slots(fh, tm).values())
    return slots * max(1, len(fh.blocks)) * fh.grid.num_days * fh.grid.intervals_per_day


def build_individual_fleet(model: ModelInstance, fh: FleetHandles, tm: TripMatrices, mode=None,
                           budget: int = DEFAULT_BUDGET, binary_occupancy: bool = False) -> FleetHandles:
    """Fleet builder with the signature ``build_model`` expects.

    ``mode`` is accepted for interface parity and ignored: departure energy is
    whatever the vehicle holds. Charger occupancy per vehicle is a fraction of
    the interval by default, the same charger-switching allowance the
    clustered model makes; ``binary_occupancy`` pins each vehicle to one
    charger for whole intervals.
    """
    size = individual_size(fh, tm)
    if size > budget:
        raise TooLarge(f"individual model size {size} exceeds budget {budget}")
    g = fh.grid
    T, dT = g.intervals_per_day, g.interval_hours
    slots = vehicle_slots(fh, tm)
    comp = fh.compatible()
    rating = {(c.id, v.id): c.rating(v.id) for c in fh.chargers for v in fh.vtypes}
    dist = {b.id: b.distance_km for b in fh.blocks}

    for c in fh.chargers:
        fh.charger_count[c.id] = model.add_var(
            f"ind.Nc[{c.id}]", INTEGER, 0, float("inf") if c.max_count is None else c.max_count
        )
    occupancy: dict[tuple[str, int, int], LinExpr] = defaultdict(LinExpr)
    occ_kind = BINARY if binary_occupancy else CONTINUOUS

    for v in fh.vtypes:
        i, R = v.id, v.energy_capacity_kwh
        veh = [f"{i}#{n}" for n in range(slots[i])]
        y = {u: model.add_var(f"ind.y[{u}]", BINARY) for u in veh}
        for a, b in zip(veh, veh[1:]):
            model.ge(y[a], y[b], f"ind.order[{b}]")
        fh.vehicle_count[i] = lin_sum(y.values())
        ks = [k for k, ii in fh.pairs if ii == i]
        x = {(k, u): model.add_var(f"ind.x[{k},{u}]", BINARY) for k in ks for u in veh}
        d = {(k, u): model.add_var(f"ind.d[{k},{u}]", ub=R) for k in ks for u in veh}
        for k in ks:
            fh.assign[(k, i)] = lin_sum(x[(k, u)] for u in veh)
            fh.departure[(k, i)] = lin_sum(d[(k, u)] for u in veh)
            need = fh.eta[(k, i)] * dist[k]
            for u in veh:
                model.le(x[(k, u)], y[u], f"ind.owned[{k},{u}]")
                model.ge(d[(k, u)], need * x[(k, u)], f"ind.dep_lo[{k},{u}]")
                model.le(d[(k, u)], R * x[(k, u)], f"ind.dep_hi[{k},{u}]")
        js = [j for (ii, j) in comp if ii == i]
        for s in g.days:
            day_ks = [k for k in ks if int(tm.days[tm.index(k)]) == s]
            for u in veh:
                e = {t: model.add_var(f"ind.e[{u},{s},{t}]") for t in range(1, T + 2)}
                p = {t: model.add_var(f"ind.p[{u},{s},{t}]") for t in g.intervals}
                z = {
                    (j, t): model.add_var(f"ind.z[{u},{j},{s},{t}]", occ_kind, 0.0, 1.0)
                    for j in js
                    for t in g.intervals
                }
                for t in g.intervals:
                    home = LinExpr().add_term(y[u])
                    for k in day_ks:
                        if tm.is_active(tm.index(k), t):
                            home.add_term(x[(k, u)], -1.0)
                    model.ge(home, 0.0, f"ind.busy[{u},{s},{t}]")
                    model.le(e[t], R * home, f"ind.soe_cap[{u},{s},{t}]")
                    if js:
                        model.le(lin_sum(z[(j, t)] for j in js), home, f"ind.plug[{u},{s},{t}]")
                    model.le(p[t], lin_sum(z[(j, t)] * rating[(j, i)] for j in js), f"ind.power[{u},{s},{t}]")
                    for j in js:
                        occupancy[(j, s, t)].add_term(z[(j, t)])
                for t in g.intervals:
                    rhs = LinExpr().add_term(e[t]).add_term(p[t], dT)
                    for k in day_ks:
                        kk = tm.index(k)
                        if tm.depart_index(kk) == t + 1:
                            rhs.add_term(d[(k, u)], -1.0)
                        if tm.arrive_index(kk) == t + 1:
                            rhs.add_term(d[(k, u)], 1.0).add_term(x[(k, u)], -fh.eta[(k, i)] * dist[k])
                    model.eq(e[t + 1], rhs, f"ind.soe_dyn[{u},{s},{t}]")
                model.eq(e[1], e[T + 1], f"ind.soe_cyclic[{u},{s}]")
                for t in range(1, T + 2):
                    fh.soe[(i, s, t)] = fh.soe.get((i, s, t), LinExpr()) + e[t]
                for t in g.intervals:
                    fh.charge_power[(i, s, t)] = fh.charge_power.get((i, s, t), LinExpr()) + p[t]
                    for j in js:
                        key = (i, j, s, t)
                        fh.charging_count[key] = fh.charging_count.get(key, LinExpr()) + z[(j, t)]
            for t in g.intervals:
                n = LinExpr().add_term(fh.vehicle_count[i])
                for k in day_ks:
                    if tm.is_active(tm.index(k), t):
                        n.add_term(fh.assign[(k, i)], -1.0)
                fh.at_depot[(i, s, t)] = n
            if not veh:
                for t in range(1, T + 2):
                    fh.soe[(i, s, t)] = LinExpr()
                for t in g.intervals:
                    fh.charge_power[(i, s, t)] = LinExpr()

    for (j, s, t), occ in occupancy.items():
        model.le(occ, fh.charger_count[j], f"ind.charger_cap[{j},{s},{t}]")
    add_assignment_constraints(model, fh)
    return fh
