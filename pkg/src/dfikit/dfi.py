"""Explicit flows and the data-flow integrity monitor."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional

from .labels import Label, LabelOrder
from .machine import Config, WriteEvent, chain
from .syntax import ObjectInit, Var
from .types import Eff, Obj, Unifier


def flows_from(sigma: Mapping, x, l: Label, order: LabelOrder) -> bool:
    return flow_witness(sigma, x, l, order) is not None


def flow_witness(sigma: Mapping, x, l: Label, order: LabelOrder) -> Optional[list]:
    """The entries from x down to one whose source is at most l, if any."""
    path = []
    seen = set()
    while isinstance(x, Var) and x in sigma and x not in seen:
        seen.add(x)
        mu, src = sigma[x]
        path.append((x, mu, src))
        if order.leq(src, l):
            return path
        x = mu
    return None


def trusted_objects(hypotheses: Mapping[Var, Eff] | Iterable, l: Label,
                    order: LabelOrder) -> set[Var]:
    """Names declared as Obj(_^S)^E with S meet E strictly above l."""
    items = hypotheses.items() if isinstance(hypotheses, Mapping) else hypotheses
    out = set()
    for x, t in items:
        t = Unifier.walk(t)
        if isinstance(t, Eff) and isinstance(t.ty, Obj):
            s = t.ty.inner.eff
            if order.lt(l, order.meet(s, t.eff)):
                out.add(x)
    return out


@dataclass(frozen=True)
class MonitorPolicy:
    """Watch stores linked to the named variables, plus (optionally) stores
    whose creation made them trusted beyond the threshold."""
    threshold: Label
    watch: frozenset = field(default_factory=frozenset)   # source names (str)
    created: bool = True


@dataclass(frozen=True)
class Violation:
    store: Var
    instance: Var
    threshold: Label
    witness: tuple
    why: str

    def describe(self, order: LabelOrder) -> str:
        steps = " -> ".join(f"{x}/{_mu(mu)}@{order.name(src)}" for x, mu, src in self.witness)
        return (f"store {self.store} ({self.why}) received {self.instance}, which "
                f"flows from {order.name(self.threshold)}: {steps}")

    def record(self, order: LabelOrder) -> dict:
        return {"store": str(self.store), "instance": str(self.instance),
                "threshold": order.name(self.threshold), "why": self.why,
                "witness": [{"var": str(x), "value": _mu(mu), "source": order.name(src)}
                            for x, mu, src in self.witness]}


def _mu(mu) -> str:
    if isinstance(mu, ObjectInit):
        return f"new({mu.init})"
    if isinstance(mu, Var):
        return str(mu)
    return "pack" if hasattr(mu, "body") else str(mu)


def watched_reason(store: Var, cfg: Config, policy: MonitorPolicy) -> Optional[str]:
    order = cfg.order
    sigma = cfg.sigma
    if policy.created and store in sigma:
        mu, src = sigma[store]
        if isinstance(mu, ObjectInit) and order.lt(policy.threshold, order.meet(mu.trust, src)):
            return "trusted at creation"
    if policy.watch:
        for v in cfg.hyps:
            if v.name in policy.watch and store in chain(sigma, v):
                return f"watched name {v.name}"
        for v in sigma:
            if v.name in policy.watch and store in chain(sigma, v):
                return f"watched name {v.name}"
    return None


def monitor(event: WriteEvent, cfg: Config, policy: MonitorPolicy) -> Optional[Violation]:
    why = watched_reason(event.store, cfg, policy)
    if why is None:
        return None
    path = flow_witness(cfg.sigma, event.content, policy.threshold, cfg.order)
    if path is None:
        return None
    return Violation(event.store, event.content, policy.threshold, tuple(path), why)


def make_monitor(policy: MonitorPolicy):
    def check(event: WriteEvent, cfg: Config):
        return monitor(event, cfg, policy)
    return check


def scan(cfg: Config, policy: MonitorPolicy) -> list[Violation]:
    """Brute-force check of one configuration: every watched store's content."""
    out = []
    for w, (_, content) in cfg.stores.items():
        why = watched_reason(w, cfg, policy)
        if why is None:
            continue
        path = flow_witness(cfg.sigma, content, policy.threshold, cfg.order)
        if path is not None:
            out.append(Violation(w, content, policy.threshold, tuple(path), why))
    return out
