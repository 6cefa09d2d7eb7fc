"""Shared test fixtures: fast engines, a standard trading pair, random topologies."""

from __future__ import annotations

import random

from medledger import EngineConfig, SupplyChainEngine
BATCH = ("CoviVax", "2021-01-05", "B-100")

ACTIVE_POOL = ["Manufacturer", "Distributor", "Warehouse", "Supplier"]
PASSIVE_POOL = ["Hospital", "Clinic", "Patient"]


def fast_engine(seed=1, scheme="hmac", **overrides) -> SupplyChainEngine:
    config = EngineConfig(clock="logical", seed=seed, signer_scheme=scheme,
                          pbkdf2_iterations=10, **overrides)
    return SupplyChainEngine(config)


def register(engine, name, email, identity, password="p@ssw0rd1") -> str:
    return engine.register_account(name, email, identity, password)["entity_id"]


def make_agreement(engine, parties, scopes=None) -> str:
    scopes = scopes or [{"data_class": "ShipmentTracking", "permission": "Write"},
                        {"data_class": "ShipmentTracking", "permission": "Read"}]
    agreement = engine.propose_agreement(parties[0], parties, scopes)
    for party in parties:
        engine.sign_agreement(agreement["agreement_id"], party)
    return agreement["agreement_id"]


def standard_pair(engine) -> dict:
    """Manufacturer and distributor under an active agreement, with minted stock."""
    m = register(engine, "Acme", "acme@pair.ex", "Manufacturer")
    d = register(engine, "Distro", "distro@pair.ex", "Distributor")
    make_agreement(engine, [m, d])
    product = engine.mint_stock(m, *BATCH, 1000)["product"]
    return {"m": m, "d": d, "product_id": product["product_id"], "batch": BATCH}


def run_delivery(engine, sender, receiver, product_id, quantity, stage="completed"):
    """Drive one delivery to the requested stage; returns the last wire state."""
    delivery = engine.create_delivery(sender, receiver)
    if stage == "created":
        return delivery
    delivery = engine.add_product(sender, delivery["delivery_id"], product_id, quantity)
    if stage == "prepared":
        return delivery
    delivery = engine.ship_delivery(sender, delivery["delivery_id"])
    if stage == "shipped":
        return delivery
    delivery = engine.receive_delivery(receiver, delivery["delivery_id"])
    if stage == "received":
        return delivery
    return engine.post_inbound_inventory(receiver, delivery["delivery_id"])["delivery"]


class RandomTopology:
    """A randomly generated supply network plus a shadow log of every response.

    The shadow log is the independent oracle: it records what the engine
    *returned* at call time, so trace output can be checked against it
    without consulting the engine's own batch index.
    """

    def __init__(self, rng: random.Random, max_entities=8, max_deliveries=50,
                 max_batches=10):
        self.rng = rng
        self.engine = fast_engine(seed=rng.randrange(1 << 30))
        self.deliveries: list[dict] = []     # final wire state per delivery
        self.batch_of: dict[str, str] = {}   # delivery_id -> batch_key (post add_product)
        self.minted: dict[str, int] = {}     # product_id -> total minted
        self.producer_of: dict[str, str] = {}
        self.products: dict[str, tuple] = {}
        self._build(max_entities, max_deliveries, max_batches)

    def _build(self, max_entities, max_deliveries, max_batches):
        rng = self.rng
        engine = self.engine
        gha = engine.registry.gha_id

        n_active = rng.randint(1, min(5, max_entities - 1))
        n_passive = rng.randint(0, min(2, max_entities - 1 - n_active))
        self.actives, self.passives = [], []
        for i in range(n_active):
            identity = "Manufacturer" if i == 0 else rng.choice(ACTIVE_POOL)
            self.actives.append(register(engine, f"A{i}", f"a{i}@rt.ex", identity))
        for i in range(n_passive):
            self.passives.append(
                register(engine, f"P{i}", f"p{i}@rt.ex", rng.choice(PASSIVE_POOL)))
        if len(self.actives) >= 2:
            make_agreement(engine, self.actives)
        self.lastmile: set[tuple[str, str]] = set()
        for passive in self.passives:
            for active in self.actives:
                if rng.random() < 0.6:
                    engine.grant_access(gha, passive, active, "ShipmentTracking", "Read")
                    self.lastmile.add((active, passive))

        manufacturers = [a for a in self.actives
                         if engine.registry.get(a).identity.value == "Manufacturer"]
        for j in range(rng.randint(1, max_batches)):
            producer = rng.choice(manufacturers)
            triple = (f"Vax{j}", "2021-02-01", f"B-{j:03d}")
            quantity = rng.randint(200, 500)
            product = engine.mint_stock(producer, *triple, quantity)["product"]
            pid = product["product_id"]
            self.minted[pid] = self.minted.get(pid, 0) + quantity
            self.producer_of[pid] = producer
            self.products[pid] = triple

        for _ in range(rng.randint(0, max_deliveries)):
            holders = [(owner, pid) for (owner, pid), qty in engine.supply.stock.items()
                       if qty > 0 and owner in self.actives]
            if not holders:
                break
            sender, pid = rng.choice(holders)
            candidates = [a for a in self.actives if a != sender]
            candidates += [p for p in self.passives if (sender, p) in self.lastmile]
            if not candidates:
                break
            receiver = rng.choice(candidates)
            quantity = rng.randint(1, engine.supply.stock_of(sender, pid))
            stage = rng.choice(["created", "prepared", "shipped", "received",
                                "completed", "completed"])
            wire = run_delivery(engine, sender, receiver, pid, quantity, stage)
            self.deliveries.append(wire)
            if stage != "created":
                batch_key = "|".join(self.products[pid])
                self.batch_of[wire["delivery_id"]] = batch_key

    def expected_hops(self, batch_key: str) -> list[dict]:
        """Brute-force oracle: filter the shadow log by batch key, sort like trace."""
        mine = [d for d in self.deliveries
                if self.batch_of.get(d["delivery_id"]) == batch_key]
        mine.sort(key=lambda d: (d["shipped_at"] is None, d["shipped_at"] or 0,
                                 d["delivery_id"]))
        return mine
