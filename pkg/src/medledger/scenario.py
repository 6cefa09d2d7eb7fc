"""Deterministic scenario runner.

A scenario is a JSON-lines file: an optional first line ``{"meta": {...}}``
(name, seed, signer scheme), then one step per line:

    {"actor": "<email>", "action": "<op>", "args": {...},
     "expect": {"ok": true} | {"error": "<Code>"}, "save": "<alias>"}

Steps run strictly in order under a logical clock, so the same file always
produces the same final chain head hashes. String arguments support two
reference forms: ``$alias.field`` reads a field of a previously saved step
result, and values containing ``@`` are resolved to entity ids through the
registry where the action expects an entity. Actions that mutate state
require the actor to have logged in earlier in the scenario, mirroring the
API's session guards.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any, Optional

from .engine import EngineConfig, SupplyChainEngine
from .errors import AuthRequired, MedLedgerError, StepMismatch


@dataclass
class ScenarioStep:
    index: int
    actor: str
    action: str
    args: dict
    expect: dict
    save: Optional[str] = None


@dataclass
class StepResult:
    index: int
    actor: str
    action: str
    ok: bool
    error: Optional[str]
    expected: dict
    passed: bool

    def to_wire(self) -> dict:
        return {
            "index": self.index, "actor": self.actor, "action": self.action,
            "ok": self.ok, "error": self.error, "expected": self.expected,
            "passed": self.passed,
        }


@dataclass
class ScenarioReport:
    name: str
    steps: list[StepResult] = field(default_factory=list)
    mismatch_step: Optional[int] = None
    final_digests: dict = field(default_factory=dict)
    store_records: int = 0

    @property
    def passed(self) -> int:
        return sum(1 for s in self.steps if s.passed)

    @property
    def failed(self) -> int:
        return sum(1 for s in self.steps if not s.passed)

    def to_wire(self) -> dict:
        return {
            "name": self.name,
            "steps": [s.to_wire() for s in self.steps],
            "passed": self.passed,
            "failed": self.failed,
            "mismatch_step": self.mismatch_step,
            "final_digests": self.final_digests,
            "store_records": self.store_records,
        }


def parse_scenario(path: str) -> tuple[dict, list[ScenarioStep]]:
    meta: dict = {}
    steps: list[ScenarioStep] = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            raw = json.loads(line)
            if "meta" in raw and not steps:
                meta = raw["meta"]
                continue
            steps.append(ScenarioStep(
                index=len(steps),
                actor=raw["actor"],
                action=raw["action"],
                args=raw.get("args", {}),
                expect=raw.get("expect", {"ok": True}),
                save=raw.get("save"),
            ))
    return meta, steps


class ScenarioRunner:
    # Fields holding entity references, resolved from emails to ids.
    ENTITY_FIELDS = {"address_to", "grantee", "patient", "parties", "requester"}
    # Fields naming a chain: "global" or an entity email/id (local chains are
    # keyed by their owner's entity id).
    CHAIN_FIELDS = {"chain_key", "target_chain"}
    SESSION_FREE_ACTIONS = {"register", "login"}

    def __init__(self, meta: dict | None = None, config: EngineConfig | None = None):
        meta = meta or {}
        if config is None:
            config = EngineConfig(
                clock="logical",
                seed=meta.get("seed", 0),
                signer_scheme=meta.get("signer_scheme", "ed25519"),
            )
        self.engine = SupplyChainEngine(config)
        self.sessions: dict[str, str] = {}
        self.saved: dict[str, Any] = {}

    # -- reference resolution -------------------------------------------------

    def _resolve_value(self, field_name: str, value: Any) -> Any:
        if isinstance(value, list):
            return [self._resolve_value(field_name, v) for v in value]
        if not isinstance(value, str):
            return value
        if value.startswith("$"):
            parts = value[1:].split(".")
            if parts[0] not in self.saved:
                raise StepMismatch(f"unknown alias: {parts[0]}")
            resolved = self.saved[parts[0]]
            for attr in parts[1:]:
                resolved = resolved[attr]
            return resolved
        if field_name in self.ENTITY_FIELDS and "@" in value:
            record = self.engine.registry.by_email(value)
            return record.entity_id if record else value
        if field_name in self.CHAIN_FIELDS and "@" in value:
            record = self.engine.registry.by_email(value)
            return record.entity_id if record else value
        return value

    def _resolved_args(self, args: dict) -> dict:
        return {k: self._resolve_value(k, v) for k, v in args.items()}

    def _actor_id(self, step: ScenarioStep) -> str:
        token = self.sessions.get(step.actor)
        if token is None:
            raise AuthRequired(f"{step.actor} has not logged in")
        return self.engine.resolve_session(token).entity_id

    # -- dispatch ---------------------------------------------------------------

    def run_step(self, step: ScenarioStep) -> Any:
        engine = self.engine
        args = self._resolved_args(step.args)
        action = step.action
        if action == "register":
            return engine.register_account(args["name"], args["email"],
                                           args["identity"], args["password"])
        if action == "login":
            result = engine.authenticate(step.actor, args["password"])
            self.sessions[step.actor] = result["token"]
            return result
        actor = self._actor_id(step)
        if action == "logout":
            engine.logout(self.sessions.pop(step.actor))
            return {"ok": True}
        if action == "mint":
            return engine.mint_stock(actor, args["name"], args["production_date"],
                                     args["batch_number"], args["quantity"])
        if action == "propose_agreement":
            return engine.propose_agreement(actor, args["parties"], args["scopes"])
        if action == "sign_agreement":
            return engine.sign_agreement(args["agreement_id"], actor)
        if action == "grant":
            return engine.grant_access(actor, args["grantee"], args["chain_key"],
                                       args["data_class"], args["permission"])
        if action == "revoke":
            return engine.revoke_access(actor, args["entry_id"])
        if action == "create_delivery":
            return engine.create_delivery(actor, args["address_to"])
        if action == "add_product":
            return engine.add_product(actor, args["delivery_id"], args["product_id"],
                                      args["quantity"], args.get("producer"))
        if action == "ship":
            return engine.ship_delivery(actor, args["delivery_id"], args.get("at"))
        if action == "receive":
            return engine.receive_delivery(actor, args["delivery_id"], args.get("at"))
        if action == "inbound":
            return engine.post_inbound_inventory(actor, args["delivery_id"])
        if action == "issue_certificate":
            return engine.issue_certificate(actor, args["patient"], args["product_id"],
                                            args.get("dose_info", {}))
        if action == "verify_certificate":
            return engine.verify_certificate(args["cert_id"])
        if action == "trace":
            return engine.trace(actor, args["name"], args["production_date"],
                                args["batch_number"], strict=args.get("strict", True))
        if action == "evaluate_access":
            return engine.evaluate_access(actor, args["chain_key"], args["data_class"],
                                          args["permission"])
        if action == "verify_consistency":
            report = engine.verify_consistency(args.get("scope"))
            if not report["ok"]:
                raise StepMismatch(f"consistency check failed: {report['mismatches']}")
            return report
        raise StepMismatch(f"unknown scenario action: {action}")

    def run(self, steps: list[ScenarioStep], name: str = "scenario") -> ScenarioReport:
        report = ScenarioReport(name=name)
        for step in steps:
            error: str | None = None
            try:
                result = self.run_step(step)
                if step.save:
                    self.saved[step.save] = result
            except MedLedgerError as exc:
                error = exc.code
            expected_error = step.expect.get("error")
            if expected_error is not None:
                passed = error == expected_error
            else:
                passed = error is None
            report.steps.append(StepResult(
                index=step.index, actor=step.actor, action=step.action,
                ok=error is None, error=error, expected=step.expect, passed=passed,
            ))
            if not passed and report.mismatch_step is None:
                report.mismatch_step = step.index
        report.final_digests = {
            "global_head": self.engine.head_hash(),
            "chains": {c["key"]: c["head_hash"] for c in self.engine.chains_wire()},
        }
        report.store_records = sum(1 for _ in self.engine.store.records())
        return report


def run_scenario(path: str, config: EngineConfig | None = None,
                 strict: bool = False) -> ScenarioReport:
    meta, steps = parse_scenario(path)
    runner = ScenarioRunner(meta, config)
    report = runner.run(steps, name=meta.get("name", path))
    if strict and report.mismatch_step is not None:
        failed = report.steps[report.mismatch_step]
        raise StepMismatch(
            f"step {failed.index} ({failed.action} as {failed.actor}) expected "
            f"{failed.expected}, got error={failed.error}",
            step=failed.index)
    return report
