"""Latency benchmarks against a running service.

Each workload times one user-facing function over HTTP, writing a CSV with
columns ``op,iter,micros`` plus ``p50``/``p95`` summary rows (recomputable
from the raw rows). Read-path operations are expected to stay fast;
chain-writing operations (register, outbound) pay for sealing and anchoring
and are expected slower, with register dominated by chain provisioning.
"""

from __future__ import annotations

import math
import threading
import time
from dataclasses import dataclass, field

import httpx

from .errors import ServiceUnavailable

WORKLOADS = ("login", "register", "new_item", "check_item", "trace", "inbound", "outbound")

CSV_HEADER = "op,iter,micros"

_SEED = {
    "mfg_email": "bench-mfg@bench.local",
    "dist_email": "bench-dist@bench.local",
    "password": "bench-secret-01",
    "item": {"name": "BenchVax", "production_date": "2021-03-01",
             "batch_number": "BENCH-1", "quantity": 1_000_000},
}


@dataclass
class BenchResult:
    op: str
    micros: list[int] = field(default_factory=list)

    def percentile(self, q: float) -> int:
        if not self.micros:
            return 0
        ordered = sorted(self.micros)
        rank = max(1, math.ceil(q / 100.0 * len(ordered)))
        return ordered[rank - 1]

    @property
    def p50(self) -> int:
        return self.percentile(50)

    @property
    def p95(self) -> int:
        return self.percentile(95)

    def to_csv(self) -> str:
        lines = [CSV_HEADER]
        lines += [f"{self.op},{i},{v}" for i, v in enumerate(self.micros)]
        if self.micros:
            lines.append(f"{self.op},p50,{self.p50}")
            lines.append(f"{self.op},p95,{self.p95}")
        return "\n".join(lines) + "\n"


def _check(response: httpx.Response, *allowed: int) -> dict:
    if response.status_code not in (allowed or (200,)):
        raise ServiceUnavailable(
            f"{response.request.method} {response.request.url.path} -> "
            f"{response.status_code}: {response.text[:200]}")
    return response.json()


class BenchClient:
    """Seeded client state: a manufacturer, a distributor, their agreement, stock."""

    def __init__(self, base_url: str):
        self.base_url = base_url.rstrip("/")
        self.http = httpx.Client(base_url=self.base_url, timeout=30.0)
        self.mfg_token = ""
        self.dist_token = ""
        self.product_id = ""
        self._uniq = 0

    def close(self) -> None:
        self.http.close()

    def _login(self, email: str) -> str:
        body = {"email": email, "password": _SEED["password"]}
        return _check(self.http.post("/login", json=body))["token"]

    def _auth(self, token: str) -> dict:
        return {"Authorization": f"Bearer {token}"}

    def ensure_seeded(self) -> None:
        try:
            _check(self.http.get("/health"))
        except (httpx.HTTPError, ServiceUnavailable) as exc:
            raise ServiceUnavailable(f"no service at {self.base_url}: {exc}") from None
        for email, identity in ((_SEED["mfg_email"], "Manufacturer"),
                                (_SEED["dist_email"], "Distributor")):
            response = self.http.post("/register", json={
                "name": email.split("@")[0], "email": email,
                "identity": identity, "password": _SEED["password"]})
            if response.status_code not in (200, 409):
                raise ServiceUnavailable(f"seed register failed: {response.text[:200]}")
        self.mfg_token = self._login(_SEED["mfg_email"])
        self.dist_token = self._login(_SEED["dist_email"])
        mfg = _check(self.http.get("/me", headers=self._auth(self.mfg_token)))
        dist = _check(self.http.get("/me", headers=self._auth(self.dist_token)))
        agreements = _check(self.http.get("/acl/agreements",
                                          headers=self._auth(self.mfg_token)))
        if not any(a["status"] == "active" for a in agreements["agreements"]):
            scopes = [{"data_class": "ShipmentTracking", "permission": "Write"},
                      {"data_class": "ShipmentTracking", "permission": "Read"}]
            agreement = _check(self.http.post(
                "/acl/agreements",
                json={"parties": [mfg["entity_id"], dist["entity_id"]], "scopes": scopes},
                headers=self._auth(self.mfg_token)))
            for token in (self.mfg_token, self.dist_token):
                _check(self.http.post(
                    f"/acl/agreements/{agreement['agreement_id']}/sign",
                    headers=self._auth(token)))
        minted = _check(self.http.post("/inventory/mint", json=_SEED["item"],
                                       headers=self._auth(self.mfg_token)))
        self.product_id = minted["product"]["product_id"]
        # One completed delivery so the trace workload has a hop to return.
        params = {"name": _SEED["item"]["name"],
                  "production_date": _SEED["item"]["production_date"],
                  "batch_number": _SEED["item"]["batch_number"]}
        existing = self.http.get("/trace", params=params,
                                 headers=self._auth(self.mfg_token))
        if existing.status_code != 200 or not existing.json().get("hops"):
            self._delivery_cycle(quantity=10, through_inbound=True)

    def _unique(self, prefix: str) -> str:
        self._uniq += 1
        return f"{prefix}-{time.time_ns()}-{self._uniq}"

    def _delivery_cycle(self, quantity: int = 1, through_inbound: bool = False,
                        stop_at: str = "") -> str:
        mfg_auth = self._auth(self.mfg_token)
        dist_auth = self._auth(self.dist_token)
        delivery = _check(self.http.post(
            "/deliveries", json={"address_to": _SEED["dist_email"]}, headers=mfg_auth))
        delivery_id = delivery["delivery_id"]
        if stop_at == "created":
            return delivery_id
        _check(self.http.post(f"/deliveries/{delivery_id}/products",
                              json={"product_id": self.product_id, "quantity": quantity},
                              headers=mfg_auth))
        _check(self.http.post(f"/deliveries/{delivery_id}/ship", json={}, headers=mfg_auth))
        if stop_at == "shipped":
            return delivery_id
        _check(self.http.post(f"/deliveries/{delivery_id}/receive", json={},
                              headers=dist_auth))
        if through_inbound:
            _check(self.http.post("/inventory/inbound", json={"delivery_id": delivery_id},
                                  headers=dist_auth))
        return delivery_id

    # -- one timed iteration per workload ------------------------------------

    def run_iteration(self, op: str) -> int:
        if op == "login":
            started = time.perf_counter_ns()
            _check(self.http.post("/login", json={
                "email": _SEED["mfg_email"], "password": _SEED["password"]}))
        elif op == "register":
            email = self._unique("bench-reg") + "@bench.local"
            started = time.perf_counter_ns()
            _check(self.http.post("/register", json={
                "name": "bench", "email": email,
                "identity": "Manufacturer", "password": _SEED["password"]}))
        elif op == "new_item":
            body = {"name": "BenchVax", "production_date": "2021-03-01",
                    "batch_number": self._unique("LOT"), "quantity": 100}
            started = time.perf_counter_ns()
            _check(self.http.post("/inventory/mint", json=body,
                                  headers=self._auth(self.mfg_token)))
        elif op == "check_item":
            started = time.perf_counter_ns()
            _check(self.http.get(f"/products/{self.product_id}",
                                 headers=self._auth(self.mfg_token)))
        elif op == "trace":
            params = {"name": _SEED["item"]["name"],
                      "production_date": _SEED["item"]["production_date"],
                      "batch_number": _SEED["item"]["batch_number"]}
            started = time.perf_counter_ns()
            _check(self.http.get("/trace", params=params,
                                 headers=self._auth(self.mfg_token)))
        elif op == "inbound":
            delivery_id = self._delivery_cycle(quantity=1)  # prep untimed
            started = time.perf_counter_ns()
            _check(self.http.post("/inventory/inbound", json={"delivery_id": delivery_id},
                                  headers=self._auth(self.dist_token)))
        elif op == "outbound":
            started = time.perf_counter_ns()
            self._delivery_cycle(quantity=1, stop_at="shipped")
        else:
            raise ServiceUnavailable(f"unknown workload: {op}")
        return (time.perf_counter_ns() - started) // 1_000


def run_bench(op: str, n: int, base_url: str, clients: int = 1,
              warmup: int = 2) -> BenchResult:
    """Time n steady-state iterations of one workload (warmup runs untimed)."""
    if op not in WORKLOADS:
        raise ServiceUnavailable(f"unknown workload: {op} (choose from {WORKLOADS})")
    result = BenchResult(op=op)
    if n <= 0:
        return result
    if clients <= 1:
        client = BenchClient(base_url)
        try:
            client.ensure_seeded()
            for _ in range(warmup):
                client.run_iteration(op)
            result.micros = [client.run_iteration(op) for _ in range(n)]
        finally:
            client.close()
        return result

    shares = [n // clients + (1 if i < n % clients else 0) for i in range(clients)]
    collected: list[list[int]] = [[] for _ in range(clients)]
    errors: list[Exception] = []

    def worker(index: int, share: int) -> None:
        client = BenchClient(base_url)
        try:
            client.ensure_seeded()
            for _ in range(warmup):
                client.run_iteration(op)
            collected[index] = [client.run_iteration(op) for _ in range(share)]
        except Exception as exc:
            errors.append(exc)
        finally:
            client.close()

    threads = [threading.Thread(target=worker, args=(i, share))
               for i, share in enumerate(shares) if share > 0]
    for thread in threads:
        thread.start()
    for thread in threads:
        thread.join()
    if errors:
        raise errors[0]
    for chunk in collected:
        result.micros.extend(chunk)
    return result


def serve_background(engine, host: str = "127.0.0.1", port: int = 0):
    """Start a uvicorn server on a background thread; returns (server, base_url)."""
    import uvicorn

    from .api import create_app

    config = uvicorn.Config(create_app(engine), host=host, port=port,
                            log_level="warning")
    server = uvicorn.Server(config)
    thread = threading.Thread(target=server.run, daemon=True)
    thread.start()
    deadline = time.time() + 10
    while not server.started:
        if time.time() > deadline:
            raise ServiceUnavailable("benchmark service failed to start")
        time.sleep(0.01)
    bound = server.servers[0].sockets[0].getsockname()
    return server, f"http://{bound[0]}:{bound[1]}"
