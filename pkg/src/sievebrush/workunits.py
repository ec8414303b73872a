"""
    Work units for distributed relation collection.

    The special-q range is cut into sub-ranges, one work unit each.  A unit
    moves AVAILABLE -> ASSIGNED -> OK | ERROR | CANCELED; failed or timed
    out units are cloned into a new AVAILABLE unit (attempts + 1) up to
    max_resubmit times.  OK is terminal.

    The ledger is a single writer: every transition takes the ledger lock
    and is appended to a JSON-lines event log, so a restarted server
    replays snapshot + log to the same state.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
import enum
import gzip
import json
import logging
import os
import threading
import time
import urllib.error
import urllib.parse
import urllib.request

from sievebrush import Recipe
from sievebrush.errors import ProtocolError
from sievebrush.filters import FunctionFilter, Sampler
from sievebrush.relations import parse_relation, validate_relation
from sievebrush.stats import Median

MAX_RESUBMIT = 3
DEFAULT_TIMEOUT = 3600.0
TIMEOUT_FACTOR = 6
SAMPLE_FRACTION = 0.01
SAMPLE_MINIMUM = 10


class State(str, enum.Enum):
    AVAILABLE = "AVAILABLE"
    ASSIGNED = "ASSIGNED"
    OK = "OK"
    ERROR = "ERROR"
    CANCELED = "CANCELED"


# (from, to) pairs a unit may take; resubmission creates a new unit
TRANSITIONS = {
    (State.AVAILABLE, State.ASSIGNED),
    (State.ASSIGNED, State.OK),
    (State.ASSIGNED, State.ERROR),
    (State.ASSIGNED, State.CANCELED),
}


@dataclass
class WorkUnit:
    id: str
    qmin: int
    qmax: int
    digest: str = ""
    state: State = State.AVAILABLE
    attempts: int = 0
    parent: str = None
    client: str = None
    assigned_at: float = None
    deadline: float = None
    finished_at: float = None
    relations: int = 0
    detail: str = None

    @property
    def payload(self):
        return {"id": self.id, "qmin": self.qmin, "qmax": self.qmax, "digest": self.digest}

    def as_dict(self):
        d = asdict(self)
        d["state"] = self.state.value
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        d["state"] = State(d["state"])
        return cls(**d)


def split_range(qmin, qmax, chunk):
    """Cut [qmin, qmax) into consecutive sub-ranges of at most chunk."""
    if chunk <= 0:
        raise ValueError(f"chunk must be positive, got {chunk}")
    return [(lo, min(lo + chunk, qmax)) for lo in range(qmin, qmax, chunk)]


def sample_check(lines, pair, lpb=(None, None), seed=0):
    """Validate a random 1% sample (at least 10) of uploaded relation lines.

    Returns None when the sample is sound, else a description of the first
    failure.
    """
    lines = [line for line in lines if line.strip() and not line.startswith("#")]
    sampler = Sampler(SAMPLE_FRACTION, minimum=SAMPLE_MINIMUM, total=len(lines), seed=seed)
    rejects = []
    recipe = Recipe(sampler, FunctionFilter(parse_relation),
                    error_stream=FunctionFilter(rejects.append))
    for rel in recipe.collect(lines):
        detail = validate_relation(rel, pair, lpb)
        if detail is not None:
            return f"{rel}: {detail}"
    if rejects:
        return rejects[0]["exception"]
    return None


class Ledger:
    """Every work unit of one campaign.

    check(lines, unit) validates an upload and returns None or a failure
    description; the default accepts everything.  sink(unit, lines) receives
    every accepted upload.
    """

    def __init__(self, units=(), check=None, timeout=DEFAULT_TIMEOUT,
                 max_resubmit=MAX_RESUBMIT, log_path=None, clock=time.time, sink=None):
        self.units = {}
        self.order = []
        self.check = check or (lambda lines, unit: None)
        self.sink = sink
        self.base_timeout = timeout
        self.max_resubmit = max_resubmit
        self.log_path = log_path
        self.clock = clock
        self.durations = []
        self.events = []
        self._lock = threading.Lock()
        self._next = 0
        for unit in units:
            self._add(unit, log=True)

    def _add(self, unit, log=False):
        self.units[unit.id] = unit
        self.order.append(unit.id)
        self._next = max(self._next, int(unit.id.split("-")[-1]) + 1)
        if log:
            self._log("add", unit)

    def _new_id(self):
        uid = f"wu-{self._next:06d}"
        self._next += 1
        return uid

    def _log(self, event, unit, before=None):
        entry = {"event": event, "unit": unit.as_dict()}
        if before is not None:
            entry["from"] = before.value
        self.events.append((event, before, unit.state, unit.id))
        if self.log_path:
            with open(self.log_path, "a") as f:
                f.write(json.dumps(entry, sort_keys=True) + "\n")

    def _move(self, unit, to, event):
        if (unit.state, to) not in TRANSITIONS:
            raise ProtocolError(f"{unit.id}: illegal transition {unit.state.value} -> {to.value}")
        before = unit.state
        unit.state = to
        self._log(event, unit, before)

    def _resubmit(self, unit):
        if unit.attempts >= self.max_resubmit:
            logging.warning(f"{unit.id} [{unit.qmin}, {unit.qmax}) gave up after "
                            f"{unit.attempts + 1} attempts")
            return None
        clone = WorkUnit(self._new_id(), unit.qmin, unit.qmax, unit.digest,
                         attempts=unit.attempts + 1, parent=unit.id)
        self._add(clone, log=True)
        logging.info(f"resubmitted {unit.id} as {clone.id} (attempt {clone.attempts})")
        return clone

    @property
    def timeout(self):
        """6x the median completion time once units have completed."""
        if self.durations:
            median = Median(float)
            Recipe(median).run(self.durations)
            return TIMEOUT_FACTOR * median.value()
        return self.base_timeout

    def __getitem__(self, uid):
        try:
            return self.units[uid]
        except KeyError:
            raise ProtocolError(f"unknown work unit {uid!r}") from None

    def __iter__(self):
        return (self.units[uid] for uid in self.order)

    def __len__(self):
        return len(self.units)

    def assign(self, client_id, now=None):
        """Hand the first AVAILABLE unit to client_id, or return None."""
        with self._lock:
            now = self.clock() if now is None else now
            for unit in self:
                if unit.state is State.AVAILABLE:
                    unit.client = client_id
                    unit.assigned_at = now
                    unit.deadline = now + self.timeout
                    self._move(unit, State.ASSIGNED, "assign")
                    logging.debug(f"assigned {unit.id} to {client_id}")
                    return unit
            return None

    def submit(self, unit_id, client_id, lines, now=None):
        """Record an upload of relation lines; returns the unit's new state."""
        with self._lock:
            unit = self[unit_id]
            if unit.state is not State.ASSIGNED:
                raise ProtocolError(f"{unit_id} is {unit.state.value}, not ASSIGNED")
            if unit.client != client_id:
                raise ProtocolError(f"{unit_id} is assigned to {unit.client}, not {client_id}")
            now = self.clock() if now is None else now
            lines = list(lines)
            detail = self.check(lines, unit)
            unit.finished_at = now
            if detail is None:
                unit.relations = sum(1 for line in lines if line.strip()
                                     and not line.startswith("#"))
                self.durations.append(now - unit.assigned_at)
                self._move(unit, State.OK, "submit")
                if self.sink is not None:
                    self.sink(unit, lines)
                logging.info(f"{unit_id} OK: {unit.relations} relations from {client_id}")
            else:
                unit.detail = detail
                self._move(unit, State.ERROR, "submit")
                logging.warning(f"{unit_id} failed sanity check: {detail}")
                self._resubmit(unit)
            return unit.state

    def timeout_scan(self, now=None):
        """Cancel every ASSIGNED unit past its deadline; returns them."""
        with self._lock:
            now = self.clock() if now is None else now
            canceled = []
            for unit in list(self):
                if unit.state is State.ASSIGNED and unit.deadline < now:
                    unit.finished_at = now
                    self._move(unit, State.CANCELED, "timeout")
                    canceled.append(unit)
                    self._resubmit(unit)
            if canceled:
                logging.info(f"timed out {len(canceled)} work units")
            return canceled

    def counts(self):
        out = {s.value: 0 for s in State}
        for unit in self:
            out[unit.state.value] += 1
        return out

    def holes(self):
        """Sub-ranges with no OK unit and nothing left to retry them."""
        ranges = {}
        for unit in self:
            ranges.setdefault((unit.qmin, unit.qmax), []).append(unit.state)
        pending = {State.AVAILABLE, State.ASSIGNED, State.OK}
        return sorted(r for r, states in ranges.items() if not pending & set(states))

    def complete(self):
        """Whether every sub-range has an OK unit."""
        ranges = {}
        for unit in self:
            ranges.setdefault((unit.qmin, unit.qmax), False)
            if unit.state is State.OK:
                ranges[(unit.qmin, unit.qmax)] = True
        return all(ranges.values())

    def finished(self):
        return not any(u.state in (State.AVAILABLE, State.ASSIGNED) for u in self)

    def status(self):
        return {
            "counts": self.counts(),
            "relations": sum(u.relations for u in self if u.state is State.OK),
            "timeout": self.timeout,
            "holes": self.holes(),
        }

    def check_invariants(self):
        """Raise ProtocolError if two OK units cover the same sub-range or
        a unit exceeds the resubmission cap."""
        ok = set()
        for unit in self:
            if unit.state is State.OK:
                key = (unit.qmin, unit.qmax)
                if key in ok:
                    raise ProtocolError(f"two OK units for [{key[0]}, {key[1]})")
                ok.add(key)
            if unit.attempts > self.max_resubmit:
                raise ProtocolError(f"{unit.id} exceeds {self.max_resubmit} resubmissions")
        for _, before, after, uid in self.events:
            if before is not None and (before, after) not in TRANSITIONS:
                raise ProtocolError(f"{uid}: logged illegal transition {before} -> {after}")

    #####################
    #  Persistence      #
    #####################

    def snapshot(self, path):
        """Write every unit to path and truncate the event log."""
        with self._lock:
            data = {
                "units": [u.as_dict() for u in self],
                "durations": self.durations,
                "timeout": self.base_timeout,
                "max_resubmit": self.max_resubmit,
            }
            tmp = f"{path}.tmp"
            with open(tmp, "w") as f:
                json.dump(data, f)
            os.replace(tmp, path)
            if self.log_path and os.path.exists(self.log_path):
                open(self.log_path, "w").close()

    @classmethod
    def recover(cls, snapshot_path=None, log_path=None, check=None, clock=time.time,
                sink=None):
        """Rebuild a ledger from a snapshot and the events logged after it."""
        units, durations = {}, []
        timeout, max_resubmit = DEFAULT_TIMEOUT, MAX_RESUBMIT
        if snapshot_path and os.path.exists(snapshot_path):
            with open(snapshot_path) as f:
                data = json.load(f)
            for d in data["units"]:
                units[d["id"]] = WorkUnit.from_dict(d)
            durations = data.get("durations", [])
            timeout = data.get("timeout", timeout)
            max_resubmit = data.get("max_resubmit", max_resubmit)
        if log_path and os.path.exists(log_path):
            with open(log_path) as f:
                for line in f:
                    if not line.strip():
                        continue
                    entry = json.loads(line)
                    unit = WorkUnit.from_dict(entry["unit"])
                    units[unit.id] = unit
                    if entry["event"] == "submit" and unit.state is State.OK:
                        durations.append(unit.finished_at - unit.assigned_at)
        ledger = cls(check=check, timeout=timeout, max_resubmit=max_resubmit,
                     log_path=log_path, clock=clock, sink=sink)
        for uid in sorted(units):
            ledger._add(units[uid])
        ledger.durations = durations
        logging.info(f"recovered {len(ledger)} work units: {ledger.counts()}")
        return ledger


def create_campaign(qmin, qmax, chunk, digest="", **kwargs):
    """Ledger with one AVAILABLE unit per chunk of [qmin, qmax)."""
    ledger = Ledger(**kwargs)
    for lo, hi in split_range(qmin, qmax, chunk):
        ledger._add(WorkUnit(ledger._new_id(), lo, hi, digest), log=True)
    logging.info(f"campaign [{qmin}, {qmax}): {len(ledger)} work units of {chunk}")
    return ledger


#####################
#  HTTP server      #
#####################


class _Handler(BaseHTTPRequestHandler):
    ledger = None

    def log_message(self, format, *args):
        logging.debug("%s " + format, self.address_string(), *args)

    def _reply(self, code, obj):
        body = json.dumps(obj).encode()
        self.send_response(code)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def _body(self):
        length = int(self.headers.get("Content-Length") or 0)
        return self.rfile.read(length) if length else b""

    def do_GET(self):
        path = urllib.parse.urlparse(self.path).path
        if path == "/wu/status":
            self._reply(200, self.ledger.status())
        elif path == "/campaign/holes":
            self._reply(200, {"holes": self.ledger.holes(), "complete": self.ledger.complete()})
        else:
            self._reply(404, {"error": f"no such endpoint {path}"})

    def do_POST(self):
        url = urllib.parse.urlparse(self.path)
        query = urllib.parse.parse_qs(url.query)
        parts = url.path.strip("/").split("/")
        try:
            if parts == ["wu", "assign"]:
                request = json.loads(self._body() or b"{}")
                unit = self.ledger.assign(request.get("client") or query.get("client", [""])[0])
                self._reply(200, {"unit": unit.payload if unit else None})
            elif len(parts) == 3 and parts[0] == "wu" and parts[2] == "submit":
                client = query.get("client", [""])[0]
                text = gzip.decompress(self._body()).decode()
                state = self.ledger.submit(parts[1], client, text.splitlines())
                self._reply(200, {"state": state.value})
            else:
                self._reply(404, {"error": f"no such endpoint {url.path}"})
        except ProtocolError as exc:
            self._reply(409, {"error": str(exc)})
        except (ValueError, OSError) as exc:
            self._reply(400, {"error": str(exc)})


class WorkUnitServer:
    """HTTP front end of a ledger; a periodic thread runs the timeout scan."""

    def __init__(self, ledger, host="127.0.0.1", port=0, scan_interval=10.0,
                 snapshot_path=None, snapshot_every=100):
        handler = type("Handler", (_Handler,), {"ledger": ledger})
        self.ledger = ledger
        self.httpd = ThreadingHTTPServer((host, port), handler)
        self.scan_interval = scan_interval
        self.snapshot_path = snapshot_path
        self.snapshot_every = snapshot_every
        self._stop = threading.Event()
        self._threads = []

    @property
    def url(self):
        host, port = self.httpd.server_address[:2]
        return f"http://{host}:{port}"

    def _scanner(self):
        logged = len(self.ledger.events)
        while not self._stop.wait(self.scan_interval):
            self.ledger.timeout_scan()
            if self.snapshot_path and len(self.ledger.events) - logged >= self.snapshot_every:
                self.ledger.snapshot(self.snapshot_path)
                logged = len(self.ledger.events)

    def start(self):
        for target in (self.httpd.serve_forever, self._scanner):
            t = threading.Thread(target=target, daemon=True)
            t.start()
            self._threads.append(t)
        logging.info(f"work unit server on {self.url}")
        return self

    def stop(self):
        self._stop.set()
        self.httpd.shutdown()
        self.httpd.server_close()
        if self.snapshot_path:
            self.ledger.snapshot(self.snapshot_path)

    def __enter__(self):
        return self.start()

    def __exit__(self, *exc):
        self.stop()

    def serve_until_finished(self, poll=1.0):
        while not self.ledger.finished():
            time.sleep(poll)


#####################
#  Client           #
#####################


def _post(url, data=b"", headers=None):
    req = urllib.request.Request(url, data=data, method="POST", headers=headers or {})
    try:
        with urllib.request.urlopen(req) as resp:
            return json.loads(resp.read())
    except urllib.error.HTTPError as exc:
        detail = json.loads(exc.read() or b"{}").get("error", str(exc))
        if exc.code == 409:
            raise ProtocolError(detail) from None
        raise


def request_unit(server, client_id):
    reply = _post(f"{server}/wu/assign", json.dumps({"client": client_id}).encode(),
                  {"Content-Type": "application/json"})
    return reply["unit"]


def upload_result(server, unit_id, client_id, lines, workdir=None):
    """gzip the relation lines (kept under workdir if given) and submit them."""
    body = gzip.compress(("\n".join(lines) + "\n").encode())
    if workdir:
        with open(os.path.join(workdir, f"{unit_id}.rels.gz"), "wb") as f:
            f.write(body)
    query = urllib.parse.urlencode({"client": client_id})
    reply = _post(f"{server}/wu/{unit_id}/submit?{query}", body,
                  {"Content-Type": "application/gzip"})
    return reply["state"]


def client_loop(server, work, client_id, workdir=None, idle_wait=5.0, max_idle=None):
    """Request units, run work(payload) -> relation lines, upload; until
    the server has nothing left (or max_idle empty polls)."""
    done, idle = 0, 0
    while True:
        unit = request_unit(server, client_id)
        if unit is None:
            idle += 1
            if max_idle is not None and idle >= max_idle:
                return done
            time.sleep(idle_wait)
            continue
        idle = 0
        logging.info(f"{client_id}: working on {unit['id']} [{unit['qmin']}, {unit['qmax']})")
        lines = work(unit)
        state = upload_result(server, unit["id"], client_id, lines, workdir)
        logging.info(f"{client_id}: {unit['id']} -> {state}")
        done += 1


def run_client(server, work, threads=1, workdir=None, client_id=None, **kwargs):
    """Run `threads` independent client loops; returns units processed."""
    client_id = client_id or f"{os.uname().nodename}-{os.getpid()}"
    if workdir:
        os.makedirs(workdir, exist_ok=True)
    with ThreadPoolExecutor(max_workers=threads) as pool:
        futures = [
            pool.submit(client_loop, server, work, f"{client_id}.{t}", workdir, **kwargs)
            for t in range(threads)
        ]
        return sum(f.result() for f in futures)
