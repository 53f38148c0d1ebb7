"""HTTP/JSON service exposing the audit engine under /v1.

The console is a thin client: every number it shows comes from here.
Contract (documented in docs/api.md, versioned under /v1):

- responses are enveloped as ``{"data": …, "head": <log head digest>}``;
- errors as ``{"error": {"code", "message", "invariant"?}}``;
- auth is a per-session bearer-style token in ``X-Audit-Token``; the
  scrutineer token can read everything and mutate nothing;
- mutating endpoints accept ``X-Idempotency-Key``; a retry with the same
  key returns the recorded response without appending new events.

Sessions persist as hash-chained JSONL logs plus committed batch CSVs in
the data directory; no database.  The whole directory is copyable by
scrutineers.
"""

from __future__ import annotations

import json
import secrets
import threading
from pathlib import Path

from fastapi import Body, FastAPI, Header, Request
from fastapi.responses import JSONResponse

from . import stats
from .ballots import (
    commit_batch,
    contest_from_json,
    parse_preference_file,
    preference_file_text,
)
from .errors import (
    AuditError,
    ConflictError,
    DomainError,
    EmptyBatchError,
    FormatError,
    OrderingViolation,
    SchemaError,
    SelectionError,
    StateError,
    TamperError,
)
from .events import load_events
from .session import AuditSession, classify_scenario

_ERROR_CODES = [
    (OrderingViolation, 409, "ordering_violation"),
    (ConflictError, 409, "conflict"),
    (StateError, 409, "invalid_phase"),
    (SelectionError, 422, "unselected_ballot"),
    (TamperError, 409, "log_tampered"),
    (EmptyBatchError, 400, "empty_batch"),
    (FormatError, 400, "format_error"),
    (SchemaError, 400, "schema_error"),
    (DomainError, 400, "domain_error"),
    (AuditError, 400, "audit_error"),
]


class ManagedSession:
    def __init__(self, session: AuditSession, official_token: str, scrutineer_token: str):
        self.session = session
        self.official_token = official_token
        self.scrutineer_token = scrutineer_token
        self.lock = threading.Lock()
        self.idempotency: dict[str, dict] = {}


class SessionStore:
    """Directory-backed registry of sessions."""

    def __init__(self, data_dir: Path):
        self.data_dir = Path(data_dir)
        self.data_dir.mkdir(parents=True, exist_ok=True)
        self.sessions: dict[str, ManagedSession] = {}
        self._load_existing()

    def _session_dir(self, session_id: str) -> Path:
        return self.data_dir / "sessions" / session_id

    def _load_existing(self):
        root = self.data_dir / "sessions"
        if not root.is_dir():
            return
        for directory in sorted(root.iterdir()):
            log_path = directory / "events.jsonl"
            tokens_path = directory / "tokens.json"
            if not (log_path.is_file() and tokens_path.is_file()):
                continue
            events = load_events(log_path)
            batches = {}
            batch_dir = directory / "batches"
            if batch_dir.is_dir():
                for csv_path in sorted(batch_dir.glob("*.csv")):
                    meta_path = csv_path.with_suffix(".json")
                    meta = json.loads(meta_path.read_text(encoding="utf-8"))
                    contest = contest_from_json(meta["contest"])
                    batch = parse_preference_file(
                        csv_path.read_text(encoding="utf-8"), contest, meta["batch_id"]
                    )
                    batches[meta["batch_id"]] = commit_batch(batch, contest)
            session = AuditSession.replay(events, batches=batches)
            session.log.path = log_path
            tokens = json.loads(tokens_path.read_text(encoding="utf-8"))
            self.sessions[session.session_id] = ManagedSession(
                session, tokens["official"], tokens["scrutineer"]
            )

    def create(self, contest, level: float, assurance: float) -> ManagedSession:
        session_id = f"s{secrets.token_hex(6)}"
        directory = self._session_dir(session_id)
        directory.mkdir(parents=True, exist_ok=False)
        from .events import EventLog

        log = EventLog(path=directory / "events.jsonl")
        session = AuditSession(
            contest,
            session_id=session_id,
            level=level,
            assurance=assurance,
            log=log,
        )
        managed = ManagedSession(
            session,
            official_token=f"official-{secrets.token_hex(12)}",
            scrutineer_token=f"scrutineer-{secrets.token_hex(12)}",
        )
        (directory / "tokens.json").write_text(
            json.dumps(
                {"official": managed.official_token, "scrutineer": managed.scrutineer_token}
            ),
            encoding="utf-8",
        )
        self.sessions[session_id] = managed
        return managed

    def save_batch(self, session_id: str, batch, contest):
        directory = self._session_dir(session_id) / "batches"
        directory.mkdir(parents=True, exist_ok=True)
        (directory / f"{batch.batch_id}.csv").write_text(
            preference_file_text(batch, contest), encoding="utf-8"
        )
        (directory / f"{batch.batch_id}.json").write_text(
            json.dumps(
                {
                    "batch_id": batch.batch_id,
                    "commitment": batch.commitment,
                    "contest": {
                        "contest_id": contest.contest_id,
                        "jurisdiction": contest.jurisdiction_name,
                        "candidates": list(contest.candidates),
                        "seats": contest.seats,
                        "enrolled_voters": contest.enrolled_voters,
                    },
                }
            ),
            encoding="utf-8",
        )


def _error_response(exc: AuditError) -> JSONResponse:
    for klass, status, code in _ERROR_CODES:
        if isinstance(exc, klass):
            body = {"error": {"code": code, "message": str(exc)}}
            if code in ("ordering_violation", "unselected_ballot"):
                body["error"]["invariant"] = code
            return JSONResponse(status_code=status, content=body)
    return JSONResponse(
        status_code=500, content={"error": {"code": "internal", "message": str(exc)}}
    )


def create_app(data_dir: Path | str) -> FastAPI:
    app = FastAPI(title="prefaudit service", version="v1")
    store = SessionStore(Path(data_dir))
    app.state.store = store

    @app.exception_handler(AuditError)
    async def _audit_error_handler(_request: Request, exc: AuditError):
        return _error_response(exc)

    def _managed(session_id: str) -> ManagedSession:
        managed = store.sessions.get(session_id)
        if managed is None:
            raise DomainError(f"unknown session {session_id!r}")
        return managed

    def _role(managed: ManagedSession, token: str | None) -> str:
        if token == managed.official_token:
            return "official"
        if token == managed.scrutineer_token:
            return "scrutineer"
        raise PermissionError("unrecognized session token")

    def _envelope(managed: ManagedSession, data) -> dict:
        return {"data": data, "head": managed.session.log.head}

    def _mutate(managed, token, idempotency_key, fn):
        role = _role(managed, token)
        if role != "official":
            return JSONResponse(
                status_code=403,
                content={
                    "error": {
                        "code": "forbidden_role",
                        "message": "scrutineer tokens are read-only",
                    }
                },
            )
        with managed.lock:
            if idempotency_key and idempotency_key in managed.idempotency:
                return managed.idempotency[idempotency_key]
            result = _envelope(managed, fn())
            if idempotency_key:
                managed.idempotency[idempotency_key] = result
            return result

    # ── session lifecycle ──────────────────────────────────────────

    @app.post("/v1/sessions")
    def create_session(payload: dict = Body(...)):
        contest = contest_from_json(payload["contest"])
        managed = store.create(
            contest,
            level=float(payload.get("level", stats.DEFAULT_LEVEL)),
            assurance=float(payload.get("assurance", 0.999)),
        )
        return _envelope(
            managed,
            {
                "session_id": managed.session.session_id,
                "official_token": managed.official_token,
                "scrutineer_token": managed.scrutineer_token,
            },
        )

    @app.get("/v1/sessions/{session_id}")
    def session_summary(session_id: str, x_audit_token: str | None = Header(default=None)):
        managed = _managed(session_id)
        _role(managed, x_audit_token)
        session = managed.session
        return _envelope(
            managed,
            {
                "session_id": session.session_id,
                "phase": session.phase,
                "contest": {
                    "contest_id": session.contest.contest_id,
                    "jurisdiction": session.contest.jurisdiction_name,
                    "candidates": list(session.contest.candidates),
                    "seats": session.contest.seats,
                },
                "level": session.level,
                "batches": [
                    {
                        "batch_id": batch_id,
                        "size": meta["size"],
                        "commitment": meta["commitment"],
                        "committed_at": meta["at"],
                        "selections_drawn": batch_id in session.selections,
                    }
                    for batch_id, meta in session.batch_meta.items()
                ],
                "turnout": session.turnout,
            },
        )

    # ── mutations ──────────────────────────────────────────────────

    @app.post("/v1/sessions/{session_id}/turnout")
    def record_turnout(
        session_id: str,
        payload: dict = Body(...),
        x_audit_token: str | None = Header(default=None),
        x_idempotency_key: str | None = Header(default=None),
    ):
        managed = _managed(session_id)

        def run():
            managed.session.record_turnout(payload["place"], int(payload["count"]))
            return {"place": payload["place"], "count": int(payload["count"])}

        return _mutate(managed, x_audit_token, x_idempotency_key, run)

    @app.post("/v1/sessions/{session_id}/batches")
    def upload_batch(
        session_id: str,
        payload: dict = Body(...),
        x_audit_token: str | None = Header(default=None),
        x_idempotency_key: str | None = Header(default=None),
    ):
        managed = _managed(session_id)

        def run():
            session = managed.session
            batch = parse_preference_file(
                payload["csv"], session.contest, payload["batch_id"]
            )
            batch = commit_batch(batch, session.contest)
            session.commit_batch(batch)
            store.save_batch(session_id, batch, session.contest)
            return {
                "batch_id": batch.batch_id,
                "size": batch.size,
                "commitment": batch.commitment,
            }

        return _mutate(managed, x_audit_token, x_idempotency_key, run)

    @app.post("/v1/sessions/{session_id}/seeds")
    def register_seed(
        session_id: str,
        payload: dict = Body(...),
        x_audit_token: str | None = Header(default=None),
        x_idempotency_key: str | None = Header(default=None),
    ):
        managed = _managed(session_id)

        def run():
            result = managed.session.register_seed(
                payload["transcript"],
                payload["scope"],
                p=payload.get("p"),
            )
            if payload["scope"] == "second_pass":
                return {"scope": "second_pass", "refs": [list(r) for r in result]}
            return {"scope": payload["scope"], "indices": result}

        return _mutate(managed, x_audit_token, x_idempotency_key, run)

    @app.post("/v1/sessions/{session_id}/readings")
    def submit_reading(
        session_id: str,
        payload: dict = Body(...),
        x_audit_token: str | None = Header(default=None),
        x_idempotency_key: str | None = Header(default=None),
    ):
        managed = _managed(session_id)

        def run():
            from .ballots import HUMAN_READ, PreferenceSequence

            sequence = PreferenceSequence(
                {c: int(r) for c, r in payload["rankings"].items()},
                source=HUMAN_READ,
            )
            discrepancy = managed.session.submit_reading(
                payload["batch_id"],
                int(payload["ballot_index"]),
                sequence,
                payload.get("operator", "console"),
                correction=bool(payload.get("correction", False)),
            )
            sample = managed.session.error_sample()
            return {
                "discrepancy": None
                if discrepancy is None
                else {
                    "batch_id": discrepancy.batch_id,
                    "ballot_index": discrepancy.ballot_index,
                    "digitised": discrepancy.digitised,
                    "human_read": discrepancy.human_read,
                    "rank_diffs": [list(d) for d in discrepancy.rank_diffs],
                },
                "tallies": {
                    "inspected": sample.ballots_inspected,
                    "with_error": sample.ballots_with_error,
                    "rank_discrepancies": sample.total_rank_discrepancies,
                },
            }

        return _mutate(managed, x_audit_token, x_idempotency_key, run)

    @app.post("/v1/sessions/{session_id}/margin")
    def set_margin(
        session_id: str,
        payload: dict = Body(...),
        x_audit_token: str | None = Header(default=None),
        x_idempotency_key: str | None = Header(default=None),
    ):
        managed = _managed(session_id)

        def run():
            if payload.get("compute"):
                return managed.session.compute_margin()
            managed.session.set_margin(
                vote_changes=int(payload["vote_changes"]),
                kind=payload.get("kind", "external"),
                effect=payload.get("effect", ""),
                source=payload.get("source", "external"),
            )
            return managed.session.margin

        return _mutate(managed, x_audit_token, x_idempotency_key, run)

    @app.post("/v1/sessions/{session_id}/analysis")
    def begin_analysis(
        session_id: str,
        x_audit_token: str | None = Header(default=None),
        x_idempotency_key: str | None = Header(default=None),
    ):
        managed = _managed(session_id)

        def run():
            managed.session.begin_analysis()
            return {"phase": managed.session.phase}

        return _mutate(managed, x_audit_token, x_idempotency_key, run)

    @app.post("/v1/sessions/{session_id}/conclude")
    def conclude(
        session_id: str,
        payload: dict = Body(default={}),
        x_audit_token: str | None = Header(default=None),
        x_idempotency_key: str | None = Header(default=None),
    ):
        managed = _managed(session_id)

        def run():
            conclusion = managed.session.conclude(
                margin_votes=payload.get("margin_votes"),
                cast_ballots=payload.get("cast_ballots"),
            )
            return _conclusion_dict(conclusion)

        return _mutate(managed, x_audit_token, x_idempotency_key, run)

    @app.post("/v1/sessions/{session_id}/second-pass")
    def second_pass(
        session_id: str,
        payload: dict = Body(...),
        x_audit_token: str | None = Header(default=None),
        x_idempotency_key: str | None = Header(default=None),
    ):
        managed = _managed(session_id)

        def run():
            return managed.session.escalate_second_pass(int(payload["target"]))

        return _mutate(managed, x_audit_token, x_idempotency_key, run)

    # ── reads ──────────────────────────────────────────────────────

    @app.get("/v1/sessions/{session_id}/selections")
    def selections(
        session_id: str,
        batch_id: str | None = None,
        x_audit_token: str | None = Header(default=None),
    ):
        managed = _managed(session_id)
        _role(managed, x_audit_token)
        session = managed.session
        refs = []
        for bid, indices in session.selections.items():
            if batch_id and bid != batch_id:
                continue
            for index in indices:
                refs.append({"batch_id": bid, "ballot_index": index, "stage": 1})
        for bid, index in session.second_pass_refs:
            if batch_id and bid != batch_id:
                continue
            refs.append({"batch_id": bid, "ballot_index": index, "stage": 2})
        read = {
            (r.batch_id, r.ballot_index)
            for r in session.effective_readings().values()
        }
        for ref in refs:
            ref["read"] = (ref["batch_id"], ref["ballot_index"]) in read
        return _envelope(managed, {"selections": refs})

    @app.get("/v1/sessions/{session_id}/ballots/{batch_id}/{ballot_index}")
    def ballot_detail(
        session_id: str,
        batch_id: str,
        ballot_index: int,
        x_audit_token: str | None = Header(default=None),
    ):
        managed = _managed(session_id)
        _role(managed, x_audit_token)
        session = managed.session
        batch = session._batch_data.get(batch_id)
        if batch is None or not 0 <= ballot_index < batch.size:
            raise DomainError(f"no ballot {batch_id}[{ballot_index}]")
        ballot = batch.ballots[ballot_index]
        return _envelope(
            managed,
            {
                "batch_id": batch_id,
                "ballot_index": ballot_index,
                "origin": ballot.origin_label,
                "digitised": dict(ballot.preferences.rankings),
                "candidates": list(session.contest.candidates),
            },
        )

    @app.get("/v1/sessions/{session_id}/stats")
    def live_stats(
        session_id: str, x_audit_token: str | None = Header(default=None)
    ):
        managed = _managed(session_id)
        _role(managed, x_audit_token)
        session = managed.session
        sample = session.error_sample()
        ci = None
        ci_counts = None
        scenario = None
        cast = sum(session.turnout.values()) or sum(
            meta["size"] for meta in session.batch_meta.values()
        )
        if sample.ballots_inspected > 0:
            interval = session.confidence_interval()
            ci = {
                "lower": interval.lower,
                "upper": interval.upper,
                "level": interval.level,
                "method": interval.method,
            }
            if cast >= 1:
                ci_counts = list(stats.scale_to_counts(interval, cast))
                if session.margin is not None:
                    scenario = classify_scenario(
                        (ci_counts[0], ci_counts[1]),
                        session.margin["vote_changes"],
                    )
        conclusion = (
            _conclusion_dict(session.conclusions[-1]) if session.conclusions else None
        )
        return _envelope(
            managed,
            {
                "phase": session.phase,
                "tallies": {
                    "inspected": sample.ballots_inspected,
                    "with_error": sample.ballots_with_error,
                    "rank_discrepancies": sample.total_rank_discrepancies,
                },
                "ci": ci,
                "ci_counts": ci_counts,
                "cast_ballots": cast,
                "margin": session.margin,
                "scenario": scenario,
                "conclusion": conclusion,
            },
        )

    @app.get("/v1/sessions/{session_id}/reconcile")
    def reconcile(session_id: str, x_audit_token: str | None = Header(default=None)):
        managed = _managed(session_id)
        _role(managed, x_audit_token)
        return _envelope(managed, managed.session.reconcile())

    @app.get("/v1/sessions/{session_id}/export")
    def export_bundle(
        session_id: str, x_audit_token: str | None = Header(default=None)
    ):
        managed = _managed(session_id)
        _role(managed, x_audit_token)
        session = managed.session
        bundle = {
            "session_id": session.session_id,
            "events": [json.loads(e.to_json()) for e in session.log],
            "commitments": {
                batch_id: {
                    "digest": meta["commitment"],
                    "size": meta["size"],
                    "committed_at": meta["at"],
                }
                for batch_id, meta in session.batch_meta.items()
            },
            "seeds": session.seed_events,
            "selections": session.selections,
            "second_pass_refs": [list(r) for r in session.second_pass_refs],
            "discrepancies": [
                {
                    "batch_id": d.batch_id,
                    "ballot_index": d.ballot_index,
                    "digitised": d.digitised,
                    "human_read": d.human_read,
                    "rank_diffs": [list(x) for x in d.rank_diffs],
                    "entered_by": d.entered_by,
                    "at": d.at,
                }
                for d in session.discrepancies()
            ],
        }
        return _envelope(managed, bundle)

    @app.get("/v1/sessions/{session_id}/events")
    def event_log(session_id: str, x_audit_token: str | None = Header(default=None)):
        managed = _managed(session_id)
        _role(managed, x_audit_token)
        return _envelope(
            managed,
            {"events": [json.loads(e.to_json()) for e in managed.session.log]},
        )

    @app.exception_handler(PermissionError)
    async def _permission_handler(_request: Request, exc: PermissionError):
        return JSONResponse(
            status_code=401,
            content={"error": {"code": "unauthorized", "message": str(exc)}},
        )

    @app.exception_handler(KeyError)
    async def _key_handler(_request: Request, exc: KeyError):
        return JSONResponse(
            status_code=400,
            content={
                "error": {
                    "code": "missing_field",
                    "message": f"missing required field {exc.args[0]!r}",
                }
            },
        )

    return app


def _conclusion_dict(conclusion) -> dict:
    return {
        "scenario": conclusion.scenario,
        "ci": {"lower": conclusion.ci_lower, "upper": conclusion.ci_upper},
        "ci_counts": list(conclusion.ci_counts),
        "margin_votes": conclusion.margin_votes,
        "margin_kind": conclusion.margin_kind,
        "cast_ballots": conclusion.cast_ballots,
        "level": conclusion.level,
        "method": conclusion.method,
        "recommendation": conclusion.recommendation,
    }


# ── config ─────────────────────────────────────────────────────────


def load_config(path: str) -> dict:
    """Parse the TOML-like ``key = value`` config file.

    Keys: ``port`` (default 8700), ``host`` (default 127.0.0.1),
    ``data_dir`` (default ./prefaudit-data).  The PREFAUDIT_DATA_DIR
    environment variable overrides ``data_dir``.
    """
    import os

    config = {"port": 8700, "host": "127.0.0.1", "data_dir": "./prefaudit-data"}
    text = Path(path).read_text(encoding="utf-8")
    for line_number, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise FormatError(f"config line {line_number} is not 'key = value': {line!r}")
        key, _, value = line.partition("=")
        key, value = key.strip(), value.strip().strip('"')
        if key == "port":
            config["port"] = int(value)
        elif key in ("host", "data_dir"):
            config[key] = value
        else:
            raise FormatError(f"unknown config key {key!r} on line {line_number}")
    env_dir = os.environ.get("PREFAUDIT_DATA_DIR")
    if env_dir:
        config["data_dir"] = env_dir
    return config


def run_server(config: dict):
    import uvicorn

    app = create_app(config["data_dir"])
    uvicorn.run(app, host=config["host"], port=config["port"])
