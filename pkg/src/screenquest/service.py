"""HTTP service for administering questionnaires and collecting scores.

Questionnaires load once from a data directory and are never mutated;
all mutable state (sessions, submitted scores) lives in memory and in an
append-only JSONL event log. Replaying the log at startup reconstructs
the state exactly, so restarting the service reproduces identical
validation reports.
"""

from __future__ import annotations

import json
import logging
import secrets
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path

from fastapi import FastAPI, HTTPException, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import Response
from pydantic import BaseModel

from screenquest import questionnaire as quest
from screenquest import reports, scoring

log = logging.getLogger("screenquest.service")

SESSION_TTL = 86400.0  # idle sessions expire after a day


@dataclass
class Session:
    id: str
    questionnaire_id: str
    node: quest.QuestionNode
    history: list[tuple[str, str]] = field(default_factory=list)  # (question, answer)
    touched: float = 0.0
    lock: threading.Lock = field(default_factory=threading.Lock)

    @property
    def terminal(self) -> bool:
        return self.node.is_leaf

    def state(self) -> dict:
        """The client-facing view of where the session stands."""
        out: dict = {
            "session_id": self.id,
            "questionnaire_id": self.questionnaire_id,
            "step": len(self.history),
            "terminal": self.terminal,
            "path": [{"question": q, "answer": a} for q, a in self.history],
        }
        if self.terminal:
            out["leaf_id"] = self.node.id
            out["probability"] = self.node.probability
        else:
            out["question"] = {"id": self.node.id, "text": self.node.question}
        return out


class EventLog:
    """Append-only JSONL log; every state change goes through here."""

    def __init__(self, path: Path, clock=time.time):
        self.path = path
        self.clock = clock
        self._lock = threading.Lock()
        self.path.parent.mkdir(parents=True, exist_ok=True)

    def append(self, event: str, payload: dict) -> dict:
        record = {"event": event, "ts": self.clock(), "payload": payload}
        line = json.dumps(record, sort_keys=True, separators=(",", ":"))
        with self._lock:
            with open(self.path, "a", encoding="utf-8", newline="\n") as handle:
                handle.write(line + "\n")
                handle.flush()
        return record

    def replay(self):
        if not self.path.is_file():
            return
        with open(self.path, encoding="utf-8") as handle:
            for lineno, line in enumerate(handle, 1):
                line = line.strip()
                if not line:
                    continue
                try:
                    yield json.loads(line)
                except json.JSONDecodeError:
                    log.error("%s:%d: skipping malformed event", self.path, lineno)


class ScoreStore:
    """Submitted rater scores per questionnaire, in submission order."""

    def __init__(self):
        self._lock = threading.Lock()
        self.submissions: dict[str, list[dict]] = {}

    def add(self, qid: str, submission: dict) -> None:
        with self._lock:
            self.submissions.setdefault(qid, []).append(submission)

    def records(self, qid: str, seed: int | None = None) -> list[scoring.ScoreRecord]:
        with self._lock:
            subs = [
                s for s in self.submissions.get(qid, ())
                if seed is None or s["seed"] == seed
            ]
        return [
            scoring.ScoreRecord(
                rater=sub["rater"],
                item_id=entry["item_id"],
                score=scoring.parse_score(entry["score"]),
                timestamp=sub["ts"],
            )
            for sub in subs
            for entry in sub["scores"]
        ]

    def first_seed(self, qid: str) -> int | None:
        with self._lock:
            subs = self.submissions.get(qid, ())
            return subs[0]["seed"] if subs else None


class SessionAnswer(BaseModel):
    answer: str
    step: int | None = None


class SessionStart(BaseModel):
    questionnaire_id: str


class ScoreEntry(BaseModel):
    item_id: str
    score: int | str


class ScoreSubmission(BaseModel):
    rater: str
    seed: int
    scores: list[ScoreEntry]


def load_questionnaires(data_dir: Path) -> dict[str, quest.Questionnaire]:
    """Load every *.json questionnaire; malformed files are skipped loudly."""
    loaded: dict[str, quest.Questionnaire] = {}
    for path in sorted(data_dir.glob("*.json")):
        try:
            loaded[path.stem] = quest.import_questionnaire(path)
        except (ValueError, KeyError, TypeError) as exc:
            log.error("skipping %s: %s", path, exc)
    return loaded


def create_app(
    data_dir,
    log_path,
    cors_origins=(),
    rater_token: str | None = None,
    session_ttl: float = SESSION_TTL,
    clock=time.time,
) -> FastAPI:
    data_dir = Path(data_dir)
    questionnaires = load_questionnaires(data_dir)
    events = EventLog(Path(log_path), clock)
    scores = ScoreStore()
    sessions: dict[str, Session] = {}
    registry_lock = threading.Lock()

    app = FastAPI(title="screenquest", version="0.1.0")
    if cors_origins:
        app.add_middleware(
            CORSMiddleware,
            allow_origins=list(cors_origins),
            allow_methods=["*"],
            allow_headers=["*"],
        )

    def get_questionnaire(qid: str) -> quest.Questionnaire:
        built = questionnaires.get(qid)
        if built is None:
            raise HTTPException(404, f"unknown questionnaire {qid!r}")
        return built

    def get_session(sid: str) -> Session:
        with registry_lock:
            session = sessions.get(sid)
            if session is not None and clock() - session.touched > session_ttl:
                del sessions[sid]
                session = None
        if session is None:
            raise HTTPException(404, "unknown or expired session")
        return session

    def start_session(qid: str, sid: str, stamp: float) -> Session:
        session = Session(
            id=sid,
            questionnaire_id=qid,
            node=get_questionnaire(qid).root,
            touched=stamp,
        )
        with registry_lock:
            sessions[sid] = session
        return session

    def check_answer(session: Session, answer: str, step: int | None) -> None:
        """Validate an answer against the session; caller holds the lock."""
        if answer not in ("yes", "no"):
            raise HTTPException(400, f"answer must be 'yes' or 'no', got {answer!r}")
        if session.terminal:
            raise HTTPException(409, "session already terminal")
        if step is not None and step != len(session.history):
            raise HTTPException(
                409,
                f"stale step: session is at step {len(session.history)}, "
                f"request targeted {step}",
            )

    def apply_answer(session: Session, answer: str, stamp: float) -> None:
        node = session.node
        session.history.append((node.question, answer))
        session.node = node.yes if answer == "yes" else node.no
        session.touched = stamp

    def require_token(request: Request) -> None:
        if rater_token is None:
            return
        if request.headers.get("x-rater-token") != rater_token:
            raise HTTPException(401, "missing or wrong rater token")

    # replay the event log so restarts pick up where we left off
    replayed = 0
    for record in events.replay():
        payload = record.get("payload", {})
        kind = record.get("event")
        try:
            if kind == "session-start":
                if payload["questionnaire_id"] in questionnaires:
                    start_session(
                        payload["questionnaire_id"], payload["session_id"], record["ts"]
                    )
            elif kind == "answer":
                session = sessions.get(payload["session_id"])
                if session is not None:
                    check_answer(session, payload["answer"], None)
                    apply_answer(session, payload["answer"], record["ts"])
            elif kind == "score-submit":
                if payload["questionnaire_id"] in questionnaires:
                    scores.add(
                        payload["questionnaire_id"], dict(payload, ts=record["ts"])
                    )
            replayed += 1
        except (HTTPException, KeyError) as exc:
            log.error("replay: skipping %s event: %s", kind, exc)
    if replayed:
        log.info("replayed %d events; %d live sessions", replayed, len(sessions))

    @app.get("/api/questionnaires")
    def list_questionnaires() -> list[dict]:
        return [
            {
                "id": qid,
                "condition": q.condition,
                "k": q.k,
                "auc": q.auc,
                "n_questions": sum(1 for n in q.nodes() if not n.is_leaf),
                "n_paths": len(q.paths()),
            }
            for qid, q in sorted(questionnaires.items())
        ]

    @app.get("/api/questionnaires/{qid}")
    def get_questionnaire_full(qid: str) -> dict:
        built = get_questionnaire(qid)
        return dict(quest.questionnaire_to_dict(built), id=qid)

    @app.post("/api/sessions", status_code=201)
    def post_session(body: SessionStart) -> dict:
        get_questionnaire(body.questionnaire_id)
        sid = secrets.token_urlsafe(16)
        record = events.append(
            "session-start",
            {"session_id": sid, "questionnaire_id": body.questionnaire_id},
        )
        return start_session(body.questionnaire_id, sid, record["ts"]).state()

    @app.get("/api/sessions/{sid}")
    def get_session_state(sid: str) -> dict:
        return get_session(sid).state()

    @app.post("/api/sessions/{sid}/answers")
    def post_answer(sid: str, body: SessionAnswer) -> dict:
        session = get_session(sid)
        # validate, log, then apply, all under the session lock: only
        # accepted answers reach the log, so replay cannot diverge
        with session.lock:
            check_answer(session, body.answer, body.step)
            record = events.append(
                "answer",
                {"session_id": sid, "answer": body.answer, "step": len(session.history)},
            )
            apply_answer(session, body.answer, record["ts"])
            return session.state()

    @app.get("/api/validation/{qid}/sheet")
    def get_sheet(qid: str, rater: str, seed: int, request: Request) -> dict:
        require_token(request)
        sheet = scoring.generate_sheet(get_questionnaire(qid), seed)
        return dict(
            scoring.sheet_to_dict(sheet, include_duplicates=False),
            questionnaire_id=qid,
            rater=rater,
            seed=seed,
        )

    @app.post("/api/validation/{qid}/scores", status_code=201)
    def post_scores(qid: str, body: ScoreSubmission, request: Request) -> dict:
        require_token(request)
        sheet = scoring.generate_sheet(get_questionnaire(qid), body.seed)
        known = {item.item_id for item in sheet.items}
        for entry in body.scores:
            try:
                scoring.parse_score(entry.score)
            except ValueError as exc:
                raise HTTPException(422, str(exc)) from exc
            if entry.item_id not in known:
                raise HTTPException(
                    422, f"unknown item id {entry.item_id!r} for seed {body.seed}"
                )
        payload = {
            "questionnaire_id": qid,
            "rater": body.rater,
            "seed": body.seed,
            "scores": [{"item_id": e.item_id, "score": e.score} for e in body.scores],
        }
        record = events.append("score-submit", payload)
        scores.add(qid, dict(payload, ts=record["ts"]))
        return {"accepted": len(body.scores)}

    @app.get("/api/validation/{qid}/report")
    def get_report(qid: str, request: Request, seed: int | None = None) -> Response:
        require_token(request)
        built = get_questionnaire(qid)
        if seed is None:
            seed = scores.first_seed(qid)
        if seed is None:
            raise HTTPException(400, "no scores submitted yet; pass an explicit seed")
        sheet = scoring.generate_sheet(built, seed)
        table = scoring.ingest_scores(sheet, scores.records(qid, seed))
        report = scoring.validation_report(built, table)
        payload = {
            "questionnaire_id": qid,
            "seed": seed,
            "report": report.to_dict(),
            "tsv": reports.validation_tsv(report),
        }
        return Response(
            json.dumps(payload, indent=2, sort_keys=True) + "\n",
            media_type="application/json",
        )

    return app
