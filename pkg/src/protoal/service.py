"""Human-in-the-loop annotation sessions over HTTP.

A session owns one active-learning run: the engine trains and stages the
next top-K batch, a human labels the batch through the companion console (or
any HTTP client), and the submitted labels drive the next round. Pool
bookkeeping is the same engine code the simulated loop uses; only the label
source differs.

Endpoints (JSON over HTTP, UTF-8; error bodies are
``{"error": code, "detail": text}``):

  POST /sessions                  create a session        -> 201
  POST /sessions/{id}/batch       train + stage top-K     -> 200 (202 async)
  GET  /sessions/{id}/batch       re-fetch staged batch   -> 200
  POST /sessions/{id}/labels      submit the full batch   -> 200
  GET  /sessions/{id}/metrics     learning curve so far   -> 200

Session state is snapshotted to ``<state_dir>/<session_id>.json`` after every
mutation and restored on restart; a truncated or unreadable snapshot refuses
to start. Model floats are serialized with repr, so a restored session
replays bit-identically.
"""

from __future__ import annotations

import json
import os
import threading
import time
import uuid
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from . import classifier, engine
from .classifier import ModelParams
from .data import Dataset, load_csv, load_jsonl, split
from .engine import ALConfig, PoolState, RoundRecord
from .errors import (
    BudgetExceedsPool,
    CorruptSnapshot,
    ProtoALError,
    SchemaError,
)

PHASE_IDLE = "Idle"
PHASE_AWAITING = "AwaitingLabels"
PHASE_TRAINING = "Training"
PHASE_FINISHED = "Finished"

SNAPSHOT_FORMAT = "protoal-session-v1"


class ServiceError(Exception):
    """Error with an HTTP status and a stable machine-readable code."""

    def __init__(self, status: int, code: str, detail: str):
        super().__init__(detail)
        self.status = status
        self.code = code
        self.detail = detail


@dataclass
class Session:
    session_id: str
    config: ALConfig
    dataset_path: str
    test_fraction: float
    split_seed: int
    class_names: list
    async_training: bool
    master_seed: int
    pool: PoolState
    model: ModelParams
    phase: str = PHASE_IDLE
    pending_ids: list = field(default_factory=list)
    pending_scores: dict = field(default_factory=dict)
    pending_probs: dict = field(default_factory=dict)
    pending_mean_loss: float = float("nan")
    pending_wall: float = 0.0
    history: list = field(default_factory=list)
    # runtime-only
    train_split: Dataset = None
    test_split: Dataset = None
    lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    @property
    def completed_rounds(self) -> int:
        return len(self.history)

    def to_snapshot(self) -> dict:
        return {
            "format": SNAPSHOT_FORMAT,
            "session_id": self.session_id,
            "config": self.config.to_dict(),
            "dataset_path": self.dataset_path,
            "test_fraction": self.test_fraction,
            "split_seed": self.split_seed,
            "class_names": list(self.class_names),
            "async_training": self.async_training,
            "master_seed": self.master_seed,
            "phase": self.phase,
            "pool": {
                "labeled_ids": list(self.pool.labeled_ids),
                "unlabeled_ids": list(self.pool.unlabeled_ids),
                "labels": {str(k): v for k, v in self.pool.labels.items()},
            },
            "model": {
                "projection": self.model.projection.tolist(),
                "bias": self.model.bias.tolist(),
                "prototypes": self.model.prototypes.tolist(),
            },
            "pending": {
                "ids": list(self.pending_ids),
                "scores": {str(k): v for k, v in self.pending_scores.items()},
                "probs": {str(k): v for k, v in self.pending_probs.items()},
                "mean_loss": self.pending_mean_loss,
                "wall": self.pending_wall,
            },
            "history": [r.to_dict() for r in self.history],
        }

    @classmethod
    def from_snapshot(cls, doc: dict, datasets: "DatasetCache") -> "Session":
        config = ALConfig.from_dict(doc["config"])
        pool = PoolState(
            labeled_ids=[int(i) for i in doc["pool"]["labeled_ids"]],
            unlabeled_ids=[int(i) for i in doc["pool"]["unlabeled_ids"]],
            labels={int(k): int(v) for k, v in doc["pool"]["labels"].items()},
        )
        model = ModelParams(
            projection=np.asarray(doc["model"]["projection"], dtype=np.float64),
            bias=np.asarray(doc["model"]["bias"], dtype=np.float64),
            prototypes=np.asarray(doc["model"]["prototypes"], dtype=np.float64),
        )
        session = cls(
            session_id=doc["session_id"],
            config=config,
            dataset_path=doc["dataset_path"],
            test_fraction=float(doc["test_fraction"]),
            split_seed=int(doc["split_seed"]),
            class_names=[str(n) for n in doc["class_names"]],
            async_training=bool(doc.get("async_training", False)),
            master_seed=int(doc["master_seed"]),
            pool=pool,
            model=model,
            phase=str(doc["phase"]),
            pending_ids=[int(i) for i in doc["pending"]["ids"]],
            pending_scores={int(k): float(v) for k, v in doc["pending"]["scores"].items()},
            pending_probs={int(k): [float(p) for p in v] for k, v in doc["pending"]["probs"].items()},
            pending_mean_loss=float(doc["pending"]["mean_loss"]),
            pending_wall=float(doc["pending"]["wall"]),
            history=[RoundRecord.from_dict(r) for r in doc["history"]],
        )
        # a restart can only ever observe Idle/AwaitingLabels/Finished
        if session.phase == PHASE_TRAINING:
            session.phase = PHASE_IDLE
        session.train_split, session.test_split = datasets.splits(
            session.dataset_path, session.test_fraction, session.split_seed
        )
        return session


class DatasetCache:
    """Loads dataset files once and memoizes their seeded splits."""

    def __init__(self):
        self._datasets = {}
        self._splits = {}
        self._lock = threading.Lock()

    def load(self, path: str) -> Dataset:
        key = str(Path(path).resolve())
        with self._lock:
            if key not in self._datasets:
                p = Path(path)
                if not p.exists():
                    raise ServiceError(404, "NotFound", f"dataset {path} does not exist")
                loader = load_csv if p.suffix == ".csv" else load_jsonl
                self._datasets[key] = loader(p)
            return self._datasets[key]

    def splits(self, path: str, test_fraction: float, seed: int):
        dataset = self.load(path)
        key = (str(Path(path).resolve()), test_fraction, seed)
        with self._lock:
            if key not in self._splits:
                self._splits[key] = split(dataset, test_fraction, seed)
            return self._splits[key]


class SessionStore:
    """All live sessions plus their snapshot directory."""

    def __init__(self, state_dir):
        self.state_dir = Path(state_dir)
        self.state_dir.mkdir(parents=True, exist_ok=True)
        self.datasets = DatasetCache()
        self.sessions = {}
        self._restore()

    def _restore(self) -> None:
        for snap in sorted(self.state_dir.glob("*.json")):
            try:
                doc = json.loads(snap.read_text(encoding="utf-8"))
                if doc.get("format") != SNAPSHOT_FORMAT:
                    raise ValueError(f"unexpected snapshot format {doc.get('format')!r}")
                session = Session.from_snapshot(doc, self.datasets)
            except (json.JSONDecodeError, KeyError, TypeError, ValueError, ServiceError) as exc:
                raise CorruptSnapshot(f"{snap}: {exc}") from exc
            self.sessions[session.session_id] = session

    def persist(self, session: Session) -> None:
        path = self.state_dir / f"{session.session_id}.json"
        tmp = path.with_suffix(".tmp")
        tmp.write_text(json.dumps(session.to_snapshot()), encoding="utf-8")
        os.replace(tmp, path)

    def get(self, session_id: str) -> Session:
        try:
            return self.sessions[session_id]
        except KeyError:
            raise ServiceError(404, "NotFound", f"no session {session_id}") from None


def _record_json(record: RoundRecord) -> dict:
    """Round record as strict JSON; non-finite floats become null."""
    doc = record.to_dict()
    for key in ("accuracy", "mean_loss", "wall_time"):
        if not np.isfinite(doc[key]):
            doc[key] = None
    return doc


def _train_and_stage(store: SessionStore, session: Session) -> None:
    """Run the round core (train on L, score U, pick top-K) and stage it."""
    t0 = time.perf_counter()
    round_index = session.completed_rounds + 1
    seed = engine.round_seed(session.master_seed, round_index)
    model, scores, selected, mean_loss = engine.execute_round_core(
        session.model, session.pool, session.config, session.train_split,
        round_index, seed,
    )
    score_by_id = {s.sample_id: s.score for s in scores}
    F = classifier.embed_batch(model, session.train_split.feature_matrix(selected))
    probs = classifier.score_probs_batch(model, F, session.config.hp)
    session.model = model
    session.pending_ids = list(selected)
    session.pending_scores = {i: score_by_id[i] for i in selected}
    session.pending_probs = {i: [float(p) for p in row] for i, row in zip(selected, probs)}
    session.pending_mean_loss = mean_loss
    session.pending_wall = time.perf_counter() - t0
    session.phase = PHASE_AWAITING
    store.persist(session)


def _batch_payload(session: Session, status_code: int = 200) -> JSONResponse:
    batch = [
        {
            "id": i,
            "payload": session.train_split.by_id(i).payload,
            "score": session.pending_scores[i],
            "probs": session.pending_probs[i],
        }
        for i in session.pending_ids
    ]
    return JSONResponse(
        status_code=status_code,
        content={
            "session_id": session.session_id,
            "round": session.completed_rounds + 1,
            "phase": session.phase,
            "class_names": session.class_names,
            "batch": batch,
        },
    )


async def _json_body(request: Request) -> dict:
    try:
        body = await request.json()
    except Exception:
        raise ServiceError(400, "SchemaError", "request body must be JSON") from None
    if not isinstance(body, dict):
        raise ServiceError(400, "SchemaError", "request body must be a JSON object")
    return body


def create_app(state_dir, defaults: dict | None = None) -> FastAPI:
    """Build the service; raises CorruptSnapshot if a stored session is bad."""
    store = SessionStore(state_dir)
    defaults = defaults or {}
    app = FastAPI(title="protoal annotation service")
    app.state.store = store

    @app.exception_handler(ServiceError)
    async def _service_error(request: Request, exc: ServiceError):
        return JSONResponse(
            status_code=exc.status, content={"error": exc.code, "detail": exc.detail}
        )

    @app.exception_handler(ProtoALError)
    async def _domain_error(request: Request, exc: ProtoALError):
        return JSONResponse(
            status_code=400,
            content={"error": type(exc).__name__, "detail": str(exc)},
        )

    @app.post("/sessions", status_code=201)
    async def create_session(request: Request):
        body = await _json_body(request)
        config_doc = body.get("config", defaults.get("config"))
        if config_doc is None:
            raise ServiceError(400, "SchemaError", "missing 'config'")
        try:
            config = ALConfig.from_dict(config_doc)
        except SchemaError as exc:
            raise ServiceError(400, "SchemaError", str(exc)) from exc
        dataset_path = body.get("dataset", defaults.get("dataset"))
        if not dataset_path:
            raise ServiceError(400, "SchemaError", "missing 'dataset'")
        test_fraction = float(body.get("test_fraction", defaults.get("test_fraction", 0.2)))
        split_seed = int(body.get("split_seed", defaults.get("split_seed", 0)))
        async_training = bool(body.get("async_training", False))

        dataset = store.datasets.load(dataset_path)
        try:
            train, test = store.datasets.splits(dataset_path, test_fraction, split_seed)
        except SchemaError as exc:
            raise ServiceError(400, "SchemaError", str(exc)) from exc
        class_names = body.get("class_names") or list(dataset.vocab.names)
        if len(class_names) < 2:
            raise ServiceError(
                400, "SchemaError",
                "dataset labels define fewer than 2 classes and no class_names given",
            )
        if dataset.num_classes > len(class_names):
            raise ServiceError(
                400, "SchemaError",
                f"dataset labels reference {dataset.num_classes} classes but only "
                f"{len(class_names)} class names were given",
            )
        master_seed = int(config.seeds[0])
        try:
            config.validate(train_size=len(train))
        except BudgetExceedsPool as exc:
            raise ServiceError(400, "BudgetExceedsPool", str(exc)) from exc
        except SchemaError as exc:
            raise ServiceError(400, "SchemaError", str(exc)) from exc
        if config.hp.d_in != dataset.d_in:
            raise ServiceError(
                400, "SchemaError",
                f"hp.d_in {config.hp.d_in} does not match dataset d_in {dataset.d_in}",
            )

        pool = engine.init_pool(train, config.k_init, engine.pool_seed(master_seed))
        missing = [i for i in pool.labeled_ids if i not in pool.labels]
        if missing:
            raise ServiceError(
                400, "SchemaError",
                f"initial pool samples {missing[:5]} have no labels in the dataset; "
                "the bootstrap set must be pre-labeled",
            )
        model = classifier.init_params(
            config.hp, len(class_names), engine.model_seed(master_seed)
        )
        session = Session(
            session_id=uuid.uuid4().hex,
            config=config,
            dataset_path=str(dataset_path),
            test_fraction=test_fraction,
            split_seed=split_seed,
            class_names=[str(n) for n in class_names],
            async_training=async_training,
            master_seed=master_seed,
            pool=pool,
            model=model,
            train_split=train,
            test_split=test,
        )
        store.sessions[session.session_id] = session
        store.persist(session)
        return JSONResponse(
            status_code=201,
            content={
                "session_id": session.session_id,
                "phase": session.phase,
                "labeled": len(pool.labeled_ids),
                "unlabeled": len(pool.unlabeled_ids),
                "class_names": session.class_names,
            },
        )

    @app.post("/sessions/{session_id}/batch")
    def next_batch(session_id: str):
        session = store.get(session_id)
        with session.lock:
            if session.phase == PHASE_FINISHED:
                raise ServiceError(410, "PoolExhausted", "the unlabeled pool is exhausted")
            if session.phase != PHASE_IDLE:
                raise ServiceError(
                    409, "WrongPhase", f"next_batch requires Idle, session is {session.phase}"
                )
            if (
                session.config.k > len(session.pool.unlabeled_ids)
                or session.completed_rounds >= session.config.rounds
            ):
                session.phase = PHASE_FINISHED
                store.persist(session)
                raise ServiceError(410, "PoolExhausted", "the unlabeled pool is exhausted")
            session.phase = PHASE_TRAINING
            if not session.async_training:
                try:
                    _train_and_stage(store, session)
                except Exception:
                    session.phase = PHASE_IDLE
                    raise
                return _batch_payload(session)

        # async path: train in the background, poll GET batch for the result
        def job():
            with session.lock:
                try:
                    _train_and_stage(store, session)
                except Exception:
                    session.phase = PHASE_IDLE
                    raise

        threading.Thread(target=job, daemon=True).start()
        return JSONResponse(status_code=202, content={
            "session_id": session.session_id, "phase": PHASE_TRAINING,
        })

    @app.get("/sessions/{session_id}/batch")
    def fetch_staged_batch(session_id: str):
        session = store.get(session_id)
        with session.lock:
            if session.phase != PHASE_AWAITING:
                raise ServiceError(
                    409, "WrongPhase",
                    f"no staged batch, session is {session.phase}",
                )
            return _batch_payload(session)

    @app.post("/sessions/{session_id}/labels")
    async def submit_labels(session_id: str, request: Request):
        body = await _json_body(request)
        session = store.get(session_id)
        if "session_id" in body and body["session_id"] != session_id:
            raise ServiceError(422, "UnknownSample", "session_id mismatch")
        raw = body.get("labels")
        if not isinstance(raw, dict):
            raise ServiceError(400, "SchemaError", "'labels' must be an object of id -> class")
        with session.lock:
            if session.phase != PHASE_AWAITING:
                raise ServiceError(
                    409, "WrongPhase",
                    f"submit_labels requires AwaitingLabels, session is {session.phase}",
                )
            # validate the full submission before touching any state
            try:
                labels = {int(k): int(v) for k, v in raw.items()}
            except (TypeError, ValueError):
                raise ServiceError(400, "SchemaError", "labels must map integer ids to integer classes") from None
            pending = set(session.pending_ids)
            unknown = sorted(set(labels) - pending)
            if unknown:
                raise ServiceError(422, "UnknownSample", f"ids not in the pending batch: {unknown[:5]}")
            missing = sorted(pending - set(labels))
            if missing:
                raise ServiceError(
                    422, "PartialBatch",
                    f"submission must cover the full batch; missing {missing[:5]}",
                )
            n_classes = len(session.class_names)
            bad = {i: c for i, c in labels.items() if not 0 <= c < n_classes}
            if bad:
                raise ServiceError(400, "InvalidClass", f"class index out of range: {bad}")

            t0 = time.perf_counter()
            trained_on = len(session.pool.labeled_ids)
            session.pool = session.pool.acquire(session.pending_ids, labels)
            accuracy = engine.evaluate(session.model, session.test_split)
            record = RoundRecord(
                round=session.completed_rounds + 1,
                labeled=trained_on,
                accuracy=accuracy,
                mean_loss=session.pending_mean_loss,
                selected_ids=list(session.pending_ids),
                wall_time=session.pending_wall + (time.perf_counter() - t0),
            )
            session.history.append(record)
            session.pending_ids = []
            session.pending_scores = {}
            session.pending_probs = {}
            session.pending_mean_loss = float("nan")
            session.pending_wall = 0.0
            session.phase = PHASE_IDLE
            store.persist(session)
            return {
                "session_id": session.session_id,
                "phase": session.phase,
                "record": _record_json(record),
                "labeled": len(session.pool.labeled_ids),
                "unlabeled": len(session.pool.unlabeled_ids),
            }

    @app.get("/sessions/{session_id}/metrics")
    def metrics(session_id: str):
        session = store.get(session_id)
        with session.lock:
            return {
                "session_id": session.session_id,
                "phase": session.phase,
                "labeled": len(session.pool.labeled_ids),
                "unlabeled": len(session.pool.unlabeled_ids),
                "class_names": list(session.class_names),
                "rounds": [_record_json(r) for r in session.history],
            }

    return app
