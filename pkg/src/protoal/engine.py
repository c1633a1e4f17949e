"""The pool-based active-learning loop.

Each round: train on the labeled set, score every unlabeled sample with the
configured strategy, select the top-K, have the oracle label them, move them
into the labeled set, and record test accuracy. Experiments repeat the loop
over independent seeds and aggregate the learning curves.

Seed discipline: every source of randomness (initial pool draw, model init,
per-round shuffling, the random strategy, cold-start re-inits) gets its own
sub-seed derived from the master seed, so a (config, dataset, seeds) triple
fully determines the output and individual sources can be ablated.
"""

from __future__ import annotations

import csv
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import acquisition, classifier
from .acquisition import Strategy
from .classifier import HyperParams, ModelParams
from .data import Dataset
from .errors import BudgetExceedsPool, OracleUnavailable, SchemaError

# sub-seed streams off the master seed
_POOL_STREAM = 0
_MODEL_STREAM = 1
_ROUND_STREAM = 2
# sub-seed streams off a round seed
_FIT_STREAM = 0
_SELECT_STREAM = 1
_COLD_INIT_STREAM = 2


def derive_seed(*parts: int) -> int:
    """Deterministic, platform-independent sub-seed from integer parts."""
    return int(np.random.SeedSequence(list(parts)).generate_state(1, np.uint32)[0])


def pool_seed(master_seed: int) -> int:
    return derive_seed(master_seed, _POOL_STREAM)


def model_seed(master_seed: int) -> int:
    return derive_seed(master_seed, _MODEL_STREAM)


def round_seed(master_seed: int, round_index: int) -> int:
    """Seed for round ``round_index`` (1-based)."""
    return derive_seed(master_seed, _ROUND_STREAM, round_index)


def fit_seed(round_seed_: int) -> int:
    return derive_seed(round_seed_, _FIT_STREAM)


def select_seed(round_seed_: int) -> int:
    return derive_seed(round_seed_, _SELECT_STREAM)


def cold_init_seed(round_seed_: int) -> int:
    return derive_seed(round_seed_, _COLD_INIT_STREAM)


@dataclass
class ALConfig:
    """One experiment's knobs: budgets, strategy, seeds, model settings."""

    k_init: int
    k: int
    rounds: int
    strategy: str
    seeds: list
    hp: HyperParams
    cold_start: bool = False

    def validate(self, train_size: int | None = None) -> "ALConfig":
        if self.k_init < 1 or self.k < 1 or self.rounds < 1:
            raise SchemaError("k_init, k and rounds must all be >= 1")
        Strategy(self.strategy)  # raises ValueError on unknown names
        if not self.seeds:
            raise SchemaError("at least one seed is required")
        self.hp.validate()
        if train_size is not None and self.k_init + self.rounds * self.k > train_size:
            raise BudgetExceedsPool(
                f"schedule needs {self.k_init + self.rounds * self.k} samples, "
                f"train set has {train_size}"
            )
        return self

    def to_dict(self) -> dict:
        return {
            "k_init": self.k_init,
            "k": self.k,
            "rounds": self.rounds,
            "strategy": self.strategy,
            "seeds": list(self.seeds),
            "hp": self.hp.to_dict(),
            "cold_start": self.cold_start,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ALConfig":
        try:
            cfg = cls(
                k_init=int(d["k_init"]),
                k=int(d["k"]),
                rounds=int(d["rounds"]),
                strategy=str(d.get("strategy", "margin")),
                seeds=[int(s) for s in d.get("seeds", [0])],
                hp=HyperParams.from_dict(d["hp"]),
                cold_start=bool(d.get("cold_start", False)),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise SchemaError(f"bad experiment config: {exc}") from exc
        return cfg


# Budget schedules (k_init, k, rounds) named after the shape of the public
# benchmark each mirrors.
PRESET_SCHEDULES = {
    "agnews-like": (50, 10, 50),
    "imdb-like": (100, 20, 50),
    "telecom-like": (500, 20, 30),
}


def preset_config(
    name: str,
    hp: HyperParams,
    strategy: str = "margin",
    seeds=None,
    cold_start: bool = False,
) -> ALConfig:
    """Build an ALConfig from a named budget schedule."""
    if name not in PRESET_SCHEDULES:
        raise SchemaError(
            f"unknown preset {name!r}; choose from {sorted(PRESET_SCHEDULES)}"
        )
    k_init, k, rounds = PRESET_SCHEDULES[name]
    return ALConfig(
        k_init=k_init,
        k=k,
        rounds=rounds,
        strategy=strategy,
        seeds=list(seeds) if seeds is not None else [0],
        hp=hp,
        cold_start=cold_start,
    )


def blobs_benchmark_config(strategy: str = "margin", seeds=None) -> ALConfig:
    """The AL configuration paired with the overlapping-blobs preset.

    30 initial labels, 10 per round for 25 rounds over 10 seeds; hyper
    parameters tuned once for that pool and frozen.
    """
    return ALConfig(
        k_init=30,
        k=10,
        rounds=25,
        strategy=strategy,
        seeds=list(seeds) if seeds is not None else list(range(10)),
        hp=HyperParams(
            d_in=16,
            d_emb=16,
            scale=10.0,
            margin=0.3,
            learning_rate=0.1,
            epochs_per_round=50,
            batch_size=32,
        ),
    )


@dataclass
class PoolState:
    """Disjoint labeled/unlabeled id sets plus the labels recorded so far.

    ``labels`` holds what the oracle (simulated or human) actually answered;
    training reads only from here, never from dataset ground truth directly,
    so simulated and human sessions share one code path.
    """

    labeled_ids: list
    unlabeled_ids: list
    labels: dict

    def check_invariants(self) -> None:
        l, u = set(self.labeled_ids), set(self.unlabeled_ids)
        assert not (l & u), "labeled and unlabeled sets overlap"
        assert len(l) == len(self.labeled_ids), "duplicate labeled id"
        assert len(u) == len(self.unlabeled_ids), "duplicate unlabeled id"

    def acquire(self, ids: list, labels: dict) -> "PoolState":
        """Move ids from U to L, recording their labels; returns a new state."""
        moving = set(ids)
        if not moving <= set(self.unlabeled_ids):
            raise SchemaError("acquired ids must come from the unlabeled pool")
        new_labels = dict(self.labels)
        for i in ids:
            new_labels[int(i)] = int(labels[i])
        return PoolState(
            labeled_ids=self.labeled_ids + [int(i) for i in ids],
            unlabeled_ids=[i for i in self.unlabeled_ids if i not in moving],
            labels=new_labels,
        )


def init_pool(dataset: Dataset, k_init: int, rng_seed: int) -> PoolState:
    """Uniform initial draw without replacement into the labeled set.

    Ground-truth labels present in the dataset are recorded for the drawn
    ids; ids without labels stay pending (a human must supply them before
    training can start).
    """
    ids = dataset.ids
    if k_init > len(ids):
        raise BudgetExceedsPool(f"k_init {k_init} exceeds pool of {len(ids)}")
    rng = np.random.default_rng(np.random.SeedSequence([int(rng_seed)]))
    chosen = rng.choice(len(ids), size=k_init, replace=False)
    chosen_ids = [ids[i] for i in sorted(chosen)]
    chosen_set = set(chosen_ids)
    labels = {}
    for i in chosen_ids:
        s = dataset.by_id(i)
        if s.label is not None:
            labels[i] = s.label
    return PoolState(
        labeled_ids=chosen_ids,
        unlabeled_ids=[i for i in ids if i not in chosen_set],
        labels=labels,
    )


@dataclass
class RoundRecord:
    """One learning-curve point.

    ``labeled`` is the labeled-set size the evaluated model was trained on
    (the budget spent when accuracy was measured); the pool then grows by K
    for the next round.
    """

    round: int
    labeled: int
    accuracy: float
    mean_loss: float
    selected_ids: list
    wall_time: float

    def to_dict(self) -> dict:
        return {
            "round": self.round,
            "labeled": self.labeled,
            "accuracy": self.accuracy,
            "mean_loss": self.mean_loss,
            "selected_ids": list(self.selected_ids),
            "wall_time": self.wall_time,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RoundRecord":
        return cls(
            round=int(d["round"]),
            labeled=int(d["labeled"]),
            accuracy=float(d["accuracy"]),
            mean_loss=float(d["mean_loss"]),
            selected_ids=[int(i) for i in d["selected_ids"]],
            wall_time=float(d["wall_time"]),
        )


@dataclass
class LearningCurve:
    """Per-seed round records plus mean/std aggregation."""

    per_seed: dict = field(default_factory=dict)  # seed -> [RoundRecord]

    def aggregate(self) -> list:
        """Rows of (round, labeled, acc_mean, acc_std), population std."""
        seeds = list(self.per_seed)
        rounds = len(self.per_seed[seeds[0]])
        rows = []
        for r in range(rounds):
            records = [self.per_seed[s][r] for s in seeds]
            labeled = {rec.labeled for rec in records}
            assert len(labeled) == 1, "seeds disagree on the budget schedule"
            accs = np.array([rec.accuracy for rec in records])
            rows.append(
                (records[0].round, records[0].labeled, float(accs.mean()), float(accs.std()))
            )
        return rows

    def auc(self, seed: int) -> float:
        """Area under accuracy vs labeled count for one seed."""
        recs = self.per_seed[seed]
        return float(
            np.trapezoid([r.accuracy for r in recs], [r.labeled for r in recs])
        )


def evaluate(model: ModelParams, test: Dataset) -> float:
    """Fraction of test samples whose predicted class matches the label."""
    if len(test) == 0:
        raise SchemaError("test split is empty")
    preds = classifier.predict_batch(model, test.feature_matrix())
    return float(np.mean(preds == test.labels()))


class SimulatedOracle:
    """Answers label queries from dataset ground truth."""

    def __init__(self, dataset: Dataset):
        self.dataset = dataset

    def __call__(self, ids: list) -> dict:
        out = {}
        for i in ids:
            label = self.dataset.by_id(i).label
            if label is None:
                raise OracleUnavailable(f"sample {i} has no ground-truth label")
            out[i] = label
        return out


def execute_round_core(
    model: ModelParams,
    state: PoolState,
    config: ALConfig,
    dataset: Dataset,
    round_index: int,
    round_seed_: int,
) -> tuple[ModelParams, list, list, float]:
    """Train on L and pick the next K ids from U; no labeling happens here.

    This is the half of a round shared by the simulated loop and the
    annotation service. Returns (trained model, score dump, selected ids,
    final-epoch mean loss).
    """
    pending = [i for i in state.labeled_ids if i not in state.labels]
    if pending:
        raise OracleUnavailable(f"labels pending for ids {pending[:5]}")
    if config.k > len(state.unlabeled_ids):
        raise BudgetExceedsPool(
            f"budget {config.k} exceeds remaining pool of {len(state.unlabeled_ids)}"
        )

    if config.cold_start:
        model = classifier.init_params(
            config.hp, model.num_classes, cold_init_seed(round_seed_)
        )
    train_ids = sorted(state.labeled_ids)
    X = dataset.feature_matrix(train_ids)
    y = np.array([state.labels[i] for i in train_ids], dtype=np.int64)
    model, stats = classifier.fit(model, X, y, config.hp, fit_seed(round_seed_))
    mean_loss = stats.epoch_losses[-1] if stats.epoch_losses else float("nan")

    pool_ids = sorted(state.unlabeled_ids)
    strategy = Strategy(config.strategy)
    if strategy is Strategy.RANDOM:
        scores = acquisition.random_scores(pool_ids, select_seed(round_seed_))
        selected = acquisition.top_k_select(scores, config.k)
    elif strategy is Strategy.CORESET:
        pool_emb = classifier.embed_batch(model, dataset.feature_matrix(pool_ids))
        labeled_emb = classifier.embed_batch(model, X)
        scores = acquisition.coreset_initial_distances(labeled_emb, pool_emb, pool_ids)
        selected = acquisition.coreset_greedy(labeled_emb, pool_emb, pool_ids, config.k)
    else:
        F = classifier.embed_batch(model, dataset.feature_matrix(pool_ids))
        probs = classifier.score_probs_batch(model, F, config.hp)
        scores = acquisition.score_probs_matrix(probs, pool_ids, strategy)
        selected = acquisition.top_k_select(scores, config.k)
    return model, scores, selected, mean_loss


def run_round(
    state: PoolState,
    model: ModelParams,
    config: ALConfig,
    dataset: Dataset,
    test: Dataset,
    round_index: int,
    round_seed_: int,
    oracle=None,
    on_scores=None,
) -> tuple[PoolState, ModelParams, RoundRecord]:
    """One full simulated round: train, score, select, label, move, evaluate."""
    t0 = time.perf_counter()
    trained_on = len(state.labeled_ids)
    model, scores, selected, mean_loss = execute_round_core(
        model, state, config, dataset, round_index, round_seed_
    )
    if on_scores is not None:
        on_scores(round_index, scores)
    oracle = oracle if oracle is not None else SimulatedOracle(dataset)
    answers = oracle(selected)
    state = state.acquire(selected, answers)
    accuracy = evaluate(model, test)
    record = RoundRecord(
        round=round_index,
        labeled=trained_on,
        accuracy=accuracy,
        mean_loss=mean_loss,
        selected_ids=selected,
        wall_time=time.perf_counter() - t0,
    )
    return state, model, record


def run_seed(
    config: ALConfig,
    train: Dataset,
    test: Dataset,
    master_seed: int,
    oracle=None,
    on_scores=None,
) -> list:
    """All rounds for one master seed; returns the RoundRecord list."""
    state = init_pool(train, config.k_init, pool_seed(master_seed))
    model = classifier.init_params(
        config.hp, train.num_classes, model_seed(master_seed)
    )
    records = []
    for i in range(1, config.rounds + 1):
        state, model, record = run_round(
            state,
            model,
            config,
            train,
            test,
            i,
            round_seed(master_seed, i),
            oracle=oracle,
            on_scores=on_scores,
        )
        records.append(record)
    return records


def run_experiment(
    config: ALConfig,
    train: Dataset,
    test: Dataset,
    on_scores=None,
) -> LearningCurve:
    """Run the loop for every seed in the config and collect the curves."""
    config.validate(train_size=len(train))
    if train.num_classes < 2:
        raise SchemaError("training data must contain at least 2 classes")
    curve = LearningCurve()
    for s in config.seeds:
        curve.per_seed[s] = run_seed(config, train, test, s, on_scores=on_scores)
    return curve


# --- delimited exports -------------------------------------------------------


def write_seed_csv(curve: LearningCurve, path) -> None:
    """Per-seed rows: seed,round,labeled,accuracy,mean_loss (full precision)."""
    with Path(path).open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["seed", "round", "labeled", "accuracy", "mean_loss"])
        for seed, records in curve.per_seed.items():
            for r in records:
                writer.writerow(
                    [seed, r.round, r.labeled, repr(r.accuracy), repr(r.mean_loss)]
                )


def write_aggregate_csv(curve: LearningCurve, path) -> None:
    """Aggregate rows: round,labeled,acc_mean,acc_std (full precision)."""
    with Path(path).open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["round", "labeled", "acc_mean", "acc_std"])
        for rnd, labeled, mean, std in curve.aggregate():
            writer.writerow([rnd, labeled, repr(mean), repr(std)])


def write_scores_csv(scores: list, path) -> None:
    """Score dump rows: id,score sorted by (score desc, id asc)."""
    ranked = sorted(scores, key=lambda s: (-s.score, s.sample_id))
    with Path(path).open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["id", "score"])
        for s in ranked:
            writer.writerow([s.sample_id, repr(s.score)])
