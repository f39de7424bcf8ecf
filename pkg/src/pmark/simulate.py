"""Desk-scale experiment engine.

Replays the full watermark pipeline against synthetic sentence embeddings:
a corpus model stands in for the language model (the selection math only
assumes candidates are sampled i.i.d. per step), geometric perturbations
stand in for paraphrasers, and detection quality is summarized as TPR at
fixed empirical FPR plus ROC-AUC. Everything is deterministic in the
experiment seed.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import sqrt
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.special import betainc, betaincinv
from scipy.stats import rankdata

from pmark.config import AttackSpec, RunConfig
from pmark.detection import detect_offline, detect_online, z_threshold
from pmark.errors import BudgetOutOfRangeError, ConfigError, EmptyScoreSetError
from pmark.geometry import sample_sphere
from pmark.keys import ChannelSeeds, MasterKey
from pmark.rng import DOMAIN_SIMULATION, Stream, stream
from pmark.selection import CandidateSet, offline_select, online_select

# stream sub-domains under DOMAIN_SIMULATION
_SUB_KEY = 0
_SUB_WM = 1
_SUB_SELECT = 2
_SUB_NULL = 3
_SUB_RESAMPLE = 4
_SUB_ATTACK = 5
_SUB_CORPUS = 6


@dataclass
class CorpusModel:
    """Synthetic next-sentence embedding distribution.

    kinds:
      sphere    uniform on the unit sphere
      gaussian  zero-mean anisotropic Gaussian (per-axis scales), normalized
      mixture   normalize(concentration * random fixed direction + Gaussian)
    """

    dim: int
    kind: str = "sphere"
    scales: Optional[np.ndarray] = None
    directions: Optional[np.ndarray] = None
    concentration: float = 0.0

    def sample(self, rng: Stream, n: int) -> np.ndarray:
        if self.kind == "sphere":
            return sample_sphere(rng, self.dim, size=n)
        if self.kind == "gaussian":
            g = rng.normals(n * self.dim).reshape(n, self.dim) * self.scales[None, :]
            return g / np.linalg.norm(g, axis=1, keepdims=True)
        if self.kind == "mixture":
            picks = np.asarray(rng.integers(self.directions.shape[0], n))
            g = rng.normals(n * self.dim).reshape(n, self.dim)
            g += self.concentration * self.directions[picks]
            return g / np.linalg.norm(g, axis=1, keepdims=True)
        raise ConfigError(f"unknown corpus kind {self.kind!r}")


def corpus_model_from_config(spec: dict, dim: int, seed: int) -> CorpusModel:
    kind = spec.get("kind", "sphere")
    if kind == "sphere":
        return CorpusModel(dim=dim, kind=kind)
    if kind == "gaussian":
        scales = np.resize(np.asarray(spec.get("scales", [1.0]), dtype=np.float64), dim)
        if np.any(scales <= 0.0):
            raise ConfigError("gaussian corpus scales must be positive")
        return CorpusModel(dim=dim, kind=kind, scales=scales)
    if kind == "mixture":
        count = int(spec.get("num_directions", 4))
        concentration = float(spec.get("concentration", 1.0))
        if count < 1 or concentration < 0.0:
            raise ConfigError("mixture corpus needs num_directions >= 1, concentration >= 0")
        directions = sample_sphere(stream(seed, DOMAIN_SIMULATION, _SUB_CORPUS), dim, size=count)
        return CorpusModel(dim=dim, kind=kind, directions=directions, concentration=concentration)
    raise ConfigError(f"unknown corpus kind {kind!r}")


def apply_attack(
    embeddings: np.ndarray, spec: AttackSpec, rng: Stream
) -> Tuple[np.ndarray, np.ndarray]:
    """Perturb sentence embeddings within a cosine-distance budget.

    paraphrase-rotation rotates each attacked embedding by the full budget
    angle (cos theta = 1 - d, the worst case) toward a random orthogonal
    direction. jitter moves it to a uniformly random point of the spherical
    cap of radius the budget angle, so at d = 2 the attacked embedding is a
    fresh uniform direction carrying no trace of the original.

    Returns (attacked embeddings, achieved cosine per sentence).
    """
    if not 0.0 <= spec.d <= 2.0:
        raise BudgetOutOfRangeError(f"budget must be in [0, 2], got {spec.d}")
    emb = np.asarray(embeddings, dtype=np.float64)
    T, dim = emb.shape
    achieved = np.ones(T, dtype=np.float64)
    if spec.kind == "none" or spec.d == 0.0 or T == 0:
        return emb.copy(), achieved
    apply_mask = (
        np.ones(T, dtype=bool) if spec.prob >= 1.0 else rng.uniforms(T) < spec.prob
    )
    out = emb.copy()
    idx = np.flatnonzero(apply_mask)
    if idx.size == 0:
        return out, achieved
    if spec.kind == "paraphrase-rotation":
        cos_theta = np.full(idx.size, 1.0 - spec.d)
    elif spec.kind == "jitter":
        # cosine law of a uniform sphere point, truncated to the cap
        a = (dim - 1) / 2.0
        lo = betainc(a, a, (1.0 - spec.d + 1.0) / 2.0)
        u = lo + (1.0 - lo) * rng.uniforms(idx.size)
        cos_theta = np.clip(2.0 * betaincinv(a, a, u) - 1.0, 1.0 - spec.d, 1.0)
    else:
        raise ConfigError(f"unknown attack kind {spec.kind!r}")
    g = rng.normals(idx.size * dim).reshape(idx.size, dim)
    base = emb[idx]
    g -= (g * base).sum(axis=1, keepdims=True) * base
    norms = np.linalg.norm(g, axis=1, keepdims=True)
    while np.any(norms == 0.0):  # probability zero
        bad = norms[:, 0] == 0.0
        g[bad] = rng.normals(int(bad.sum()) * dim).reshape(-1, dim)
        g[bad] -= (g[bad] * base[bad]).sum(axis=1, keepdims=True) * base[bad]
        norms = np.linalg.norm(g, axis=1, keepdims=True)
    w = g / norms
    sin_theta = np.sqrt(np.clip(1.0 - cos_theta**2, 0.0, None))
    out[idx] = cos_theta[:, None] * base + sin_theta[:, None] * w
    out[idx] /= np.linalg.norm(out[idx], axis=1, keepdims=True)
    achieved[idx] = (out[idx] * base).sum(axis=1)
    return out, achieved


@dataclass
class MetricsReport:
    """Detection quality summary for one (mode, attack) cell."""

    tpr_at_fpr: Dict[float, float]
    auc: float
    fpr_at_nominal: float
    z_alpha: float
    z_watermarked: np.ndarray
    z_null: np.ndarray

    def to_dict(self) -> dict:
        return {
            "tpr_at_fpr": {f"{level:g}": value for level, value in self.tpr_at_fpr.items()},
            "auc": self.auc,
            "fpr_at_nominal": self.fpr_at_nominal,
            "z_alpha": self.z_alpha,
            "n_watermarked": int(self.z_watermarked.size),
            "n_null": int(self.z_null.size),
            "z_watermarked": [round(float(z), 6) for z in self.z_watermarked],
            "z_null": [round(float(z), 6) for z in self.z_null],
        }


def _auc_rank(watermarked: np.ndarray, null: np.ndarray) -> float:
    ranks = rankdata(np.concatenate([watermarked, null]))
    n1, n0 = watermarked.size, null.size
    u = ranks[:n1].sum() - n1 * (n1 + 1) / 2.0
    return float(u / (n1 * n0))


def auc_trapezoid(watermarked: np.ndarray, null: np.ndarray) -> float:
    """ROC area by trapezoidal integration over all distinct thresholds.

    Equals the rank statistic with half-credit ties; kept as an internal
    consistency check."""
    scores = np.concatenate([watermarked, null])
    labels = np.concatenate([np.ones(watermarked.size), np.zeros(null.size)])
    order = np.argsort(-scores, kind="stable")
    scores, labels = scores[order], labels[order]
    distinct = np.flatnonzero(np.diff(scores)) if scores.size > 1 else np.array([], dtype=int)
    boundaries = np.concatenate([distinct, [scores.size - 1]])
    tps = np.concatenate([[0.0], np.cumsum(labels)[boundaries]])
    fps = np.concatenate([[0.0], np.cumsum(1.0 - labels)[boundaries]])
    return float(np.trapezoid(tps / max(tps[-1], 1), fps / max(fps[-1], 1)))


def roc_metrics(
    watermarked_z: Sequence[float],
    null_z: Sequence[float],
    fpr_levels: Sequence[float] = (0.01, 0.05),
    alpha: float = 0.01,
) -> MetricsReport:
    """TPR at empirical-null thresholds, rank AUC, and the empirical false
    positive rate at the nominal normal-quantile threshold.

    The threshold for FPR level f is the (k+1)-th largest null score with
    k = floor(f * n_null); watermarked scores count only when strictly
    above it, so ties resolve conservatively.
    """
    wm = np.asarray(watermarked_z, dtype=np.float64).ravel()
    null = np.asarray(null_z, dtype=np.float64).ravel()
    if wm.size == 0 or null.size == 0:
        raise EmptyScoreSetError("need at least one score on each side")
    null_desc = np.sort(null)[::-1]
    tpr_at: Dict[float, float] = {}
    for level in fpr_levels:
        k = int(np.floor(level * null.size))
        threshold = -np.inf if k >= null.size else null_desc[k]
        tpr_at[float(level)] = float(np.mean(wm > threshold))
    z_a = z_threshold(alpha)
    return MetricsReport(
        tpr_at_fpr=tpr_at,
        auc=_auc_rank(wm, null),
        fpr_at_nominal=float(np.mean(null > z_a)),
        z_alpha=z_a,
        z_watermarked=wm,
        z_null=null,
    )


@dataclass
class SimDocument:
    """One generated synthetic document."""

    embeddings: np.ndarray  # (T, dim) selected sentence embeddings
    traces: List[dict]
    candidates_used: int


def derived_master_key(config: RunConfig) -> MasterKey:
    """The watermark key a simulation uses, derived from the experiment seed
    so that config files never carry the key seed itself."""
    key_seed = int(stream(config.seed, DOMAIN_SIMULATION, _SUB_KEY).raw(1)[0])
    return MasterKey(seed=key_seed, dim=config.dim, channels=config.b)


def run_generation_trials(
    model: CorpusModel,
    key: MasterKey,
    mode: str,
    trials: int,
    experiment_seed: int,
    T: int,
    N: int,
) -> List[SimDocument]:
    """Generate ``trials`` watermarked documents of T sentences each."""
    pivots = key.pivots()
    seed_bits = key.seed_matrix(T) if T else np.zeros((0, key.channels), dtype=np.int64)
    docs: List[SimDocument] = []
    for trial in range(trials):
        cand_rng = stream(experiment_seed, DOMAIN_SIMULATION, _SUB_WM, trial)
        select_rng = stream(experiment_seed, DOMAIN_SIMULATION, _SUB_SELECT, trial)
        chosen = np.empty((T, key.dim), dtype=np.float64)
        traces: List[dict] = []
        used = 0
        for t in range(T):
            candidates = CandidateSet(embeddings=model.sample(cand_rng, N))
            if mode == "online":
                index, trace = online_select(candidates, seed_bits[t], pivots, select_rng)
                used += N
            else:
                index, trace = offline_select(candidates, seed_bits[t], pivots, select_rng)
                used += trace.candidates_scanned
            chosen[t] = candidates.embeddings[index]
            traces.append(trace.to_dict())
        docs.append(SimDocument(embeddings=chosen, traces=traces, candidates_used=used))
    return docs


def run_null_trials(
    model: CorpusModel, trials: int, experiment_seed: int, T: int, dim: int
) -> List[np.ndarray]:
    """Unwatermarked documents: one natural sample per sentence."""
    return [
        model.sample(stream(experiment_seed, DOMAIN_SIMULATION, _SUB_NULL, trial), T)
        for trial in range(trials)
    ]


def _detect_embeddings(
    embeddings: np.ndarray,
    model: CorpusModel,
    key: MasterKey,
    mode: str,
    config: RunConfig,
    resample_rng: Stream,
) -> float:
    seeds = ChannelSeeds.from_key(key)
    pivots = key.pivots()
    if mode == "online":
        resampled = [
            CandidateSet(embeddings=model.sample(resample_rng, config.N))
            for _ in range(embeddings.shape[0])
        ]
        report = detect_online(
            embeddings, resampled, seeds, pivots, config.delta, config.K, config.alpha
        )
    else:
        report = detect_offline(embeddings, seeds, pivots, config.delta, config.K, config.alpha)
    return report.z


@dataclass
class ExperimentResult:
    config: RunConfig
    reports: Dict[str, MetricsReport]
    efficiency: Dict[str, float]
    trial_records: List[dict] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "config": self.config.to_dict(),
            "metrics": {label: report.to_dict() for label, report in self.reports.items()},
            "efficiency": {
                "candidates_per_sentence": self.efficiency,
            },
        }


def end_to_end_experiment(config: RunConfig) -> ExperimentResult:
    """Generate, attack, and detect; one MetricsReport per (mode, attack)."""
    model = corpus_model_from_config(config.corpus, config.dim, config.seed)
    key = derived_master_key(config)
    reports: Dict[str, MetricsReport] = {}
    efficiency: Dict[str, float] = {}
    records: List[dict] = []
    for mode in config.modes:
        wm_docs = run_generation_trials(
            model, key, mode, config.trials, config.seed, config.T, config.N
        )
        null_docs = run_null_trials(model, config.trials, config.seed, config.T, config.dim)
        if config.trials and config.T:
            efficiency[mode] = float(
                np.mean([doc.candidates_used for doc in wm_docs]) / config.T
            )
        null_z = np.array(
            [
                _detect_embeddings(
                    doc, model, key, mode, config,
                    stream(config.seed, DOMAIN_SIMULATION, _SUB_RESAMPLE, 1, trial),
                )
                for trial, doc in enumerate(null_docs)
            ]
        )
        for attack in config.attacks:
            wm_z = np.empty(len(wm_docs))
            for trial, doc in enumerate(wm_docs):
                attacked, achieved = apply_attack(
                    doc.embeddings,
                    attack,
                    stream(config.seed, DOMAIN_SIMULATION, _SUB_ATTACK, trial),
                )
                wm_z[trial] = _detect_embeddings(
                    attacked, model, key, mode, config,
                    stream(config.seed, DOMAIN_SIMULATION, _SUB_RESAMPLE, 0, trial),
                )
                records.append(
                    {
                        "mode": mode,
                        "attack": attack.label,
                        "trial": trial,
                        "watermarked": True,
                        "z": round(float(wm_z[trial]), 6),
                        "candidates_used": wm_docs[trial].candidates_used,
                        "min_cosine": round(float(achieved.min()), 6) if achieved.size else 1.0,
                    }
                )
            label = f"{mode}:{attack.label}"
            if config.trials:
                reports[label] = roc_metrics(
                    wm_z, null_z, fpr_levels=config.fpr_levels, alpha=config.alpha
                )
        for trial, z in enumerate(null_z):
            records.append(
                {
                    "mode": mode,
                    "attack": "none",
                    "trial": trial,
                    "watermarked": False,
                    "z": round(float(z), 6),
                }
            )
    return ExperimentResult(
        config=config, reports=reports, efficiency=efficiency, trial_records=records
    )


def selection_index_tv(
    N: int, b: int, dim: int, trials: int, seed: int, mode: str = "online"
) -> float:
    """Total-variation distance from uniform of the selected-index law.

    One fixed candidate set, fresh random seed bits per trial: the online
    selector should pick every index equally often (its guarantee); the
    offline argmax selector should not (its measured distortion).
    """
    key = MasterKey(seed=seed, dim=dim, channels=b)
    pivots = key.pivots()
    candidates = CandidateSet(
        embeddings=sample_sphere(stream(seed, DOMAIN_SIMULATION, 7), dim, size=N)
    )
    bit_rng = stream(seed, DOMAIN_SIMULATION, 8)
    pick_rng = stream(seed, DOMAIN_SIMULATION, 9)
    counts = np.zeros(N)
    for _ in range(trials):
        bits = bit_rng.bits(b)
        if mode == "online":
            index, _ = online_select(candidates, bits, pivots, pick_rng)
        else:
            index, _ = offline_select(candidates, bits, pivots, pick_rng)
        counts[index] += 1
    return float(0.5 * np.abs(counts / trials - 1.0 / N).sum())
