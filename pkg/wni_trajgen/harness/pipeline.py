"""
Stage orchestration.

    expert -> train-gdm -> generate -> train-offline -> evaluate
                                      train-baseline -^

Every stage reads its inputs from the artifact directory, checks them against
the hashes recorded by the producing stage and writes its own outputs plus a
manifest. Per-cell work runs on a thread pool capped by ``config.threads``;
results are collected in cell order so outputs do not depend on scheduling.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Any, Callable, Dict, Iterable, List, Optional, Sequence, Tuple, TypeVar

from ..baselines import (
    DdpgLearner,
    ddpg_train,
    evaluate_policy,
    oracle_policy,
    uniform_policy,
)
from ..config import RunConfig
from ..env import PowerAllocationEnv
from ..errors import ConfigurationError, ProvenanceError, TrajGenError, classify_error
from ..expert import build_bkb, collect_expert, normalize_dataset
from ..gdm import GdmModelSet, distribution_accuracy, generate_trajectories, train_gdm
from ..models import ELEMENT_TYPES, MetricsRow
from ..nn import load_into, save_checkpoint
from ..offline_rl import BcqLearner, BcqPolicy, Normalization, fine_tune, train_bcq
from ..resources import validate_document
from ..rng import make_rng
from ..wni import EmbeddingTable, WniEncoder
from .metrics import emit_metrics
from .persistence import (
    load_bkb,
    read_dataset,
    read_json,
    save_bkb,
    sha256_file,
    verify_hash,
    write_dataset,
    write_json,
)

logger = logging.getLogger(__name__)

STAGES: Tuple[str, ...] = ("expert", "train-gdm", "generate", "train-offline", "train-baseline", "evaluate")
BCQ_NETWORKS: Tuple[str, ...] = ("vae", "perturb", "perturb_target", "twin_q")
DDPG_NETWORKS: Tuple[str, ...] = ("actor", "actor_target", "critic", "critic_target")

T = TypeVar("T")
R = TypeVar("R")


def _cell_dir(intent_id: int, total_power: float) -> str:
    return f"intent_{intent_id}_power_{total_power:g}"


def _cell_entry(manifest: Dict[str, Any], intent_id: int, power: float) -> Optional[Dict[str, Any]]:
    for entry in manifest["cells"]:
        if entry["intent_id"] == intent_id and float(entry["total_power"]) == power:
            return entry
    return None


def _map_ordered(fn: Callable[[T], R], items: Sequence[T], threads: int) -> List[R]:
    if threads <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


class PipelineRunner:
    """Runs stages against one artifact directory."""

    def __init__(self, config: RunConfig, out_dir: Path):
        self.config = config
        self.out_dir = Path(out_dir)
        self.config_hash = config.config_hash()
        self.seed = config.seed

    @property
    def cells(self) -> List[Tuple[int, float]]:
        return [(i, float(p)) for i in self.config.eval.intents for p in self.config.eval.powers]

    def path(self, *parts: str) -> Path:
        return self.out_dir.joinpath(*parts)

    def encoder(self) -> WniEncoder:
        env = self.config.env
        table = EmbeddingTable(self.config.embedding_seed, self.config.gdm.wni_dim)
        return WniEncoder(table, env.intents, env.num_channels, env.noise_power)

    def _manifest_base(self) -> Dict[str, Any]:
        return {"format_version": 1, "config_hash": self.config_hash, "seed": self.seed}

    # expert

    def run_expert(self) -> None:
        env = self.config.env
        dataset = collect_expert(
            env.intents, env, self.config.expert.count_per_intent, make_rng(self.seed, "expert")
        )
        _, bkb = build_bkb(dataset, [spec.intent_id for spec in env.intents])
        bkb.meta.update({"config_hash": self.config_hash, "seed": self.seed})
        dataset_hash = write_dataset(
            self.path("expert", "dataset.jsonl"), dataset, "expert", self.config_hash, self.seed
        )
        bkb_hash = save_bkb(self.path("expert", "bkb.json"), bkb)
        write_json(
            self.path("expert", "manifest.json"),
            {
                **self._manifest_base(),
                "dataset": {"file": "dataset.jsonl", "sha256": dataset_hash},
                "bkb": {"file": "bkb.json", "sha256": bkb_hash},
                "count": len(dataset),
            },
        )

    def _load_expert(self, stage: str, with_dataset: bool = True):
        manifest = read_json(self.path("expert", "manifest.json"), stage=stage)
        dataset_path = self.path("expert", manifest["dataset"]["file"])
        bkb_path = self.path("expert", manifest["bkb"]["file"])
        verify_hash(dataset_path, manifest["dataset"]["sha256"], stage)
        verify_hash(bkb_path, manifest["bkb"]["sha256"], stage)
        dataset = read_dataset(dataset_path, stage)[0] if with_dataset else None
        return dataset, load_bkb(bkb_path, stage), manifest["bkb"]["sha256"]

    # generative model

    def run_train_gdm(self) -> None:
        dataset, bkb, bkb_hash = self._load_expert("train-gdm")
        gdm = self.config.gdm
        models = GdmModelSet.build(gdm, dataset.num_channels, make_rng(self.seed, "gdm-init"))
        history = train_gdm(
            models, normalize_dataset(dataset, bkb), self.encoder(), gdm, make_rng(self.seed, "gdm-train")
        )
        checkpoints = {}
        for element in ELEMENT_TYPES:
            path = self.path("gdm", f"{element}.json")
            save_checkpoint(
                path, models.nets[element], self.seed, self.config_hash, models.step_count, element=element
            )
            checkpoints[element] = {"file": path.name, "sha256": sha256_file(path)}
        manifest = {
            **self._manifest_base(),
            "schedule": models.schedule.to_dict(),
            "wni_dim": gdm.wni_dim,
            "embedding_seed": self.config.embedding_seed,
            "element_dims": {e: dataset.num_channels for e in ELEMENT_TYPES},
            "bkb_hash": bkb_hash,
            "checkpoints": checkpoints,
            "loss_history": history,
        }
        validate_document(manifest, "gdm_manifest", "gdm manifest")
        write_json(self.path("gdm", "manifest.json"), manifest)

    def load_models(self, stage: str) -> Tuple[GdmModelSet, Any]:
        manifest = read_json(self.path("gdm", "manifest.json"), "gdm_manifest", stage)
        _, bkb, bkb_hash = self._load_expert(stage, with_dataset=False)
        if manifest["bkb_hash"] != bkb_hash:
            raise ProvenanceError(
                "Generative model was trained against a different knowledge base", stage=stage
            )
        if manifest["wni_dim"] != self.config.gdm.wni_dim:
            raise ConfigurationError(
                f"Checkpoint WNI width {manifest['wni_dim']} differs from configured "
                f"{self.config.gdm.wni_dim}",
                stage=stage,
            )
        num_channels = manifest["element_dims"]["s"]
        models = GdmModelSet.build(self.config.gdm, num_channels, make_rng(0, "gdm-shell"))
        for element in ELEMENT_TYPES:
            entry = manifest["checkpoints"][element]
            path = self.path("gdm", entry["file"])
            verify_hash(path, entry["sha256"], stage)
            load_into(models.nets[element], path)
        return models, bkb

    # generation

    def run_generate(self) -> None:
        models, bkb = self.load_models("generate")
        gdm_hash = sha256_file(self.path("gdm", "manifest.json"))
        encoder = self.encoder()
        count = self.config.gdm.generate_count

        def generate(cell: Tuple[int, float]) -> Dict[str, Any]:
            intent_id, power = cell
            generated = generate_trajectories(
                models,
                encoder.feature(intent_id, power),
                intent_id,
                bkb,
                count,
                make_rng(self.seed, "generate", intent_id, repr(power)),
                total_power=power,
                seed=self.seed,
                model_hash=gdm_hash,
            )
            name = f"{_cell_dir(intent_id, power)}.jsonl"
            digest = write_dataset(
                self.path("generated", name),
                generated.trajectories,
                "generated",
                self.config_hash,
                self.seed,
                target_intent=intent_id,
                total_power=power,
                gdm_hash=gdm_hash,
            )
            accuracy = distribution_accuracy(generated, bkb) if count else {}
            return {
                "intent_id": intent_id,
                "total_power": power,
                "file": name,
                "sha256": digest,
                "accuracy": {element: value for (_, element), value in accuracy.items()},
            }

        entries = _map_ordered(generate, self.cells, self.config.threads)
        write_json(
            self.path("generated", "manifest.json"),
            {**self._manifest_base(), "gdm_sha256": gdm_hash, "cells": entries},
        )

    def _generated_entries(self, stage: str) -> Tuple[str, Dict[Tuple[int, float], Dict[str, Any]]]:
        manifest = read_json(self.path("generated", "manifest.json"), stage=stage)
        if "gdm_sha256" not in manifest:
            raise ProvenanceError("Generated manifest does not record its generative model", stage=stage)
        # Retraining the generative model invalidates every generated set.
        verify_hash(self.path("gdm", "manifest.json"), manifest["gdm_sha256"], stage)
        cells = {(e["intent_id"], float(e["total_power"])): e for e in manifest["cells"]}
        return manifest["gdm_sha256"], cells

    # offline learner

    def run_train_offline(self) -> None:
        gdm_hash, entries = self._generated_entries("train-offline")

        def train(cell: Tuple[int, float]) -> Dict[str, Any]:
            intent_id, power = cell
            entry = entries.get(cell)
            if entry is None:
                raise ProvenanceError(
                    f"No generated data for intent {intent_id} at {power:g}W", stage="train-offline"
                )
            path = self.path("generated", entry["file"])
            verify_hash(path, entry["sha256"], "train-offline")
            dataset, meta = read_dataset(path, "train-offline")
            if meta.get("gdm_hash") != gdm_hash:
                raise ProvenanceError(
                    f"Generated data for intent {intent_id} at {power:g}W came from another model",
                    stage="train-offline",
                )
            learner = train_bcq(
                dataset, self.config.bcq, power, make_rng(self.seed, "bcq", intent_id, repr(power))
            )
            networks = {}
            for name in BCQ_NETWORKS:
                target = self.path("offline", _cell_dir(intent_id, power), f"{name}.json")
                save_checkpoint(
                    target, getattr(learner, name), self.seed, self.config_hash, learner.iteration, network=name
                )
                networks[name] = {"file": target.name, "sha256": sha256_file(target)}
            finetune_series = []
            if self.config.bcq.finetune_steps:
                env_rng = make_rng(self.seed, "finetune-env", intent_id, repr(power))
                env = PowerAllocationEnv(self.config.env, intent_id, power, env_rng)
                _, finetune_series = fine_tune(
                    learner,
                    env,
                    dataset,
                    self.config.bcq.finetune_steps,
                    make_rng(self.seed, "finetune", intent_id, repr(power)),
                )
            return {
                "intent_id": intent_id,
                "total_power": power,
                "directory": _cell_dir(intent_id, power),
                "generated_sha256": entry["sha256"],
                "gdm_sha256": gdm_hash,
                "num_channels": dataset.num_channels,
                "normalization": learner.normalization.to_dict(),
                "networks": networks,
                "q_loss": [h["q_loss"] for h in learner.history[: self.config.bcq.iterations]],
                "finetune_series": finetune_series,
            }

        cells = _map_ordered(train, self.cells, self.config.threads)
        write_json(self.path("offline", "manifest.json"), {**self._manifest_base(), "cells": cells})

    def load_bcq(self, intent_id: int, power: float, stage: str = "evaluate") -> BcqLearner:
        manifest = read_json(self.path("offline", "manifest.json"), stage=stage)
        entry = _cell_entry(manifest, intent_id, power)
        if entry is None:
            raise ProvenanceError(f"No offline policy for intent {intent_id} at {power:g}W", stage=stage)
        learner = BcqLearner(
            entry["num_channels"],
            power,
            self.config.bcq,
            make_rng(0, "bcq-shell"),
            normalization=Normalization(**entry["normalization"]),
        )
        for name in BCQ_NETWORKS:
            path = self.path("offline", entry["directory"], entry["networks"][name]["file"])
            verify_hash(path, entry["networks"][name]["sha256"], stage)
            load_into(getattr(learner, name), path)
        return learner

    # online baseline

    def run_train_baseline(self) -> None:
        def train(cell: Tuple[int, float]) -> Dict[str, Any]:
            intent_id, power = cell
            env = PowerAllocationEnv(
                self.config.env, intent_id, power, make_rng(self.seed, "ddpg-env", intent_id, repr(power))
            )
            learner, series = ddpg_train(
                env, self.config.baseline, make_rng(self.seed, "ddpg", intent_id, repr(power))
            )
            networks = {}
            for name in DDPG_NETWORKS:
                target = self.path("baseline", _cell_dir(intent_id, power), f"{name}.json")
                save_checkpoint(
                    target, getattr(learner, name), self.seed, self.config_hash, learner.updates, network=name
                )
                networks[name] = {"file": target.name, "sha256": sha256_file(target)}
            return {
                "intent_id": intent_id,
                "total_power": power,
                "directory": _cell_dir(intent_id, power),
                "num_channels": env.num_channels,
                "networks": networks,
                "training_series": series,
            }

        cells = _map_ordered(train, self.cells, self.config.threads)
        write_json(self.path("baseline", "manifest.json"), {**self._manifest_base(), "cells": cells})

    def load_ddpg(self, intent_id: int, power: float, stage: str = "evaluate") -> DdpgLearner:
        manifest = read_json(self.path("baseline", "manifest.json"), stage=stage)
        entry = _cell_entry(manifest, intent_id, power)
        if entry is None:
            raise ProvenanceError(f"No DDPG policy for intent {intent_id} at {power:g}W", stage=stage)
        learner = DdpgLearner(
            self.config.env.intent(intent_id),
            entry["num_channels"],
            power,
            self.config.baseline,
            make_rng(0, "ddpg-shell"),
        )
        for name in DDPG_NETWORKS:
            path = self.path("baseline", entry["directory"], entry["networks"][name]["file"])
            verify_hash(path, entry["networks"][name]["sha256"], stage)
            load_into(getattr(learner, name), path)
        return learner

    # evaluation

    def _policy(self, scheme: str, intent_id: int, power: float, eval_seed: int):
        if scheme == "uniform":
            return uniform_policy(power)
        if scheme == "oracle":
            return oracle_policy(power, self.config.env.noise_power)
        if scheme == "bcq":
            rng = make_rng(self.seed, "bcq-act", intent_id, repr(power), eval_seed)
            return BcqPolicy(self.load_bcq(intent_id, power), self.config.bcq.candidates, rng)
        return self.load_ddpg(intent_id, power).act

    def run_evaluate(self) -> Path:
        ev = self.config.eval
        jobs = [
            (scheme, intent_id, power, eval_seed)
            for scheme in ev.schemes
            for intent_id, power in self.cells
            for eval_seed in ev.seeds
        ]

        def evaluate(job: Tuple[str, int, float, int]) -> List[MetricsRow]:
            scheme, intent_id, power, eval_seed = job
            summary = evaluate_policy(
                self._policy(scheme, intent_id, power, eval_seed),
                self.config.env,
                intent_id,
                power,
                ev.episodes,
                ev.steps,
                eval_seed,
            )
            logger.info(
                f"{scheme} on intent {intent_id} at {power:g}W (seed {eval_seed}): "
                f"mean SE {summary.mean:.3f}"
            )
            return [
                MetricsRow(
                    scheme=scheme,
                    intent_id=intent_id,
                    total_power=power,
                    step=step,
                    spectral_efficiency=value,
                    seed=eval_seed,
                    config_hash=self.config_hash,
                )
                for step, value in enumerate(summary.per_step)
            ]

        rows = [row for chunk in _map_ordered(evaluate, jobs, self.config.threads) for row in chunk]
        csv_path, _ = emit_metrics(rows, self.path("metrics"), self.config_hash, self.seed)
        return csv_path

    def run_stage(self, stage: str) -> None:
        handlers = {
            "expert": self.run_expert,
            "train-gdm": self.run_train_gdm,
            "generate": self.run_generate,
            "train-offline": self.run_train_offline,
            "train-baseline": self.run_train_baseline,
            "evaluate": self.run_evaluate,
        }
        if stage not in handlers:
            raise ConfigurationError(f"Unknown stage '{stage}'", context={"known": list(STAGES)})
        logger.info(f"Stage {stage} starting (config {self.config_hash[:12]}, seed {self.seed})")
        try:
            handlers[stage]()
        except TrajGenError as e:
            if not e.stage:
                e.stage = stage
            raise
        except Exception as e:
            raise classify_error(e, stage) from e
        logger.info(f"Stage {stage} finished")


def parse_stages(stages: Optional[Iterable[str]]) -> List[str]:
    """Requested stages in pipeline order; ``None`` means all."""
    if stages is None:
        return list(STAGES)
    requested = [s.strip() for s in stages if s.strip()]
    unknown = [s for s in requested if s not in STAGES]
    if unknown:
        raise ConfigurationError(f"Unknown stages {unknown}", context={"known": list(STAGES)})
    return [s for s in STAGES if s in requested]


def run_pipeline(config: RunConfig, out_dir: Path, stages: Optional[Iterable[str]] = None) -> Path:
    """
    Run the requested stages in order.

    Returns:
        The artifact directory
    """
    runner = PipelineRunner(config, out_dir)
    runner.out_dir.mkdir(parents=True, exist_ok=True)
    write_json(runner.path("config.json"), config.model_dump(mode="json"))
    for stage in parse_stages(stages):
        runner.run_stage(stage)
    return runner.out_dir
