"""Config-driven orchestration of the full workflow.

Each stage reads its inputs from, and writes its outputs under, one output
root::

    data/vaed/            domain-randomized dataset (VAED training)
    data/policy/          simplified-scene dataset (policy training)
    data/trajectories.bin reach trajectories (trajectory VAE training)
    checkpoints/          vaed.ckpt, trajvae.ckpt, policy.ckpt
    logs/                 <stage>.csv training logs
    reports/              per-stage JSON summaries
    eval/                 evaluation report, plot data and figures
    runs.jsonl            append-only run manifest

Every stage appends one :class:`RunManifest` line with the config hash and the
SHA-256 of its inputs and outputs.
"""
from __future__ import annotations

import configparser
import csv
import hashlib
import io
import json
import logging
import os
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import torch

from . import checkpoint, evaluation, plots
from .kinematics import KinematicChain, default_arm, load_chain, panda_chain
from .metrics import pixel_f1
from .policy import PolicyConfig, PolicyTrainConfig, VisuomotorStack, load_policy, params_digest, save_policy, train_policy
from .scenegen import CameraPose, RandomizationConfig, generate_dataset, load_arrays, load_manifest, load_randomization, simplified_config
from .scenegen.dataset import sample_seed
from .trajvae import (
    BetaSchedule,
    TrajTrainConfig,
    TrajVaeConfig,
    generate_training_trajectories,
    load_trajectory_set,
    load_trajvae,
    reconstruct,
    rmse_per_joint,
    save_trajectory_set,
    save_trajvae,
    train_trajectory_vae,
)
from .vaed import TrainConfig, VaedConfig, load_vaed, predict_maps, save_vaed, train_vaed

log = logging.getLogger(__name__)

ENV_OUT = "LATENT_AFFORDANCE_OUT"

EXIT_OK, EXIT_CONFIG, EXIT_MISSING, EXIT_RUNTIME = 0, 1, 2, 3


class PipelineError(Exception):
    exit_code = EXIT_RUNTIME


class ConfigurationError(PipelineError):
    exit_code = EXIT_CONFIG


class MissingDependencyError(PipelineError):
    exit_code = EXIT_MISSING


# every key the pipeline understands, with its default (as config-file text)
DEFAULTS: dict[str, dict[str, str]] = {
    "pipeline": {
        "master_seed": "0",
        "output_root": "runs/default",
        "chain": "default_arm",
        "workers": "1",
        "torch_threads": "1",
    },
    "scenegen": {"n": "6000", "randomization": "default"},
    "vaed": {
        "latent_dim": "10",
        "beta": "4",
        "epochs": "35",
        "batch_size": "64",
        "lr": "1e-3",
        "holdout": "1000",
    },
    "trajvae": {
        "workspace": "0.30 0.60 -0.20 0.20",
        "grid": "40 25",
        "hover_z": "0.25",
        "start_config": "0.0 1.9 1.6",
        "via_lift": "0.05",
        "steps": "24",
        "action_dim": "5",
        "epochs": "2000",
        "batch_size": "64",
        "lr": "1e-3",
        "lr_final": "1e-4",
        "beta_start": "1e-8",
        "beta_end": "1e-5",
        "beta_interval": "400",
        "holdout": "200",
    },
    "policy": {
        "n": "40000",
        "randomization": "simplified",
        "hidden": "128 64 32",
        "epochs": "150",
        "batch_size": "128",
        "lr": "1e-3",
        "lr_final": "1e-5",
        "val_fraction": "0.1",
        "inner_radius": "0.04",
        "ball_radius": "0.02",
    },
    "evaluation": {
        "n_trials": "100",
        "clutter_levels": "0 2 5 10",
        "cup_shapes": " ".join(evaluation.EVAL_CUPS),
        "randomization": "simplified",
        "inner_radius": "0.04",
        "ball_radius": "0.02",
        "overlays": "8",
    },
}

STAGE_SEED_INDEX = {"gen-data": 0, "vaed": 1, "trajvae": 2, "policy": 3, "evaluate": 4}


def _floats(s, n=None, key=""):
    try:
        v = [float(x) for x in str(s).split()]
    except ValueError as exc:
        raise ConfigurationError(f"{key}: expected numbers, got {s!r}") from exc
    if n is not None and len(v) != n:
        raise ConfigurationError(f"{key}: expected {n} numbers, got {len(v)}")
    return v


@dataclass
class PipelineConfig:
    """Resolved configuration: ``values[section][key]`` as config-file strings."""

    values: dict
    source: str | None = None

    # typed access -----------------------------------------------------------
    def get(self, section, key) -> str:
        return self.values[section][key]

    def int(self, section, key) -> int:
        try:
            return int(self.values[section][key])
        except ValueError as exc:
            raise ConfigurationError(f"[{section}] {key}: expected an integer") from exc

    def float(self, section, key) -> float:
        return _floats(self.values[section][key], 1, f"[{section}] {key}")[0]

    def floats(self, section, key, n=None) -> list[float]:
        return _floats(self.values[section][key], n, f"[{section}] {key}")

    @property
    def master_seed(self) -> int:
        return self.int("pipeline", "master_seed")

    @property
    def output_root(self) -> Path:
        return Path(self.get("pipeline", "output_root"))

    def stage_seed(self, stage: str) -> int:
        return sample_seed(self.master_seed, STAGE_SEED_INDEX[stage]) % (2**31)

    def hash(self, sections=None) -> str:
        keep = {k: v for k, v in self.values.items() if sections is None or k in sections}
        return hashlib.sha256(json.dumps(keep, sort_keys=True).encode()).hexdigest()

    def dumps(self) -> str:
        cp = configparser.ConfigParser()
        cp.optionxform = str
        cp.read_dict(self.values)
        buf = io.StringIO()
        cp.write(buf)
        return buf.getvalue()

    # derived objects --------------------------------------------------------
    def base_dir(self) -> Path:
        return Path(self.source).parent if self.source else Path.cwd()

    def resolve_file(self, name: str) -> Path:
        p = Path(name)
        return p if p.is_absolute() else self.base_dir() / p

    def randomization(self, section) -> RandomizationConfig:
        name = self.get(section, "randomization")
        if name == "default":
            return RandomizationConfig()
        if name == "simplified":
            return simplified_config()
        path = self.resolve_file(name)
        if not path.exists():
            raise ConfigurationError(f"[{section}] randomization file not found: {path}")
        return load_randomization(path)

    def chain(self) -> KinematicChain:
        name = self.get("pipeline", "chain")
        if name == "default_arm":
            return default_arm()
        if name == "panda":
            return panda_chain()
        path = self.resolve_file(name)
        if not path.exists():
            raise ConfigurationError(f"chain file not found: {path}")
        return load_chain(path)

    def vaed_config(self) -> VaedConfig:
        return VaedConfig(latent_dim=self.int("vaed", "latent_dim"), beta=self.float("vaed", "beta"))

    def traj_config(self) -> TrajVaeConfig:
        return TrajVaeConfig(
            steps=self.int("trajvae", "steps"),
            n_joints=self.chain().n_joints,
            action_dim=self.int("trajvae", "action_dim"),
        )

    def policy_config(self) -> PolicyConfig:
        return PolicyConfig(
            latent_dim=self.int("vaed", "latent_dim"),
            action_dim=self.int("trajvae", "action_dim"),
            hidden=tuple(int(h) for h in self.floats("policy", "hidden", 3)),
        )

    def validate(self) -> "PipelineConfig":
        # keys with numeric defaults must parse; scalars stay scalar
        for section, defaults in DEFAULTS.items():
            for key, default in defaults.items():
                try:
                    _floats(str(default), None, "")
                except ConfigurationError:
                    continue
                self.floats(section, key, 1 if len(str(default).split()) == 1 else None)
        for section in ("scenegen", "policy", "evaluation"):
            self.randomization(section)
        try:
            self.vaed_config(), self.traj_config(), self.policy_config()
        except ValueError as exc:
            raise ConfigurationError(str(exc)) from exc
        chain = self.chain()
        start = self.floats("trajvae", "start_config")
        if len(start) != chain.n_joints:
            raise ConfigurationError(f"[trajvae] start_config has {len(start)} values, chain has {chain.n_joints} joints")
        self.floats("trajvae", "workspace", 4)
        self.floats("trajvae", "grid", 2)
        pc = self.policy_config()
        if pc.input_dim != self.vaed_config().latent_dim + pc.cam_dim:
            raise ConfigurationError("policy input_dim must equal vaed.latent_dim + cam_dim")
        if pc.action_dim != self.traj_config().action_dim:
            raise ConfigurationError("trajvae.action_dim must equal the policy output dim")
        if self.float("policy", "inner_radius") <= self.float("policy", "ball_radius"):
            raise ConfigurationError("[policy] inner_radius must exceed ball_radius")
        unknown = [c for c in self.get("evaluation", "cup_shapes").split() if c not in evaluation.EVAL_CUPS]
        if unknown:
            raise ConfigurationError(f"[evaluation] unknown cup shapes {unknown}")
        for section in ("scenegen", "policy"):
            if self.int(section, "n") < 0:
                raise ConfigurationError(f"[{section}] n must be non-negative")
        return self


def load_config(path=None, overrides: dict | None = None, env=None) -> PipelineConfig:
    """Defaults, then the INI file, then ``$LATENT_AFFORDANCE_OUT``, then ``overrides``.

    ``overrides`` maps ``"section.key"`` to a value (CLI flags land here).
    """
    env = os.environ if env is None else env
    values = {s: dict(kv) for s, kv in DEFAULTS.items()}
    if path is not None:
        path = Path(path)
        if not path.exists():
            raise ConfigurationError(f"config file not found: {path}")
        cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
        cp.optionxform = str
        try:
            cp.read(path)
        except configparser.Error as exc:
            raise ConfigurationError(f"{path}: {exc}") from exc
        for section in cp.sections():
            if section not in values:
                raise ConfigurationError(f"{path}: unknown section [{section}]")
            for key, val in cp[section].items():
                if key not in values[section]:
                    raise ConfigurationError(f"{path}: unknown key [{section}] {key}")
                values[section][key] = val.strip()
    if env.get(ENV_OUT):
        values["pipeline"]["output_root"] = env[ENV_OUT]
    for dotted, val in (overrides or {}).items():
        section, key = dotted.split(".", 1)
        if val is not None:
            values[section][key] = str(val)
    return PipelineConfig(values, str(path) if path else None).validate()


# --- provenance ------------------------------------------------------------------


def sha256_file(path) -> str:
    return checkpoint.file_sha256(path)


def dataset_hash(root) -> str:
    """Hash of the manifest plus every listed file, in manifest order."""
    root = Path(root)
    h = hashlib.sha256((root / "manifest.json").read_bytes())
    for name in load_manifest(root)["files"]:
        h.update(name.encode())
        h.update((root / name).read_bytes())
    return h.hexdigest()


def _hash_any(path: Path) -> str:
    return dataset_hash(path) if path.is_dir() else sha256_file(path)


@dataclass
class RunManifest:
    stage: str
    config_hash: str
    seed: int
    inputs: dict = field(default_factory=dict)
    outputs: dict = field(default_factory=dict)
    wall_time_s: float = 0.0
    summary: dict = field(default_factory=dict)

    def append_to(self, root) -> None:
        path = Path(root) / "runs.jsonl"
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "a") as f:
            f.write(json.dumps(asdict(self), sort_keys=True) + "\n")


def read_runs(root) -> list[dict]:
    path = Path(root) / "runs.jsonl"
    if not path.exists():
        return []
    return [json.loads(line) for line in path.read_text().splitlines() if line.strip()]


class Layout:
    def __init__(self, root):
        self.root = Path(root)
        self.vaed_data = self.root / "data" / "vaed"
        self.policy_data = self.root / "data" / "policy"
        self.trajectories = self.root / "data" / "trajectories.bin"
        self.vaed_ckpt = self.root / "checkpoints" / "vaed.ckpt"
        self.trajvae_ckpt = self.root / "checkpoints" / "trajvae.ckpt"
        self.policy_ckpt = self.root / "checkpoints" / "policy.ckpt"
        self.logs = self.root / "logs"
        self.reports = self.root / "reports"
        self.eval_dir = self.root / "eval"

    def require(self, *paths):
        for p in paths:
            if not Path(p).exists():
                raise MissingDependencyError(f"missing {p}; run the stage that produces it first")


def _write_log(rows, path, columns) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as f:
        w = csv.DictWriter(f, fieldnames=columns, extrasaction="ignore")
        w.writeheader()
        for r in rows:
            w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in r.items()})
    return path


def _write_json(obj, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=1, sort_keys=True))
    return path


LOG_COLUMNS = {
    "vaed": ["epoch", "bce", "kl", "total"],
    "trajvae": ["epoch", "mse", "kl", "beta"],
    "policy": ["epoch", "loss", "val_mean_err_m"],
}


def _run(stage, cfg: PipelineConfig, sections, body):
    """Time ``body()``, which returns (inputs, outputs, summary); append the manifest line."""
    torch.set_num_threads(cfg.int("pipeline", "torch_threads"))
    seed = cfg.stage_seed(stage)
    t0 = time.perf_counter()
    try:
        inputs, outputs, summary = body(seed)
    except PipelineError:
        raise
    except (OSError, RuntimeError, ValueError) as exc:
        raise PipelineError(f"{stage} failed: {exc}") from exc
    entry = RunManifest(
        stage,
        cfg.hash(sections),
        seed,
        {str(k): _hash_any(Path(k)) for k in inputs},
        {str(k): _hash_any(Path(k)) for k in outputs},
        round(time.perf_counter() - t0, 3),
        summary,
    )
    entry.append_to(cfg.output_root)
    log.info("%s done in %.1f s", stage, entry.wall_time_s)
    return entry


# --- stages ------------------------------------------------------------------------


def cmd_gen_data(cfg: PipelineConfig, which: str = "all", n: int | None = None, workers: int | None = None) -> RunManifest:
    """Render the VAED and/or policy datasets."""
    lay = Layout(cfg.output_root)
    workers = workers or cfg.int("pipeline", "workers")
    targets = {"vaed": ("scenegen", lay.vaed_data), "policy": ("policy", lay.policy_data)}
    if which not in ("all", *targets):
        raise ConfigurationError(f"unknown dataset {which!r}")
    chosen = list(targets) if which == "all" else [which]

    def body(seed):
        outputs, summary = [], {}
        for name in chosen:
            section, out = targets[name]
            count = cfg.int(section, "n") if n is None else int(n)
            m = generate_dataset(count, cfg.randomization(section), out, workers, cfg.master_seed + STAGE_SEED_INDEX[name])
            outputs.append(out)
            summary[name] = {"n": m["n"], "workers": workers}
        return [], outputs, summary

    return _run("gen-data", cfg, ["pipeline", "scenegen", "policy"], body)


def cmd_train_vaed(cfg: PipelineConfig, n: int | None = None) -> RunManifest:
    lay = Layout(cfg.output_root)
    lay.require(lay.vaed_data / "manifest.json")

    def body(seed):
        total = load_manifest(lay.vaed_data)["n"]
        holdout = min(cfg.int("vaed", "holdout"), total // 2)
        n_train = total - holdout if n is None else min(int(n), total - holdout)
        rgb, lab, _, _ = load_arrays(lay.vaed_data, range(n_train))
        train_cfg = TrainConfig(cfg.int("vaed", "epochs"), cfg.int("vaed", "batch_size"), cfg.float("vaed", "lr"), seed)
        model, rows = train_vaed(rgb, lab, cfg.vaed_config(), train_cfg)
        del rgb, lab
        report = {"n_train": int(n_train), "n_holdout": int(holdout)}
        if holdout:
            hrgb, hlab, _, _ = load_arrays(lay.vaed_data, range(total - holdout, total))
            pm = predict_maps(model, hrgb)
            f1 = [pixel_f1(pm[..., c], hlab[..., c]) for c in range(hlab.shape[-1])]
            report.update(f1_wrap_grasp=f1[0], f1_contain=f1[1], f1_mean=float(np.mean(f1)))
        save_vaed(model, lay.vaed_ckpt, {"seed": seed})
        outs = [lay.vaed_ckpt, _write_log(rows, lay.logs / "vaed.csv", LOG_COLUMNS["vaed"]), _write_json(report, lay.reports / "vaed.json")]
        return [lay.vaed_data], outs, report

    return _run("vaed", cfg, ["pipeline", "scenegen", "vaed"], body)


def build_trajectories(cfg: PipelineConfig):
    return generate_training_trajectories(
        cfg.chain(),
        cfg.floats("trajvae", "workspace", 4),
        [int(v) for v in cfg.floats("trajvae", "grid", 2)],
        np.array(cfg.floats("trajvae", "start_config")),
        cfg.float("trajvae", "hover_z"),
        cfg.int("trajvae", "steps"),
        cfg.float("trajvae", "via_lift"),
    )


def split_indices(n: int, holdout: int, seed: int):
    """Deterministic (train, holdout) index split."""
    order = np.random.default_rng(seed).permutation(n)
    return np.sort(order[holdout:]), np.sort(order[:holdout])


def cmd_train_trajvae(cfg: PipelineConfig, n: int | None = None) -> RunManifest:
    lay = Layout(cfg.output_root)

    def body(seed):
        ts = build_trajectories(cfg)
        save_trajectory_set(ts, lay.trajectories)
        u = ts.u if n is None else ts.u[: int(n)]
        holdout = min(cfg.int("trajvae", "holdout"), len(u) // 2)
        tr, ho = split_indices(len(u), holdout, seed)
        schedule = BetaSchedule(cfg.float("trajvae", "beta_start"), cfg.float("trajvae", "beta_end"), cfg.int("trajvae", "beta_interval"))
        train_cfg = TrajTrainConfig(
            cfg.int("trajvae", "epochs"),
            cfg.int("trajvae", "batch_size"),
            cfg.float("trajvae", "lr"),
            cfg.float("trajvae", "lr_final"),
            seed,
        )
        model, rows = train_trajectory_vae(u[tr], cfg.traj_config(), schedule, train_cfg)
        report = {
            "n_trajectories": int(len(u)),
            "n_unreachable": len(ts.unreachable),
            "n_holdout": int(len(ho)),
            "train_rmse_rad": rmse_per_joint(u[tr], reconstruct(model, u[tr])),
        }
        if len(ho):
            report["holdout_rmse_rad"] = rmse_per_joint(u[ho], reconstruct(model, u[ho]))
        save_trajvae(model, lay.trajvae_ckpt, {"seed": seed, "start_config": ts.start_config.tolist()})
        outs = [
            lay.trajectories,
            lay.trajvae_ckpt,
            _write_log(rows, lay.logs / "trajvae.csv", LOG_COLUMNS["trajvae"]),
            _write_json(report, lay.reports / "trajvae.json"),
        ]
        return [], outs, report

    return _run("trajvae", cfg, ["pipeline", "trajvae"], body)


def _policy_arrays(root, n=None):
    total = load_manifest(root)["n"]
    count = total if n is None else min(int(n), total)
    rgb, _, metas, _ = load_arrays(root, range(count))
    cams = np.array([_camera_features(m["camera"]) for m in metas])
    targets = np.array([m["cup_position"] for m in metas])
    return rgb, cams, targets


def _camera_features(cam_dict) -> np.ndarray:
    return CameraPose.from_dict(cam_dict).features()


def cmd_train_policy(cfg: PipelineConfig, n: int | None = None) -> RunManifest:
    lay = Layout(cfg.output_root)
    lay.require(lay.vaed_ckpt, lay.trajvae_ckpt, lay.policy_data / "manifest.json")

    def body(seed):
        frozen_before = {p: sha256_file(p) for p in (lay.vaed_ckpt, lay.trajvae_ckpt)}
        vaed = load_vaed(lay.vaed_ckpt)
        traj = load_trajvae(lay.trajvae_ckpt)
        digests = (params_digest(vaed), params_digest(traj))
        chain = cfg.chain()
        pc = cfg.policy_config()
        if vaed.cfg.latent_dim != pc.latent_dim or traj.cfg.action_dim != pc.action_dim:
            raise ConfigurationError("checkpoint dimensions do not match the policy config")
        if traj.cfg.n_joints != chain.n_joints:
            raise ConfigurationError("trajectory checkpoint does not match the kinematic chain")
        rgb, cams, targets = _policy_arrays(lay.policy_data, n)
        train_cfg = PolicyTrainConfig(
            cfg.int("policy", "epochs"),
            cfg.int("policy", "batch_size"),
            cfg.float("policy", "lr"),
            cfg.float("policy", "lr_final"),
            cfg.float("policy", "val_fraction"),
            seed,
        )
        policy, rows, report = train_policy(rgb, cams, targets, vaed, traj, chain, pc, train_cfg)
        if (params_digest(vaed), params_digest(traj)) != digests:
            raise PipelineError("frozen model parameters changed during policy training")
        if {p: sha256_file(p) for p in frozen_before} != frozen_before:
            raise PipelineError("frozen checkpoints changed on disk during policy training")
        save_policy(policy, lay.policy_ckpt, {"seed": seed})
        report = dict(report, n_samples=int(len(rgb)), frozen_unchanged=True)
        outs = [
            lay.policy_ckpt,
            _write_log(rows, lay.logs / "policy.csv", LOG_COLUMNS["policy"]),
            _write_json(report, lay.reports / "policy.json"),
        ]
        return [lay.vaed_ckpt, lay.trajvae_ckpt, lay.policy_data], outs, report

    return _run("policy", cfg, ["pipeline", "vaed", "trajvae", "policy"], body)


def load_stack(cfg: PipelineConfig) -> VisuomotorStack:
    lay = Layout(cfg.output_root)
    lay.require(lay.vaed_ckpt, lay.trajvae_ckpt, lay.policy_ckpt)
    return VisuomotorStack(load_vaed(lay.vaed_ckpt), load_policy(lay.policy_ckpt), load_trajvae(lay.trajvae_ckpt), cfg.chain())


def cmd_evaluate(cfg: PipelineConfig, n: int | None = None) -> RunManifest:
    lay = Layout(cfg.output_root)
    stack = load_stack(cfg)

    def body(seed):
        n_trials = cfg.int("evaluation", "n_trials") if n is None else int(n)
        levels = [int(v) for v in cfg.floats("evaluation", "clutter_levels")]
        cups = cfg.get("evaluation", "cup_shapes").split()
        overlays = []

        def predict(trial):
            if len(overlays) < cfg.int("evaluation", "overlays"):
                overlays.append(trial.rgb)
            return stack.final_positions(trial.rgb[None], trial.scene.camera.features()[None])[0]

        report = evaluation.evaluate(
            predict,
            cfg.randomization("evaluation"),
            n_trials,
            levels,
            cups,
            seed,
            cfg.float("evaluation", "inner_radius"),
            cfg.float("evaluation", "ball_radius"),
        )
        files = evaluation.write_report(report, lay.eval_dir)
        outs = list(files.values())
        outs += write_plots(lay.eval_dir)
        if overlays:
            maps = predict_maps(stack.vaed, np.stack(overlays))
            outs.append(plots.save_overlay_grid(overlays, maps >= 0.5, lay.eval_dir / "overlays.png"))
        inputs = [lay.vaed_ckpt, lay.trajvae_ckpt, lay.policy_ckpt]
        summary = {"n_trials": n_trials, "rows": len(report["rows"])}
        if report["trials"]:
            summary["mean_err_m"] = float(np.mean([t["err"] for t in report["trials"]]))
            summary["success_rate"] = float(np.mean([t["success"] for t in report["trials"]]))
        return inputs, outs, summary

    return _run("evaluate", cfg, ["pipeline", "evaluation"], body)


def write_plots(eval_dir) -> list[Path]:
    """(Re)draw the error-ellipse and clutter figures from a written report."""
    eval_dir = Path(eval_dir)
    for name in ("report.json", "plot_data.csv"):
        if not (eval_dir / name).exists():
            raise MissingDependencyError(f"missing {eval_dir / name}; run evaluate first")
    rows = json.loads((eval_dir / "report.json").read_text())["rows"]
    with open(eval_dir / "plot_data.csv") as f:
        pts = [{k: float(v) for k, v in r.items()} for r in csv.DictReader(f)]
    return [
        plots.error_ellipses(pts, eval_dir / "error_ellipses.png"),
        plots.clutter_curve(rows, eval_dir / "clutter_error.png"),
    ]


def cmd_inspect(path) -> str:
    path = Path(path)
    if not path.exists():
        raise MissingDependencyError(f"checkpoint not found: {path}")
    try:
        return checkpoint.summary(path)
    except checkpoint.CheckpointError as exc:
        raise PipelineError(f"{path}: {exc}") from exc


def artifact_hashes(root) -> dict:
    """SHA-256 of every deterministic artifact under ``root`` (the run log is excluded)."""
    root = Path(root)
    out = {}
    for p in sorted(root.rglob("*")):
        if p.is_file() and p.name != "runs.jsonl":
            out[str(p.relative_to(root))] = sha256_file(p)
    return out
