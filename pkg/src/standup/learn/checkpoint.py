"""Versioned checkpoints: parameters, optimizer moments, curriculum, RNG.

A checkpoint is a single .npz holding every array needed to resume
bit-exactly: network parameters, Adam moments, the full environment
snapshot (states, buffers, randomized parameters, RNG streams), trainer
RNG streams, and the JSON-encoded model and configs so loading is
self-contained.
"""

from __future__ import annotations

import dataclasses
import json

import numpy as np

from ..config import EnvConfig, TrainConfig, config_hash
from ..physics.model import RobotModel

FORMAT_VERSION = 1


def _json_array(obj) -> np.ndarray:
    return np.frombuffer(json.dumps(obj).encode(), dtype=np.uint8)


def _json_load(arr: np.ndarray):
    return json.loads(bytes(arr).decode())


def save_checkpoint(path: str, trainer) -> None:
    data: dict[str, np.ndarray] = {
        "format_version": np.int64(FORMAT_VERSION),
        "iteration": np.int64(trainer.iteration),
        "seed": np.int64(trainer.seed),
        "config_hash": _json_array(config_hash(trainer.env_cfg, trainer.cfg)),
        "model_json": _json_array(trainer.model.to_dict()),
        "env_cfg_json": _json_array(dataclasses.asdict(trainer.env_cfg)),
        "train_cfg_json": _json_array(dataclasses.asdict(trainer.cfg)),
        "log_std": trainer.policy.log_std,
        "adam_t": np.int64(trainer.adam.t),
        "adam_lr": np.float64(trainer.adam.lr),
        "obs_current": (trainer._obs if trainer._obs is not None else np.zeros(0)),
        "trainer_rng": _json_array([
            trainer.sample_rng.bit_generator.state,
            trainer.shuffle_rng.bit_generator.state,
            trainer.l2c2_rng.bit_generator.state,
        ]),
    }
    for i, p in enumerate(trainer.policy.mlp.param_arrays()):
        data[f"policy_{i}"] = p
    for g, critic in enumerate(trainer.critics):
        for i, p in enumerate(critic.param_arrays()):
            data[f"critic{g}_{i}"] = p
    for g, critic in enumerate(trainer.target_critics):
        for i, p in enumerate(critic.param_arrays()):
            data[f"target{g}_{i}"] = p
    for i, arr in enumerate(trainer.adam.m):
        data[f"adam_m_{i}"] = arr
    for i, arr in enumerate(trainer.adam.v):
        data[f"adam_v_{i}"] = arr
    for key, arr in trainer.env.get_state().items():
        data[f"env_{key}"] = arr
    np.savez(path, **data)


def load_checkpoint(path: str, out_dir: str | None = None):
    """Rebuild a Trainer exactly as saved; resuming reproduces the run."""
    from ..config import ConfigError
    from .trainer import Trainer

    with np.load(path) as zf:
        data = {k: zf[k] for k in zf.files}
    if int(data["format_version"]) != FORMAT_VERSION:
        raise ConfigError(
            f"checkpoint format {int(data['format_version'])} unsupported")

    model = RobotModel.from_dict(_json_load(data["model_json"]))
    env_cfg = EnvConfig(**_json_load(data["env_cfg_json"]))
    train_cfg = TrainConfig(**_json_load(data["train_cfg_json"]))
    trainer = Trainer(model, env_cfg, train_cfg, seed=int(data["seed"]),
                      out_dir=out_dir)
    trainer.iteration = int(data["iteration"])

    for i, p in enumerate(trainer.policy.mlp.param_arrays()):
        p[...] = data[f"policy_{i}"]
    trainer.policy.log_std[...] = data["log_std"]
    for g, critic in enumerate(trainer.critics):
        for i, p in enumerate(critic.param_arrays()):
            p[...] = data[f"critic{g}_{i}"]
    for g, critic in enumerate(trainer.target_critics):
        for i, p in enumerate(critic.param_arrays()):
            p[...] = data[f"target{g}_{i}"]
    for i, arr in enumerate(trainer.adam.m):
        arr[...] = data[f"adam_m_{i}"]
    for i, arr in enumerate(trainer.adam.v):
        arr[...] = data[f"adam_v_{i}"]
    trainer.adam.t = int(data["adam_t"])
    trainer.adam.lr = float(data["adam_lr"])
    obs = data["obs_current"]
    trainer._obs = obs.copy() if obs.size else None
    states = _json_load(data["trainer_rng"])
    trainer.sample_rng.bit_generator.state = states[0]
    trainer.shuffle_rng.bit_generator.state = states[1]
    trainer.l2c2_rng.bit_generator.state = states[2]
    env_state = {k[len("env_"):]: v for k, v in data.items()
                 if k.startswith("env_") and not k.startswith("env_cfg")}
    trainer.env.set_state(env_state)
    return trainer


def checkpoint_summary(path: str) -> dict:
    with np.load(path) as zf:
        return {
            "format_version": int(zf["format_version"]),
            "iteration": int(zf["iteration"]),
            "seed": int(zf["seed"]),
            "config_hash": _json_load(zf["config_hash"]),
        }
