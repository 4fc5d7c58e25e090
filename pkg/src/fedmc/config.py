"""Experiment configuration: one JSON document per experiment, validated
against a strict schema (unknown keys are rejected) before any computation."""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass

import jsonschema

from .data import IID
from .errors import ConfigError
from .fedavg import FedConfig
from .model import Architecture, LossKind, Scaling

_POS_INT = {"type": "integer", "minimum": 1}
_ROUND_SELECTOR = {
    "oneOf": [
        {"type": "string", "enum": ["all", "final", "none"]},
        {"type": "array", "items": _POS_INT},
    ]
}
_ALPHA = {
    "oneOf": [
        {"type": "number", "exclusiveMinimum": 0},
        {"type": "string", "enum": ["iid"]},
    ]
}

SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["seed", "data", "architecture", "federated"],
    "properties": {
        "seed": {"type": "integer", "minimum": 0},
        "out_dir": {"type": "string"},
        "data": {
            "oneOf": [
                {
                    "type": "object",
                    "additionalProperties": False,
                    "required": ["kind", "num_classes", "per_class", "dims"],
                    "properties": {
                        "kind": {"const": "synthetic"},
                        "num_classes": _POS_INT,
                        "per_class": _POS_INT,
                        "dims": _POS_INT,
                        "spread": {"type": "number", "minimum": 0},
                        "test_per_class": {"type": "integer", "minimum": 0},
                    },
                },
                {
                    "type": "object",
                    "additionalProperties": False,
                    "required": ["kind", "train_images", "train_labels"],
                    "properties": {
                        "kind": {"const": "idx"},
                        "train_images": {"type": "string"},
                        "train_labels": {"type": "string"},
                        "test_images": {"type": "string"},
                        "test_labels": {"type": "string"},
                        "num_classes": _POS_INT,
                    },
                },
            ]
        },
        "architecture": {
            "type": "object",
            "additionalProperties": False,
            "required": ["hidden_count", "output_dim", "scaling"],
            "properties": {
                "hidden_count": _POS_INT,
                "output_dim": _POS_INT,
                "scaling": {"type": "string", "enum": ["mean_field", "plain"]},
            },
        },
        "federated": {
            "type": "object",
            "additionalProperties": False,
            "required": ["clients", "alphas", "rounds", "local_iters",
                         "batch_size", "lr", "loss"],
            "properties": {
                "clients": _POS_INT,
                "alphas": {"type": "array", "items": _ALPHA, "minItems": 1},
                "rounds": _POS_INT,
                "local_iters": {"type": "integer", "minimum": 0},
                "batch_size": _POS_INT,
                "lr": {
                    "oneOf": [
                        {"type": "number", "exclusiveMinimum": 0},
                        {"type": "array", "minItems": 1,
                         "items": {"type": "number", "minimum": 0}},
                    ]
                },
                "momentum": {"type": "number", "minimum": 0,
                             "exclusiveMaximum": 1},
                "loss": {"type": "string", "enum": ["mse", "cross_entropy"]},
                "checkpoint_rounds": _ROUND_SELECTOR,
                "noise_rounds": _ROUND_SELECTOR,
                "eval_train_subsample": {"type": ["integer", "null"],
                                         "minimum": 1},
                "eval_test_subsample": {"type": ["integer", "null"],
                                        "minimum": 1},
                "eval_client_subsample": {"type": ["integer", "null"],
                                          "minimum": 1},
                "scalar_targets": {"type": "boolean"},
            },
        },
        "analyses": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "landscape": {
                    "type": "object",
                    "additionalProperties": False,
                    "properties": {
                        "clients": {"type": "array", "minItems": 2,
                                    "maxItems": 2,
                                    "items": {"type": "integer", "minimum": 0}},
                        "a_range": {"type": "array", "minItems": 2,
                                    "maxItems": 2, "items": {"type": "number"}},
                        "b_range": {"type": "array", "minItems": 2,
                                    "maxItems": 2, "items": {"type": "number"}},
                        "resolution": {"type": "integer", "minimum": 2},
                    },
                },
                "barrier": {
                    "type": "object",
                    "additionalProperties": False,
                    "properties": {
                        "grid": {"type": "integer", "minimum": 2},
                        "per_round": {"type": "boolean"},
                        "dataset": {"type": "string",
                                    "enum": ["train", "test"]},
                    },
                },
                "curve": {
                    "type": "object",
                    "additionalProperties": False,
                    "properties": {
                        "steps": {"type": "integer", "minimum": 0},
                        "batch_size": _POS_INT,
                        "lr": {"type": "number", "exclusiveMinimum": 0},
                        "momentum": {"type": "number", "minimum": 0,
                                     "exclusiveMaximum": 1},
                        "seed": {"type": "integer", "minimum": 0},
                        "grid": {"type": "integer", "minimum": 2},
                    },
                },
                "dropout": {
                    "type": "object",
                    "additionalProperties": False,
                    "properties": {
                        "keep_fracs": {"type": "array", "minItems": 1,
                                       "items": {"type": "number",
                                                 "exclusiveMinimum": 0,
                                                 "maximum": 1}},
                        "trials": _POS_INT,
                        "keep_seed": {"type": "integer", "minimum": 0},
                    },
                },
                "noise": {"type": "object", "additionalProperties": False},
                "compare": {
                    "type": "object",
                    "additionalProperties": False,
                    "properties": {"sample": _POS_INT},
                },
                "seven_path": {
                    "type": "object",
                    "additionalProperties": False,
                    "properties": {
                        "points_per_segment": {"type": "integer", "minimum": 2},
                    },
                },
            },
        },
    },
}


@dataclass(frozen=True)
class ExperimentConfig:
    raw: dict

    @classmethod
    def from_file(cls, path) -> "ExperimentConfig":
        try:
            with open(path) as fh:
                raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: not valid JSON: {exc}") from exc
        return cls.from_dict(raw)

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        try:
            jsonschema.validate(raw, SCHEMA)
        except jsonschema.ValidationError as exc:
            where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
            raise ConfigError(f"config field {where!r}: {exc.message}") from exc
        return cls(raw)

    @property
    def seed(self) -> int:
        return self.raw["seed"]

    def with_seed(self, seed: int) -> "ExperimentConfig":
        raw = dict(self.raw)
        raw["seed"] = int(seed)
        return ExperimentConfig.from_dict(raw)

    def digest(self) -> str:
        blob = json.dumps(self.raw, sort_keys=True,
                          separators=(",", ":")).encode("utf-8")
        return hashlib.sha256(blob).hexdigest()

    @property
    def alphas(self) -> list:
        return [IID if a == "iid" else float(a)
                for a in self.raw["federated"]["alphas"]]

    @property
    def loss_kind(self) -> LossKind:
        return LossKind(self.raw["federated"]["loss"])

    @property
    def scalar_targets(self) -> bool:
        """Regression mode: labels become class_id/(C-1) real targets."""
        return bool(self.raw["federated"].get("scalar_targets", False))

    def architecture(self, input_dim: int) -> Architecture:
        arch = self.raw["architecture"]
        return Architecture(input_dim, arch["hidden_count"], arch["output_dim"],
                            Scaling(arch["scaling"]))

    def fed_config(self) -> FedConfig:
        fed = self.raw["federated"]
        lr = fed["lr"]
        return FedConfig(
            num_clients=fed["clients"],
            rounds=fed["rounds"],
            local_iters=fed["local_iters"],
            batch_size=fed["batch_size"],
            lr=tuple(lr) if isinstance(lr, list) else float(lr),
            momentum=float(fed.get("momentum", 0.0)),
            loss_kind=self.loss_kind,
            seed=self.seed,
            checkpoint_rounds=fed.get("checkpoint_rounds", "final"),
            noise_rounds=fed.get("noise_rounds", "none"),
            eval_train=fed.get("eval_train_subsample"),
            eval_test=fed.get("eval_test_subsample"),
            eval_client=fed.get("eval_client_subsample"),
        )

    def analyses(self) -> dict:
        return self.raw.get("analyses", {})

    def alpha_label(self, alpha) -> str:
        return "iid" if alpha == IID or alpha == math.inf else f"a{alpha:g}"
