"""Run configuration: one JSON file merging generator, model, trainer and
hyper-parameter settings plus a single top-level seed.

Unknown keys are rejected with the offending key named. All defaults are
materialized into the saved copy, and the content hash of the materialized
dict is stamped into every artifact a run produces. One seed governs the
whole run: the per-section seed fields are filled from it (putting "seed"
inside a section is rejected).
"""

import hashlib
import json
from dataclasses import dataclass, fields

from ncdkit.core import ConfigError, DatasetSpec, Hyperparams, InputError
from ncdkit.model import ModelConfig
from ncdkit.synthdata import GeneratorConfig
from ncdkit.trainer import TrainConfig

TOP_KEYS = ("seed", "output_dir", "generator", "model", "train", "hyper")


@dataclass
class RunConfig:
    generator: GeneratorConfig
    model: ModelConfig
    train: TrainConfig
    hyper: Hyperparams
    seed: int = 0
    output_dir: str = ""


def _check_keys(d, allowed, where):
    for key in d:
        if key not in allowed:
            raise ConfigError(f"unknown key {where}.{key!r}" if where else f"unknown key {key!r}")


def _build_section(cls, d, where, **extra):
    allowed = {f.name for f in fields(cls)} - {"seed"}
    if "seed" in d:
        raise ConfigError(f"{where}.seed is not allowed; set the top-level seed")
    _check_keys(d, allowed, where)
    kw = dict(d)
    for key in ("encoder_widths", "disc_widths", "labeled_views", "unlabeled_views",
                "train_hidden_views_labeled", "train_hidden_views_unlabeled"):
        if key in kw and isinstance(kw[key], list):
            kw[key] = tuple(kw[key])
    kw.update(extra)
    try:
        return cls(**kw)
    except (InputError, TypeError, ValueError) as exc:
        raise ConfigError(f"invalid {where} section: {exc}") from exc


def run_config_from_dict(raw: dict) -> RunConfig:
    if not isinstance(raw, dict):
        raise ConfigError("run config must be a JSON object")
    _check_keys(raw, TOP_KEYS, "")
    seed = int(raw.get("seed", 0))

    gen_raw = dict(raw.get("generator", {}))
    spec_raw = gen_raw.pop("spec", {})
    _check_keys(spec_raw, {f.name for f in fields(DatasetSpec)}, "generator.spec")
    try:
        spec = DatasetSpec(**spec_raw)
    except (InputError, TypeError) as exc:
        raise ConfigError(f"invalid generator.spec section: {exc}") from exc
    generator = _build_section(GeneratorConfig, gen_raw, "generator", spec=spec)

    model = _build_section(ModelConfig, dict(raw.get("model", {})), "model")
    train = _build_section(TrainConfig, dict(raw.get("train", {})), "train", seed=seed)
    hyper = _build_section(Hyperparams, dict(raw.get("hyper", {})), "hyper", seed=seed)
    return RunConfig(generator=generator, model=model, train=train, hyper=hyper,
                     seed=seed, output_dir=str(raw.get("output_dir", "")))


def materialize(rc: RunConfig) -> dict:
    """Full dict with every default filled in; JSON- and hash-stable."""
    train = {f.name: getattr(rc.train, f.name) for f in fields(TrainConfig)}
    train.pop("seed")
    hyper = {f.name: getattr(rc.hyper, f.name) for f in fields(Hyperparams)}
    hyper.pop("seed")
    return {
        "seed": rc.seed,
        "output_dir": rc.output_dir,
        "generator": rc.generator.as_dict(),
        "model": {"encoder_widths": list(rc.model.encoder_widths),
                  "embed_dim": rc.model.embed_dim,
                  "disc_widths": list(rc.model.disc_widths)},
        "train": train,
        "hyper": hyper,
    }


def config_hash(materialized: dict) -> str:
    blob = json.dumps(materialized, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()


def load_run_config(path, seed=None):
    """Parse and validate a config file; returns (RunConfig, materialized, hash).

    `seed` (e.g. from a CLI flag) overrides the file's top-level seed.
    """
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: not valid JSON: {exc}") from exc
    if seed is not None:
        raw = dict(raw)
        raw["seed"] = int(seed)
    rc = run_config_from_dict(raw)
    mat = materialize(rc)
    return rc, mat, config_hash(mat)


def save_run_config(materialized: dict, path):
    out = dict(materialized)
    out["config_hash"] = config_hash(materialized)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(out, fh, indent=2, sort_keys=True)
        fh.write("\n")
