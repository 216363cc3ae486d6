"""Command-line entry point.

Subcommands: gen-data, train, eval, ablate, export-embeddings.
Exit codes: 0 success, 1 usage/config errors, 2 numeric failures.
"""

import argparse
import json
import os
import sys

import numpy as np

from ncdkit import config as C
from ncdkit import evaluation as E
from ncdkit import model as M
from ncdkit import presets, synthdata, trainer
from ncdkit.core import ConfigError, InputError, NumericError

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_NUMERIC = 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _load_config(args):
    if args.config and args.preset:
        raise ConfigError("pass either --config or --preset, not both")
    if args.preset:
        raw = presets.preset_dict(args.preset, seed=args.seed)
        rc = C.run_config_from_dict(raw)
        mat = C.materialize(rc)
        return rc, mat, C.config_hash(mat)
    if args.config:
        return C.load_run_config(args.config, seed=args.seed)
    raise ConfigError("one of --config or --preset is required")


def _write_run_config(mat, out_dir):
    os.makedirs(out_dir, exist_ok=True)
    C.save_run_config(mat, os.path.join(out_dir, "run_config.json"))


def _init_params(rc):
    seed = np.random.default_rng([rc.seed, 4051]).integers(2**31)
    return M.init_params(rc.generator.spec, rc.model, int(seed))


def _load_data(path, expected_spec=None):
    dataset = synthdata.load(path)
    if expected_spec is not None and dataset.spec != expected_spec:
        raise InputError(
            f"dataset dimensions {dataset.spec} do not match config {expected_spec}")
    return dataset


def cmd_gen_data(args):
    rc, mat, digest = _load_config(args)
    dataset = synthdata.generate(rc.generator, rc.seed)
    os.makedirs(args.out, exist_ok=True)
    dataset.provenance["config_hash"] = digest
    synthdata.save(dataset, os.path.join(args.out, "data.csv"))
    _write_run_config(mat, args.out)
    print(f"wrote {len(dataset.train)} train / {len(dataset.test)} test rows to "
          f"{os.path.join(args.out, 'data.csv')} (oracle accuracy "
          f"{dataset.provenance['oracle_accuracy']:.4f})")
    return EXIT_OK


def _apply_ablate(rc, spec_str):
    wanted = {tok.strip() for tok in spec_str.split(",") if tok.strip()}
    if "sup" in wanted:
        if wanted != {"sup"}:
            raise ConfigError("--ablate sup cannot be combined with other toggles")
        rc.train.enable_cl = rc.train.enable_nl = False
        rc.train.enable_H = rc.train.enable_var = False
        return
    unknown = wanted - {"nl", "var", "H", "none"}
    if unknown:
        raise ConfigError(f"--ablate accepts nl,var,H (or sup/none), got {sorted(unknown)}")
    rc.train.enable_nl = "nl" in wanted
    rc.train.enable_var = "var" in wanted
    rc.train.enable_H = "H" in wanted


def cmd_train(args):
    rc, mat, digest = _load_config(args)
    if args.ablate:
        _apply_ablate(rc, args.ablate)
        mat = C.materialize(rc)
        digest = C.config_hash(mat)
    dataset = _load_data(args.data, rc.generator.spec)
    _write_run_config(mat, args.out)
    if args.resume:
        params, log, report = trainer.resume(
            args.resume, dataset, rc.train, rc.hyper, config_hash=digest, out_dir=args.out)
    else:
        params = _init_params(rc)
        params, log, report = trainer.train(
            dataset, params, rc.train, rc.hyper, config_hash=digest, out_dir=args.out)
    report_d = report.as_dict()
    report_d["config_hash"] = digest
    with open(os.path.join(args.out, "eval_report.json"), "w", encoding="utf-8") as fh:
        json.dump(report_d, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(f"final: acr={report.acr:.4f} acc={report.acc:.4f} "
          f"silhouette={report.silhouette:.4f}")
    return EXIT_OK


def cmd_eval(args):
    params, meta, _ = M.load_checkpoint(args.checkpoint)
    dataset = _load_data(args.data, params.spec)
    report = E.evaluate(params, dataset.test)
    out = report.as_dict()
    out["config_hash"] = meta.get("config_hash", "")
    text = json.dumps(out, indent=2, sort_keys=True)
    print(text)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    if args.export_embeddings:
        E.export_embeddings(params, dataset.train + dataset.test, args.export_embeddings)
    return EXIT_OK


def cmd_export_embeddings(args):
    params, _, _ = M.load_checkpoint(args.checkpoint)
    dataset = _load_data(args.data, params.spec)
    E.export_embeddings(params, dataset.train + dataset.test, args.out)
    print(f"wrote {len(dataset)} embedding rows to {args.out}")
    return EXIT_OK


def cmd_ablate(args):
    seeds = [int(s) for s in args.seeds.split(",")]
    rows = args.rows.split(",") if args.rows else presets.ablation_row_names()
    os.makedirs(args.out, exist_ok=True)
    summary = {}
    for row in rows:
        accs, acrs = [], []
        for seed in seeds:
            rc = presets.make_preset(f"table2-{row}", seed=seed)
            mat = C.materialize(rc)
            digest = C.config_hash(mat)
            run_dir = os.path.join(args.out, f"{row}_seed{seed}")
            dataset = synthdata.generate(rc.generator, rc.seed)
            params = _init_params(rc)
            _write_run_config(mat, run_dir)
            params, log, report = trainer.train(
                dataset, params, rc.train, rc.hyper, config_hash=digest, out_dir=run_dir)
            accs.append(report.acc)
            acrs.append(report.acr)
        summary[row] = {"acc_mean": float(np.mean(accs)), "acr_mean": float(np.mean(acrs)),
                        "acc": accs, "acr": acrs}
        print(f"{row:8s} acc={np.mean(accs):.4f} acr={np.mean(acrs):.4f} (seeds {seeds})")
    with open(os.path.join(args.out, "ablation_summary.json"), "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return EXIT_OK


def build_parser():
    parser = _Parser(prog="ncdkit", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add_config_opts(p):
        p.add_argument("--config", help="run config JSON file")
        p.add_argument("--preset", help=f"named preset ({', '.join(presets.preset_names())})")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")

    p = sub.add_parser("gen-data", help="generate a synthetic dataset")
    add_config_opts(p)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("train", help="train on a generated dataset")
    add_config_opts(p)
    p.add_argument("--data", required=True, help="dataset CSV from gen-data")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--resume", help="checkpoint to resume from")
    p.add_argument("--ablate", help="comma list of enabled extras among nl,var,H "
                                    "(or 'sup' / 'none')")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint on a dataset's test split")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", help="write the report JSON here")
    p.add_argument("--export-embeddings", help="also export embeddings CSV here")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("ablate", help="sweep the loss-subset ablation rows")
    p.add_argument("--out", required=True)
    p.add_argument("--seeds", default="0,1,2,3,4")
    p.add_argument("--rows", help="comma list of rows (default: all)")
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("export-embeddings", help="export embeddings for a checkpoint")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_export_embeddings)
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if exc.code is not None else EXIT_USAGE
    try:
        return args.func(args)
    except (ConfigError, InputError, FileNotFoundError, IsADirectoryError) as exc:
        print(f"ncdkit: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NumericError as exc:
        print(f"ncdkit: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
