"""Command-line interface.

Subcommands: synth (generate a corpus), train (fit an ensemble), auth
(decide one recording), eval (score an ensemble, or sweep a grid). Every
RunConfig key is exposed as a flag on every subcommand; precedence is
built-in default < --config file < explicit flag. Exit codes: 0 success
(auth: accepted), 1 auth rejected, 2 any error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .archive import load_ensemble, save_ensemble
from .authentication import authenticate, build_ensemble, decision_as_dict
from .classifier import TrainConfig, split_dataset
from .config import _TYPES, RunConfig
from .errors import VibauthError
from .evaluation import (
    evaluate_ensemble,
    report_as_dict,
    sweep,
    write_summary_csv,
)
from .features import extract_features, featurize_recordings
from .recording import read_recording_csv
from .synth import generate_corpus, load_corpus


def _add_config_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", type=Path, help="settings file of key = value lines")
    for name, typ in _TYPES.items():
        parser.add_argument(
            "--" + name.replace("_", "-"), type=typ, dest=name, default=None
        )


def _resolve_config(args: argparse.Namespace) -> RunConfig:
    base = RunConfig.load(args.config) if args.config else RunConfig()
    return base.replaced(**{name: getattr(args, name) for name in _TYPES})


def _train_config(cfg: RunConfig) -> TrainConfig:
    return TrainConfig(
        learning_rate=cfg.learning_rate,
        batch_size=cfg.batch_size,
        n_epochs=cfg.n_epochs,
        seed=cfg.seed,
    )


def _int_list(text: str) -> list[int]:
    return [int(part) for part in text.split(",") if part.strip()]


def _float_list(text: str) -> list[float]:
    return [float(part) for part in text.split(",") if part.strip()]


def cmd_synth(args: argparse.Namespace) -> int:
    cfg = _resolve_config(args)
    entries = generate_corpus(
        cfg.seed,
        cfg.n_users,
        cfg.n_impostors,
        cfg.per_gesture,
        args.out,
        sample_rate_hz=cfg.sample_rate_hz,
    )
    print(f"wrote {len(entries)} recordings to {args.out}")
    return 0


def cmd_train(args: argparse.Namespace) -> int:
    cfg = _resolve_config(args)
    legit, _ = load_corpus(args.corpus)
    primitive, mfcc, users, gestures = featurize_recordings(legit, cfg.duration_ms)
    users_arr = np.array(users)
    gestures_arr = np.array(gestures)
    train_idx, test_idx = split_dataset(users_arr, gestures_arr, cfg.train_fraction, cfg.seed)
    ensemble = build_ensemble(
        primitive[train_idx], mfcc[train_idx], users_arr[train_idx], _train_config(cfg)
    )
    meta = {
        "corpus": str(args.corpus),
        "duration_ms": cfg.duration_ms,
        "train_fraction": cfg.train_fraction,
        "split_seed": cfg.seed,
        "alpha": cfg.alpha,
        "beta": cfg.beta,
        "config_fingerprint": cfg.fingerprint(),
        "n_train": int(train_idx.shape[0]),
        "n_test": int(test_idx.shape[0]),
    }
    save_ensemble(args.out, ensemble, meta)
    final = ensemble.base.loss_trace[-1]
    print(
        f"trained ensemble of {len(ensemble.users)} users"
        f" ({meta['n_train']} train / {meta['n_test']} test), base loss {final:.4f}"
    )
    print(f"saved to {args.out}")
    return 0


def cmd_auth(args: argparse.Namespace) -> int:
    cfg = _resolve_config(args)
    ensemble, meta = load_ensemble(args.model)
    recording = read_recording_csv(args.input)
    duration_ms = args.duration_ms if args.duration_ms is not None else meta.get(
        "duration_ms", cfg.duration_ms
    )
    alpha = args.alpha if args.alpha is not None else meta.get("alpha", cfg.alpha)
    beta = args.beta if args.beta is not None else meta.get("beta", cfg.beta)
    pair = extract_features(recording, duration_ms)
    decision = authenticate(
        ensemble, pair.primitive, pair.mfcc, alpha, beta, verbose=args.verbose_evidence
    )
    print(json.dumps(decision_as_dict(decision), indent=2))
    return 0 if decision.accepted else 1


def cmd_eval(args: argparse.Namespace) -> int:
    cfg = _resolve_config(args)
    if args.grid:
        if args.corpus is None:
            raise VibauthError("--grid requires --corpus")
        legit, impostors = load_corpus(args.corpus)
        cells = sweep(
            legit,
            impostors,
            args.durations,
            args.user_counts,
            _train_config(cfg),
            cfg.alpha,
            cfg.beta,
            train_fraction=cfg.train_fraction,
            split_seed=cfg.seed,
        )
        out = Path(args.out or ".")
        out.mkdir(parents=True, exist_ok=True)
        write_summary_csv(out / "summary.csv", cells)
        reports = [
            {
                "duration_ms": cell.duration_ms,
                "n_users": cell.n_users,
                "report": report_as_dict(cell.report),
            }
            for cell in cells
        ]
        (out / "reports.json").write_text(json.dumps(reports, indent=2, sort_keys=True) + "\n")
        for cell in cells:
            r = cell.report
            print(
                f"T={cell.duration_ms:.0f}ms N={cell.n_users}:"
                f" accuracy={r.accuracy:.3f} far={r.far:.3f} frr={r.frr:.3f}"
            )
        print(f"wrote {out / 'summary.csv'} and {out / 'reports.json'}")
        return 0
    if args.model is None:
        raise VibauthError("eval needs --model (or --grid with --corpus)")
    ensemble, meta = load_ensemble(args.model)
    corpus = Path(args.corpus) if args.corpus else Path(meta["corpus"])
    duration_ms = args.duration_ms if args.duration_ms is not None else meta.get(
        "duration_ms", cfg.duration_ms
    )
    alpha = args.alpha if args.alpha is not None else meta.get("alpha", cfg.alpha)
    beta = args.beta if args.beta is not None else meta.get("beta", cfg.beta)
    legit, impostors = load_corpus(corpus)
    primitive, mfcc, users, gestures = featurize_recordings(legit, duration_ms)
    users_arr = np.array(users)
    gestures_arr = np.array(gestures)
    _, test_idx = split_dataset(
        users_arr,
        gestures_arr,
        meta.get("train_fraction", cfg.train_fraction),
        meta.get("split_seed", cfg.seed),
    )
    imp = (
        featurize_recordings(impostors, duration_ms)
        if impostors
        else (np.zeros((0, 3, 1, 1)), np.zeros((0, 3, 1, 1)), [], [])
    )
    report = evaluate_ensemble(
        ensemble,
        (
            primitive[test_idx],
            mfcc[test_idx],
            users_arr[test_idx].tolist(),
            gestures_arr[test_idx].tolist(),
        ),
        (imp[0], imp[1], imp[3]),
        alpha,
        beta,
    )
    print(
        f"accuracy={report.accuracy:.3f} far={report.far:.3f} frr={report.frr:.3f}"
        f" classification={report.classification_accuracy:.3f}"
        f" (legit={report.n_legitimate}, impostor={report.n_impostor})"
    )
    if args.report:
        Path(args.report).write_text(
            json.dumps(report_as_dict(report), indent=2, sort_keys=True) + "\n"
        )
        print(f"wrote {args.report}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="vibauth",
        description="Vibration-based user authentication pipeline",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_synth = sub.add_parser("synth", help="generate a synthetic recording corpus")
    p_synth.add_argument("--out", type=Path, required=True, help="output directory")
    _add_config_flags(p_synth)
    p_synth.set_defaults(handler=cmd_synth)

    p_train = sub.add_parser("train", help="train an authentication ensemble")
    p_train.add_argument("--corpus", type=Path, required=True, help="corpus directory")
    p_train.add_argument("--out", type=Path, required=True, help="ensemble output directory")
    _add_config_flags(p_train)
    p_train.set_defaults(handler=cmd_train)

    p_auth = sub.add_parser("auth", help="authenticate one recording")
    p_auth.add_argument("--model", type=Path, required=True, help="ensemble directory")
    p_auth.add_argument("--input", type=Path, required=True, help="recording CSV")
    p_auth.add_argument(
        "--verbose-evidence",
        action="store_true",
        help="evaluate every member even after a failure",
    )
    _add_config_flags(p_auth)
    p_auth.set_defaults(handler=cmd_auth)

    p_eval = sub.add_parser("eval", help="score an ensemble or sweep a grid")
    p_eval.add_argument("--model", type=Path, help="ensemble directory")
    p_eval.add_argument("--corpus", type=Path, help="corpus directory override")
    p_eval.add_argument("--report", type=Path, help="write the full report JSON here")
    p_eval.add_argument("--grid", action="store_true", help="train/evaluate a duration x user-count grid")
    p_eval.add_argument(
        "--durations",
        type=_float_list,
        default=[400.0, 600.0, 800.0, 1000.0],
        help="comma-separated clip durations in ms (grid mode)",
    )
    p_eval.add_argument(
        "--user-counts",
        type=_int_list,
        default=[10],
        help="comma-separated enrolled-user counts (grid mode)",
    )
    p_eval.add_argument("--out", type=Path, help="grid output directory")
    _add_config_flags(p_eval)
    p_eval.set_defaults(handler=cmd_eval)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.handler(args)
    except VibauthError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (OSError, KeyError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
