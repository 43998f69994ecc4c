"""Command-line interface.

Subcommands mirror the pipeline stages: gen-data, attack, analyze-spectra,
verify-theory, purify, evaluate, and run (the full experiment). All
subcommands share the same flags; values resolve as CLI flag > config file
> built-in default. Exit codes: 0 success, 1 stage failure, 2 config error.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import attacks, datasets, io_formats, purifier, theory
from .config import ConfigError, apply_overrides, default_config, dump_config, load_config
from .experiment import (
    StageError,
    build_schedule,
    build_task,
    run_experiment,
    write_theory_artifacts,
)

__all__ = ["main"]


def _parser() -> argparse.ArgumentParser:
    shared = argparse.ArgumentParser(add_help=False)
    shared.add_argument("--config", metavar="PATH", help="key=value config file")
    shared.add_argument("--seed", type=int, metavar="N")
    shared.add_argument("--t-star", type=int, metavar="N", dest="t_star")
    shared.add_argument("--d-a", type=float, metavar="R", dest="d_a")
    shared.add_argument("--d-p", type=float, metavar="R", dest="d_p")
    shared.add_argument("--delta", type=float, metavar="R")
    shared.add_argument("--no-ase", action="store_true", help="disable amplitude exchange")
    shared.add_argument("--no-psp", action="store_true", help="disable phase projection")
    shared.add_argument("--norm", choices=["linf", "l2"])
    shared.add_argument("--epsilon", type=float, metavar="R")
    shared.add_argument("--iters", type=int, metavar="N")
    shared.add_argument("--out", metavar="DIR")
    shared.add_argument("--init", choices=["diffuse-adv", "pure-noise"])
    shared.add_argument("--no-attack", action="store_true", help="skip the attack stage")
    shared.add_argument("--dump-config", action="store_true",
                        help="print the resolved configuration and exit")

    parser = argparse.ArgumentParser(prog="spectralpurify",
                                     description="Frequency-anchored diffusion purification toolkit")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, doc in [
        ("gen-data", "generate the toy train/eval datasets"),
        ("attack", "train the classifier and attack the eval set"),
        ("analyze-spectra", "radial damage profile of clean vs adversarial images"),
        ("verify-theory", "variance predictions vs Monte-Carlo oracles"),
        ("purify", "run the purifier over the eval images"),
        ("evaluate", "accuracies of clean/adversarial/purified sets"),
        ("run", "full experiment: data, attack, theory, ablation grid"),
    ]:
        sub.add_parser(name, parents=[shared], help=doc)
    return parser


def _resolve_config(args) -> dict:
    cfg = load_config(args.config) if args.config else default_config()
    overrides = {
        "seed": args.seed,
        "purify.t_star": args.t_star,
        "purify.d_a": args.d_a,
        "purify.d_p": args.d_p,
        "purify.delta": args.delta,
        "attack.norm": args.norm,
        "attack.epsilon": args.epsilon,
        "attack.iterations": args.iters,
        "out": args.out,
        "purify.init": args.init,
    }
    if args.no_ase:
        overrides["purify.ase"] = False
    if args.no_psp:
        overrides["purify.psp"] = False
    if args.no_attack:
        overrides["no_attack"] = True
    return apply_overrides(cfg, overrides)


def _require(path: Path, hint: str) -> Path:
    if not path.exists():
        raise FileNotFoundError(f"{path} not found; run `spectralpurify {hint}` first")
    return path


def _cmd_gen_data(cfg) -> None:
    task = build_task(cfg)
    out = Path(cfg["out"])
    train = datasets.gen_data(task, cfg["data.n_train"], seed=cfg["seed"] * 1000 + 100)
    test = datasets.gen_data(task, cfg["data.n_eval"], seed=cfg["seed"] * 1000 + 200)
    datasets.save_dataset(train, out / "dataset" / "train")
    datasets.save_dataset(test, out / "dataset" / "eval")
    print(f"wrote {cfg['data.n_train']} train / {cfg['data.n_eval']} eval images under {out / 'dataset'}")


def _cmd_attack(cfg) -> None:
    out = Path(cfg["out"])
    train = datasets.load_dataset(_require(out / "dataset" / "train", "gen-data"))
    test = datasets.load_dataset(_require(out / "dataset" / "eval", "gen-data"))
    clf = attacks.train_classifier(train.images, train.labels, kind=cfg["classifier.kind"],
                                   weight_decay=cfg["classifier.weight_decay"], seed=cfg["seed"])
    attacks.save_classifier(out / "classifier.fpcl", clf)
    acfg = attacks.AttackConfig(norm=cfg["attack.norm"], epsilon=cfg["attack.epsilon"],
                                step_size=cfg["attack.step_size"],
                                iterations=cfg["attack.iterations"],
                                random_start=cfg["attack.random_start"], seed=cfg["seed"])
    adv = attacks.pgd_attack(clf, test.images, test.labels, acfg)
    attack_dir = out / "attack"
    attack_dir.mkdir(parents=True, exist_ok=True)
    io_formats.write_array(attack_dir / "adversarial.fpim", adv)
    report = attacks.evaluate(clf, test.images, adv, test.labels)
    io_formats.write_csv(attack_dir / "report.csv",
                         ["standard_acc", "attacked_acc", "norm", "epsilon", "iterations"],
                         [[f"{report.standard_acc:.10g}", f"{report.robust_acc:.10g}",
                           cfg["attack.norm"], f"{cfg['attack.epsilon']:.10g}",
                           cfg["attack.iterations"]]])
    for i in range(min(4, len(test.labels))):
        io_formats.write_png(attack_dir / f"adv_{i:03d}.png", adv[i])
    print(f"standard acc {report.standard_acc:.4f}, attacked acc {report.robust_acc:.4f} "
          f"({cfg['attack.norm']}, eps={cfg['attack.epsilon']:.4g})")


def _cmd_analyze_spectra(cfg) -> None:
    from . import svgplot

    out = Path(cfg["out"])
    test = datasets.load_dataset(_require(out / "dataset" / "eval", "gen-data"))
    adv = io_formats.read_array(_require(out / "attack" / "adversarial.fpim", "attack"))
    prof = theory.damage_profile(test.images, adv)
    rows = [[int(b), f"{a:.10g}", f"{p:.10g}"]
            for b, a, p in zip(prof.bins, prof.amp_damage, prof.phase_damage)
            if np.isfinite(a) and np.isfinite(p)]
    io_formats.write_csv(out / "damage_profile.csv", ["bin", "amp_damage", "phase_damage"], rows)
    bins = [int(r[0]) for r in rows]
    svgplot.line_chart(out / "damage_profile.svg", "Adversarial damage vs radial frequency",
                       "radial bin", "mean damage",
                       [("amplitude (relative)", bins, [float(r[1]) for r in rows]),
                        ("phase (radians)", bins, [float(r[2]) for r in rows])])
    print(f"damage profile over {prof.n_pairs} pairs -> {out / 'damage_profile.csv'}")


def _cmd_verify_theory(cfg) -> None:
    schedule = build_schedule(cfg)
    print("phase-difference variance: closed form vs Monte Carlo vs quadrature")
    for k in cfg["theory.k_grid"]:
        pred = theory.phase_variance_pred(k)
        mc = theory.phase_variance_mc(k, n=cfg["theory.phase_mc_n"], seed=cfg["seed"])
        quad = theory.phase_variance_quad(k)
        print(f"  K={k:4.2f}  pred={pred:.6f}  mc={mc:.6f} (rel {abs(mc - pred) / mc:.2e})"
              f"  quad rel {abs(quad - pred) / max(pred, 1e-300):.1e}")
    print("amplitude-difference variance: closed form vs Rice Monte Carlo (SNR >= 3)")
    for a0 in cfg["theory.a0_grid"]:
        ts = [t for t in range(1, schedule.T + 1) if theory.snr(a0, 1.0, t, schedule) >= 3.0]
        if not ts:
            continue
        t = ts[-1]
        pred = theory.amp_variance_pred(a0, t, schedule)
        mc = theory.amp_variance_mc(a0, t, schedule, n=cfg["theory.amp_mc_n"], seed=cfg["seed"])
        print(f"  a0={a0:5.1f} t={t:3d}  pred={pred:.6f}  mc={mc:.6f} (rel {abs(mc - pred) / mc:.2e})")
    mono = theory.monotonicity_report(schedule, cfg["theory.a0_grid"])
    for row in mono:
        print(f"  a0={row['a0']:5.1f}: {row['steps_in_regime']} steps in regime, "
              f"amp increasing={row['amp_strictly_increasing']}, "
              f"phase increasing={row['phase_strictly_increasing']}")
    write_theory_artifacts(cfg, Path(cfg["out"]))
    print(f"wrote theory_report.csv, monotonicity.csv, variance_curves.svg under {cfg['out']}")


def _cmd_purify(cfg) -> None:
    out = Path(cfg["out"])
    test = datasets.load_dataset(_require(out / "dataset" / "eval", "gen-data"))
    adv_path = out / "attack" / "adversarial.fpim"
    if adv_path.exists():
        images, source = io_formats.read_array(adv_path), "adversarial"
    else:
        images, source = test.images, "clean"
    schedule = build_schedule(cfg)
    # the denoiser comes from the mixture the on-disk dataset was drawn from
    denoiser = datasets.make_denoiser(test.mixture)
    pcfg = purifier.PurifyConfig(
        t_star=cfg["purify.t_star"], d_a=cfg["purify.d_a"], d_p=cfg["purify.d_p"],
        delta=cfg["purify.delta"], enable_ase=cfg["purify.ase"], enable_psp=cfg["purify.psp"],
        init_mode=cfg["purify.init"], seed=cfg["seed"] + 11,
    )
    traces = purifier.purify_batch(images, pcfg, denoiser, schedule)
    purified = np.stack([t.purified for t in traces])
    pur_dir = out / "purify"
    pur_dir.mkdir(parents=True, exist_ok=True)
    io_formats.write_array(pur_dir / "purified.fpim", purified)
    (pur_dir / "source.txt").write_text(source + "\n")
    for i in range(min(4, len(purified))):
        io_formats.write_png(pur_dir / f"purified_{i:03d}.png", purified[i])
    # Keep one full trace on disk so the step records are inspectable.
    trace0 = purifier.purify(images[0], pcfg, denoiser, schedule)
    trace0.save(pur_dir / "trace0")
    clamps = sum(rec.clamp_count for rec in trace0.steps)
    print(f"purified {len(purified)} {source} images (t*={pcfg.t_star}, "
          f"ASE={pcfg.enable_ase}, PSP={pcfg.enable_psp}); "
          f"image 0 clamped {clamps} phase bins over {len(trace0.steps)} steps")


def _cmd_evaluate(cfg) -> None:
    out = Path(cfg["out"])
    test = datasets.load_dataset(_require(out / "dataset" / "eval", "gen-data"))
    clf = attacks.load_classifier(_require(out / "classifier.fpcl", "attack"))
    rows = []
    report = attacks.evaluate(clf, test.images, test.images, test.labels)
    rows.append(["clean", f"{report.standard_acc:.10g}"])
    adv_path = out / "attack" / "adversarial.fpim"
    if adv_path.exists():
        adv = io_formats.read_array(adv_path)
        rows.append(["adversarial", f"{attacks.evaluate(clf, test.images, adv, test.labels).robust_acc:.10g}"])
    pur_path = out / "purify" / "purified.fpim"
    if pur_path.exists():
        pur = io_formats.read_array(pur_path)
        source = (out / "purify" / "source.txt").read_text().strip()
        rows.append([f"purified_{source}",
                     f"{attacks.evaluate(clf, test.images, pur, test.labels).robust_acc:.10g}"])
    io_formats.write_csv(out / "evaluation.csv", ["set", "accuracy"], rows)
    for name, acc in rows:
        print(f"{name:20s} accuracy {float(acc):.4f}")


def _cmd_run(cfg) -> None:
    paths = run_experiment(cfg)
    for name in sorted(paths):
        print(f"wrote {paths[name]}")


COMMANDS = {
    "gen-data": _cmd_gen_data,
    "attack": _cmd_attack,
    "analyze-spectra": _cmd_analyze_spectra,
    "verify-theory": _cmd_verify_theory,
    "purify": _cmd_purify,
    "evaluate": _cmd_evaluate,
    "run": _cmd_run,
}


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        cfg = _resolve_config(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    if args.dump_config:
        print(dump_config(cfg), end="")
        return 0
    try:
        COMMANDS[args.command](cfg)
    except StageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (OSError, RuntimeError, ValueError, NotImplementedError) as exc:
        print(f"error ({args.command}): {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
