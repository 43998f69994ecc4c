"""The experiment pipeline: data -> classifier -> attack -> damage statistics
-> theory report -> purification ablation grid -> CSV/SVG artifacts.

Everything is a pure function of the configuration, so two runs with the
same config produce byte-identical CSV and SVG files. A stage failure
aborts the run with the stage name; files already written stay on disk.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from . import attacks, datasets, diffusion, io_formats, purifier, svgplot, theory

__all__ = [
    "StageError",
    "ExperimentPaths",
    "build_task",
    "build_schedule",
    "write_theory_artifacts",
    "run_experiment",
]

ABLATION_VARIANTS = [
    ("diffusion_only", False, False),
    ("ase_only", True, False),
    ("psp_only", False, True),
    ("ase_psp", True, True),
]


class StageError(RuntimeError):
    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"stage '{stage}' failed: {cause}")
        self.stage = stage
        self.cause = cause


def build_task(cfg: dict) -> datasets.MixtureSpec:
    return datasets.default_task(
        height=cfg["data.height"],
        width=cfg["data.width"],
        sigma=cfg["data.sigma"],
        background_rms=cfg["data.background_rms"],
        background_alpha=cfg["data.background_alpha"],
        n_backgrounds=cfg["data.n_backgrounds"],
        texture_rms=cfg["data.texture_rms"],
        seed=cfg["data.task_seed"],
    )


def build_schedule(cfg: dict) -> diffusion.NoiseSchedule:
    return diffusion.default_schedule(cfg["schedule.T"])


def _purify_config(cfg: dict, ase: bool, psp: bool) -> purifier.PurifyConfig:
    return purifier.PurifyConfig(
        t_star=cfg["purify.t_star"],
        d_a=cfg["purify.d_a"],
        d_p=cfg["purify.d_p"],
        delta=cfg["purify.delta"],
        enable_ase=ase,
        enable_psp=psp,
        init_mode=cfg["purify.init"],
        seed=cfg["seed"] + 11,
    )


def _fnum(x: float) -> str:
    return f"{x:.10g}"


def write_theory_artifacts(cfg: dict, out: Path) -> None:
    """theory_report.csv (closed form vs MC, both amplitude denominators),
    monotonicity.csv, and the variance-curve SVG.
    """
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    schedule = build_schedule(cfg)
    seed = cfg["seed"]
    rows = []
    for gi, a0 in enumerate(cfg["theory.a0_grid"]):
        for t in range(1, schedule.T + 1):
            if theory.snr(a0, 1.0, t, schedule) < 3.0:
                continue
            pred = theory.amp_variance_pred(a0, t, schedule)
            mc = theory.amp_variance_mc(a0, t, schedule, n=cfg["theory.amp_mc_n"],
                                        seed=seed * 7919 + gi * 101 + t)
            rows.append(["amp_var", t, _fnum(a0), _fnum(pred), _fnum(mc),
                         _fnum(abs(mc - pred) / abs(mc))])
            alt = theory.amp_variance_pred_linear_denominator(a0, t, schedule)
            rows.append(["amp_var_linear_denom", t, _fnum(a0), _fnum(alt), _fnum(mc),
                         _fnum(abs(mc - alt) / abs(mc))])
    for ki, k in enumerate(cfg["theory.k_grid"]):
        pred = theory.phase_variance_pred(k)
        mc = theory.phase_variance_mc(k, n=cfg["theory.phase_mc_n"], seed=seed * 104729 + ki)
        rows.append(["phase_var", 0, _fnum(k), _fnum(pred), _fnum(mc),
                     _fnum(abs(mc - pred) / abs(mc))])
    io_formats.write_csv(out / "theory_report.csv",
                         ["quantity", "t", "a0", "pred", "mc", "rel_err"], rows)

    mono = theory.monotonicity_report(schedule, cfg["theory.a0_grid"])
    io_formats.write_csv(
        out / "monotonicity.csv",
        ["a0", "steps_in_regime", "t_max", "amp_strictly_increasing", "phase_strictly_increasing"],
        [[_fnum(r["a0"]), r["steps_in_regime"], r["t_max"],
          str(r["amp_strictly_increasing"]).lower(),
          str(r["phase_strictly_increasing"]).lower()] for r in mono],
    )

    series = []
    for a0 in cfg["theory.a0_grid"]:
        ts = [t for t in range(1, schedule.T + 1) if theory.snr(a0, 1.0, t, schedule) >= 3.0]
        series.append((f"amp var, a0={a0:g}", ts,
                       [theory.amp_variance_pred(a0, t, schedule) for t in ts]))
        series.append((f"phase var, a0={a0:g}", ts,
                       [theory.phase_variance_pred(1.0 / theory.snr(a0, 1.0, t, schedule))
                        for t in ts]))
    svgplot.line_chart(out / "variance_curves.svg",
                       "Predicted spectral damage variance vs time-step", "t", "variance", series)


class ExperimentPaths(dict):
    """Maps artifact name -> written path."""


def run_experiment(cfg: dict) -> ExperimentPaths:
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    paths = ExperimentPaths()
    seed = cfg["seed"]

    def stage(name):
        def wrap(fn):
            try:
                return fn()
            except Exception as exc:
                raise StageError(name, exc) from exc

        return wrap

    # --- data ---------------------------------------------------------
    def _gen():
        task = build_task(cfg)
        train = datasets.gen_data(task, cfg["data.n_train"], seed=seed * 1000 + 100)
        test = datasets.gen_data(task, cfg["data.n_eval"], seed=seed * 1000 + 200)
        return task, train, test

    task, train, test = stage("gen-data")(_gen)

    # --- classifier ----------------------------------------------------
    def _train():
        return attacks.train_classifier(
            train.images,
            train.labels,
            kind=cfg["classifier.kind"],
            weight_decay=cfg["classifier.weight_decay"],
            seed=seed,
        )

    clf = stage("train")(_train)

    # --- attack --------------------------------------------------------
    adv = None
    if not cfg["no_attack"]:
        def _attack():
            acfg = attacks.AttackConfig(
                norm=cfg["attack.norm"],
                epsilon=cfg["attack.epsilon"],
                step_size=cfg["attack.step_size"],
                iterations=cfg["attack.iterations"],
                random_start=cfg["attack.random_start"],
                seed=seed,
            )
            return attacks.pgd_attack(clf, test.images, test.labels, acfg)

        adv = stage("attack")(_attack)

    # --- spectral damage -------------------------------------------------
    if adv is not None:
        def _damage():
            prof = theory.damage_profile(test.images, adv)
            rows = [
                [int(b), _fnum(a), _fnum(p)]
                for b, a, p in zip(prof.bins, prof.amp_damage, prof.phase_damage)
                if np.isfinite(a) and np.isfinite(p)
            ]
            io_formats.write_csv(out / "damage_profile.csv",
                                 ["bin", "amp_damage", "phase_damage"], rows)
            bins = [int(r[0]) for r in rows]
            svgplot.line_chart(
                out / "damage_profile.svg",
                "Adversarial damage vs radial frequency",
                "radial bin",
                "mean damage",
                [
                    ("amplitude (relative)", bins, [float(r[1]) for r in rows]),
                    ("phase (radians)", bins, [float(r[2]) for r in rows]),
                ],
            )
            return prof

        stage("damage")(_damage)
        paths["damage_profile.csv"] = out / "damage_profile.csv"
        paths["damage_profile.svg"] = out / "damage_profile.svg"

    # --- theory report ----------------------------------------------------
    stage("theory")(lambda: write_theory_artifacts(cfg, out))
    paths["theory_report.csv"] = out / "theory_report.csv"
    paths["monotonicity.csv"] = out / "monotonicity.csv"
    paths["variance_curves.svg"] = out / "variance_curves.svg"

    # --- purification ablation grid ---------------------------------------
    def _grid():
        schedule = build_schedule(cfg)
        denoiser = datasets.make_denoiser(task)
        n = len(test.labels)

        def accuracy(images) -> float:
            preds = np.atleast_1d(clf.predict(np.asarray(images).reshape(n, -1)))
            return float(np.mean(preds == test.labels))

        rows = []
        std0 = accuracy(test.images)
        if adv is None:
            rows.append(["no_purify", _fnum(std0)])
        else:
            rob0 = accuracy(adv)
            rows.append(["no_purify", _fnum(std0), _fnum(rob0), _fnum((std0 + rob0) / 2)])
        for name, ase, psp in ABLATION_VARIANTS:
            pcfg = _purify_config(cfg, ase, psp)
            clean_tr = purifier.purify_batch(test.images, pcfg, denoiser, schedule)
            std = accuracy(np.stack([t.purified for t in clean_tr]))
            if adv is None:
                rows.append([name, _fnum(std)])
                continue
            adv_tr = purifier.purify_batch(adv, pcfg, denoiser, schedule)
            rob = accuracy(np.stack([t.purified for t in adv_tr]))
            rows.append([name, _fnum(std), _fnum(rob), _fnum((std + rob) / 2)])

        header = (["variant", "standard_acc"] if adv is None
                  else ["variant", "standard_acc", "robust_acc", "average"])
        io_formats.write_csv(out / "results.csv", header, rows)

    stage("purify-grid")(_grid)
    paths["results.csv"] = out / "results.csv"
    return paths
