"""Stage implementations behind the spectral-bridge CLI.

Every stage reads an ExperimentConfig, writes its artifacts under an output
directory, and records a manifest (stage, config hash, seed). Stages are
deterministic given config and seed.
"""

from __future__ import annotations

import dataclasses
from pathlib import Path

import numpy as np

from .baselines import gaussian_sampling_baseline, linear_interpolation_baseline
from .config import ExperimentConfig, REQUIRED
from .cube import HyperCube, load_cube, load_cube_dir, save_cube
from .errors import ValidationError
from .labels import load_labels, save_labels
from .mae import (ModelConfig, finetune, load_checkpoint, predict_masked, pretrain,
                  reconstruct, save_checkpoint)
from .mae.tokens import sample_band_mask
from .metrics import (ReconReport, evaluate_reconstruction, load_recon_report,
                      load_regression_report, save_recon_report,
                      save_regression_report, score_cube)
from .projection import build_weight_matrix, project_cube
from .regressor import (RegressorConfig, evaluate_regressor, load_regressor,
                        load_signature_values, save_regressor, save_signatures,
                        train_regressor)
from .splits import SplitAssignment, load_split, make_splits, save_split
from .srf import load_srf, save_srf
from .stats import load_stats, save_stats, spatial_average, stats_over_cubes
from .synth import (AbsorptionLine, SceneConfig, gen_dataset, gen_labels, gen_sensor,
                    save_manifest)


def _ensure_out(out: Path) -> Path:
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def write_stage_manifest(out: Path, stage: str, cfg: ExperimentConfig, seed: int | None) -> None:
    lines = [f"stage={stage}", f"config_sha256={cfg.sha256}", f"seed={seed if seed is not None else ''}"]
    (Path(out) / "manifest.txt").write_text("\n".join(lines) + "\n")


def _split_members(cfg: ExperimentConfig, split_name: str) -> list[str] | None:
    path = cfg.get_path("data", "splits")
    if path is None:
        return None
    return load_split(path).members(split_name)


def _load_cubes(cfg: ExperimentConfig, key: str, split_name: str | None = None) -> list[HyperCube]:
    directory = cfg.get_path("data", key, REQUIRED)
    cubes = load_cube_dir(directory)
    if split_name is not None:
        members = _split_members(cfg, split_name)
        if members is not None:
            keep = set(members)
            cubes = [c for c in cubes if c.patch_id in keep]
            if not cubes:
                raise ValidationError(f"no cubes from {directory} fall in the {split_name} split")
    return cubes


def _parse_lines(spec: str | None) -> tuple[AbsorptionLine, ...]:
    if not spec:
        return ()
    lines = []
    for item in spec.split():
        parts = item.split(":")
        if len(parts) != 3:
            raise ValidationError(f"absorption line must be center:width:max_depth, got {item!r}")
        lines.append(AbsorptionLine(float(parts[0]), float(parts[1]), float(parts[2])))
    return tuple(lines)


def _parse_sensor(spec: str) -> list[tuple[float, float]]:
    bands = []
    for item in spec.split():
        parts = item.split(":")
        if len(parts) != 2:
            raise ValidationError(f"sensor band must be center:fwhm, got {item!r}")
        bands.append((float(parts[0]), float(parts[1])))
    return bands


def run_synthgen(cfg: ExperimentConfig, out: Path, seed: int | None = None) -> None:
    """Generate cubes, sensor SRF, labels, splits, and the truth manifest."""
    out = _ensure_out(out)
    master_seed = seed if seed is not None else cfg.get_int("synth", "seed", 0)
    scene_cfg = SceneConfig(
        n_bands=cfg.get_int("synth", "bands", 48),
        height=cfg.get_int("synth", "height", 8),
        width=cfg.get_int("synth", "width", 8),
        wavelength_lo_nm=cfg.get_float("synth", "wavelength_lo", 420.0),
        wavelength_hi_nm=cfg.get_float("synth", "wavelength_hi", 2450.0),
        n_endmembers=cfg.get_int("synth", "endmembers", 3),
        n_blobs=cfg.get_int("synth", "blobs", 4),
        blob_scale=cfg.get_float("synth", "blob_scale", 0.4),
        spline_knots=cfg.get_int("synth", "spline_knots", 6),
        lines=_parse_lines(cfg.get_str("synth", "lines", "")),
        noise_std=cfg.get_float("synth", "noise_std", 10.0),
        raw_scale=cfg.get_float("synth", "raw_scale", 10000.0),
    )
    scenes = gen_dataset(
        scene_cfg,
        n_scenes=cfg.get_int("synth", "scenes", 96),
        master_seed=master_seed,
        patches_per_tile=cfg.get_int("synth", "patches_per_tile", 4),
        shared_spectra=cfg.get_bool("synth", "shared_spectra", True),
    )

    hs_dir = _ensure_out(out / "hs")
    for scene in scenes:
        save_cube(scene.cube, hs_dir / f"{scene.cube.patch_id}.hsc")
    save_manifest(scenes, out / "manifest.csv")

    sensor_spec = cfg.get_str("synth", "sensor")
    if sensor_spec:
        save_srf(gen_sensor(_parse_sensor(sensor_spec)), out / "srf.csv")

    if scene_cfg.lines:
        label_rng = np.random.default_rng(np.random.SeedSequence([master_seed, 1]))
        labels = gen_labels(
            scenes,
            line_index=cfg.get_int("synth", "label_line", 0),
            noise_std=cfg.get_float("synth", "label_noise", 0.0),
            rng=label_rng,
            gas=cfg.get_str("synth", "label_gas", "CH4"),
        )
        save_labels(labels, out / "labels.csv")

    ratios = cfg.get_floats("synth", "split_ratios", [0.8, 0.1, 0.1])
    split = make_splits(
        [(s.cube.patch_id, s.cube.tile_id) for s in scenes],
        mode=cfg.get_str("synth", "split_mode", "hard"),
        ratios=tuple(ratios),
        seed=cfg.get_int("synth", "split_seed", 0),
    )
    save_split(split, out / "splits.csv")
    write_stage_manifest(out, "synthgen", cfg, master_seed)


def run_stats(cfg: ExperimentConfig, out: Path, seed: int | None = None) -> None:
    """Per-band statistics over the training split, persisted as CSV."""
    out = _ensure_out(out)
    cubes = _load_cubes(cfg, "hs_dir", "train")
    stats = stats_over_cubes(cubes)
    save_stats(stats, out / "stats.csv")
    write_stage_manifest(out, "stats", cfg, seed)


def degrade_one(input_path: Path, srf_path: Path, output_path: Path) -> None:
    """Project a single cube through an SRF table (direct-flag CLI form)."""
    cube = load_cube(input_path)
    wm = build_weight_matrix(load_srf(srf_path), cube.bands)
    save_cube(project_cube(cube, wm), output_path)


def run_degrade(cfg: ExperimentConfig, out: Path, seed: int | None = None) -> None:
    """Project every hyperspectral cube into the target sensor's bands."""
    out = _ensure_out(out)
    cubes = _load_cubes(cfg, "hs_dir")
    srf = load_srf(cfg.get_path("data", "srf", REQUIRED))
    wm = build_weight_matrix(srf, cubes[0].bands)
    ms_dir = _ensure_out(out / "ms")
    for cube in cubes:
        save_cube(project_cube(cube, wm), ms_dir / f"{cube.patch_id}.hsc")
    write_stage_manifest(out, "degrade", cfg, seed)


def model_config_from(cfg: ExperimentConfig, seed: int | None = None,
                      overrides: str | None = None) -> ModelConfig:
    base = ModelConfig(
        embed_dim=cfg.get_int("mae", "embed_dim", 32),
        band_group_size=cfg.get_int("mae", "band_group_size", 1),
        spatial_patch=cfg.get_int("mae", "spatial_patch", 4),
        encoder_layers=cfg.get_int("mae", "encoder_layers", 2),
        decoder_layers=cfg.get_int("mae", "decoder_layers", 2),
        attention_heads=cfg.get_int("mae", "attention_heads", 2),
        mask_fraction=cfg.get_float("mae", "mask_fraction", 0.8),
        n_spatial=cfg.get_int("mae", "n_spatial", None),
        learning_rate=cfg.get_float("mae", "learning_rate", 3e-3),
        batch_size=cfg.get_int("mae", "batch_size", 8),
        steps=cfg.get_int("mae", "steps", 1500),
        seed=cfg.get_int("mae", "seed", 0),
        loss_on_masked_only=cfg.get_bool("mae", "loss_on_masked_only", False),
        mlp_ratio=cfg.get_int("mae", "mlp_ratio", 4),
        eval_every=cfg.get_int("mae", "eval_every", 50),
    )
    if overrides == "finetune":
        base = dataclasses.replace(
            base,
            steps=cfg.get_int("finetune", "steps", base.steps),
            learning_rate=cfg.get_float("finetune", "learning_rate", base.learning_rate),
            batch_size=cfg.get_int("finetune", "batch_size", base.batch_size),
            seed=cfg.get_int("finetune", "seed", base.seed),
            eval_every=cfg.get_int("finetune", "eval_every", base.eval_every),
        )
    if seed is not None:
        base = dataclasses.replace(base, seed=seed)
    return base


def run_pretrain(cfg: ExperimentConfig, out: Path, seed: int | None = None) -> None:
    """Masked-band pretraining on the training split."""
    out = _ensure_out(out)
    model_cfg = model_config_from(cfg, seed)
    train_cubes = _load_cubes(cfg, "hs_dir", "train")
    val_members = _split_members(cfg, "val")
    val_cubes = _load_cubes(cfg, "hs_dir", "val") if val_members else []
    result = pretrain(train_cubes, model_cfg, val_cubes=val_cubes)
    save_checkpoint(result.final, out / "ckpt_final.sbck")
    save_checkpoint(result.best, out / "ckpt_best.sbck")
    result.write_log(out / "train_log.csv")
    write_stage_manifest(out, "pretrain", cfg, model_cfg.seed)


def _paired_cubes(cfg: ExperimentConfig, split_name: str | None):
    hs = {c.patch_id: c for c in _load_cubes(cfg, "hs_dir", split_name)}
    ms = {c.patch_id: c for c in _load_cubes(cfg, "ms_dir", split_name)}
    common = sorted(set(hs) & set(ms))
    if not common:
        raise ValidationError("no patch ids shared between hs_dir and ms_dir")
    return [(ms[p], hs[p]) for p in common]


def run_finetune(cfg: ExperimentConfig, out: Path, seed: int | None = None) -> None:
    """Fine-tune on multispectral/hyperspectral pairs of the training split."""
    out = _ensure_out(out)
    model_cfg = model_config_from(cfg, seed, overrides="finetune")
    init_spec = cfg.get_str("finetune", "init", "")
    if init_spec and init_spec != "scratch":
        init_path = cfg.get_path("finetune", "init")
        init = load_checkpoint(init_path)
    elif init_spec == "scratch":
        init = None
    else:
        ckpt_path = cfg.get_path("data", "checkpoint")
        init = load_checkpoint(ckpt_path) if ckpt_path else None
    train_pairs = _paired_cubes(cfg, "train")
    val_members = _split_members(cfg, "val")
    val_pairs = _paired_cubes(cfg, "val") if val_members else []
    result = finetune(train_pairs, model_cfg, init=init, val_pairs=val_pairs)
    save_checkpoint(result.final, out / "ckpt_final.sbck")
    save_checkpoint(result.best, out / "ckpt_best.sbck")
    result.write_log(out / "train_log.csv")
    write_stage_manifest(out, "finetune", cfg, model_cfg.seed)


def run_reconstruct(cfg: ExperimentConfig, out: Path, seed: int | None = None) -> None:
    """Reconstruct hyperspectral cubes for every multispectral input."""
    out = _ensure_out(out)
    ckpt = load_checkpoint(cfg.get_path("data", "checkpoint", REQUIRED))
    ms_cubes = _load_cubes(cfg, "ms_dir")
    recon_dir = _ensure_out(out / "recon")
    signatures = {}
    for ms in ms_cubes:
        cube = reconstruct(ms, ckpt)
        save_cube(cube, recon_dir / f"{cube.patch_id}.hsc")
        signatures[cube.patch_id] = spatial_average(cube)
    save_signatures(signatures, out / "signatures.csv")
    write_stage_manifest(out, "reconstruct", cfg, seed)


def _mask_for_patch(mask_seed: int, index: int, n_groups: int, fraction: float) -> np.ndarray:
    rng = np.random.default_rng(np.random.SeedSequence([mask_seed, index]))
    return sample_band_mask(n_groups, fraction, rng)


def run_evaluate(cfg: ExperimentConfig, out: Path, seed: int | None = None) -> None:
    """Score reconstructions against ground truth.

    mode=masked reconstructs per-patch masked bands (method: model, linear,
    or gaussian) and scores masked bands only (metrics_on=all overrides);
    mode=crossband scores full model reconstructions from multispectral input.
    """
    out = _ensure_out(out)
    mode = cfg.get_str("evaluate", "mode", "crossband")
    split_name = cfg.get_str("evaluate", "split", "test")
    truth = _load_cubes(cfg, "hs_dir", split_name)

    if mode == "crossband":
        ckpt = load_checkpoint(cfg.get_path("data", "checkpoint", REQUIRED))
        ms = {c.patch_id: c for c in _load_cubes(cfg, "ms_dir", split_name)}
        pairs = []
        for t in truth:
            if t.patch_id not in ms:
                raise ValidationError(f"no multispectral cube for patch {t.patch_id!r}")
            pairs.append((t, reconstruct(ms[t.patch_id], ckpt)))
        report = evaluate_reconstruction(pairs)
    elif mode == "masked":
        method = cfg.get_str("evaluate", "method", "model")
        fraction = cfg.get_float("evaluate", "mask_fraction", 0.8)
        mask_seed = cfg.get_int("evaluate", "mask_seed", seed if seed is not None else 0)
        metrics_on = cfg.get_str("evaluate", "metrics_on", "masked")
        stats_path = cfg.get_path("data", "stats")
        ckpt = None
        if method == "model" or stats_path is None:
            ckpt = load_checkpoint(cfg.get_path("data", "checkpoint", REQUIRED))
            stats = ckpt.hs_stats
        else:
            stats, _ = load_stats(stats_path)
        group = ckpt.config.band_group_size if ckpt is not None else 1
        records = []
        draw_rng = np.random.default_rng(np.random.SeedSequence([mask_seed, 10_000]))
        for index, cube in enumerate(truth):
            n_groups = cube.n_bands // group
            mask_groups = _mask_for_patch(mask_seed, index, n_groups, fraction)
            mask_bands = (mask_groups[:, None] * group + np.arange(group)).reshape(-1)
            if method == "model":
                predicted = predict_masked(cube, ckpt, mask_groups)
            elif method == "linear":
                predicted = linear_interpolation_baseline(cube, mask_bands)
            elif method == "gaussian":
                predicted = gaussian_sampling_baseline(cube, mask_bands, stats, draw_rng)
            else:
                raise ValidationError(f"unknown evaluate method {method!r}")
            subset = mask_bands if metrics_on == "masked" else None
            t = cube.data if subset is None else cube.data[subset]
            p = predicted.data if subset is None else predicted.data[subset]
            records.append(score_cube(t, p, cube.patch_id))
        report = ReconReport(records=tuple(records))
    else:
        raise ValidationError(f"unknown evaluate mode {mode!r}")

    save_recon_report(report, out / "report.csv")
    write_stage_manifest(out, "evaluate", cfg, seed)


def _signature_map(cfg: ExperimentConfig):
    source = cfg.get_path("regressor", "signatures")
    if source is None:
        raise ValidationError("[regressor] signatures must point to a CSV or a cube directory")
    if source.is_dir():
        return {c.patch_id: spatial_average(c) for c in load_cube_dir(source)}
    return load_signature_values(source)


def run_ghg_train(cfg: ExperimentConfig, out: Path, seed: int | None = None) -> None:
    """Train the gas regressor on globally normalized signatures."""
    out = _ensure_out(out)
    signatures = _signature_map(cfg)
    first = next(iter(signatures.values()))
    n_bands = int(np.asarray(getattr(first, "values", first)).shape[0])
    gas = cfg.get_str("regressor", "gas", "CH4")
    labels = load_labels(cfg.get_path("data", "labels", REQUIRED), gas)
    split = load_split(cfg.get_path("data", "splits", REQUIRED))
    reg_cfg = RegressorConfig(
        input_bands=n_bands,
        hidden=tuple(cfg.get_ints("regressor", "hidden", [256, 256])),
        learning_rate=cfg.get_float("regressor", "learning_rate", 1e-3),
        steps=cfg.get_int("regressor", "steps", 3000),
        batch_size=cfg.get_int("regressor", "batch_size", 32),
        seed=seed if seed is not None else cfg.get_int("regressor", "seed", 0),
        gas=gas,
        eval_every=cfg.get_int("regressor", "eval_every", 25),
        patience=cfg.get_int("regressor", "patience", 20),
    )
    ckpt = train_regressor(signatures, labels, reg_cfg, split)
    save_regressor(ckpt, out / "regressor.sbrg")
    write_stage_manifest(out, "ghg-train", cfg, reg_cfg.seed)


def run_ghg_eval(cfg: ExperimentConfig, out: Path, seed: int | None = None) -> None:
    """Evaluate a trained regressor on one split (default test)."""
    out = _ensure_out(out)
    signatures = _signature_map(cfg)
    gas = cfg.get_str("regressor", "gas", "CH4")
    labels = load_labels(cfg.get_path("data", "labels", REQUIRED), gas)
    split = load_split(cfg.get_path("data", "splits", REQUIRED))
    ckpt = load_regressor(cfg.get_path("data", "regressor", REQUIRED))
    split_name = cfg.get_str("regressor", "split", "test")
    ids = [p for p in split.members(split_name) if p in signatures]
    if not ids:
        raise ValidationError(f"no evaluable patches in the {split_name} split")
    report = evaluate_regressor(ckpt, signatures, labels, ids)
    label = cfg.get_str("regressor", "label", gas)
    save_regression_report(report, label, out / "regression_report.csv")
    write_stage_manifest(out, "ghg-eval", cfg, seed)


def subsample_train_ids(split: SplitAssignment, fraction: float, seed: int) -> list[str]:
    """Uniform patch subset of the training split only; at least one patch."""
    if not 0.0 < fraction <= 1.0:
        raise ValidationError(f"fraction must be in (0, 1], got {fraction}")
    train_ids = split.members("train")
    count = max(1, int(round(fraction * len(train_ids))))
    rng = np.random.default_rng(np.random.SeedSequence([seed, 77]))
    picked = rng.choice(len(train_ids), size=count, replace=False)
    return [train_ids[i] for i in sorted(picked)]


def run_sweep(cfg: ExperimentConfig, out: Path, seed: int | None = None) -> None:
    """Data-efficiency sweep: fractions x seeds x {scratch, pretrained}."""
    out = _ensure_out(out)
    fractions = cfg.get_floats("sweep", "fractions", [0.1, 1.0])
    seeds = cfg.get_ints("sweep", "seeds", [0, 1, 2])
    if not seeds:
        raise ValidationError("[sweep] seeds must be non-empty")
    init_ckpt = load_checkpoint(cfg.get_path("data", "checkpoint", REQUIRED))
    split = load_split(cfg.get_path("data", "splits", REQUIRED))
    all_pairs = {ms.patch_id: (ms, hs) for ms, hs in _paired_cubes(cfg, None)}
    test_ids = [p for p in split.members("test") if p in all_pairs]
    val_ids = [p for p in split.members("val") if p in all_pairs]
    if not test_ids:
        raise ValidationError("sweep needs test pairs")

    base_cfg = model_config_from(cfg, None, overrides="finetune")
    base_cfg = dataclasses.replace(
        base_cfg,
        steps=cfg.get_int("sweep", "steps", base_cfg.steps),
        learning_rate=cfg.get_float("sweep", "learning_rate", base_cfg.learning_rate),
        batch_size=cfg.get_int("sweep", "batch_size", base_cfg.batch_size),
        eval_every=cfg.get_int("sweep", "eval_every", base_cfg.eval_every),
    )

    rows = []
    for fraction in fractions:
        for run_seed in seeds:
            ids = subsample_train_ids(split, fraction, run_seed)
            train_pairs = [all_pairs[p] for p in ids if p in all_pairs]
            if not train_pairs:
                raise ValidationError(f"fraction {fraction} yields no training pairs")
            val_pairs = [all_pairs[p] for p in val_ids]
            for init_name, init in (("scratch", None), ("pretrained", init_ckpt)):
                run_cfg = dataclasses.replace(base_cfg, seed=run_seed)
                result = finetune(train_pairs, run_cfg, init=init, val_pairs=val_pairs)
                pairs = [(all_pairs[p][1], reconstruct(all_pairs[p][0], result.final))
                         for p in test_ids]
                mae = evaluate_reconstruction(pairs).aggregate().mae
                rows.append((fraction, init_name, run_seed, mae))

    with open(out / "sweep.csv", "w", newline="") as f:
        f.write("fraction,init,seed,test_mae\n")
        for fraction, init_name, run_seed, mae in rows:
            f.write(f"{fraction},{init_name},{run_seed},{mae!r}\n")
    with open(out / "sweep_summary.csv", "w", newline="") as f:
        f.write("fraction,init,mean_mae,std_mae\n")
        for fraction in fractions:
            for init_name in ("scratch", "pretrained"):
                vals = [m for fr, i, _, m in rows if fr == fraction and i == init_name]
                f.write(f"{fraction},{init_name},{np.mean(vals)!r},{np.std(vals)!r}\n")
    write_stage_manifest(out, "sweep", cfg, seed)


def run_report(cfg: ExperimentConfig, out: Path, seed: int | None = None) -> None:
    """Align evaluation CSVs into comparison tables (text + CSV)."""
    out = _ensure_out(out)
    recon_inputs = cfg.get_pairs("report", "reconstruction", [])
    reg_inputs = cfg.get_pairs("report", "regression", [])
    if not recon_inputs and not reg_inputs:
        raise ValidationError("[report] needs reconstruction and/or regression entries")

    lines_out = []
    combined = ["kind,label,metric,value"]
    if recon_inputs:
        lines_out.append("Reconstruction")
        header = f"{'input':<24}{'MAE':>12}{'PSNR':>10}{'SSIM':>10}{'SAM':>10}"
        lines_out.append(header)
        for label, raw_path in recon_inputs:
            path = Path(raw_path)
            if not path.is_absolute() and cfg.path is not None:
                path = cfg.path.parent / path
            agg = load_recon_report(path).aggregate()
            lines_out.append(
                f"{label:<24}{agg.mae:>12.3f}{agg.psnr_db:>10.3f}{agg.ssim:>10.4f}{agg.sam_deg:>10.3f}"
            )
            for metric, value in (("mae", agg.mae), ("psnr_db", agg.psnr_db),
                                  ("ssim", agg.ssim), ("sam_deg", agg.sam_deg)):
                combined.append(f"reconstruction,{label},{metric},{value!r}")
        lines_out.append("")
    if reg_inputs:
        lines_out.append("Regression")
        lines_out.append(f"{'input':<24}{'MAE':>12}{'MSE':>14}{'RMSE':>12}{'R2':>10}")
        for label, raw_path in reg_inputs:
            path = Path(raw_path)
            if not path.is_absolute() and cfg.path is not None:
                path = cfg.path.parent / path
            _, report = load_regression_report(path)
            lines_out.append(
                f"{label:<24}{report.mae:>12.4g}{report.mse:>14.4g}{report.rmse:>12.4g}{report.r2:>10.4f}"
            )
            for metric, value in (("mae", report.mae), ("mse", report.mse),
                                  ("rmse", report.rmse), ("r2", report.r2)):
                combined.append(f"regression,{label},{metric},{value!r}")
        lines_out.append("")

    (out / "report.txt").write_text("\n".join(lines_out))
    (out / "report_combined.csv").write_text("\n".join(combined) + "\n")
    write_stage_manifest(out, "report", cfg, seed)


STAGES = {
    "synthgen": run_synthgen,
    "stats": run_stats,
    "degrade": run_degrade,
    "pretrain": run_pretrain,
    "finetune": run_finetune,
    "reconstruct": run_reconstruct,
    "evaluate": run_evaluate,
    "ghg-train": run_ghg_train,
    "ghg-eval": run_ghg_eval,
    "sweep": run_sweep,
    "report": run_report,
}
