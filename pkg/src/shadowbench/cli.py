"""Command-line harness: synth, gen-dataset, attack, eval, report.

Every command is a pure function of (config file, input files, seed): reruns
produce byte-identical manifests, traces, and reports, independent of the
worker count.  Precedence is flags > config file > defaults, and the seed is
mandatory so runs are always replayable.

Exit codes: 0 success, 1 domain error, 2 usage/config error, 3 partial failure.
"""

import argparse
import json
import shlex
import subprocess
import sys
import tempfile
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import factors
from .attack import AttackConfig, attack, fd_oracle_adapter, toy_detector
from .errors import ConfigError, MaskScaleError, ShadowBenchError
from .factors import (AREA_RANGES, ALPHA_RANGES, DatasetManifestRecord, FactorSpec,
                      bin_silhouettes, generate_grid, load_silhouette_library,
                      mask_area_fraction, mask_centroid, place_mask,
                      rescale_mask_to_area)
from .imaging import (Image, ScalarField, load_image, load_scalar_field, read_jsonl,
                      save_image, save_scalar_field, write_jsonl)
from .metrics import aggregate_report, load_landmarks, nme, region_report, relative_gain
from .silhouettes import starter_silhouettes
from .synth import MatteConfig, ShadowParams, ZERO_BETA, compose_shadow, synthetic_face_depth

STARTER_SENTINEL = "@starter"


@dataclass
class RunConfig:
    seed: int | None = None
    input_dir: str | None = None
    silhouette_dir: str | None = None
    output_dir: str | None = None
    landmark_dir: str | None = None
    depth_dir: str | None = None
    matte: MatteConfig = field(default_factory=MatteConfig)
    beta: tuple = ZERO_BETA
    attack: AttackConfig = field(default_factory=AttackConfig)
    metric_mode: str = "rms"
    worker_count: int = 1
    fd_step: float = 0.02

    @classmethod
    def load(cls, config_path: str | None, overrides: dict) -> "RunConfig":
        data: dict = {}
        if config_path:
            try:
                data = json.loads(Path(config_path).read_text(encoding="utf-8"))
            except FileNotFoundError:
                raise ConfigError(f"config file not found: {config_path}")
            except json.JSONDecodeError as exc:
                raise ConfigError(f"config file is not valid JSON: {exc}")
        data.update({k: v for k, v in overrides.items() if v is not None})
        cfg = cls()
        try:
            for key in ("seed", "input_dir", "silhouette_dir", "output_dir",
                        "landmark_dir", "depth_dir", "metric_mode",
                        "worker_count", "fd_step"):
                if key in data:
                    setattr(cfg, key, data[key])
            if "matte" in data:
                cfg.matte = MatteConfig(**{**_matte_dict(MatteConfig()), **data["matte"]})
            if "beta" in data:
                beta = tuple(tuple(float(v) for v in ch) for ch in data["beta"])
                if len(beta) != 3 or any(len(ch) != 2 for ch in beta):
                    raise ConfigError("beta must be three (slope, offset) pairs")
                cfg.beta = beta
            if "attack" in data:
                cfg.attack = AttackConfig(**{**_attack_dict(AttackConfig()),
                                             **data["attack"]})
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"invalid configuration: {exc}")
        if cfg.seed is None:
            raise ConfigError("a seed is mandatory (config 'seed' or --seed)")
        cfg.seed = int(cfg.seed)
        if cfg.worker_count < 1:
            raise ConfigError("worker_count must be >= 1")
        if cfg.metric_mode not in ("rms", "mae_compat"):
            raise ConfigError("metric_mode must be 'rms' or 'mae_compat'")
        return cfg

    def require_dirs(self, *names: str) -> None:
        for name in names:
            value = getattr(self, name)
            if value is None:
                raise ConfigError(f"{name} is required for this command")
            if name == "silhouette_dir" and value == STARTER_SENTINEL:
                continue
            if name == "output_dir":
                Path(value).mkdir(parents=True, exist_ok=True)
            elif not Path(value).is_dir():
                raise ConfigError(f"{name} does not exist: {value}")


def _matte_dict(m: MatteConfig) -> dict:
    return {"sigma_min": m.sigma_min, "sigma_max": m.sigma_max,
            "scatter_spread": tuple(m.scatter_spread), "depth_gain": m.depth_gain}


def _attack_dict(a: AttackConfig) -> dict:
    return {"step_alpha": a.step_alpha, "step_theta": a.step_theta,
            "step_mask": a.step_mask, "iterations": a.iterations,
            "eps_alpha": a.eps_alpha, "eps_theta": a.eps_theta,
            "eps_mask": a.eps_mask, "norm": a.norm}


def _load_library(silhouette_dir: str):
    if silhouette_dir == STARTER_SENTINEL:
        return sorted(starter_silhouettes().items())
    return load_silhouette_library(silhouette_dir)


def _image_seed(root_seed: int, index: int) -> int:
    return int(np.random.SeedSequence([root_seed & 0xFFFFFFFFFFFFFFFF,
                                       index]).generate_state(1, np.uint64)[0])


def _classify(value: float, ranges: dict) -> int:
    for sev, (lo, hi) in ranges.items():
        if lo <= value < hi:
            return sev
    return min(ranges, key=lambda s: abs(value - 0.5 * sum(ranges[s])))


def _classify_location(centroid_y: float, height: int) -> int:
    targets = {1: height / 6.0, 2: height / 2.0, 3: 5.0 * height / 6.0}
    return min(targets, key=lambda s: abs(centroid_y - targets[s]))


def _load_depth(cfg: RunConfig, stem: str, dims: tuple[int, int]) -> ScalarField:
    if cfg.depth_dir:
        candidate = Path(cfg.depth_dir) / f"{stem}.png"
        if candidate.exists():
            return load_scalar_field(candidate, role="depth")
    return synthetic_face_depth(*dims)


# ---------------------------------------------------------------- synth

def cmd_synth(args) -> int:
    cfg = RunConfig.load(args.config, {"seed": args.seed, "output_dir": args.output_dir})
    cfg.require_dirs("output_dir")
    clean = load_image(args.image)
    dims = (clean.height, clean.width)
    mask = load_scalar_field(args.mask, role="mask")
    depth = (load_scalar_field(args.depth, role="depth") if args.depth
             else synthetic_face_depth(*dims))
    alpha = float(args.alpha)
    if not 0.0 <= alpha < 1.0:
        raise ConfigError("alpha must lie in [0, 1)")

    rng = np.random.default_rng([cfg.seed, 0])
    if args.size is not None:
        mask = rescale_mask_to_area(mask, AREA_RANGES[args.size], dims, rng)
    elif mask.data.shape != clean.data.shape[:2]:
        raise ShadowBenchError("mask dimensions differ from image; pass --size to rescale")
    pre_area = mask_area_fraction(mask)
    if args.location is not None:
        mask = place_mask(mask, args.location, dims)
    post_area = mask_area_fraction(mask)

    shadowed = compose_shadow(clean, ShadowParams(
        alpha=alpha, mask=mask, depth=depth, beta_coeffs=cfg.beta, matte=cfg.matte))

    out_dir = Path(cfg.output_dir)
    stem = Path(args.image).stem
    (out_dir / "images").mkdir(parents=True, exist_ok=True)
    (out_dir / "masks").mkdir(parents=True, exist_ok=True)
    spec = FactorSpec(_classify(alpha, ALPHA_RANGES),
                      args.size or _classify(post_area, AREA_RANGES),
                      2, args.location or 2, rng_seed=cfg.seed)
    record = DatasetManifestRecord(
        source_image=str(args.image),
        output_image=f"images/{stem}__synth.png",
        factor_spec=spec, alpha=alpha, mask_id=Path(args.mask).stem,
        area_fraction=pre_area, centroid=mask_centroid(mask),
        complexity=0.0,
        clip_fraction=0.0 if pre_area == 0 else max(0.0, 1.0 - post_area / pre_area),
        mask_image=f"masks/{stem}__synth.png")
    save_image(shadowed, out_dir / record.output_image)
    save_scalar_field(mask, out_dir / record.mask_image)
    write_jsonl(out_dir / "manifest.jsonl", [record.to_json()])
    print(f"synth: wrote {record.output_image} (alpha={alpha:.3f}, "
          f"area={post_area:.3f})")
    return 0


# ---------------------------------------------------------------- gen-dataset

def _gen_dataset_one(payload: dict) -> dict:
    """Per-source worker: renders all 81 cells and writes images + masks."""
    cfg_matte = MatteConfig(**payload["matte"])
    beta = tuple(tuple(ch) for ch in payload["beta"])
    out_dir = Path(payload["output_dir"])
    clean = load_image(payload["image_path"])
    stem = Path(payload["image_path"]).stem
    depth = (load_scalar_field(payload["depth_path"], role="depth")
             if payload["depth_path"] else synthetic_face_depth(clean.height, clean.width))
    entries = bin_silhouettes(_load_library(payload["silhouette_dir"]))

    records, failures = [], []
    for spec in factors.iter_factor_grid(payload["image_seed"]):
        try:
            shadowed, placed, record = factors.generate_cell(
                clean, depth, entries, spec, payload["image_seed"],
                source_name=payload["image_path"], matte=cfg_matte, beta=beta)
            save_image(shadowed, out_dir / record.output_image)
            save_scalar_field(placed, out_dir / record.mask_image)
            records.append(record.to_json())
        except ShadowBenchError as exc:
            failures.append({"source": payload["image_path"], "cell": spec.code,
                             "error": str(exc)})
    return {"records": records, "failures": failures}


def cmd_gen_dataset(args) -> int:
    cfg = RunConfig.load(args.config, {
        "seed": args.seed, "input_dir": args.input_dir,
        "silhouette_dir": args.silhouette_dir, "output_dir": args.output_dir,
        "worker_count": args.workers})
    cfg.require_dirs("input_dir", "silhouette_dir", "output_dir")
    images = sorted(Path(cfg.input_dir).glob("*.png"))
    if not images:
        raise ShadowBenchError(f"no input PNGs in {cfg.input_dir}")
    out_dir = Path(cfg.output_dir)
    (out_dir / "images").mkdir(parents=True, exist_ok=True)
    (out_dir / "masks").mkdir(parents=True, exist_ok=True)

    payloads = []
    for idx, path in enumerate(images):
        depth_path = None
        if cfg.depth_dir and (Path(cfg.depth_dir) / f"{path.stem}.png").exists():
            depth_path = str(Path(cfg.depth_dir) / f"{path.stem}.png")
        payloads.append({
            "image_path": str(path), "depth_path": depth_path,
            "silhouette_dir": cfg.silhouette_dir, "output_dir": str(out_dir),
            "image_seed": _image_seed(cfg.seed, idx),
            "matte": _matte_dict(cfg.matte), "beta": cfg.beta})

    results = _run_pool(_gen_dataset_one, payloads, cfg.worker_count)
    records = [rec for res in results for rec in res["records"]]
    failures = [f for res in results for f in res["failures"]]
    write_jsonl(out_dir / "manifest.jsonl", records)
    if failures:
        write_jsonl(out_dir / "failures.jsonl", failures)
    print(f"gen-dataset: {len(images)} sources -> {len(records)} shadowed images, "
          f"{len(failures)} failed cells -> {out_dir / 'manifest.jsonl'}")
    return 3 if failures else 0


def _run_pool(fn, payloads, workers: int):
    if workers <= 1 or len(payloads) <= 1:
        return [fn(p) for p in payloads]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, payloads))


# ---------------------------------------------------------------- attack

class ExternalDetector:
    """Child process speaking the loss-only line protocol.

    Harness writes "<image.png>\\t<gt.json>" per request; the detector answers
    one JSON line {"loss": float, "landmarks": [[x, y] * 68]}.
    """

    def __init__(self, command: str):
        self.proc = subprocess.Popen(
            shlex.split(command), stdin=subprocess.PIPE, stdout=subprocess.PIPE,
            text=True, bufsize=1)

    def query(self, image_path: str, gt_path: str) -> tuple[float, list]:
        assert self.proc.stdin and self.proc.stdout
        self.proc.stdin.write(f"{image_path}\t{gt_path}\n")
        self.proc.stdin.flush()
        line = self.proc.stdout.readline()
        if not line:
            raise ShadowBenchError("external detector closed its output stream")
        reply = json.loads(line)
        return float(reply["loss"]), reply.get("landmarks")

    def close(self):
        if self.proc.stdin:
            self.proc.stdin.close()
        self.proc.wait(timeout=10)


def _attack_one(payload: dict) -> dict:
    matte = MatteConfig(**payload["matte"])
    beta = tuple(tuple(ch) for ch in payload["beta"])
    atk_cfg = AttackConfig(**payload["attack"])
    out_dir = Path(payload["output_dir"])
    clean = load_image(payload["image_path"])
    dims = (clean.height, clean.width)
    stem = Path(payload["image_path"]).stem
    depth = (load_scalar_field(payload["depth_path"], role="depth")
             if payload["depth_path"] else synthetic_face_depth(*dims))
    gt = load_landmarks(payload["landmark_path"])

    entries = bin_silhouettes(_load_library(payload["silhouette_dir"]))
    rng = np.random.default_rng([payload["image_seed"], 1])
    entry = scaled = None
    for _ in range(6):  # re-draw silhouettes whose area target is unreachable
        entry = entries[int(rng.integers(len(entries)))]
        try:
            scaled = rescale_mask_to_area(entry.mask, AREA_RANGES[2], dims, rng)
            break
        except MaskScaleError:
            continue
    if scaled is None:
        raise ShadowBenchError("could not prepare an initial attack mask")
    mask0 = place_mask(scaled, 2, dims)

    if payload["oracle"] == "toy":
        oracle = toy_detector(payload["root_seed"])
        result = attack(clean, depth, gt, oracle, atk_cfg, mask0,
                        matte=matte, beta=beta)
    else:
        detector = ExternalDetector(payload["detector_cmd"])
        try:
            with tempfile.TemporaryDirectory(prefix="shadowbench-fd-") as tmp:
                probe_path = str(Path(tmp) / "probe.png")

                def black_box(img: Image):
                    save_image(img, probe_path)
                    return detector.query(probe_path, payload["landmark_path"])

                oracle = fd_oracle_adapter(black_box, payload["fd_step"],
                                           seed=payload["image_seed"])
                result = attack(clean, depth, gt, oracle, atk_cfg, mask0,
                                matte=matte, beta=beta)
        finally:
            detector.close()

    adv_name = f"adversarial/{stem}__adv.png"
    mask_name = f"adversarial_masks/{stem}__adv.png"
    trace_name = f"traces/{stem}__trace.jsonl"
    save_image(result.image, out_dir / adv_name)
    final_mask = ScalarField(np.clip(result.state.mask, 0.0, 1.0))
    save_scalar_field(final_mask, out_dir / mask_name)
    write_jsonl(out_dir / trace_name, [t.to_json() for t in result.trace])

    area = mask_area_fraction(final_mask)
    cx, cy = mask_centroid(final_mask)
    record = DatasetManifestRecord(
        source_image=payload["image_path"], output_image=adv_name,
        factor_spec=FactorSpec(_classify(result.state.alpha, ALPHA_RANGES),
                               _classify(area, AREA_RANGES), entry.severity_bin,
                               _classify_location(cy, clean.height),
                               rng_seed=payload["image_seed"]),
        alpha=result.state.alpha, mask_id=entry.id, area_fraction=area,
        centroid=(cx, cy), complexity=entry.complexity, mask_image=mask_name,
        attack=True)
    rec = record.to_json()
    rec["theta"] = [float(v) for v in result.state.theta.as_array()]
    rec["best_iteration"] = result.state.iteration
    rec["loss_initial"] = result.trace[0].loss
    rec["loss_best"] = max(t.loss for t in result.trace)
    return {"record": rec, "trace_file": trace_name}


def _attack_one_safe(payload: dict) -> dict:
    try:
        return _attack_one(payload)
    except (ShadowBenchError, OSError, json.JSONDecodeError) as exc:
        return {"source": payload["image_path"], "error": str(exc)}


def cmd_attack(args) -> int:
    cfg = RunConfig.load(args.config, {
        "seed": args.seed, "input_dir": args.input_dir,
        "silhouette_dir": args.silhouette_dir, "output_dir": args.output_dir,
        "landmark_dir": args.landmark_dir, "worker_count": args.workers,
        "fd_step": args.fd_step})
    cfg.require_dirs("input_dir", "silhouette_dir", "output_dir", "landmark_dir")
    if args.oracle == "external-exec" and not args.detector_cmd:
        raise ConfigError("--detector-cmd is required with the external-exec oracle")
    images = sorted(Path(cfg.input_dir).glob("*.png"))
    if not images:
        raise ShadowBenchError(f"no input PNGs in {cfg.input_dir}")
    out_dir = Path(cfg.output_dir)
    for sub in ("adversarial", "adversarial_masks", "traces"):
        (out_dir / sub).mkdir(parents=True, exist_ok=True)

    payloads, skipped = [], []
    for idx, path in enumerate(images):
        gt_path = Path(cfg.landmark_dir) / f"{path.stem}.json"
        if not gt_path.exists():
            skipped.append({"source": str(path), "error": "missing ground-truth landmarks"})
            continue
        depth_path = None
        if cfg.depth_dir and (Path(cfg.depth_dir) / f"{path.stem}.png").exists():
            depth_path = str(Path(cfg.depth_dir) / f"{path.stem}.png")
        payloads.append({
            "image_path": str(path), "landmark_path": str(gt_path),
            "depth_path": depth_path, "silhouette_dir": cfg.silhouette_dir,
            "output_dir": str(out_dir), "image_seed": _image_seed(cfg.seed, idx),
            "root_seed": cfg.seed, "oracle": args.oracle,
            "detector_cmd": args.detector_cmd, "fd_step": cfg.fd_step,
            "matte": _matte_dict(cfg.matte), "beta": cfg.beta,
            "attack": _attack_dict(cfg.attack)})

    # external-exec keeps one child per image, sequentially
    workers = 1 if args.oracle == "external-exec" else cfg.worker_count
    outcomes = _run_pool(_attack_one_safe, payloads, workers)
    results = [o for o in outcomes if "record" in o]
    failures = list(skipped) + [o for o in outcomes if "error" in o]

    write_jsonl(out_dir / "manifest.jsonl", [r["record"] for r in results])
    if failures:
        write_jsonl(out_dir / "failures.jsonl", failures)
    print(f"attack: {len(results)} adversarial images, {len(failures)} failures "
          f"-> {out_dir / 'manifest.jsonl'}")
    return 3 if failures else 0


# ---------------------------------------------------------------- eval

def cmd_eval(args) -> int:
    cfg = RunConfig.load(args.config, {"seed": args.seed,
                                       "landmark_dir": args.landmark_dir})
    manifest_path = Path(args.manifest)
    if not manifest_path.exists():
        raise ShadowBenchError(f"manifest not found: {manifest_path}")
    base = manifest_path.parent
    records = [DatasetManifestRecord.from_json(d) for d in read_jsonl(manifest_path)]

    per_item: dict[str, dict] = {}
    missing: list[dict] = []
    for rec in records:
        entry: dict = {}
        try:
            if args.restored_dir:
                restored_path = Path(args.restored_dir) / Path(rec.output_image).name
                if not restored_path.exists():
                    raise FileNotFoundError(f"restored image missing: {restored_path}")
                clean = load_image(rec.source_image)
                restored = load_image(restored_path)
                mask = load_scalar_field(base / rec.mask_image, role="mask")
                report = region_report(clean, restored, mask, mode=cfg.metric_mode)
                entry.update({"rmse_shadow": report.rmse_shadow,
                              "rmse_non_shadow": report.rmse_non_shadow,
                              "rmse_all": report.rmse_all})
            if args.predictions_dir:
                pred_path = Path(args.predictions_dir) / f"{Path(rec.output_image).stem}.json"
                if not pred_path.exists():
                    raise FileNotFoundError(f"prediction missing: {pred_path}")
                if not cfg.landmark_dir:
                    raise ConfigError("landmark_dir is required to evaluate NME")
                gt = load_landmarks(Path(cfg.landmark_dir)
                                    / f"{Path(rec.source_image).stem}.json")
                entry["nme"] = nme(load_landmarks(pred_path), gt)
        except ConfigError:
            raise
        except (OSError, ShadowBenchError) as exc:
            missing.append({"output_image": rec.output_image, "error": str(exc)})
            continue
        per_item[rec.output_image] = entry

    summary = aggregate_report(records, per_item)
    summary["errors"] = missing
    out = {"per_item": per_item, "summary": summary,
           "records": sorted(r.output_image for r in records),
           "metric_mode": cfg.metric_mode}
    out_path = Path(args.report_out) if args.report_out else manifest_path.parent / "report.json"
    out_path.write_text(json.dumps(out, indent=2, sort_keys=True), encoding="utf-8")
    print(_format_summary(summary))
    print(f"eval: wrote {out_path} ({len(per_item)} records scored, "
          f"{len(missing)} missing)")
    return 3 if missing else 0


def _format_summary(summary: dict) -> str:
    metrics = [k for k in summary["overall"] if k != "count"]
    lines = []
    header = f"{'group':<16}{'count':>6}" + "".join(f"{m:>16}" for m in metrics)
    lines.append(header)
    lines.append("-" * len(header))

    def fmt_row(label: str, group: dict) -> str:
        cells = "".join(
            f"{group.get(m):>16.4f}" if isinstance(group.get(m), float) else f"{'-':>16}"
            for m in metrics)
        return f"{label:<16}{group['count']:>6}" + cells

    lines.append(fmt_row("overall", summary["overall"]))
    for factor, groups in summary["by_factor"].items():
        for sev, group in groups.items():
            if group["count"]:
                lines.append(fmt_row(f"{factor}/{sev}", group))
    return "\n".join(lines)


# ---------------------------------------------------------------- report

def cmd_report(args) -> int:
    reports = []
    for path in args.reports:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
        reports.append((Path(path).stem if args.by_stem else str(path), data))
    if not reports:
        raise ShadowBenchError("no evaluation reports given")
    baseline_name = args.baseline or reports[0][0]
    baseline = dict(reports).get(baseline_name)
    if baseline is None:
        raise ConfigError(f"baseline {baseline_name!r} is not among the inputs")

    record_sets = {name: tuple(data.get("records", [])) for name, data in reports}
    mismatch = len(set(record_sets.values())) > 1
    if mismatch:
        print("warning: evaluation inputs cover different record sets", file=sys.stderr)

    metrics = [k for k in baseline["summary"]["overall"] if k != "count"]
    rows = []
    for name, data in reports:
        row = {"input": name}
        for m in metrics:
            value = data["summary"]["overall"].get(m)
            base_value = baseline["summary"]["overall"].get(m)
            row[m] = value
            row[f"{m}_gain_pct"] = (
                relative_gain(base_value, value)
                if value is not None and base_value not in (None, 0.0) else None)
        rows.append(row)

    width = max(len(r["input"]) for r in rows) + 2
    header = f"{'input':<{width}}" + "".join(f"{m:>14}{m + ' gain%':>14}" for m in metrics)
    lines = [header, "-" * len(header)]
    for row in rows:
        cells = ""
        for m in metrics:
            v, g = row[m], row[f"{m}_gain_pct"]
            cells += f"{v:>14.4f}" if isinstance(v, float) else f"{'-':>14}"
            cells += f"{g:>14.1f}" if isinstance(g, float) else f"{'-':>14}"
        lines.append(f"{row['input']:<{width}}" + cells)
    table = "\n".join(lines)
    print(table)
    if args.out:
        Path(args.out).write_text(json.dumps(
            {"baseline": baseline_name, "rows": rows,
             "record_set_mismatch": mismatch}, indent=2), encoding="utf-8")
    return 0


# ---------------------------------------------------------------- entry point

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="shadowbench",
        description="Facial shadow benchmark: synthesis, attack, and evaluation")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="JSON config file")
        p.add_argument("--seed", type=int, help="mandatory if absent from config")

    p = sub.add_parser("synth", help="shadow one image")
    common(p)
    p.add_argument("--image", required=True)
    p.add_argument("--mask", required=True)
    p.add_argument("--depth")
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--location", type=int, choices=(1, 2, 3))
    p.add_argument("--size", type=int, choices=(1, 2, 3))
    p.add_argument("--output-dir")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("gen-dataset", help="full 81-cell factor grid per input image")
    common(p)
    p.add_argument("--input-dir")
    p.add_argument("--silhouette-dir",
                   help=f"directory of silhouette PNGs, or {STARTER_SENTINEL}")
    p.add_argument("--output-dir")
    p.add_argument("--workers", type=int)
    p.set_defaults(func=cmd_gen_dataset)

    p = sub.add_parser("attack", help="adversarial shadow mining per input image")
    common(p)
    p.add_argument("--input-dir")
    p.add_argument("--silhouette-dir")
    p.add_argument("--output-dir")
    p.add_argument("--landmark-dir")
    p.add_argument("--oracle", choices=("toy", "external-exec"), default="toy")
    p.add_argument("--detector-cmd", help="command for the external-exec oracle")
    p.add_argument("--fd-step", type=float, help="finite-difference step (external oracle)")
    p.add_argument("--workers", type=int)
    p.set_defaults(func=cmd_attack)

    p = sub.add_parser("eval", help="score restored images and predictions")
    common(p)
    p.add_argument("--manifest", required=True)
    p.add_argument("--restored-dir")
    p.add_argument("--predictions-dir")
    p.add_argument("--landmark-dir")
    p.add_argument("--report-out")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("report", help="compare evaluation reports against a baseline")
    p.add_argument("reports", nargs="+")
    p.add_argument("--baseline", help="input name to use as the baseline column")
    p.add_argument("--by-stem", action="store_true",
                   help="name inputs by file stem instead of path")
    p.add_argument("--out", help="also write the comparison as JSON")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (ShadowBenchError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
