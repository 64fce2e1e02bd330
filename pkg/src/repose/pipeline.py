"""Stage orchestration, artifact persistence, batch runs and ablations."""
from __future__ import annotations

import json
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import compose, generate, logo, metrics, preprocess, raster, shape_match
from .backends import KINDS, Backends, BackendError, HttpBackend, mock_suite, seeded_ids
from .config import PRESETS, PipelineConfig, preset_stages, stage_label
from .gate import GateDecision, GateError, gate_image
from .generate import ConditioningBundle, SamplerSpec
from .prompts import UNSAMPLING_NEGATIVE
from .shape_match import ShapeTransform

log = logging.getLogger(__name__)

STAGE_REQUIRES = {
    "gate": ("classify", "caption", "llm"),
    "logo_suppress": ("detect", "segment", "inpaint"),
    "coarse": generate.COARSE_REQUIRED,
    "unsample": generate.UNSAMPLE_REQUIRED,
    "seam_fix": generate.UNSAMPLE_REQUIRED,
    "upscale": ("upscale",),
}
UPSCALE_FACTOR = 4
FINAL_SIZE = 1024


class StageError(RuntimeError):
    def __init__(self, stage: str, message: str):
        super().__init__(f"{stage}: {message}")
        self.stage = stage


@dataclass
class StageArtifact:
    index: int
    stage: str
    path: str
    extra: list[str] = field(default_factory=list)


@dataclass
class RunRecord:
    image_id: str
    status: str = "ok"  # "ok", "quarantined" or "failed"
    reason: str | None = None
    gate: GateDecision | None = None
    artifacts: list[StageArtifact] = field(default_factory=list)
    final: np.ndarray | None = None
    timings: dict[str, float] = field(default_factory=dict)
    transcript: list[dict] = field(default_factory=list)
    info: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return self.status == "ok"

    def summary(self) -> dict:
        """JSON-ready view without pixels, latents or timings (those vary run to run)."""
        return {
            "image_id": self.image_id,
            "status": self.status,
            "reason": self.reason,
            "gate": None if self.gate is None else self.gate.to_dict(),
            "artifacts": [asdict(a) for a in self.artifacts],
            "final_size": None if self.final is None else list(self.final.shape[:2]),
            "info": self.info,
            "transcript": [_loggable(e) for e in self.transcript],
        }


def _loggable(entry: dict) -> dict:
    text = {k: v for k, v in entry.get("text", {}).items() if k != "latent"}
    return {"kind": entry["kind"], "request_id": entry["request_id"], "text": text, "params": entry.get("params", {})}


def required_capabilities(stages) -> set[str]:
    kinds: set[str] = set()
    for stage in stages:
        kinds.update(STAGE_REQUIRES.get(stage, ()))
    if "coarse" in stages and "gate" not in stages:
        kinds.add("caption")
    return kinds


def build_backends(config: PipelineConfig, mock: bool = False) -> Backends:
    if mock:
        m = config.mock
        caps = None if m.perceptual else [k for k in KINDS if k != "perceptual"]
        transport = mock_suite(
            seed=config.seed,
            detections=m.detections,
            caption=m.caption,
            classify_label=m.classify_label,
            llm_reply=m.llm_reply,
            coarse_shift=m.coarse_shift,
            latent_factor=m.latent_factor,
            noise_scale=m.noise_scale,
            sample_bias=m.sample_bias,
            capabilities=caps,
        )
    else:
        b = config.backend
        url = config.backend_url()
        if not url:
            raise BackendError("no backend URL configured (backend.url or REPOSE_BACKEND_URL); use --mock for offline runs")
        transport = HttpBackend(
            base_url=url,
            token=config.backend_token(),
            timeout_s=b.timeout_s,
            retries=b.retries,
            backoff_s=b.backoff_s,
            max_inflight=b.max_inflight,
        )
    return Backends(transport, models=config.backend.models)


def _load_pose(path: str | None, size: int) -> np.ndarray | None:
    if path is None:
        return None
    pose = raster.read_image(path)
    return raster.resize(pose, size, size, "bilinear") if pose.shape[:2] != (size, size) else pose


class _Run:
    """Mutable state of one image going through the stage list."""

    def __init__(self, image_id: str, img: np.ndarray, config: PipelineConfig, backends: Backends, out_dir: Path):
        self.id = image_id
        self.original = raster.as_rgb(img)
        self.cfg = config
        self.be = backends
        self.dir = out_dir
        self.record = RunRecord(image_id)
        self.caption: str | None = None
        self.img512: np.ndarray | None = None
        self.still: np.ndarray | None = None  # (logo-suppressed) still-life at 512
        self.cur: np.ndarray | None = None
        self.coarse: np.ndarray | None = None
        self.records: list[logo.LogoRecord] = []
        self.transform = ShapeTransform.identity()
        self.still_matched: np.ndarray | None = None
        self.comp: np.ndarray | None = None
        c = config.gen
        self.target_pose = _load_pose(c.target_pose, generate.WORKING_SIZE)
        if self.target_pose is None:
            self.target_pose = generate.default_pose_map()
        self.negative_pose = _load_pose(c.negative_pose, generate.WORKING_SIZE)

    # -- helpers --------------------------------------------------------------

    def save(self, stage: str, img: np.ndarray, extra: dict[str, np.ndarray] | None = None) -> None:
        index = len(self.record.artifacts) + 1
        self.dir.mkdir(parents=True, exist_ok=True)
        path = self.dir / f"{index:02d}_{stage}.png"
        raster.write_image(path, img)
        names = []
        for suffix, mask in (extra or {}).items():
            mpath = self.dir / f"{index:02d}_{stage}_{suffix}.png"
            raster.write_mask(mpath, mask)
            names.append(mpath.name)
        self.record.artifacts.append(StageArtifact(index, stage, path.name, names))

    def ensure_working_set(self) -> None:
        if self.img512 is None:
            ws = preprocess.make_working_set(self.original)
            self.img512 = ws["img512"]
            self.still = self.img512
            self.cur = self.img512

    def sampler(self, stop_fraction: float) -> SamplerSpec:
        return SamplerSpec(steps=self.cfg.gen.steps, stop_fraction=stop_fraction, seed=self.cfg.gen_seed)

    def bundle(self, canny_source: np.ndarray, reference: np.ndarray | None = None) -> ConditioningBundle:
        g = self.cfg.gen
        return ConditioningBundle(
            positive_text=self.get_caption(),
            negative_text=UNSAMPLING_NEGATIVE,
            pose_map=self.target_pose,
            canny_map=generate.edge_map(canny_source, g.canny_threshold),
            reference_image=reference,
            adapter_weight=g.adapter_weight,
            control_weights=dict(g.control_weights),
            negative_pose_map=self.negative_pose,
        )

    def get_caption(self) -> str:
        if self.caption is None:
            self.caption = self.be.caption(self.original)
        return self.caption

    def mask_of(self, img: np.ndarray) -> np.ndarray:
        return raster.silhouette(img, self.cfg.shape.background_threshold)

    def boundaries(self, img: np.ndarray) -> compose.BoundaryPoints | None:
        c = self.cfg.compose
        return compose.find_boundaries(self.mask_of(img), c.padding, tuple(c.row_fracs))

    # -- stages ---------------------------------------------------------------

    def gate(self) -> bool:
        decision = gate_image(self.original, self.be)
        self.record.gate = decision
        self.caption = decision.caption or None
        self.save("gate", self.original)
        if not decision.admitted:
            self.record.status = "quarantined"
            self.record.reason = decision.reason
            return False
        return True

    def preprocess(self) -> None:
        report = preprocess.validate_input(self.original, self.cfg.preprocess)
        self.record.info["validation"] = report.lines()
        if not report.ok and self.cfg.preprocess.enforce:
            raise StageError("preprocess", "input rejected: " + ", ".join(report.failures))
        self.img512 = None
        self.ensure_working_set()
        self.save("preprocess", self.img512)

    def logo_suppress(self) -> None:
        self.ensure_working_set()
        self.records = logo.detect_logos(self.img512, self.be, self.cfg.logo.labels)
        self.record.info["logos"] = [{"label": r.label, "bbox": r.bbox.as_list()} for r in self.records]
        self.still = logo.suppress_logos(self.img512, self.records, self.be, self.cfg.logo.dilate_radius, self.cfg.gen_seed)
        self.cur = self.still
        self.save("logo_suppress", self.still)

    def coarse_stage(self) -> None:
        self.ensure_working_set()
        g = self.cfg.gen
        bundle = ConditioningBundle(
            positive_text=self.get_caption(),
            negative_text=UNSAMPLING_NEGATIVE,
            pose_map=self.target_pose,
            reference_image=self.still,
            adapter_weight=g.adapter_weight,
            control_weights={"openpose": g.control_weights.get("openpose", 1.0)},
        )
        self.coarse = generate.coarse_generate(self.still, self.target_pose, bundle, self.be, self.sampler(1.0))
        self.cur = self.coarse
        self.save("coarse", self.coarse)

    def unsample(self) -> None:
        self.ensure_working_set()
        coarse = self.coarse if self.coarse is not None else self.cur
        c = self.cfg.compose
        u_x, v_x = compose.boundary_columns(self.boundaries(coarse), coarse.shape[1], tuple(c.default_fracs))
        h, w = coarse.shape[:2]
        grad = generate.build_gradient_mask(u_x, v_x, self.cfg.gen.ramp, w, h)
        a = self.be.encode_latent(self.still)
        b = self.be.encode_latent(coarse)
        blended = generate.blend_latents(a, b, generate.downsample_mask(grad, a.shape[2], a.shape[1]))
        bundle = self.bundle(coarse)
        latent = generate.unsample_resample(blended, bundle, self.sampler(self.cfg.gen.stop_fraction), self.be)
        self.cur = self.be.decode_latent(latent, w, h)
        self.record.info["gradient_columns"] = [u_x, v_x]
        self.save("unsample", self.cur)

    def shape_match_stage(self) -> None:
        self.ensure_working_set()
        band = self.cfg.shape.band_width
        try:
            self.transform = shape_match.compute_transform(self.mask_of(self.cur), self.mask_of(self.still), band)
        except shape_match.ShapeMatchError as exc:
            raise StageError("shape_match", str(exc)) from exc
        self.still_matched = shape_match.apply_transform(self.still, self.transform)
        self.record.info["transform"] = self.transform.to_dict()
        self.save("shape_match", self.still_matched)

    def parts_compose(self) -> None:
        still = self.still_matched if self.still_matched is not None else self.still
        points = self.boundaries(self.cur)
        h, w = self.cur.shape[:2]
        self.comp = compose.composition_mask(points, w, h, tuple(self.cfg.compose.default_fracs))
        self.record.info["boundaries"] = None if points is None else [points.u_x, points.v_x]
        self.cur = compose.parts_composite(still, self.cur, self.comp)
        self.save("parts_compose", self.cur, {"mask": self.comp})

    def seam_fix(self) -> None:
        bundle = self.bundle(self.cur)
        self.cur = generate.seam_fix(self.cur, bundle, self.be, self.sampler(self.cfg.gen.stop_fraction),
                                     self.cfg.seam.stop_fraction)
        self.save("seam_fix", self.cur)

    def color_realign(self) -> None:
        ref = self.still_matched if self.still_matched is not None else self.still
        h, w = self.cur.shape[:2]
        torso = ~self.comp if self.comp is not None else ~compose.composition_mask(
            None, w, h, tuple(self.cfg.compose.default_fracs))
        region = torso & self.mask_of(ref)
        if not region.any():
            log.warning("%s: empty colour statistics region; colour realignment skipped", self.id)
        else:
            self.cur = compose.color_realign(self.cur, ref, region, self.mask_of(self.cur))
        self.save("color_realign", self.cur)

    def upscale(self) -> None:
        up = self.be.upscale(self.cur, UPSCALE_FACTOR)
        self.cur = raster.resize(up, FINAL_SIZE, FINAL_SIZE, "lanczos3")
        self.save("upscale", self.cur)

    def logo_inject(self) -> None:
        if not self.records:
            self.save("logo_inject", self.cur)
            return
        w = self.cur.shape[1]
        frame = self.img512 if w == self.img512.shape[1] else raster.resize(self.original, w, self.cur.shape[0])
        records = logo.rescale_records(self.records, frame)
        factor = w / self.img512.shape[1]
        self.cur = logo.inject_logos(self.cur, records, self.transform.rescaled(factor))
        self.save("logo_inject", self.cur)

    def run(self) -> RunRecord:
        dispatch = {
            "gate": self.gate,
            "preprocess": self.preprocess,
            "logo_suppress": self.logo_suppress,
            "coarse": self.coarse_stage,
            "unsample": self.unsample,
            "shape_match": self.shape_match_stage,
            "parts_compose": self.parts_compose,
            "seam_fix": self.seam_fix,
            "color_realign": self.color_realign,
            "upscale": self.upscale,
            "logo_inject": self.logo_inject,
        }
        for stage in self.cfg.stages:
            t0 = time.perf_counter()
            try:
                proceed = dispatch[stage]()
            except (GateError, BackendError, StageError, ValueError) as exc:
                self.record.status = "quarantined" if stage == "gate" else "failed"
                self.record.reason = f"{stage}: {exc}"
                log.warning("%s: %s failed: %s", self.id, stage, exc)
                break
            finally:
                self.record.timings[stage] = (time.perf_counter() - t0) * 1000.0
                self.record.transcript = list(self.be.transcript)
            if proceed is False:
                break
        if self.record.ok:
            self.ensure_working_set()
            self.record.final = self.cur
        return self.record


def run_one(img: np.ndarray, config: PipelineConfig, backends: Backends, image_id: str = "image",
            output_dir: str | Path | None = None) -> RunRecord:
    """Run the configured stages on one image; stage errors are recorded, not raised."""
    backends.require(required_capabilities(config.stages))
    be = backends.fork(seeded_ids(f"{config.seed}:{image_id}"))
    out = Path(output_dir or config.output_dir) / image_id
    record = _Run(image_id, img, config, be, out).run()
    out.mkdir(parents=True, exist_ok=True)
    (out / "record.json").write_text(json.dumps(record.summary(), indent=2, sort_keys=True) + "\n")
    (out / "timings.json").write_text(json.dumps(record.timings, indent=2, sort_keys=True) + "\n")
    return record


def list_inputs(directory: str | Path) -> list[Path]:
    directory = Path(directory)
    if directory.is_file():
        return [directory]
    return sorted(p for p in directory.glob("*.png") if not p.stem.endswith("_ref"))


def reference_for(path: Path) -> Path:
    ref = path.with_name(f"{path.stem}_ref.png")
    return ref if ref.exists() else path


@dataclass
class BatchResult:
    records: list[RunRecord]
    report: metrics.MetricReport | None
    warnings: list[str] = field(default_factory=list)

    @property
    def failed(self) -> list[RunRecord]:
        return [r for r in self.records if r.status == "failed"]


def score_records(records: list[RunRecord], paths: dict[str, Path], config: PipelineConfig,
                  backends: Backends | None = None) -> metrics.MetricReport | None:
    size = config.metrics.resolution
    rows = []
    scorer = backends.fork(seeded_ids(f"{config.seed}:metrics")) if backends is not None else None
    for rec in records:
        if not rec.ok or rec.final is None:
            continue
        ref = raster.read_image(reference_for(paths[rec.image_id]))
        a = raster.resize(rec.final, size, size, "lanczos3")
        b = raster.resize(ref, size, size, "lanczos3")
        rows.append(metrics.score_pair(rec.image_id, a, b, scorer))
    if not rows:
        return None
    return metrics.aggregate(rows, std=config.metrics.std, stage=stage_label(config.stages),
                             dataset=config.metrics.dataset)


def write_report(report: metrics.MetricReport | metrics.AblationReport, out_dir: Path, fmt: str, stem: str = "report") -> Path:
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / f"{stem}.{fmt}"
    path.write_text(report.to_csv() if fmt == "csv" else report.to_json())
    return path


def run_batch(inputs: str | Path, config: PipelineConfig, backends: Backends,
              output_dir: str | Path | None = None, report_format: str = "json") -> BatchResult:
    """Process every PNG in ``inputs`` (``*_ref.png`` files are references, not inputs)."""
    out = Path(output_dir or config.output_dir)
    backends.require(required_capabilities(config.stages))
    warnings, images, paths = [], {}, {}
    for path in list_inputs(inputs):
        try:
            images[path.stem] = raster.read_image(path)
            paths[path.stem] = path
        except (OSError, ValueError) as exc:
            msg = f"skipped unreadable input {path.name}: {exc}"
            log.warning(msg)
            warnings.append(msg)

    def work(image_id):
        return run_one(images[image_id], config, backends, image_id, out)

    with ThreadPoolExecutor(max_workers=max(1, config.pipeline.workers)) as pool:
        records = list(pool.map(work, sorted(images)))

    report = score_records(records, paths, config, backends)
    if report is not None:
        write_report(report, out, report_format)
    quarantine = {r.image_id: r.reason for r in records if r.status == "quarantined"}
    if quarantine:
        (out / "quarantine.json").write_text(json.dumps(quarantine, indent=2, sort_keys=True) + "\n")
    return BatchResult(records, report, warnings)


def preset_slug(name: str) -> str:
    return name.lstrip("+")


def run_ablation(inputs: str | Path, config: PipelineConfig, backends: Backends,
                 output_dir: str | Path | None = None, report_format: str = "json"):
    """Run the four cumulative presets; returns ``(results, AblationReport)``."""
    out = Path(output_dir or config.output_dir)
    results = {}
    reports = []
    for name in PRESETS:
        cfg = config.with_overrides(stages=preset_stages(name))
        res = run_batch(inputs, cfg, backends, out / preset_slug(name), report_format)
        results[name] = res
        if res.report is not None:
            reports.append(res.report)
    ablation = metrics.AblationReport(reports)
    write_report(ablation, out, report_format, stem="ablation")
    return results, ablation
