"""Command-line front end: ``simulate``, ``reconstruct``, ``metrics``, ``export``, ``verify``.

Every flag has a config-file equivalent: ``--config run.json`` loads a JSON
object whose keys are :class:`RunConfig` field names (dashes in flag names
become underscores).  Precedence is built-in default < config file < flag.

On failure the process exits with status 1 and writes one JSON line to
stderr, e.g. ``{"status": "error", "type": "ShapeError", "message": "..."}``.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .io import (
    MEAN_FIRST_LAST,
    StackFile,
    config_hash,
    export_frames,
    file_sha256,
    metrics_rows_to_csv,
    read_stack,
    write_stack,
)
from .metrics import evaluate, mean_first_last
from .phantom import NoiseConfig, PhantomConfig, SimulationConfig, make_stem_phantom, simulate_measurements
from .pipeline import METHODS, reconstruct
from .projector import Geometry, uniform_angles
from .solver import PRESETS, CwdsConfig, PdfpConfig, preset

logger = logging.getLogger("dynct")

DESK_SIDE = 64


@dataclass
class RunConfig:
    # geometry and phantom
    side: int | None = None
    frames: int = 34
    angles: int = 30
    detectors: int | None = None
    spread_points: int = 5
    seed: int = 1
    # noise
    sigma_rel: float = 0.01
    noise_seed: int | None = None
    noise_reading: str = "std"
    supersample: int = 2
    bin_factor: int = 2
    # reconstruction
    method: str = "sh3d"
    dataset: str = "digital"
    c_pr: float | None = None
    omega: float | None = None
    kappa: float | None = None
    zeta: float | None = None
    gamma: float = 1.0
    lam: float = 0.99
    max_iters: int = 300
    delta1: float = 0.01
    delta2: float = 0.003
    combine: str = "average"
    solver_seed: int = 0
    # paths and output options
    out_dir: str = "."
    sinogram: str | None = None
    output: str | None = None
    report: str | None = None
    recon: list = field(default_factory=list)
    reference: str | None = None
    mode: str = "per_frame"
    csv: str | None = None
    input: str | None = None
    frame_list: list | None = None
    window_min: float | None = None
    window_max: float | None = None
    target: str | None = None
    verbose: bool = False

    def simulation_fields(self) -> dict:
        return {"side": self.side or DESK_SIDE, "frames": self.frames, "angles": self.angles,
                "detectors": self.detectors, "spread_points": self.spread_points, "seed": self.seed,
                "sigma_rel": self.sigma_rel, "noise_seed": self.effective_noise_seed(),
                "noise_reading": self.noise_reading, "supersample": self.supersample,
                "bin_factor": self.bin_factor}

    def effective_noise_seed(self) -> int:
        return self.seed if self.noise_seed is None else self.noise_seed

    def cwds(self) -> CwdsConfig:
        overrides = {k: getattr(self, k) for k in ("c_pr", "omega", "kappa", "zeta") if getattr(self, k) is not None}
        return preset(self.dataset, self.method, delta1=self.delta1, delta2=self.delta2, **overrides)

    def pdfp(self) -> PdfpConfig:
        return PdfpConfig(gamma=self.gamma, lam=self.lam, max_iters=self.max_iters)

    def reconstruction_fields(self) -> dict:
        out = {"method": self.method, "dataset": self.dataset, "gamma": self.gamma, "lam": self.lam,
               "max_iters": self.max_iters, "combine": self.combine, "solver_seed": self.solver_seed}
        if self.method != "fbp":
            c = self.cwds()
            out.update(c_pr=c.c_pr, omega=c.omega, kappa=c.kappa, zeta=c.zeta, delta1=c.delta1, delta2=c.delta2)
        return out


_FIELDS = {f.name: f for f in dataclasses.fields(RunConfig)}


class CliError(Exception):
    pass


def load_config_file(path) -> dict:
    try:
        obj = json.loads(Path(path).read_text())
    except OSError as exc:
        raise CliError(f"cannot read config {path}: {exc.strerror}") from exc
    except json.JSONDecodeError as exc:
        raise CliError(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(obj, dict):
        raise CliError(f"config {path} must hold a JSON object")
    unknown = sorted(set(obj) - set(_FIELDS))
    if unknown:
        raise CliError(f"unknown config keys: {', '.join(unknown)}")
    return obj


def build_config(args: argparse.Namespace) -> RunConfig:
    values = {}
    if getattr(args, "config", None):
        values.update(load_config_file(args.config))
    for name in _FIELDS:
        v = getattr(args, name, None)
        if v is not None:
            values[name] = v
    try:
        return RunConfig(**values)
    except TypeError as exc:
        raise CliError(str(exc)) from exc


# ---------------------------------------------------------------- commands

def _geometry(cfg: RunConfig) -> Geometry:
    return Geometry(cfg.side or DESK_SIDE, uniform_angles(cfg.angles), cfg.detectors)


def _simulation_provenance(cfg: RunConfig, role: str) -> dict:
    sim = cfg.simulation_fields()
    return {"command": "simulate", "role": role, "config": sim, "config_hash": config_hash(sim),
            "seeds": {"phantom": cfg.seed, "noise": cfg.effective_noise_seed()},
            "image_size": sim["side"], "projections": cfg.angles, "version": __version__}


def simulate_stacks(cfg: RunConfig) -> tuple[StackFile, StackFile]:
    geom = _geometry(cfg)
    truth = make_stem_phantom(PhantomConfig(side=geom.image_size, frames=cfg.frames,
                                            spread_points=cfg.spread_points, seed=cfg.seed))
    sim = SimulationConfig(geom, cfg.supersample, cfg.bin_factor)
    sinos = simulate_measurements(truth, sim, NoiseConfig(cfg.sigma_rel, cfg.effective_noise_seed(),
                                                          cfg.noise_reading))
    return (StackFile("volume", truth, provenance=_simulation_provenance(cfg, "truth")),
            StackFile("sinogram", sinos.data, sinos.angles, sinos.detector_spacing,
                      _simulation_provenance(cfg, "sinogram")))


def cmd_simulate(cfg: RunConfig) -> dict:
    truth, sino = simulate_stacks(cfg)
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {"truth": out / "truth.stack", "sinogram": out / "sinogram.stack"}
    write_stack(paths["truth"], truth)
    write_stack(paths["sinogram"], sino)
    return {k: str(v) for k, v in paths.items()}


def _recon_stack(cfg: RunConfig, sino: StackFile, sino_path: Path):
    if cfg.method not in METHODS:
        raise CliError(f"unknown method {cfg.method!r}; expected one of {', '.join(METHODS)}")
    if cfg.method != "fbp" and cfg.dataset not in PRESETS:
        raise CliError(f"unknown dataset {cfg.dataset!r}; expected one of {', '.join(PRESETS)}")
    side = cfg.side or sino.provenance.get("image_size") or DESK_SIDE
    sinos = sino.sinograms()
    cwds = cfg.cwds() if cfg.method != "fbp" else None
    result = reconstruct(sinos, cfg.method, int(side), cfg.pdfp(), cwds, cfg.dataset, cfg.combine,
                         cfg.solver_seed, record_objective=False)
    fields = cfg.reconstruction_fields()
    fields["side"] = int(side)
    prov = {"command": "reconstruct", "config": fields, "config_hash": config_hash(fields),
            "seeds": {"solver": cfg.solver_seed}, "input": str(sino_path.resolve()),
            "input_sha256": file_sha256(sino_path), "method": cfg.method,
            "projections": int(sinos.angles.size), "image_size": int(side), "version": __version__}
    return StackFile("volume", result.volume, provenance=prov), result


def cmd_reconstruct(cfg: RunConfig) -> dict:
    if not cfg.sinogram:
        raise CliError("reconstruct needs --sinogram")
    sino_path = Path(cfg.sinogram)
    sino = read_stack(sino_path)
    stack, result = _recon_stack(cfg, sino, sino_path)
    output = Path(cfg.output or Path(cfg.out_dir) / f"recon_{cfg.method}.stack")
    output.parent.mkdir(parents=True, exist_ok=True)
    write_stack(output, stack)
    report = {"method": cfg.method, "seconds": result.seconds, "notes": result.notes,
              "config": stack.provenance["config"]}
    if result.report is not None:
        r = result.report
        report.update(iterations=r.iterations, seconds_per_iteration=result.seconds_per_iteration,
                      final_sparsity=r.final_sparsity, final_alpha=r.final_alpha, stop_reason=r.stop_reason,
                      converged=r.converged, final_sparsity_error=r.final_sparsity_error,
                      final_rel_change=r.final_rel_change)
    report_path = Path(cfg.report or str(output) + ".report.json")
    report_path.write_text(json.dumps(report, indent=2, default=_json_default) + "\n")
    return {"reconstruction": str(output), "report": str(report_path)}


def _json_default(x):
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    raise TypeError(f"not JSON serializable: {type(x).__name__}")


def metrics_rows(cfg: RunConfig) -> list:
    if not cfg.recon or not cfg.reference:
        raise CliError("metrics needs --recon and --reference")
    if cfg.mode not in ("per_frame", MEAN_FIRST_LAST):
        raise CliError(f"mode must be 'per_frame' or '{MEAN_FIRST_LAST}'")
    ref = read_stack(cfg.reference).data
    rows = []
    for path in cfg.recon:
        st = read_stack(path)
        if st.data.shape != ref.shape:
            raise CliError(f"shape mismatch: {path} is {st.data.shape}, reference is {ref.shape}")
        method = st.provenance.get("method", Path(path).stem)
        proj = st.provenance.get("projections", 0)
        if cfg.mode == MEAN_FIRST_LAST:
            rows.append((method, proj, MEAN_FIRST_LAST) + mean_first_last(st.data, ref).as_tuple())
        else:
            for t, triple in enumerate(evaluate(st.data, ref, per_frame=True).per_frame):
                rows.append((method, proj, t) + triple)
    return rows


def cmd_metrics(cfg: RunConfig) -> dict:
    text = metrics_rows_to_csv(metrics_rows(cfg))
    if cfg.csv:
        Path(cfg.csv).write_text(text)
        return {"csv": cfg.csv}
    sys.stdout.write(text)
    return {}


def cmd_export(cfg: RunConfig) -> dict:
    if not cfg.input:
        raise CliError("export needs --input")
    st = read_stack(cfg.input)
    frames = cfg.frame_list if cfg.frame_list is not None else list(range(st.data.shape[0]))
    window = None
    if cfg.window_min is not None or cfg.window_max is not None:
        window = (0.0 if cfg.window_min is None else cfg.window_min,
                  float(st.data.max()) if cfg.window_max is None else cfg.window_max)
    paths = export_frames(st.data, frames, cfg.out_dir, Path(cfg.input).stem, window)
    return {"images": [str(p) for p in paths]}


def cmd_verify(cfg: RunConfig) -> dict:
    """Re-derive ``cfg.target`` from its provenance and byte-compare."""
    if not cfg.target:
        raise CliError("verify needs --target")
    target = Path(cfg.target)
    st = read_stack(target)
    prov = st.provenance
    command = prov.get("command")
    if command == "simulate":
        if config_hash(prov["config"]) != prov.get("config_hash"):
            raise CliError("provenance config hash does not match its config")
        rerun_cfg = RunConfig(**prov["config"])
        truth, sino = simulate_stacks(rerun_cfg)
        fresh = truth if prov.get("role") == "truth" else sino
        with tempfile.TemporaryDirectory() as tmp:
            p = Path(tmp) / "rerun.stack"
            write_stack(p, fresh)
            same = p.read_bytes() == target.read_bytes()
    elif command == "reconstruct":
        src = Path(prov["input"])
        if not src.exists() or file_sha256(src) != prov.get("input_sha256"):
            raise CliError(f"input {src} is missing or changed since reconstruction")
        conf = dict(prov["config"])
        rerun_cfg = RunConfig(**conf)
        fresh, _ = _recon_stack(rerun_cfg, read_stack(src), src)
        with tempfile.TemporaryDirectory() as tmp:
            p = Path(tmp) / "rerun.stack"
            write_stack(p, fresh)
            same = p.read_bytes() == target.read_bytes()
    else:
        raise CliError(f"{target} has no re-runnable provenance")
    if not same:
        raise CliError(f"{target} differs from its re-derivation")
    return {"verified": str(target)}


COMMANDS = {"simulate": cmd_simulate, "reconstruct": cmd_reconstruct, "metrics": cmd_metrics,
            "export": cmd_export, "verify": cmd_verify}


# ----------------------------------------------------------------- parsing

def _int_list(text: str) -> list[int]:
    return [int(t) for t in text.split(",") if t.strip()]


def _add(p, name, type_=None, help_=None, **kw):
    flag = "--" + name.replace("_", "-")
    if type_ is bool:
        p.add_argument(flag, dest=name, action="store_const", const=True, default=None, help=help_)
    else:
        p.add_argument(flag, dest=name, type=type_, default=None, help=help_, **kw)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dynct", description="Sparse dynamic CT reconstruction toolkit.")
    parser.add_argument("--version", action="version", version=f"dynct {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="JSON file with RunConfig fields")
        _add(p, "verbose", bool, "log progress to stderr")
        _add(p, "out_dir", str, "output directory")

    s = sub.add_parser("simulate", help="simulate phantom and noisy sinograms")
    common(s)
    for name, t in [("side", int), ("frames", int), ("angles", int), ("detectors", int),
                    ("spread_points", int), ("seed", int), ("sigma_rel", float), ("noise_seed", int),
                    ("noise_reading", str), ("supersample", int), ("bin_factor", int)]:
        _add(s, name, t)

    r = sub.add_parser("reconstruct", help="reconstruct a sinogram stack")
    common(r)
    _add(r, "sinogram", str, "input sinogram stack")
    _add(r, "method", str, f"one of {', '.join(METHODS)}")
    _add(r, "dataset", str, f"parameter preset: {', '.join(PRESETS)}")
    for name, t in [("side", int), ("c_pr", float), ("omega", float), ("kappa", float), ("zeta", float),
                    ("gamma", float), ("lam", float), ("max_iters", int), ("delta1", float),
                    ("delta2", float), ("combine", str), ("solver_seed", int), ("output", str),
                    ("report", str)]:
        _add(r, name, t)

    m = sub.add_parser("metrics", help="rel_l2 / PSNR / HaarPSI table as CSV")
    common(m)
    m.add_argument("--recon", dest="recon", action="append", default=None, help="reconstruction stack (repeatable)")
    _add(m, "reference", str, "reference volume stack")
    _add(m, "mode", str, "per_frame or mean_first_last")
    _add(m, "csv", str, "output CSV (default stdout)")

    e = sub.add_parser("export", help="write frames as 16-bit PGM images")
    common(e)
    _add(e, "input", str, "stack file")
    e.add_argument("--frames", dest="frame_list", type=_int_list, default=None, help="comma-separated frame indices")
    _add(e, "window_min", float)
    _add(e, "window_max", float)

    v = sub.add_parser("verify", help="re-run a file's provenance and byte-compare")
    common(v)
    _add(v, "target", str, "stack file to verify")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = build_config(args)
        logging.basicConfig(level=logging.INFO if cfg.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        result = COMMANDS[args.command](cfg)
    except Exception as exc:  # every failure becomes one machine-readable line
        line = {"status": "error", "type": type(exc).__name__, "message": str(exc)}
        sys.stderr.write(json.dumps(line) + "\n")
        return 1
    if result:
        sys.stderr.write(json.dumps({"status": "ok", **result}, default=_json_default) + "\n")
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
