"""Batch pipeline: configuration, orchestration and artifact output.

Configuration is a flat key=value mapping (file and/or command-line
overrides); run_pipeline executes load -> build field -> optional clean ->
completion -> seed -> relax and writes the artifacts into the output
directory. run_clean_only stops after the cleaning stage.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass, field as dataclass_field
from pathlib import Path

import numpy as np

from . import io as ppio
from .builtin import builtin_geometry
from .cleaner import clean, default_eps
from .confinement import compute_completion
from .errors import (
    ConfigurationError,
    EmptyBandError,
    EmptyInputError,
    EmptySeedError,
    MalformedInputError,
    ParticlePrepError,
    TopologyError,
)
from .geometry import SURFACE_FORMATS, load_surface
from .levelset import build_field
from .relaxation import RelaxConfig, WendlandC2, lattice_seed, relax

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_IO = 3
EXIT_GEOMETRY = 4
EXIT_NONCONVERGED = 5

PLATEAU_WINDOW = 50
PLATEAU_SPREAD = 0.10


@dataclass
class PipelineConfig:
    input_path: str | None = None
    input_format: str | None = None
    builtin_name: str | None = None
    builtin_params: dict = dataclass_field(default_factory=dict)
    domain: str = "auto"   # or "x0,x1;y0,y1[;z0,z1]"
    lc: float | None = None
    dx: float | None = None
    clean_enabled: bool = False
    clean_max_passes: int = 5
    clean_epsilon: float | None = None   # None -> 0.75*l_f
    confinement_enabled: bool = False
    confinement_epsilon: float | None = None
    iterations: int = 1000
    p0: float = 1.0
    output_dir: str = "."
    threads: int = 0   # advisory; kept for config compatibility

    @classmethod
    def from_flat(cls, flat: dict) -> "PipelineConfig":
        cfg = cls()
        known = {
            "input.path": ("input_path", str),
            "input.format": ("input_format", str),
            "builtin.name": ("builtin_name", str),
            "domain": ("domain", str),
            "lc": ("lc", float),
            "dx": ("dx", float),
            "clean.enabled": ("clean_enabled", _parse_bool),
            "clean.max_passes": ("clean_max_passes", int),
            "clean.epsilon": ("clean_epsilon", _parse_optional_float),
            "confinement.enabled": ("confinement_enabled", _parse_bool),
            "confinement.epsilon": ("confinement_epsilon", _parse_optional_float),
            "relax.iterations": ("iterations", int),
            "relax.p0": ("p0", float),
            "output.dir": ("output_dir", str),
            "threads": ("threads", int),
        }
        for key, raw in flat.items():
            if key in known:
                attr, conv = known[key]
                try:
                    setattr(cfg, attr, conv(raw))
                except (TypeError, ValueError) as exc:
                    raise ConfigurationError(f"bad value for {key}: {raw!r} ({exc})")
            elif key.startswith("builtin."):
                cfg.builtin_params[key[len("builtin."):]] = _parse_param(raw)
            else:
                raise ConfigurationError(f"unknown configuration key {key!r}")
        cfg.validate()
        return cfg

    def validate(self):
        if (self.input_path is None) == (self.builtin_name is None):
            raise ConfigurationError(
                "exactly one of input.path and builtin.name must be set"
            )
        if self.input_path is not None:
            if self.input_format not in SURFACE_FORMATS:
                raise ConfigurationError(
                    f"input.format must be one of {SURFACE_FORMATS}, "
                    f"got {self.input_format!r}"
                )
        if self.lc is None and self.dx is None:
            raise ConfigurationError("at least one of lc and dx must be set")
        if self.lc is None:
            self.lc = 4.0 * self.dx
        if self.dx is None:
            self.dx = self.lc / 4.0
        if self.lc <= 0 or self.dx <= 0:
            raise ConfigurationError("lc and dx must be positive")
        if self.iterations < 0:
            raise ConfigurationError("relax.iterations must be >= 0")
        if self.clean_max_passes < 1:
            raise ConfigurationError("clean.max_passes must be >= 1")

    def resolved(self) -> dict:
        out = {
            "domain": self.domain,
            "lc": "%.17g" % self.lc,
            "dx": "%.17g" % self.dx,
            "clean.enabled": str(self.clean_enabled).lower(),
            "clean.max_passes": str(self.clean_max_passes),
            "clean.epsilon": (
                "auto" if self.clean_epsilon is None else "%.17g" % self.clean_epsilon
            ),
            "confinement.enabled": str(self.confinement_enabled).lower(),
            "confinement.epsilon": (
                "auto"
                if self.confinement_epsilon is None
                else "%.17g" % self.confinement_epsilon
            ),
            "relax.iterations": str(self.iterations),
            "relax.p0": "%.17g" % self.p0,
            "output.dir": self.output_dir,
            "threads": str(self.threads),
        }
        if self.input_path is not None:
            out["input.path"] = self.input_path
            out["input.format"] = self.input_format
        if self.builtin_name is not None:
            out["builtin.name"] = self.builtin_name
            for k, v in sorted(self.builtin_params.items()):
                out[f"builtin.{k}"] = _format_param(v)
        return out


def _parse_bool(s):
    if isinstance(s, bool):
        return s
    v = str(s).strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def _parse_optional_float(s):
    if s is None or str(s).strip().lower() in ("auto", "none", ""):
        return None
    return float(s)


def _parse_param(raw):
    """Builtin parameters: float, int, or ';'-separated tuples of floats."""
    if isinstance(raw, (int, float, list, tuple)):
        return raw
    s = str(raw).strip()
    if ";" in s:
        return [tuple(float(x) for x in part.split(",")) for part in s.split(";")]
    if "," in s:
        return tuple(float(x) for x in s.split(","))
    try:
        return int(s)
    except ValueError:
        pass
    try:
        return float(s)
    except ValueError:
        return s


def _format_param(v):
    if isinstance(v, (list,)):
        return ";".join(",".join("%.17g" % x for x in t) for t in v)
    if isinstance(v, tuple):
        return ",".join("%.17g" % x for x in v)
    return str(v)


def parse_config_file(path) -> dict:
    flat = {}
    with open(path, "r", encoding="utf-8") as f:
        for lineno, raw in enumerate(f, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ConfigurationError(
                    f"{path}, line {lineno}: expected key=value, got {line!r}"
                )
            key, _, value = line.partition("=")
            flat[key.strip()] = value.strip()
    return flat


def _parse_domain(spec, geom, lc):
    if spec == "auto":
        pad = 4.0 * lc
        return np.stack([geom.bbox[0] - pad, geom.bbox[1] + pad])
    try:
        ranges = [tuple(float(v) for v in part.split(",")) for part in spec.split(";")]
        lo = [r[0] for r in ranges]
        hi = [r[1] for r in ranges]
    except (ValueError, IndexError):
        raise ConfigurationError(
            f"bad domain {spec!r}; expected 'auto' or 'x0,x1;y0,y1[;z0,z1]'"
        ) from None
    if len(ranges) != geom.dimension:
        raise ConfigurationError(
            f"domain has {len(ranges)} axes but geometry is {geom.dimension}D"
        )
    return np.array([lo, hi])


def load_configured_geometry(config: PipelineConfig):
    if config.builtin_name is not None:
        return builtin_geometry(config.builtin_name, config.builtin_params)
    return load_surface(config.input_path, config.input_format)


def run_pipeline(config: PipelineConfig, log=None) -> int:
    """Execute the full configured pipeline; returns the process exit code."""
    return _execute(config, log, clean_only=False)


def run_clean_only(config: PipelineConfig, log=None) -> int:
    """Load, build, clean and dump the field; no particle generation."""
    return _execute(config, log, clean_only=True)


def _execute(config: PipelineConfig, log, clean_only: bool) -> int:
    log = log or (lambda msg: print(msg, file=sys.stderr))
    out = Path(config.output_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)

        geom = load_configured_geometry(config)
        log(f"geometry: {geom}")
        domain = _parse_domain(config.domain, geom, config.lc)
        field = build_field(geom, domain, config.lc)
        log(
            f"field: {len(field.package_coords)} packages "
            f"({int(field.package_is_core.sum())} core), l_c={config.lc}"
        )

        kernel = WendlandC2(1.3 * config.dx, geom.dimension)
        incomplete_clean = False
        if config.clean_enabled or clean_only:
            eps = config.clean_epsilon or default_eps(field)
            _, report = clean(
                field,
                max_passes=config.clean_max_passes,
                eps=eps,
                kernel=kernel if config.confinement_enabled else None,
                completion_eps=config.confinement_epsilon,
            )
            ppio.write_clean_report(report, out / "clean_report.txt")
            incomplete_clean = not report.complete
            log(
                f"clean: {len(report.passes)} passes, "
                f"{report.total_modified} cells modified, "
                f"complete={report.complete}"
            )

        if config.confinement_enabled and not clean_only:
            compute_completion(
                field, kernel, config.confinement_epsilon or default_eps(field)
            )

        ppio.write_field_dump(field, out / "field.dat")

        if not clean_only:
            ps = lattice_seed(field, config.dx)
            log(f"seeded {len(ps)} particles at dx={config.dx}")
            ps, diag = relax(
                ps,
                field,
                RelaxConfig(
                    iterations=config.iterations,
                    use_confinement=config.confinement_enabled,
                    p0=config.p0,
                ),
            )
            ppio.write_particles_csv(ps, out / "particles.csv")
            ppio.write_particles_vtk(ps, out / "particles.vtk")
            ppio.write_diagnostics_csv(diag, out / "diagnostics.csv")
            if config.iterations >= PLATEAU_WINDOW:
                tail = np.asarray(diag.avg_kinetic_energy[-PLATEAU_WINDOW:])
                mean = tail.mean()
                if mean > 0 and (tail.max() - tail.min()) / mean >= PLATEAU_SPREAD:
                    log("warning: convergence criterion not met")

        ppio.write_resolved_config(config.resolved(), out / "resolved_config.txt")
        if incomplete_clean:
            log("cleaning incomplete after max_passes (artifacts written)")
            return EXIT_NONCONVERGED
        return EXIT_OK

    except ConfigurationError as exc:
        log(f"configuration error: {exc}")
        return EXIT_CONFIG
    except (MalformedInputError, FileNotFoundError, OSError) as exc:
        log(f"i/o error: {exc}")
        return EXIT_IO
    except (EmptyInputError, TopologyError, EmptyBandError, EmptySeedError) as exc:
        log(f"geometry error: {exc}")
        return EXIT_GEOMETRY
    except ParticlePrepError as exc:
        log(f"error: {exc}")
        return EXIT_GEOMETRY
