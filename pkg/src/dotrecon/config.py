"""Run configuration: JSON parsing, validation, defaults.

Defaults reproduce the reference synthetic setup: 50-node sides on the
unit square, four excitations, eps = 0.1, no curvature penalty, exact
data.  Unknown keys are rejected; validation errors name the offending
key.
"""

import json
import os
from dataclasses import asdict, dataclass, field

from .fem import SolverSettings
from .forward import ParameterBox
from .levelset import ContrastLevels
from .phantoms import PHANTOM_NAMES
from .reconstruct import StageSchedule

MODES = ("c-only", "a-only", "joint", "three-stage")
OUTDIR_ENV = "DOTRECON_OUTDIR"


class ConfigError(ValueError):
    """Configuration parse or validation failure."""


@dataclass
class InitSpec:
    """Initial guess for one level set.

    type "paraboloid" needs center/radius; "background" starts exactly
    at the second level value (outside the smoothing band, suitable for
    frozen coefficients); "shallow" starts near the background but
    inside the band so the coefficient can be iterated; "truth" encodes
    the exact phantom coefficient (synthetic runs only).
    """

    type: str = "paraboloid"
    center: tuple = (0.5, 0.5)
    radius: float = 0.2
    depth: float = 0.9

    def validate(self, key):
        if self.type not in ("paraboloid", "background", "shallow", "truth"):
            raise ConfigError(
                f"{key}.type must be paraboloid, background, shallow or truth")
        if self.type == "paraboloid":
            if len(self.center) != 2:
                raise ConfigError(f"{key}.center must be a 2-point")
            if not self.radius > 0:
                raise ConfigError(f"{key}.radius must be positive")
        if self.type == "shallow" and not 0.0 < self.depth < 1.0:
            raise ConfigError(f"{key}.depth must lie in (0, 1)")


@dataclass
class RunConfig:
    nx: int = 50
    ny: int = 50
    rect: tuple = (0.0, 0.0, 1.0, 1.0)
    phantom: str = "single-pair"
    levels: ContrastLevels = field(
        default_factory=lambda: ContrastLevels(10.0, 1.0, 10.0, 1.0))
    box: ParameterBox = field(default_factory=ParameterBox)
    eps: float = 0.1
    alpha: object = "auto"  # "auto", number, or {"a": x, "c": y}
    beta_a: float = 0.0
    beta_c: float = 0.0
    eta: float = 1e-8
    delta: float = 0.0
    seed: int = 0
    refine: int = 1
    mode: str = "three-stage"
    schedule: StageSchedule = field(default_factory=StageSchedule)
    init_a: InitSpec = field(default_factory=lambda: InitSpec(type="shallow"))
    init_c: InitSpec = field(default_factory=lambda: InitSpec(
        type="paraboloid", center=(0.5, 0.5), radius=0.2))
    solver: SolverSettings = field(
        default_factory=lambda: SolverSettings(method="direct"))
    target_err: float = 1e-2
    snapshot_every: int = 250
    out_dir: str | None = None
    data_file: str | None = None

    def resolved_out_dir(self):
        return self.out_dir or os.environ.get(OUTDIR_ENV) or "."

    def alphas(self):
        """(alpha_a, alpha_c), None meaning auto-scaled at run start."""
        if self.alpha == "auto" or self.alpha is None:
            return None, None
        if isinstance(self.alpha, dict):
            return float(self.alpha["a"]), float(self.alpha["c"])
        return float(self.alpha), float(self.alpha)


_TOP_KEYS = {
    "nx", "ny", "rect", "phantom", "levels", "box", "eps", "alpha",
    "beta_a", "beta_c", "eta", "delta", "seed", "refine", "mode",
    "schedule", "init_a", "init_c", "solver", "target_err",
    "snapshot_every", "out_dir", "data_file",
}


def _check_keys(d, allowed, where):
    unknown = set(d) - allowed
    if unknown:
        raise ConfigError(f"unknown key(s) in {where}: {', '.join(sorted(unknown))}")


def _build(data):
    _check_keys(data, _TOP_KEYS, "config")
    cfg = RunConfig()
    plain = {"nx", "ny", "phantom", "eps", "beta_a", "beta_c", "eta", "delta",
             "seed", "refine", "mode", "target_err", "snapshot_every",
             "out_dir", "data_file", "alpha"}
    for key in plain & set(data):
        setattr(cfg, key, data[key])
    if "rect" in data:
        cfg.rect = tuple(float(v) for v in data["rect"])
    if "levels" in data:
        _check_keys(data["levels"], {"a1", "a2", "c1", "c2"}, "levels")
        try:
            cfg.levels = ContrastLevels(**{k: float(v) for k, v in data["levels"].items()})
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"levels: {exc}") from exc
    if "box" in data:
        _check_keys(data["box"], {"a_lo", "a_hi", "c_lo", "c_hi"}, "box")
        try:
            cfg.box = ParameterBox(**{k: float(v) for k, v in data["box"].items()})
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"box: {exc}") from exc
    if "schedule" in data:
        _check_keys(data["schedule"],
                    {"k1", "k2", "ratio", "max_iter", "stag_window",
                     "stag_tol", "use_stagnation"}, "schedule")
        sched = data["schedule"].copy()
        if "ratio" in sched:
            sched["ratio"] = tuple(int(v) for v in sched["ratio"])
        try:
            cfg.schedule = StageSchedule(**sched)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"schedule: {exc}") from exc
    for key in ("init_a", "init_c"):
        if key in data:
            _check_keys(data[key], {"type", "center", "radius", "depth"}, key)
            spec = dict(data[key])
            if "center" in spec:
                spec["center"] = tuple(float(v) for v in spec["center"])
            setattr(cfg, key, InitSpec(**spec))
    if "solver" in data:
        _check_keys(data["solver"], {"method", "rel_tol", "max_iter"}, "solver")
        try:
            cfg.solver = SolverSettings(**data["solver"])
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"solver: {exc}") from exc
    return cfg


def _validate(cfg):
    if cfg.nx < 2 or cfg.ny < 2:
        raise ConfigError("nx and ny must be >= 2")
    x0, y0, x1, y1 = cfg.rect
    if not (x1 > x0 and y1 > y0):
        raise ConfigError("rect is degenerate")
    if cfg.phantom not in PHANTOM_NAMES:
        raise ConfigError(
            f"phantom must be one of {', '.join(PHANTOM_NAMES)}; got {cfg.phantom!r}")
    if not cfg.eps > 0:
        raise ConfigError("eps must be positive")
    if cfg.alpha not in ("auto", None):
        try:
            a_a, a_c = cfg.alphas()
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"alpha must be 'auto', a number, or {{a, c}}: {exc}")
        if not (a_a > 0 and a_c > 0):
            raise ConfigError("alpha must be positive")
    if cfg.beta_a < 0 or cfg.beta_c < 0:
        raise ConfigError("beta_a and beta_c must be nonnegative")
    if not cfg.eta > 0:
        raise ConfigError("eta must be positive")
    if cfg.delta < 0:
        raise ConfigError("delta must be nonnegative")
    if int(cfg.refine) != cfg.refine or cfg.refine < 1:
        raise ConfigError("refine must be a positive integer")
    if cfg.mode not in MODES:
        raise ConfigError(f"mode must be one of {', '.join(MODES)}; got {cfg.mode!r}")
    if not cfg.target_err > 0:
        raise ConfigError("target_err must be positive")
    if cfg.snapshot_every < 1:
        raise ConfigError("snapshot_every must be >= 1")
    for key in ("init_a", "init_c"):
        getattr(cfg, key).validate(key)
    if not (cfg.box.a_lo <= min(cfg.levels.a1, cfg.levels.a2)
            and cfg.box.a_hi >= max(cfg.levels.a1, cfg.levels.a2)
            and cfg.box.c_lo <= min(cfg.levels.c1, cfg.levels.c2)
            and cfg.box.c_hi >= max(cfg.levels.c1, cfg.levels.c2)):
        raise ConfigError("box must contain both contrast levels")
    return cfg


def parse_config(text):
    """Parse a JSON config document into a validated RunConfig."""
    try:
        data = json.loads(text) if text.strip() else {}
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON (line {exc.lineno}): {exc.msg}")
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")
    return _validate(_build(data))


def apply_overrides(cfg, overrides):
    """Re-validate a config with CLI overrides (flags beat the file)."""
    data = json.loads(serialize_config(cfg))
    for key, value in overrides.items():
        if "." in key:
            head, tail = key.split(".", 1)
            data.setdefault(head, {})[tail] = value
        else:
            data[key] = value
    return _validate(_build(data))


def serialize_config(cfg):
    """JSON document that parses back to an equal config."""
    data = asdict(cfg)
    data["solver"] = {"method": cfg.solver.method, "rel_tol": cfg.solver.rel_tol,
                      "max_iter": cfg.solver.max_iter}
    data["rect"] = list(cfg.rect)
    data["schedule"]["ratio"] = list(cfg.schedule.ratio)
    for key in ("init_a", "init_c"):
        data[key]["center"] = list(data[key]["center"])
    return json.dumps(data, indent=2, sort_keys=True)
