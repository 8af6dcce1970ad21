"""Flat key=value experiment configuration.

Experiments are described by a UTF-8 text file of dotted keys, one
`key = value` per line, with `#` comments.  Unknown keys are rejected with
a message listing every offender, so typos fail loudly.
"""

from dataclasses import dataclass, field

from .arrivals import GammaArrivals
from .errors import ConfigError

MODES = ("metrics", "feasibility", "ellcurves", "tap", "optimize", "simulate", "papergrid")

ALLOC_KINDS = ("geometric", "tap", "explicit", "construction")

# key -> (parser, default); None default means "must be provided when used"
_KNOWN = {
    "mode": (str, None),
    "arrival.family": (str, "gamma"),
    "arrival.k": (float, 1.0),
    "arrival.lambda": (float, None),
    "capacity.mu": (float, 1.0),
    "output.dir": (str, None),
    "output.figures": (lambda s: s.lower() in ("1", "true", "yes", "on"), True),
    "alloc.kind": (str, None),
    "alloc.alpha": (float, None),
    "alloc.ell": (float, None),
    "alloc.rates": (str, None),
    "alloc.tail_ratio": (float, None),
    "alloc.depth": (int, 15),
    "feas.depth": (int, 10),
    "curves.alpha_min": (float, 0.02),
    "curves.alpha_max": (float, 0.98),
    "curves.alpha_count": (int, 49),
    "curves.levels": (str, "1,2,3,4,5,10,15"),
    "sim.arrivals": (int, 1_000_000),
    "sim.warmup": (int, 10_000),
    "sim.seed": (int, 0),
    "sim.levels": (int, None),
    "opt.M": (int, 15),
    "opt.tol_rate": (float, 1e-6),
    "opt.tol_obj": (float, 1e-8),
    "opt.max_sweeps": (int, 50),
    "opt.restarts": (int, 3),
    "opt.objective": (str, "delay"),
    "opt.tau": (float, None),
    "opt.seed": (int, 0),
    "grid.rho": (str, "0.2,0.4,0.6,0.8"),
    "grid.k": (str, "0.5,1,2,5,10"),
}


@dataclass
class ExperimentConfig:
    mode: str
    model: GammaArrivals
    mu: float
    out_dir: str | None
    figures: bool
    raw: dict = field(default_factory=dict)

    def get(self, key):
        """Typed value for a known key, falling back to its default."""
        parser, default = _KNOWN[key]
        if key in self.raw:
            try:
                return parser(self.raw[key])
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"bad value for {key!r}: {self.raw[key]!r}") from exc
        return default

    def require(self, key):
        value = self.get(key)
        if value is None:
            raise ConfigError(f"missing required config key {key!r}")
        return value

    def float_list(self, key):
        text = self.require(key)
        try:
            return [float(v) for v in text.split(",") if v.strip()]
        except ValueError as exc:
            raise ConfigError(f"bad list value for {key!r}: {text!r}") from exc

    def int_list(self, key):
        return [int(v) for v in self.float_list(key)]


def parse_config_text(text):
    """key=value lines -> raw dict; malformed lines and unknown keys error."""
    raw = {}
    errors = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            errors.append(f"line {lineno}: expected 'key = value', got {stripped!r}")
            continue
        key, _, value = stripped.partition("=")
        key = key.strip()
        value = value.split("#", 1)[0].strip()
        if key in raw:
            errors.append(f"line {lineno}: duplicate key {key!r}")
        raw[key] = value
    unknown = sorted(k for k in raw if k not in _KNOWN)
    if unknown:
        errors.append("unknown config keys: " + ", ".join(unknown))
    if errors:
        raise ConfigError("; ".join(errors))
    return raw


def load_config(path):
    with open(path, "r", encoding="utf-8") as fh:
        return build_config(parse_config_text(fh.read()))


def build_config(raw):
    """Validate the raw dict and construct the typed ExperimentConfig."""
    cfg = ExperimentConfig(
        mode="", model=None, mu=0.0, out_dir=None, figures=True, raw=dict(raw)
    )
    mode = cfg.require("mode").lower()
    if mode not in MODES:
        raise ConfigError(f"unknown mode {mode!r}; expected one of {', '.join(MODES)}")
    family = cfg.get("arrival.family").lower()
    if family != "gamma":
        raise ConfigError(f"unknown arrival.family {family!r}; only 'gamma' is supported")
    lam = cfg.require("arrival.lambda")
    k = cfg.get("arrival.k")
    try:
        model = GammaArrivals(lam=lam, k=k)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    mu = cfg.get("capacity.mu")
    if mu <= 0:
        raise ConfigError(f"capacity.mu must be positive, got {mu}")
    cfg.mode = mode
    cfg.model = model
    cfg.mu = mu
    cfg.out_dir = cfg.get("output.dir")
    cfg.figures = cfg.get("output.figures")
    if mode in ("metrics", "feasibility", "simulate"):
        kind = cfg.require("alloc.kind").lower()
        if kind not in ALLOC_KINDS:
            raise ConfigError(
                f"unknown alloc.kind {kind!r}; expected one of {', '.join(ALLOC_KINDS)}"
            )
    if mode == "tap":
        cfg.require("alloc.ell")
    return cfg


def build_allocation(cfg):
    """Construct the Allocation described by the alloc.* block."""
    from .chain import Allocation
    from .geometric import geometric_allocation, tap_solution
    from .stability import feasible_construction

    kind = cfg.require("alloc.kind").lower()
    depth = cfg.get("alloc.depth")
    if kind == "geometric":
        return geometric_allocation(cfg.require("alloc.alpha"), mu=cfg.mu, depth=depth)
    if kind == "tap":
        return tap_solution(cfg.require("alloc.ell"), mu=cfg.mu, depth=depth)
    if kind == "construction":
        alpha = cfg.get("alloc.alpha")
        return feasible_construction(cfg.model, cfg.mu, alpha if alpha else 0.5, depth)
    rates = cfg.float_list("alloc.rates")
    return Allocation(rates, total=cfg.mu, tail_ratio=cfg.get("alloc.tail_ratio"))
