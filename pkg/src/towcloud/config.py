"""Run configuration: TOML parsing, validation, canonical serialization.

A run is described by one TOML file with a fixed set of tables.  Parsing is
strict: any table or key outside the schema below raises
:class:`ConfigError` naming the offending dotted path, so typos fail loudly
instead of silently falling back to defaults.

Schema (all tables optional unless a command needs them)::

    [domain]     kind ("box"|"ball"|"annulus") plus its geometry keys
    [model]      p, eps
    [fields]     density, rhs_f, boundary_g, manufactured_u (expression
                 strings) and optional density_lo/density_hi raw bounds
    [cloud]      n, seed, file
    [schedule]   mode, eps0, ratio, levels, a, c0, base_n
    [experiment] seeds, probes, probe_grid, target_scale
    [solver]     tol, max_iter
    [pucci]      lam, tau
    [output]     dir

Serialization is hand-written and canonical: fixed table order, fixed key
order inside each table, floats via repr (shortest round-trip form), so
parse -> serialize -> parse is the identity and the sha256 of the canonical
text is a stable fingerprint of the run (``config_hash``).  Expression
strings are stored verbatim; they are only parsed by the commands that use
them, so a malformed expression is reported at use time with its position.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field, fields as dc_fields

try:
    import tomllib as _toml  # Python >= 3.11
except ModuleNotFoundError:  # pragma: no cover - depends on interpreter
    import tomli as _toml

__all__ = [
    "ConfigError",
    "DomainConfig",
    "ModelConfig",
    "FieldsConfig",
    "CloudConfig",
    "ScheduleConfig",
    "ExperimentConfig",
    "SolverConfig",
    "PucciConfig",
    "OutputConfig",
    "RunConfig",
    "parse_config",
    "load_config",
    "config_hash",
]


class ConfigError(ValueError):
    """A run configuration is malformed (unknown key, bad type, bad value)."""


# ---------------------------------------------------------------------------
# Section dataclasses
# ---------------------------------------------------------------------------
# Convention: every section is a flat dataclass whose field names are the
# TOML keys.  ``None`` marks "absent"; commands decide what they require.


@dataclass
class DomainConfig:
    kind: str = None
    lo: list = None
    hi: list = None
    center: list = None
    radius: float = None
    inner: float = None
    outer: float = None

    def make(self):
        """Build the geometry object this section describes."""
        from . import geometry

        if self.kind is None:
            raise ConfigError("domain.kind is required")
        try:
            if self.kind == "box":
                _need(self, "domain", "lo", "hi")
                return geometry.Box(self.lo, self.hi)
            if self.kind == "ball":
                _need(self, "domain", "center", "radius")
                return geometry.Ball(self.center, self.radius)
            if self.kind == "annulus":
                _need(self, "domain", "center", "inner", "outer")
                return geometry.Annulus(self.center, self.inner, self.outer)
        except ValueError as exc:  # geometry rejects degenerate shapes
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError("domain: %s" % exc) from exc
        raise ConfigError("domain.kind must be 'box', 'ball', or 'annulus', "
                          "got %r" % (self.kind,))

    @property
    def dim(self):
        if self.kind == "box":
            return len(self.lo) if self.lo is not None else None
        if self.center is not None:
            return len(self.center)
        return None


@dataclass
class ModelConfig:
    p: float = None
    eps: float = None

    def validate(self):
        if self.p is not None and self.p < 2.0:
            raise ConfigError("model.p must be >= 2, got %r" % (self.p,))
        if self.eps is not None and self.eps <= 0.0:
            raise ConfigError("model.eps must be positive, got %r"
                              % (self.eps,))


@dataclass
class FieldsConfig:
    density: str = None
    density_lo: float = None
    density_hi: float = None
    rhs_f: str = None
    boundary_g: str = None
    manufactured_u: str = None

    def validate(self):
        lo, hi = self.density_lo, self.density_hi
        if (lo is None) != (hi is None):
            raise ConfigError("fields.density_lo and fields.density_hi "
                              "must be given together")
        if lo is not None and not 0.0 < lo <= hi:
            raise ConfigError("need 0 < fields.density_lo <= "
                              "fields.density_hi, got %r, %r" % (lo, hi))


@dataclass
class CloudConfig:
    n: int = None
    seed: int = None
    file: str = None

    def validate(self):
        if self.n is not None and self.n < 1:
            raise ConfigError("cloud.n must be >= 1, got %r" % (self.n,))
        if self.seed is not None and not 0 <= self.seed < 2 ** 64:
            raise ConfigError("cloud.seed must fit in u64, got %r"
                              % (self.seed,))


@dataclass
class ScheduleConfig:
    mode: str = None
    eps0: float = None
    ratio: float = None
    levels: int = None
    a: float = None
    c0: float = None
    base_n: int = None

    def make(self, dim):
        """Build the experiment schedule for a ``dim``-dimensional domain."""
        from . import experiments

        _need(self, "schedule", "mode", "eps0", "ratio", "levels")
        kw = {}
        if self.a is not None:
            kw["a"] = self.a
        if self.c0 is not None:
            kw["c0"] = self.c0
        if self.base_n is not None:
            kw["base_n"] = self.base_n
        try:
            return experiments.make_schedule(dim, self.mode, self.eps0,
                                             self.ratio, self.levels, **kw)
        except ValueError as exc:
            raise ConfigError("schedule: %s" % exc) from exc


@dataclass
class ExperimentConfig:
    seeds: list = None
    probes: int = None
    probe_grid: int = None
    target_scale: float = None

    def validate(self):
        if self.seeds is not None:
            if not self.seeds:
                raise ConfigError("experiment.seeds must be non-empty")
            for s in self.seeds:
                if not 0 <= s < 2 ** 64:
                    raise ConfigError("experiment.seeds entries must fit "
                                      "in u64, got %r" % (s,))


@dataclass
class SolverConfig:
    tol: float = None
    max_iter: int = None

    def validate(self):
        if self.tol is not None and self.tol <= 0.0:
            raise ConfigError("solver.tol must be positive, got %r"
                              % (self.tol,))
        if self.max_iter is not None and self.max_iter < 1:
            raise ConfigError("solver.max_iter must be >= 1, got %r"
                              % (self.max_iter,))


@dataclass
class PucciConfig:
    lam: float = None
    tau: float = None

    def validate(self):
        if self.lam is not None and self.lam < 1.0:
            raise ConfigError("pucci.lam must be >= 1, got %r" % (self.lam,))
        if self.tau is not None and self.tau < 1.0:
            raise ConfigError("pucci.tau must be >= 1, got %r" % (self.tau,))


@dataclass
class OutputConfig:
    dir: str = None


# Canonical table order for serialization and hashing.
_SECTIONS = [
    ("domain", DomainConfig),
    ("model", ModelConfig),
    ("fields", FieldsConfig),
    ("cloud", CloudConfig),
    ("schedule", ScheduleConfig),
    ("experiment", ExperimentConfig),
    ("solver", SolverConfig),
    ("pucci", PucciConfig),
    ("output", OutputConfig),
]

_INT_KEYS = {
    ("cloud", "n"), ("cloud", "seed"),
    ("schedule", "levels"), ("schedule", "base_n"),
    ("experiment", "probes"), ("experiment", "probe_grid"),
    ("solver", "max_iter"),
}
_STR_KEYS = {
    ("domain", "kind"),
    ("fields", "density"), ("fields", "rhs_f"), ("fields", "boundary_g"),
    ("fields", "manufactured_u"),
    ("cloud", "file"),
    ("schedule", "mode"),
    ("output", "dir"),
}
_FLOAT_LIST_KEYS = {
    ("domain", "lo"), ("domain", "hi"), ("domain", "center"),
}
_INT_LIST_KEYS = {
    ("experiment", "seeds"),
}


@dataclass
class RunConfig:
    """Parsed, validated run configuration (one TOML file)."""

    domain: DomainConfig = field(default_factory=DomainConfig)
    model: ModelConfig = field(default_factory=ModelConfig)
    fields: FieldsConfig = field(default_factory=FieldsConfig)
    cloud: CloudConfig = field(default_factory=CloudConfig)
    schedule: ScheduleConfig = field(default_factory=ScheduleConfig)
    experiment: ExperimentConfig = field(default_factory=ExperimentConfig)
    solver: SolverConfig = field(default_factory=SolverConfig)
    pucci: PucciConfig = field(default_factory=PucciConfig)
    output: OutputConfig = field(default_factory=OutputConfig)

    def to_toml(self):
        """Canonical TOML text: fixed table and key order, repr floats."""
        chunks = []
        for name, _ in _SECTIONS:
            section = getattr(self, name)
            lines = []
            for f in dc_fields(section):
                value = getattr(section, f.name)
                if value is None:
                    continue
                lines.append("%s = %s" % (f.name, _format_value(value)))
            if lines:
                chunks.append("[%s]\n%s\n" % (name, "\n".join(lines)))
        return "\n".join(chunks)

    def hash(self):
        """sha256 hex digest of the canonical serialization."""
        return hashlib.sha256(self.to_toml().encode()).hexdigest()


def _need(section, table, *keys):
    missing = [k for k in keys if getattr(section, k) is None]
    if missing:
        raise ConfigError("%s requires %s" %
                          (table, ", ".join("%s.%s" % (table, k)
                                            for k in missing)))


def _format_value(value):
    if isinstance(value, bool):  # before int: bool is an int subclass
        return "true" if value else "false"
    if isinstance(value, str):
        return '"%s"' % value.replace("\\", "\\\\").replace('"', '\\"')
    if isinstance(value, int):
        return "%d" % value
    if isinstance(value, float):
        text = repr(value)
        # TOML floats need a dot or exponent; repr(1.0) == '1.0' already
        # qualifies, but guard inf/nan which TOML spells differently.
        if text == "inf":
            return "inf"
        if text == "-inf":
            return "-inf"
        if text == "nan":
            return "nan"
        return text
    if isinstance(value, list):
        return "[%s]" % ", ".join(_format_value(v) for v in value)
    raise ConfigError("cannot serialize %r" % (value,))


def _coerce(table, key, value):
    """Type-check one (table, key) leaf and normalize its Python type."""
    path = "%s.%s" % (table, key)
    if (table, key) in _STR_KEYS:
        if not isinstance(value, str):
            raise ConfigError("%s must be a string, got %r" % (path, value))
        return value
    if (table, key) in _INT_KEYS:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError("%s must be an integer, got %r" % (path, value))
        return value
    if (table, key) in _FLOAT_LIST_KEYS:
        if (not isinstance(value, list) or not value
                or not all(isinstance(v, (int, float))
                           and not isinstance(v, bool) for v in value)):
            raise ConfigError("%s must be a non-empty list of numbers, "
                              "got %r" % (path, value))
        return [float(v) for v in value]
    if (table, key) in _INT_LIST_KEYS:
        if (not isinstance(value, list)
                or not all(isinstance(v, int) and not isinstance(v, bool)
                           for v in value)):
            raise ConfigError("%s must be a list of integers, got %r"
                              % (path, value))
        return list(value)
    # remaining leaves are scalars stored as float
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError("%s must be a number, got %r" % (path, value))
    return float(value)


def parse_config(text):
    """Parse TOML ``text`` into a validated :class:`RunConfig`.

    Raises
    ------
    ConfigError
        On TOML syntax errors, unknown tables or keys (reported by dotted
        path), wrong value types, or out-of-range values.
    """
    try:
        raw = _toml.loads(text)
    except _toml.TOMLDecodeError as exc:
        raise ConfigError("TOML syntax error: %s" % exc) from exc

    known = dict(_SECTIONS)
    cfg = RunConfig()
    for table, body in raw.items():
        if table not in known:
            raise ConfigError("unknown table [%s]" % table)
        if not isinstance(body, dict):
            raise ConfigError("[%s] must be a table, got %r" % (table, body))
        section = getattr(cfg, table)
        valid = {f.name for f in dc_fields(section)}
        for key, value in body.items():
            if key not in valid:
                raise ConfigError("unknown key %s.%s" % (table, key))
            setattr(section, key, _coerce(table, key, value))

    cfg.model.validate()
    cfg.fields.validate()
    cfg.cloud.validate()
    cfg.experiment.validate()
    cfg.solver.validate()
    cfg.pucci.validate()
    if cfg.domain.kind is not None:
        cfg.domain.make()  # surface shape errors at parse time
    return cfg


def load_config(path):
    """Read and parse the TOML file at ``path``."""
    try:
        with open(path, "r") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError("cannot read config %s: %s" % (path, exc)) from exc
    return parse_config(text)


def config_hash(cfg):
    """sha256 hex digest of the config's canonical serialization."""
    return cfg.hash()
