"""Flat key = value experiment configuration.

One `key = value` pair per line; `#` starts a comment; blank lines are
ignored.  Pairs are written `lo, hi`; lists are comma separated.  Unknown
and duplicate keys are rejected with the offending line number.
"""

from dataclasses import dataclass, fields, replace
import hashlib
import math

from heatblowup.errors import ConfigError


def _pair(text):
    parts = [p.strip() for p in text.split(",")]
    if len(parts) != 2:
        raise ValueError("expected two comma-separated numbers")
    return (float(parts[0]), float(parts[1]))


def _floats(text):
    return tuple(float(p) for p in text.split(",") if p.strip())


def _bool(text):
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError("expected a boolean")


def _opt_float(text):
    t = text.strip().lower()
    return None if t in ("", "auto", "none") else float(t)


@dataclass(frozen=True)
class ExperimentConfig:
    domain: tuple = (0.0, 1.0)
    omega: tuple = (0.2, 0.8)
    a: float = 0.5
    T: float = 0.1
    epsilon: float = 0.05
    eps_hat: float = 1e-5
    eps_hat1: float = None          # default T1 / 16
    p: float = 2.0
    n: int = 401
    s0: float = 9.0                 # auxiliary horizon T1 = exp(-s0)
    K0: float = 1.75
    epsilon0: float = 0.24
    A: float = 20.0
    mu: float = 0.5
    eta0: float = 1.0
    threshold: float = 1e5
    floor_eps: float = 1e-6
    safety: float = 0.05
    base_dt: float = 1e-3
    riccati_dt_frac: float = 0.05
    zero_steps: int = 16
    checkpoint_every: int = 1
    n_knots: int = 64
    riccati_method: str = "modal"
    reg_rel: float = 1e-10
    search_budget: int = 14
    search_theta: float = 0.3
    z_spacing: float = 0.01
    y0: str = "zero"                # zero | target | file
    y0_file: str = ""
    stability_sizes: tuple = (0.0, 1e-3, 1e-2)
    recenter_sizes: tuple = (1e-4, 1e-3, 1e-2)
    bump_center: float = None       # default a + epsilon0/12
    bump_width: float = None        # default epsilon0/6
    workers: int = 1
    out: str = "runs/default"

    @property
    def T1(self):
        return math.exp(-self.s0)

    @property
    def eps_hat1_value(self):
        return self.T1 / 16.0 if self.eps_hat1 is None else self.eps_hat1

    @property
    def bump_center_value(self):
        return self.a + self.epsilon0 / 12.0 if self.bump_center is None else self.bump_center

    @property
    def bump_width_value(self):
        return self.epsilon0 / 6.0 if self.bump_width is None else self.bump_width

    def validate(self):
        x_lo, x_hi = self.domain
        w_lo, w_hi = self.omega
        if not x_lo < x_hi:
            raise ConfigError("domain: need x_lo < x_hi")
        if not x_lo < w_lo < w_hi < x_hi:
            raise ConfigError("omega: need x_lo < omega_lo < omega_hi < x_hi")
        if not w_lo < self.a < w_hi:
            raise ConfigError(f"a: target point {self.a} must lie inside omega {self.omega}")
        if not self.epsilon > 0:
            raise ConfigError("epsilon: must be positive")
        if not self.p > 1:
            raise ConfigError("p: must exceed 1")
        if self.n < 3:
            raise ConfigError("n: need at least 3 interior nodes")
        if not self.T > 0:
            raise ConfigError("T: must be positive")
        if not 0 < self.T1 < self.T / 2:
            raise ConfigError(
                f"s0: the auxiliary horizon T1 = exp(-s0) = {self.T1:.4g} must lie in "
                f"(0, T/2) = (0, {self.T / 2:.4g})")
        if not 0 < self.eps_hat < min(self.epsilon / 4, self.T - self.T1):
            raise ConfigError("eps_hat: need 0 < eps_hat < min(epsilon/4, T - T1)")
        if not 0 < self.eps_hat1_value < min(self.epsilon / 4, self.T1 / 4):
            raise ConfigError("eps_hat1: need 0 < eps_hat1 < min(epsilon/4, T1/4)")
        if self.K0 < 1 or self.epsilon0 <= 0 or self.A <= 0:
            raise ConfigError("K0 >= 1, epsilon0 > 0 and A > 0 are required")
        if not 0 < self.mu < 1 or not 0 < self.eta0 <= 1:
            raise ConfigError("mu in (0, 1) and eta0 in (0, 1] are required")
        if not 0 < self.floor_eps < self.T1:
            raise ConfigError("floor_eps: must lie in (0, T1)")
        if self.threshold <= 1 or self.safety <= 0 or self.base_dt <= 0:
            raise ConfigError("threshold > 1, safety > 0 and base_dt > 0 are required")
        if self.n_knots < 64:
            raise ConfigError("n_knots: at least 64 knots are required")
        if self.riccati_method not in ("modal", "rk4"):
            raise ConfigError("riccati_method: expected modal or rk4")
        if self.search_budget < 1 or not 0 < self.search_theta <= 1:
            raise ConfigError("search_budget >= 1 and search_theta in (0, 1] are required")
        if self.y0 not in ("zero", "target", "file"):
            raise ConfigError("y0: expected zero, target or file")
        if self.y0 == "file" and not self.y0_file:
            raise ConfigError("y0_file: required when y0 = file")
        if self.workers < 1:
            raise ConfigError("workers: must be at least 1")
        return self

    def to_text(self):
        """Effective configuration in the input format (fully explicit)."""
        lines = []
        for f in fields(self):
            v = getattr(self, f.name)
            if f.name == "eps_hat1":
                v = self.eps_hat1_value
            elif f.name == "bump_center":
                v = self.bump_center_value
            elif f.name == "bump_width":
                v = self.bump_width_value
            lines.append(f"{f.name} = {_fmt(v)}")
        return "\n".join(lines) + "\n"

    def digest(self):
        """sha256 of the effective configuration, ignoring the output directory."""
        body = [ln for ln in self.to_text().splitlines() if not ln.startswith("out =")]
        return hashlib.sha256("\n".join(body).encode()).hexdigest()


def _fmt(v):
    if isinstance(v, tuple):
        return ", ".join(_fmt(x) for x in v)
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


_PARSERS = {
    "domain": _pair, "omega": _pair,
    "eps_hat1": _opt_float, "bump_center": _opt_float, "bump_width": _opt_float,
    "stability_sizes": _floats, "recenter_sizes": _floats,
    "riccati_method": str.strip, "y0": str.strip, "y0_file": str.strip, "out": str.strip,
}
_INTS = {"n", "zero_steps", "checkpoint_every", "n_knots", "search_budget", "workers"}
_ALIASES = {"x_lo": ("domain", 0), "x_hi": ("domain", 1),
            "omega_lo": ("omega", 0), "omega_hi": ("omega", 1)}


def _convert(key, text):
    if key in _PARSERS:
        return _PARSERS[key](text)
    if key in _INTS:
        v = float(text)
        if v != int(v):
            raise ValueError("expected an integer")
        return int(v)
    return float(text)


def parse_text(text, source="<config>"):
    names = {f.name for f in fields(ExperimentConfig)}
    values, seen = {}, {}
    partial = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {raw!r}")
        key, val = (s.strip() for s in line.split("=", 1))
        if key in seen:
            raise ConfigError(f"{source}:{lineno}: duplicate key {key!r} "
                              f"(first set on line {seen[key]})")
        seen[key] = lineno
        if key == "T1":
            # accepted as an alternative spelling of s0
            key, val = "s0", repr(-math.log(float(val)))
            if "s0" in seen and seen["s0"] != lineno:
                raise ConfigError(f"{source}:{lineno}: give either T1 or s0, not both")
            seen["s0"] = lineno
        if key in _ALIASES:
            target, idx = _ALIASES[key]
            try:
                partial.setdefault(target, {})[idx] = float(val)
            except ValueError as exc:
                raise ConfigError(f"{source}:{lineno}: {key}: {exc}") from None
            continue
        if key not in names:
            raise ConfigError(f"{source}:{lineno}: unknown key {key!r}")
        try:
            values[key] = _convert(key, val)
        except ValueError as exc:
            raise ConfigError(f"{source}:{lineno}: {key}: {exc}") from None
    base = ExperimentConfig()
    for target, parts in partial.items():
        if target in values:
            raise ConfigError(f"{source}: {target} given both as a pair and by endpoint")
        cur = list(getattr(base, target))
        for idx, v in parts.items():
            cur[idx] = v
        values[target] = tuple(cur)
    return replace(base, **values).validate()


def parse_config(path):
    with open(path) as fh:
        return parse_text(fh.read(), str(path))
