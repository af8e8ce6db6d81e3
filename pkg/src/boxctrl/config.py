"""Scenario files: strict TOML in, validated run descriptions out.

Every command reads one section of a TOML file. Unknown sections or keys are
rejected outright (scenario files are reproducibility artifacts — a typo must
fail loudly, not silently fall back to a default), and every numeric field is
re-validated against the constraints of the module it feeds.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

if sys.version_info >= (3, 11):  # pragma: no cover - exercised by interpreter choice
    import tomllib
else:
    import tomli as tomllib

from .errors import ConfigError
from .operators import SpectralState, BoxGeometry

__all__ = [
    "TransferConfig",
    "ResonanceConfig",
    "StabilityConfig",
    "OperatorsConfig",
    "load_scenario",
    "parse_state",
]

_KNOWN_SECTIONS = {"transfer", "resonance", "stability", "operators"}


def _read_toml(path: str | Path) -> dict:
    p = Path(path)
    try:
        raw = p.read_bytes()
    except OSError as exc:
        raise ConfigError(f"cannot read scenario file {p}: {exc}") from exc
    try:
        data = tomllib.loads(raw.decode("utf-8"))
    except (UnicodeDecodeError, tomllib.TOMLDecodeError) as exc:
        raise ConfigError(f"scenario file {p} is not valid TOML: {exc}") from exc
    unknown = set(data) - _KNOWN_SECTIONS
    if unknown:
        raise ConfigError(
            f"unknown section(s) {sorted(unknown)} in {p}; "
            f"expected a subset of {sorted(_KNOWN_SECTIONS)}"
        )
    return data


class _Section:
    """Key-checked accessor over one TOML table."""

    def __init__(self, name: str, table: dict):
        if not isinstance(table, dict):
            raise ConfigError(f"section [{name}] must be a table")
        self.name = name
        self.table = dict(table)
        self.seen: set[str] = set()

    def _fetch(self, key: str, default):
        self.seen.add(key)
        return self.table.get(key, default)

    def require(self, key: str):
        if key not in self.table:
            raise ConfigError(f"[{self.name}] is missing required key '{key}'")
        return self._fetch(key, None)

    def number(self, key: str, default=None, *, minimum=None, maximum=None,
               strict_min=False, required=False) -> float:
        raw = self.require(key) if required else self._fetch(key, default)
        if not isinstance(raw, (int, float)) or isinstance(raw, bool):
            raise ConfigError(f"[{self.name}] {key} must be a number, got {raw!r}")
        x = float(raw)
        if minimum is not None and (x <= minimum if strict_min else x < minimum):
            op = ">" if strict_min else ">="
            raise ConfigError(f"[{self.name}] {key} must be {op} {minimum}, got {x}")
        if maximum is not None and x > maximum:
            raise ConfigError(f"[{self.name}] {key} must be <= {maximum}, got {x}")
        return x

    def integer(self, key: str, default=None, *, minimum=None, maximum=None,
                required=False) -> int:
        raw = self.require(key) if required else self._fetch(key, default)
        if not isinstance(raw, int) or isinstance(raw, bool):
            raise ConfigError(f"[{self.name}] {key} must be an integer, got {raw!r}")
        if minimum is not None and raw < minimum:
            raise ConfigError(f"[{self.name}] {key} must be >= {minimum}, got {raw}")
        if maximum is not None and raw > maximum:
            raise ConfigError(f"[{self.name}] {key} must be <= {maximum}, got {raw}")
        return raw

    def state(self, key: str, default="ground"):
        return self._fetch(key, default)

    def number_list(self, key: str, default):
        raw = self._fetch(key, list(default))
        if not isinstance(raw, list) or not raw or not all(
            isinstance(x, (int, float)) and not isinstance(x, bool) for x in raw
        ):
            raise ConfigError(f"[{self.name}] {key} must be a non-empty list of numbers")
        return [float(x) for x in raw]

    def integer_list(self, key: str, default):
        raw = self._fetch(key, list(default))
        if not isinstance(raw, list) or not raw or not all(
            isinstance(x, int) and not isinstance(x, bool) for x in raw
        ):
            raise ConfigError(f"[{self.name}] {key} must be a non-empty list of integers")
        return [int(x) for x in raw]

    def finish(self) -> None:
        unknown = set(self.table) - self.seen
        if unknown:
            raise ConfigError(
                f"unknown key(s) {sorted(unknown)} in [{self.name}]; "
                f"known keys: {sorted(self.seen)}"
            )


def parse_state(spec, dim: int, geometry: BoxGeometry, *, where: str) -> SpectralState:
    """Build a normalized state from a scenario-file description.

    Accepts "ground", "excited-k" (the k-th excited level, i.e. mode k+1), or
    a list of real coefficients (padded/truncated checking is refused — the
    list length must equal the basis size).
    """
    if isinstance(spec, str):
        if spec == "ground":
            return SpectralState.basis_mode(1, dim, geometry)
        if spec.startswith("excited-"):
            try:
                k = int(spec.split("-", 1)[1])
            except ValueError:
                raise ConfigError(f"{where}: malformed state spec {spec!r}") from None
            if k < 1 or k + 1 > dim:
                raise ConfigError(f"{where}: excited level {k} outside 1..{dim - 1}")
            return SpectralState.basis_mode(k + 1, dim, geometry)
        raise ConfigError(f"{where}: unknown state spec {spec!r}")
    if isinstance(spec, list):
        if len(spec) != dim:
            raise ConfigError(
                f"{where}: coefficient list has length {len(spec)}, basis size is {dim}"
            )
        if not all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in spec):
            raise ConfigError(f"{where}: coefficient list must hold numbers")
        vec = np.asarray(spec, dtype=float)
        norm = np.linalg.norm(vec)
        if norm == 0.0:
            raise ConfigError(f"{where}: coefficient list is all zero")
        return SpectralState(vec / norm, geometry)
    raise ConfigError(f"{where}: state spec must be a string or a list, got {type(spec).__name__}")


@dataclass(frozen=True)
class TransferConfig:
    ell0: float
    d0: float
    ell1: float
    d1: float
    epsilon: float
    rate_bound: float
    dim: int
    seed: int
    starts: int
    step: float | None
    initial_spec: object
    target_spec: object
    segment_schedule: tuple[int, ...]
    horizon_schedule: tuple[float, ...]
    n_max: int

    def initial_state(self) -> SpectralState:
        return parse_state(self.initial_spec, self.dim, BoxGeometry(self.ell0, self.d0),
                           where="[transfer] initial")

    def target_state(self) -> SpectralState:
        return parse_state(self.target_spec, self.dim, BoxGeometry(self.ell1, self.d1),
                           where="[transfer] target")


@dataclass(frozen=True)
class ResonanceConfig:
    lam: float
    delta: float
    dim: int
    max_index: int
    scan_max_index: int
    eta_max: float
    grid_size: int
    tol: float
    spectrum_points: int


@dataclass(frozen=True)
class StabilityConfig:
    lam: float
    delta: float
    ell0: float
    d0: float
    rate_bound: float
    amplitudes: tuple[float, ...]
    horizon: float
    dim: int
    epsilon: float
    n_check: int
    m_check: int
    n_list: tuple[int, ...]
    step: float | None
    psi_spec: object = field(default="ground")

    def psi(self) -> SpectralState:
        return parse_state(self.psi_spec, self.dim, BoxGeometry(self.ell0, self.d0),
                           where="[stability] psi")


@dataclass(frozen=True)
class OperatorsConfig:
    dim: int
    lam: float
    delta: float


def _optional_step(sec: _Section) -> float | None:
    step = sec.number("step", 0.0, minimum=0.0)
    return None if step == 0.0 else step


def _load_transfer(sec: _Section) -> TransferConfig:
    cfg = TransferConfig(
        ell0=sec.number("ell0", required=True, minimum=0.0, strict_min=True),
        d0=sec.number("d0", 0.0),
        ell1=sec.number("ell1", required=True, minimum=0.0, strict_min=True),
        d1=sec.number("d1", 0.0),
        epsilon=sec.number("epsilon", required=True, minimum=0.0, strict_min=True),
        rate_bound=sec.number("rate_bound", 1.0, minimum=0.0, strict_min=True),
        dim=sec.integer("dim", 16, minimum=2),
        seed=sec.integer("seed", 0, minimum=0),
        starts=sec.integer("starts", 8, minimum=1),
        step=_optional_step(sec),
        initial_spec=sec.state("initial"),
        target_spec=sec.state("target"),
        segment_schedule=tuple(sec.integer_list("segments", [20, 40, 80])),
        horizon_schedule=tuple(sec.number_list("horizons", [2.0, 5.0, 10.0])),
        n_max=sec.integer("n_max", 1024, minimum=1),
    )
    if any(s < 1 for s in cfg.segment_schedule):
        raise ConfigError("[transfer] segments must all be >= 1")
    if any(t <= 0 for t in cfg.horizon_schedule):
        raise ConfigError("[transfer] horizons must all be positive")
    sec.finish()
    # fail fast on malformed state specs
    cfg.initial_state()
    cfg.target_state()
    return cfg


def _load_resonance(sec: _Section) -> ResonanceConfig:
    dim = sec.integer("dim", 64, minimum=2)
    cfg = ResonanceConfig(
        lam=sec.number("lam", required=True),
        delta=sec.number("delta", required=True),
        dim=dim,
        max_index=sec.integer("max_index", 30, minimum=2, maximum=dim),
        scan_max_index=sec.integer("scan_max_index", min(30, dim // 2), minimum=2,
                                   maximum=dim // 2),
        eta_max=sec.number("eta_max", 0.1, minimum=0.0, strict_min=True),
        grid_size=sec.integer("grid_size", 20, minimum=1),
        tol=sec.number("tol", 1e-8, minimum=0.0, strict_min=True),
        spectrum_points=sec.integer("spectrum_points", 11, minimum=2),
    )
    sec.finish()
    return cfg


def _load_stability(sec: _Section) -> StabilityConfig:
    cfg = StabilityConfig(
        lam=sec.number("lam", 1.0),
        delta=sec.number("delta", 1.0),
        ell0=sec.number("ell0", 1.0, minimum=0.0, strict_min=True),
        d0=sec.number("d0", 0.0),
        rate_bound=sec.number("rate_bound", 1.0, minimum=0.0, strict_min=True),
        amplitudes=tuple(sec.number_list("amplitudes", [0.8, -0.5, 0.3, -0.7])),
        horizon=sec.number("horizon", 2.0, minimum=0.0, strict_min=True),
        dim=sec.integer("dim", 16, minimum=2),
        epsilon=sec.number("epsilon", 0.5, minimum=0.0, strict_min=True),
        n_check=sec.integer("n_check", 8, minimum=0),
        m_check=sec.integer("m_check", 0, minimum=0),
        n_list=tuple(sec.integer_list("n_list", [8, 16, 32, 64])),
        step=_optional_step(sec),
        psi_spec=sec.state("psi"),
    )
    if cfg.epsilon >= 1.0:
        raise ConfigError("[stability] epsilon must lie strictly below 1")
    if any(b <= a for a, b in zip(cfg.n_list[:-1], cfg.n_list[1:])):
        raise ConfigError("[stability] n_list must be strictly increasing")
    rb = cfg.rate_bound
    if any(abs(a) >= rb for a in cfg.amplitudes):
        raise ConfigError("[stability] amplitudes must stay strictly inside the rate bound")
    sec.finish()
    cfg.psi()
    return cfg


def _load_operators(sec: _Section) -> OperatorsConfig:
    cfg = OperatorsConfig(
        dim=sec.integer("dim", 32, minimum=2),
        lam=sec.number("lam", 1.0),
        delta=sec.number("delta", 1.0),
    )
    sec.finish()
    return cfg


_LOADERS = {
    "transfer": _load_transfer,
    "resonance": _load_resonance,
    "stability": _load_stability,
    "operators": _load_operators,
}


def load_scenario(path: str | Path, command: str):
    """Parse and validate the section of a scenario file one command needs."""
    if command not in _LOADERS:
        raise ValueError(f"unknown command {command!r}")
    data = _read_toml(path)
    if command not in data:
        raise ConfigError(f"scenario file {path} has no [{command}] section")
    return _LOADERS[command](_Section(command, data[command]))
