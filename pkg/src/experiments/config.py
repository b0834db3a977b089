from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

from src.kernels.testfunctions import TestFunction, build_test_function
from src.sampling.distributions import KINDS, EntryDistribution, make_distribution
from src.sampling.ensembles import MatrixEnsembleConfig
from src.utils.config import ConfigSource, build_dataclass, load_toml, parse_toml


COVARIANCE = "covariance"
VARIANCE_SPLIT = "variance-split"
WICK = "wick"
OVERLAPS = "overlaps"
GIRKO = "girko"
LOGDET_FIELD = "logdet-field"
DBM_COUPLING = "dbm-coupling"
DBM_RELAXATION = "dbm-relaxation"
HARD_EDGE = "hard-edge"
KERNELS_SELFTEST = "kernels-selftest"

EXPERIMENTS = (
    COVARIANCE,
    VARIANCE_SPLIT,
    WICK,
    OVERLAPS,
    GIRKO,
    LOGDET_FIELD,
    DBM_COUPLING,
    DBM_RELAXATION,
    HARD_EDGE,
    KERNELS_SELFTEST,
)

BACKENDS = ("native", "numpy")


@dataclass
class EnsembleConfig:
    N: int = 128
    distribution: str = "complex-gaussian"
    kappa4: Optional[float] = None
    # "equilibrium": start from Ginibre; "iid": start from the entry distribution at time 0
    start: str = "equilibrium"

    def __post_init__(self) -> None:
        if self.N < 2:
            raise ValueError(f"N must be >= 2, got {self.N}")
        if self.distribution not in KINDS:
            raise ValueError(f"unknown distribution {self.distribution!r} (expected one of {KINDS})")
        if self.start not in ("equilibrium", "iid"):
            raise ValueError(f"start must be 'equilibrium' or 'iid', got {self.start!r}")

    def entry_distribution(self) -> EntryDistribution:
        return make_distribution(self.distribution, self.kappa4)

    def matrix_config(self, seed: int) -> MatrixEnsembleConfig:
        return MatrixEnsembleConfig(N=self.N, distribution=self.entry_distribution(), seed=seed)

    @property
    def kappa4_at_start(self) -> float:
        return 0.0 if self.start == "equilibrium" else self.entry_distribution().fourth_cumulant


@dataclass
class FunctionConfig:
    id: str
    kind: str = "bump"
    center: Optional[complex] = None
    width: Optional[float] = None
    amp: Optional[float] = None
    tilt: Optional[complex] = None
    k: Optional[int] = None
    coeff: Optional[complex] = None
    rho0: Optional[float] = None
    v: Optional[complex] = None
    a: float = 0.0

    def __post_init__(self) -> None:
        if self.kind not in ("bump", "fourier"):
            raise ValueError(f"unknown function kind {self.kind!r}")
        if not (0.0 <= self.a < 0.5):
            raise ValueError(f"rescaling exponent a must lie in [0, 1/2), got {self.a}")

    def build(self, N: Optional[int] = None) -> TestFunction:
        spec = {k: v for k, v in dataclasses.asdict(self).items() if v is not None}
        return build_test_function(spec, N)


@dataclass
class PairConfig:
    f: str
    g: str
    s: float = 0.0
    t: float = 0.0

    def __post_init__(self) -> None:
        if self.s < 0 or self.t < 0:
            raise ValueError(f"pair times must be >= 0, got s={self.s}, t={self.t}")


@dataclass
class QuadratureConfig:
    resolution: int = 40
    kmax: int = 64
    girko_resolution: int = 48


@dataclass
class ExponentConfig:
    nu: float = 0.05
    omega_t: float = 0.2
    omega_K: float = 0.4
    omega_tilde: float = 0.6
    delta0: float = 0.1
    delta1: float = 0.1
    T_exp: float = 10.0


@dataclass
class OutputConfig:
    dir: str = "runs/latest"
    write_samples: bool = False


@dataclass
class CovarianceConfig:
    regime: str = "macro"
    # mesoscopic runs sample at T0 + N^{-2a} s
    T0: float = 0.0
    v: complex = 0j
    a: float = 0.0
    kappa_shift: bool = False

    def __post_init__(self) -> None:
        if self.regime not in ("macro", "meso"):
            raise ValueError(f"regime must be 'macro' or 'meso', got {self.regime!r}")


@dataclass
class VarianceSplitConfig:
    function: str
    s: float = 0.0
    t: float = 0.1
    inner: int = 50
    regime: str = "macro"

    def __post_init__(self) -> None:
        if self.t < self.s:
            raise ValueError(f"need s <= t, got s={self.s}, t={self.t}")
        if self.inner < 2:
            raise ValueError(f"inner count must be >= 2, got {self.inner}")


@dataclass
class WickConfig:
    function: str
    time: float = 0.0
    n_resamples: int = 999
    controls: bool = True


@dataclass
class OverlapsConfig:
    v: complex = 0j
    radius: float = 0.5
    f: Optional[str] = None
    g: Optional[str] = None
    s_window: Tuple[float, float] = (0.0, 0.05)
    t_window: Tuple[float, float] = (0.1, 0.15)
    window_steps: int = 4
    separations: List[float] = field(default_factory=lambda: [0.05, 0.1, 0.2, 0.4])
    shell: float = 0.6
    max_exclusion: float = 1e-3


@dataclass
class GirkoConfig:
    function: str
    sizes: List[int] = field(default_factory=lambda: [64, 128, 256])
    z1: complex = 0j
    z2: complex = 0.5 + 0j
    eta: Optional[float] = None

    def __post_init__(self) -> None:
        if len(self.sizes) < 2 or sorted(self.sizes) != list(self.sizes):
            raise ValueError(f"sizes must be an increasing list of at least two N, got {self.sizes}")


@dataclass
class LogdetConfig:
    points: List[complex] = field(default_factory=lambda: [0j, 0.3 + 0j])
    s: float = 0.0
    t: float = 0.1


@dataclass
class DBMConfig:
    N: int = 256
    dt: float = 1e-4
    i_max: int = 5
    init: str = "semicircle"
    init2: str = "perturbed"
    amp: float = 1.0
    z: complex = 0j
    K: Optional[int] = None
    eps: Optional[float] = None
    t: Optional[float] = None
    times: List[float] = field(default_factory=list)
    n_times: int = 8
    baseline: bool = True
    envelope_exponent: float = 0.1
    index_factor: bool = True
    route_N: int = 64
    route_t: float = 0.5
    route_replicas: int = 500
    route_alpha: float = 0.01
    route_ks: float = 0.05
    propagator_N: int = 16
    propagator_t: float = 0.01
    advection_N: int = 8
    advection_dts: List[float] = field(default_factory=lambda: [1e-3, 5e-4, 2.5e-4, 1.25e-4, 6.25e-5])
    advection_replicas: int = 200
    local_law_t: float = 0.1

    def __post_init__(self) -> None:
        kinds = ("semicircle", "hermitization", "perturbed")
        for name in ("init", "init2"):
            if getattr(self, name) not in kinds:
                raise ValueError(f"{name} must be one of {kinds}, got {getattr(self, name)!r}")
        if self.eps is not None and not (0.0 <= self.eps <= 1.0):
            raise ValueError(f"eps must lie in [0, 1], got {self.eps}")


@dataclass
class HardEdgeConfig:
    z_list: List[complex] = field(default_factory=lambda: [0j, 0.5 + 0j])
    t: Optional[float] = None
    t_exp: float = -0.7
    ks_threshold: float = 0.08


@dataclass
class ExperimentConfig:
    experiment: str
    seed: int = 0
    replicas: int = 200
    batches: int = 0
    threads: int = 1
    backend: str = "native"
    z_threshold: float = 4.0
    ensemble: EnsembleConfig = field(default_factory=EnsembleConfig)
    functions: List[FunctionConfig] = field(default_factory=list)
    pairs: List[PairConfig] = field(default_factory=list)
    quadrature: QuadratureConfig = field(default_factory=QuadratureConfig)
    exponents: ExponentConfig = field(default_factory=ExponentConfig)
    output: OutputConfig = field(default_factory=OutputConfig)
    covariance: CovarianceConfig = field(default_factory=CovarianceConfig)
    variance_split: Optional[VarianceSplitConfig] = None
    wick: Optional[WickConfig] = None
    overlaps: OverlapsConfig = field(default_factory=OverlapsConfig)
    girko: Optional[GirkoConfig] = None
    logdet: LogdetConfig = field(default_factory=LogdetConfig)
    dbm: DBMConfig = field(default_factory=DBMConfig)
    hard_edge: HardEdgeConfig = field(default_factory=HardEdgeConfig)

    def __post_init__(self) -> None:
        if self.experiment not in EXPERIMENTS:
            raise ValueError(f"unknown experiment {self.experiment!r} (expected one of {EXPERIMENTS})")
        if self.backend not in BACKENDS:
            raise ValueError(f"backend must be one of {BACKENDS}, got {self.backend!r}")
        if not (0 <= self.seed < 2**64):
            raise ValueError(f"seed must be a 64-bit unsigned integer, got {self.seed}")
        if self.replicas < 0 or self.threads < 1:
            raise ValueError("replicas must be >= 0 and threads >= 1")
        ids = [f.id for f in self.functions]
        if len(set(ids)) != len(ids):
            raise ValueError(f"duplicate function ids in {ids}")
        for ref in self.referenced_functions():
            if ref not in ids:
                raise ValueError(f"function id {ref!r} is referenced but not defined (have {ids})")

    def referenced_functions(self) -> List[str]:
        refs = [r for p in self.pairs for r in (p.f, p.g)]
        for section in (self.variance_split, self.wick, self.girko):
            if section is not None:
                refs.append(section.function)
        refs.extend(r for r in (self.overlaps.f, self.overlaps.g) if r is not None)
        return refs

    def function(self, fid: str, N: Optional[int] = None) -> TestFunction:
        for f in self.functions:
            if f.id == fid:
                return f.build(N if N is not None else self.ensemble.N)
        raise KeyError(fid)

    def to_json(self) -> Dict[str, Any]:
        return dataclasses.asdict(self)


def _apply_overrides(table: Dict[str, Any], overrides: Dict[str, Any]) -> Dict[str, Any]:
    out = dict(table)
    for key, value in overrides.items():
        if value is None:
            continue
        if key == "out":
            out["output"] = {**out.get("output", {}), "dir": str(value)}
        else:
            out[key] = value
    return out


def config_from_table(table: Dict[str, Any], src: Optional[ConfigSource] = None, **overrides: Any) -> ExperimentConfig:
    return build_dataclass(ExperimentConfig, _apply_overrides(table, overrides), src)


def load_config(path: str | Path, **overrides: Any) -> ExperimentConfig:
    """Read and validate a TOML experiment file; keyword overrides (seed, replicas, threads, out) win."""
    table, src = load_toml(path)
    return config_from_table(table, src, **overrides)


def parse_config(text: str, **overrides: Any) -> ExperimentConfig:
    table, src = parse_toml(text)
    return config_from_table(table, src, **overrides)
