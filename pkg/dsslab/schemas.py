from typing import Annotated, Literal, Optional, Union

from pydantic import BaseModel, Field, model_validator


# SYSTEM / CONTROLLER
class SystemConfig(BaseModel):
    Lambda: list[float] = Field(..., description="Диагональ Λ (скорости переноса)")
    H: list[list[float]]
    B: list[list[float]]


class ControllerConfig(BaseModel):
    K: list[list[float]]
    alpha: float
    eta0: Union[list[float], Literal["compatible"], None] = Field(
        default=None, description="η⁰; None - нули, 'compatible' - МНК-решение условия согласования"
    )


# CERTIFICATE
class CertificateConfig(BaseModel):
    mode: Literal["search", "explicit", "none"] = "search"
    mu: Optional[Annotated[float, Field(gt=0)]] = None
    nu: Optional[Annotated[float, Field(gt=0)]] = None
    D: Optional[list[float]] = None
    alpha: Optional[Annotated[float, Field(gt=0)]] = None
    beta1: Annotated[float, Field(gt=0)] = 1.0
    beta2: Annotated[float, Field(gt=0)] = 1.0
    beta3: Annotated[float, Field(gt=0)] = 1.0
    zeta: Optional[Annotated[float, Field(gt=0)]] = None
    budget: Optional[Annotated[int, Field(ge=1)]] = None
    chi_beta: Optional[Literal["beta1", "beta2", "beta3"]] = None
    omega_cross_block: Optional[Literal["printed", "transposed"]] = None

    @model_validator(mode="after")
    def explicit_fields_present(self):
        if self.mode == "explicit":
            missing = [k for k in ("mu", "nu", "D", "zeta") if getattr(self, k) is None]
            if missing:
                raise ValueError(f"explicit certificate requires {', '.join(missing)}")
        return self


# INITIAL DATA / GRID
class ProfileConfig(BaseModel):
    kind: Literal["zero", "cosine", "ramp", "samples"] = "cosine"
    modes: list[float] = Field(default_factory=lambda: [2.0, 1.0])
    amplitude: float = 1.0
    slope: list[float] = Field(default_factory=list)
    offset: list[float] = Field(default_factory=list)
    samples: Optional[list[list[float]]] = None

    @model_validator(mode="after")
    def kind_fields_present(self):
        if self.kind == "samples" and not self.samples:
            raise ValueError("profile kind 'samples' requires samples")
        if self.kind == "ramp" and not self.slope:
            raise ValueError("profile kind 'ramp' requires slope")
        return self


class GridConfig(BaseModel):
    M: Annotated[int, Field(ge=1)] = 200
    dt: Union[Annotated[float, Field(gt=0)], Literal["auto"], None] = None
    mode: Literal["exact", "upwind"] = "exact"
    snapshot_stride: Annotated[float, Field(gt=0)] = 0.1
    monitor_stride: Annotated[int, Field(ge=1)] = 1


# MEASUREMENT
class DisturbanceConfig(BaseModel):
    kind: Literal["zero", "constant", "step", "decaying", "random"] = "zero"
    amplitude: Annotated[float, Field(ge=0)] = 0.0
    rate: Annotated[float, Field(gt=0)] = 1.0
    seed: Optional[int] = None
    dwell: Annotated[float, Field(gt=0)] = 0.05
    t_on: Annotated[float, Field(ge=0)] = 1.0


class QuantizerConfig(BaseModel):
    kind: Literal["floor", "range_sensitivity"]
    ell: Optional[Annotated[float, Field(gt=0)]] = None
    delta_q: Optional[Annotated[float, Field(gt=0)]] = None
    M_q: Optional[Annotated[float, Field(gt=0)]] = None
    eps: Annotated[float, Field(gt=0)] = 0.1

    @model_validator(mode="after")
    def kind_fields_present(self):
        if self.kind == "floor" and self.ell is None:
            raise ValueError("floor quantizer requires ell")
        if self.kind == "range_sensitivity" and (self.delta_q is None or self.M_q is None):
            raise ValueError("range_sensitivity quantizer requires delta_q and M_q")
        return self


CheckName = Literal[
    "certificate",
    "compatibility",
    "sandwich",
    "dissipation",
    "integrated",
    "dss",
    "iss",
    "invariant_sets",
    "decay",
]


# EXPERIMENT
class ExperimentConfig(BaseModel):
    name: str = "experiment"
    system: SystemConfig
    controller: ControllerConfig
    certificate: CertificateConfig = Field(default_factory=CertificateConfig)
    profile: ProfileConfig = Field(default_factory=ProfileConfig)
    grid: GridConfig = Field(default_factory=GridConfig)
    T: Annotated[float, Field(gt=0, description="Горизонт моделирования")]
    disturbance: Optional[DisturbanceConfig] = None
    quantizer: Optional[QuantizerConfig] = None
    output_dir: Optional[str] = None
    checks: list[CheckName] = Field(default_factory=lambda: ["certificate"])
    seed: int = 0

    @model_validator(mode="after")
    def single_measurement_kind(self):
        if (
            self.quantizer is not None
            and self.disturbance is not None
            and self.disturbance.kind != "zero"
        ):
            raise ValueError("quantizer and additive disturbance are mutually exclusive")
        return self


# REPORTS
class CheckOutcome(BaseModel):
    status: Literal["pass", "fail", "inapplicable"]
    detail: str = ""


class Summary(BaseModel):
    name: str
    seed: int
    exit_code: int
    checks: dict[str, CheckOutcome] = Field(default_factory=dict)
    certificate_feasible: Optional[bool] = None
    T_eps: Optional[float] = None
    ultimate_maxnorm: Optional[float] = None
    gamma_eps: Optional[float] = None
    delta_q: Optional[float] = None
    initial_maxnorm: Optional[float] = None
    final_maxnorm: Optional[float] = None
    decay_time: Optional[float] = None
    Mx0: Optional[float] = None
    practical_constant: Optional[float] = None
    dss_gain: Optional[float] = None
    blow_up_time: Optional[float] = None
    warnings: list[str] = Field(default_factory=list)


class SolverSnapshot(BaseModel):
    mode: Literal["exact", "upwind"]
    M: int
    dt: float
    step: int
    eta: list[float]
    history: list[list[float]] = Field(default_factory=list)
    history_newest: int = 0
    field: Optional[list[list[float]]] = None
