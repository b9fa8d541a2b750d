from typing import Dict, List, Literal, Optional

from pydantic import BaseModel, Field


class Health(BaseModel):
    status: str = "ok"
    models: int


class KernelInfo(BaseModel):
    family: Literal["rbf", "ard"]
    lengthscales: List[float]
    noise_variance: float


class ModelInfo(BaseModel):
    id: str
    kind: Literal["exact", "distilled"]
    d: int
    kernel: KernelInfo
    n: Optional[int] = None
    m: Optional[int] = None
    b: Optional[int] = None
    lml: Optional[float] = None


class TrainRequest(BaseModel):
    X: List[List[float]] = Field(..., min_length=2)
    y: List[float] = Field(..., min_length=2)
    kernel: Literal["rbf", "ard"] = "rbf"
    lengthscale: float = Field(1.0, gt=0)
    noise_variance: float = Field(0.1, gt=0)
    steps: int = Field(200, ge=0)
    learning_rate: float = Field(0.05, gt=0)
    standardize: bool = True


class DistillRequest(BaseModel):
    m: int = Field(100, ge=1)
    b: int = Field(10, ge=1)
    mode: Literal["analytic", "paper"] = "analytic"
    eta: Optional[float] = Field(None, gt=0)
    iterations: int = Field(100, ge=0)
    line_search: bool = True
    seed: int = 0


class IterationRecord(BaseModel):
    iteration: int
    objective: float
    step_size: float


class DistillResponse(BaseModel):
    model: ModelInfo
    trace: List[IterationRecord]


class PredictRequest(BaseModel):
    X: List[List[float]] = Field(..., min_length=1)


class PredictResponse(BaseModel):
    mean: List[float]
    variance: List[float]
    clamped: List[bool]


class ExperimentRequest(BaseModel):
    """Any :class:`gpdistill.harness.RunConfig` field except ``experiment``."""

    config: Dict[str, object] = Field(default_factory=dict)
