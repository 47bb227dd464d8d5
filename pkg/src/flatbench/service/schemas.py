"""Request and response bodies for the session API."""

from pydantic import BaseModel, Field


class SessionCreate(BaseModel):
    """Configuration for a new flattening session."""

    seed: int = Field(ge=0)
    method: str = Field(default="human", min_length=1, max_length=40)
    max_steps: int = Field(default=30, ge=1, le=1000)
    stop_threshold: float = Field(default=0.99, gt=0.0, lt=1.0)
    crumple_folds: int = Field(default=2, ge=0, le=8)
    crumple_intensity: float = Field(default=0.75, ge=0.0, le=1.0)


class SessionCreated(BaseModel):
    id: str
    seed: int
    method: str
    step: int
    status: str


class ImageRef(BaseModel):
    """Content-addressed image; fetch the PNG at url."""

    hash: str
    url: str


class StateOut(BaseModel):
    step: int
    status: str
    coverage: float
    relative_coverage: float
    com: list[float] | None
    observation: ImageRef
    heatmap: ImageRef


class ActionIn(BaseModel):
    """PolicyAction payload; direction must be unit within 1e-3."""

    method: str = Field(default="human", min_length=1, max_length=40)
    op_point: list[float] = Field(min_length=2, max_length=2)
    direction: list[float] = Field(min_length=2, max_length=2)


class ActionOut(BaseModel):
    step: int
    R_t: float
    status: str
    no_contact: bool
