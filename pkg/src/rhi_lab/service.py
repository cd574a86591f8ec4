"""HTTP facade over the engine.

Thin by design: each endpoint validates the request shape with pydantic,
hands the payload to the matching ``cli.run_*`` helper and returns its JSON
dict unchanged, so command-line and HTTP callers see identical reports.
Engine errors map to 400 with the same parse/domain/range prefixes the CLI
prints.  Run with ``uvicorn rhi_lab.service:app``.
"""

from __future__ import annotations

from typing import Any, Dict, List, Optional

from fastapi import FastAPI, HTTPException
from pydantic import BaseModel, Field

from . import __version__
from .cli import (
    run_constants,
    run_grid,
    run_profile,
    run_sharpness,
    run_sweep,
    run_verify,
)
from .core import DomainError, ParseError, RangeError

app = FastAPI(title="rhi-lab", version=__version__)


class VerifyRequest(BaseModel):
    theorem: str
    weight: Dict[str, Any]
    measures: Optional[List[Dict[str, Any]]] = None
    r: Optional[str] = None
    interval: Optional[List[str]] = Field(default=None, min_length=2, max_length=2)
    triple: Optional[List[str]] = Field(default=None, min_length=3, max_length=3)
    regions: Optional[List[List[str]]] = None
    lam0: Optional[str] = None
    delta: Optional[str] = None
    depth: int = 6
    tol: Optional[float] = None


class ConstantsRequest(BaseModel):
    weight: Dict[str, Any]
    measures: Optional[List[Dict[str, Any]]] = None
    kind: str = "fw"
    p: Optional[str] = None
    depth: int = 6


class SweepRequest(BaseModel):
    theorem: str
    corpus: str = "random"
    count: int = Field(default=100, ge=1)
    seed: int = 0
    r: Optional[str] = None
    n: int = Field(default=1, ge=1)
    depth: int = Field(default=3, ge=0)
    pieces: int = Field(default=6, ge=2)
    tol: Optional[float] = None


class SharpnessRequest(BaseModel):
    variant: str = "t3.1.first"
    delta: str
    r: str
    pieces: Optional[int] = None
    budget: int = Field(default=400, ge=1)
    seed: int = 0


class GridRequest(BaseModel):
    measures: List[Dict[str, Any]]
    depth: int = Field(default=1, ge=0)
    root: Optional[List[List[str]]] = None


class ProfileRequest(BaseModel):
    weight: Dict[str, Any]
    op: str = "M"
    interval: Optional[List[str]] = Field(default=None, min_length=2, max_length=2)
    points: int = Field(default=8, ge=0)


class VerdictResponse(BaseModel):
    theorem: str
    params: Dict[str, Any]
    lhs: str
    rhs: str
    ratio: str
    holds: bool
    exact: bool
    deltaSource: str
    witness: Optional[Any] = None


class ConstantResponse(BaseModel):
    kind: str
    value: str
    exact: bool
    isLowerBound: bool
    refinementDepth: Optional[int] = None
    witness: Optional[Any] = None


class SweepResponse(BaseModel):
    theorem: str
    corpus: str
    seed: int
    count: int
    holds: int
    worstRatio: float
    failures: List[VerdictResponse]


def _run(fn, payload: dict) -> dict:
    try:
        return fn(payload)
    except ParseError as exc:
        raise HTTPException(status_code=400, detail=f"parse error: {exc}") from None
    except RangeError as exc:
        raise HTTPException(status_code=400, detail=f"range error: {exc}") from None
    except DomainError as exc:
        raise HTTPException(status_code=400, detail=f"domain error: {exc}") from None


@app.get("/health")
def health() -> Dict[str, str]:
    return {"status": "ok", "version": __version__}


@app.post("/verify", response_model=VerdictResponse)
def post_verify(req: VerifyRequest):
    return _run(run_verify, req.model_dump(exclude_none=True))


@app.post("/constants", response_model=ConstantResponse)
def post_constants(req: ConstantsRequest):
    return _run(run_constants, req.model_dump(exclude_none=True))


@app.post("/sweep", response_model=SweepResponse)
def post_sweep(req: SweepRequest):
    return _run(run_sweep, req.model_dump(exclude_none=True))


@app.post("/sharpness")
def post_sharpness(req: SharpnessRequest) -> Dict[str, Any]:
    return _run(run_sharpness, req.model_dump(exclude_none=True))


@app.post("/grid")
def post_grid(req: GridRequest) -> Dict[str, Any]:
    return _run(run_grid, req.model_dump(exclude_none=True))


@app.post("/profile")
def post_profile(req: ProfileRequest) -> Dict[str, str]:
    return _run(run_profile, req.model_dump(exclude_none=True))
