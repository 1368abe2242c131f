#!/usr/bin/env python3
"""
Riesz Laboratory
HTTP entry point for the experiment runner
"""

import logging
from typing import Any, Dict, List, Optional

import uvicorn
from dotenv import load_dotenv
from fastapi import FastAPI, HTTPException
from pydantic import BaseModel, Field

from src.experiments.reports import ExperimentReport
from src.experiments.runner import expand, run_bounded, run_hn, run_unbounded, run_verify
from src.utils.config import Config
from src.utils.errors import RieszLabError

# Load environment variables
load_dotenv()

config = Config()

# Configure logging
logging.basicConfig(level=config.log_level)
logger = logging.getLogger(__name__)

# Initialize FastAPI app
app = FastAPI(
    title="Riesz Laboratory",
    description="Numerical experiments on Riesz transforms and Hardy spaces of the ax+b group",
    version="0.1.0"
)


class VerifyRequest(BaseModel):
    """Request model for an oracle suite"""
    suite: str
    tol: Optional[float] = None
    seed: Optional[int] = None


class ExpandRequest(BaseModel):
    """Request model for derived kernel expansions"""
    i: int = Field(0, ge=0, le=2)
    j: int = Field(0, ge=0, le=2)
    order: Optional[int] = Field(None, ge=1)


class UnboundedRequest(BaseModel):
    """Request model for a counterexample scan"""
    kind: str
    i: int = Field(0, ge=0, le=2)
    j: int = Field(0, ge=0, le=2)
    T_list: Optional[List[float]] = None
    T_max: Optional[float] = None
    tol: Optional[float] = None
    seed: Optional[int] = None
    samples: int = Field(10000, ge=100)
    direct: bool = False
    budget: Optional[int] = None


class BoundedRequest(BaseModel):
    """Request model for a boundedness check"""
    check: str
    seed: Optional[int] = None
    budget: Optional[int] = None


class HNRequest(BaseModel):
    """Request model for the h_N experiment"""
    N_list: List[int] = Field(default_factory=lambda: [2, 3, 4])
    p: int = 4
    q: int = 2
    draws: int = Field(20, ge=1)
    patches: int = Field(16, ge=2)
    heights: int = Field(4, ge=1)
    i: int = Field(0, ge=0, le=2)
    j: int = Field(0, ge=0, le=2)
    seed: Optional[int] = None
    L_factor: float = 1.05


def _respond(label: str, run) -> Dict[str, Any]:
    try:
        result = run()
    except RieszLabError as e:
        logger.error(f"Error running {label}: {e}")
        status = 400 if e.exit_code == 2 else 500
        raise HTTPException(status_code=status, detail=f"{type(e).__name__}: {e}")
    except Exception as e:
        logger.error(f"Error running {label}: {e}")
        raise HTTPException(status_code=500, detail=str(e))
    if isinstance(result, ExperimentReport):
        payload = result.model_dump(mode="json")
        payload["passed"] = result.passed
        payload["exit_code"] = result.exit_code
        return payload
    return result


@app.post("/verify")
async def verify(request: VerifyRequest):
    """Run one oracle suite"""
    logger.info(f"Running suite {request.suite}")
    return _respond(f"suite {request.suite}", lambda: run_verify(request.suite, request.tol, request.seed))


@app.post("/expand")
async def expand_kernel(request: ExpandRequest):
    """Derived expansions of k_ij and X_2 k_ij"""
    return _respond(f"expansion of k_{request.i}{request.j}", lambda: expand(request.i, request.j, request.order))


@app.post("/unbounded")
async def unbounded(request: UnboundedRequest):
    """Build a counterexample kit and scan its weight"""
    logger.info(f"Running unboundedness scan {request.kind}")
    return _respond(
        f"unboundedness scan {request.kind}",
        lambda: run_unbounded(
            request.kind, request.i, request.j, T_list=request.T_list, T_max=request.T_max, tol=request.tol,
            seed=request.seed, samples=request.samples, direct=request.direct, budget=request.budget,
        ),
    )


@app.post("/bounded")
async def bounded(request: BoundedRequest):
    """Numerical evidence for a bounded operator"""
    logger.info(f"Running boundedness check {request.check}")
    return _respond(f"check {request.check}", lambda: run_bounded(request.check, request.seed, request.budget))


@app.post("/hn")
async def hn(request: HNRequest):
    """Level sets and norms of the h_N family"""
    logger.info(f"Running h_N experiment for N in {request.N_list}")
    return _respond(
        "h_N experiment",
        lambda: run_hn(
            request.N_list, request.p, request.q, request.draws, request.patches, request.heights,
            request.i, request.j, seed=request.seed, L_factor=request.L_factor,
        ),
    )


@app.get("/health")
async def health_check():
    """Health check endpoint"""
    return {"status": "healthy", "config_valid": config.validate_config(), "threads": config.worker_count()}


if __name__ == "__main__":
    uvicorn.run(
        "main:app",
        host=config.host,
        port=config.port,
        reload=config.debug,
        log_level=config.log_level.lower()
    )
