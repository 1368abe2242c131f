"""
Report models shared by the command line, the HTTP surface and the tests
"""

import json
import logging
import math
from pathlib import Path
from typing import Any, Dict, List, Optional

import numpy as np
from pydantic import BaseModel, Field, field_validator

logger = logging.getLogger(__name__)


def _plain(value: Any) -> Any:
    """numpy scalars and arrays to JSON-safe Python values; non-finite floats become strings"""
    if isinstance(value, np.ndarray):
        return [_plain(v) for v in value.tolist()]
    if isinstance(value, (np.floating, float)):
        value = float(value)
        return value if math.isfinite(value) else str(value)
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (np.bool_,)):
        return bool(value)
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    return value


class CheckResult(BaseModel):
    """One oracle comparison: an observed value against its bound"""

    name: str
    anchor: str
    value: Optional[float] = None
    bound: Optional[float] = None
    passed: bool
    detail: Optional[str] = None

    @field_validator("value", "bound", mode="before")
    @classmethod
    def finite_or_none(cls, v):
        if v is None:
            return None
        v = float(v)
        return v if math.isfinite(v) else None


class ExperimentReport(BaseModel):
    """Outcome of one experiment; reproducible from (id, params, seed)"""

    id: str
    params: Dict[str, Any] = Field(default_factory=dict)
    seed: int = 0
    checks: List[CheckResult] = Field(default_factory=list)
    artifacts: Dict[str, Any] = Field(default_factory=dict)
    failed_stage: Optional[str] = None
    error: Optional[str] = None
    error_exit_code: Optional[int] = None

    @field_validator("params", "artifacts", mode="before")
    @classmethod
    def json_safe(cls, v):
        return _plain(v)

    @property
    def passed(self) -> bool:
        return self.failed_stage is None and all(check.passed for check in self.checks)

    @property
    def exit_code(self) -> int:
        if self.error_exit_code is not None:
            return self.error_exit_code
        return 0 if self.passed else 1

    def failing(self) -> List[str]:
        return [check.name for check in self.checks if not check.passed]

    def to_json(self) -> str:
        payload = self.model_dump(mode="json")
        payload["passed"] = self.passed
        return json.dumps(payload, sort_keys=True, indent=2)

    def write(self, path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(self.to_json() + "\n")
        logger.info(f"Report written to {path}")
        return path


def check(name: str, anchor: str, value, bound, passed, detail: Optional[str] = None) -> CheckResult:
    """Build a CheckResult, coercing numpy scalars"""
    result = CheckResult(
        name=name,
        anchor=anchor,
        value=None if value is None else float(value),
        bound=None if bound is None else float(bound),
        passed=bool(passed),
        detail=detail,
    )
    level = logging.INFO if result.passed else logging.WARNING
    logger.log(level, f"{'PASS' if result.passed else 'FAIL'} {name}: value={value} bound={bound}")
    return result


def at_most(name: str, anchor: str, value, bound, detail: Optional[str] = None) -> CheckResult:
    value = float(value)
    return check(name, anchor, value, bound, math.isfinite(value) and value <= bound, detail)


def at_least(name: str, anchor: str, value, bound, detail: Optional[str] = None) -> CheckResult:
    value = float(value)
    return check(name, anchor, value, bound, math.isfinite(value) and value >= bound, detail)


def holds(name: str, anchor: str, passed, detail: Optional[str] = None) -> CheckResult:
    return check(name, anchor, None, None, passed, detail)
