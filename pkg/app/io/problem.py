"""
Read and write problem files.

A problem file is JSON: kind ("states" | "channels"), priors, matrices (density
matrices) or kraus (one Kraus list per channel), free-form metadata. Complex entries
are [re, im] pairs.
"""
import json
import logging
from pathlib import Path
from typing import Any, Dict, Optional, Union

from pydantic import ValidationError

from app.core.errors import ProblemParseError, ProblemValidationError
from app.schemas.problem import ProblemFile, matrix_to_pairs
from app.services.exclusion import ChannelEnsemble, StateEnsemble

logger = logging.getLogger(__name__)

Ensemble = Union[StateEnsemble, ChannelEnsemble]


def _first_error(exc: ValidationError) -> ProblemValidationError:
    err = exc.errors()[0]
    path = ".".join(str(part) for part in err["loc"])
    message = err["msg"]
    if message.startswith("Value error, "):
        message = message[len("Value error, "):]
    return ProblemValidationError(path, message)


def load_problem(data: Dict[str, Any]) -> ProblemFile:
    try:
        return ProblemFile.model_validate(data)
    except ValidationError as exc:
        raise _first_error(exc) from None


def parse_problem(path: Union[str, Path]) -> Ensemble:
    """
    Validated ensemble from a problem file.

    Raises ProblemParseError for malformed JSON (with line and column) and
    ProblemValidationError naming the offending field for everything else.
    """
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ProblemParseError(f"{path.name}: {exc.msg}", exc.lineno, exc.colno) from None
    if not isinstance(data, dict):
        raise ProblemParseError(f"{path.name}: top level must be a JSON object", 1, 1)
    ensemble = load_problem(data).to_ensemble()
    logger.debug("parsed %s: %d hypotheses", path.name, ensemble.r)
    return ensemble


def serialize_problem(ensemble: Ensemble, metadata: Optional[Dict[str, Any]] = None) -> Dict[str, Any]:
    """JSON-ready dict; floats are written at full precision so parsing it back is exact."""
    out: Dict[str, Any] = {"priors": [float(p) for p in ensemble.priors]}
    if isinstance(ensemble, StateEnsemble):
        out["kind"] = "states"
        out["matrices"] = [matrix_to_pairs(m) for m in ensemble.matrices]
    else:
        out["kind"] = "channels"
        out["kraus"] = [[matrix_to_pairs(k) for k in c.kraus] for c in ensemble.channels]
    out["metadata"] = dict(metadata or {})
    return out


def write_problem(path: Union[str, Path], ensemble: Ensemble, metadata: Optional[Dict[str, Any]] = None) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(serialize_problem(ensemble, metadata), indent=2), encoding="utf-8")
    return path
