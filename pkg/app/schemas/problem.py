from __future__ import annotations
from typing import Any, Dict, List, Literal, Optional, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator

from app.core.errors import ProblemValidationError
from app.services.channels import QuantumChannel
from app.services.divergences import DensityOperator
from app.services.exclusion import ChannelEnsemble, StateEnsemble
from app.services.linalg import hermitian_part, support_power

# Complex entries are written as [re, im] pairs; a matrix is a list of rows.
ComplexEntry = Tuple[float, float]
ComplexMatrix = List[List[ComplexEntry]]

# File-level tolerances (looser than the in-memory ones: files are hand-written)
HERMITIAN_TOL = 1e-9
PSD_TOL = 1e-10
TRACE_TOL = 1e-9
PRIOR_SUM_TOL = 1e-9


def matrix_from_pairs(rows: ComplexMatrix) -> np.ndarray:
    return np.array([[complex(re, im) for re, im in row] for row in rows], dtype=complex)


def matrix_to_pairs(a: np.ndarray) -> ComplexMatrix:
    return [[(float(z.real), float(z.imag)) for z in row] for row in np.asarray(a, dtype=complex)]


def _check_rectangular(rows: ComplexMatrix, where: str, square: bool) -> None:
    if not rows or not rows[0]:
        raise ValueError(f"{where} is empty")
    width = len(rows[0])
    for i, row in enumerate(rows):
        if len(row) != width:
            raise ValueError(f"{where} row {i} has {len(row)} entries, expected {width}")
    if square and len(rows) != width:
        raise ValueError(f"{where} is {len(rows)}x{width}, expected a square matrix")


class ProblemFile(BaseModel):
    """
    On-disk problem: an ensemble of states (density matrices) or channels (Kraus lists).

    Structural checks (shapes, priors) run as pydantic validators; numerical checks
    (Hermiticity, positivity, trace, trace preservation) run in `to_ensemble`, which
    names the offending field path.
    """

    model_config = ConfigDict(extra="forbid")

    kind: Literal["states", "channels"]
    priors: List[float] = Field(..., min_length=2)
    matrices: Optional[List[ComplexMatrix]] = None
    kraus: Optional[List[List[ComplexMatrix]]] = None
    metadata: Dict[str, Any] = Field(default_factory=dict)

    @field_validator("priors")
    @classmethod
    def _interior_priors(cls, v: List[float]) -> List[float]:
        for x, p in enumerate(v):
            if not p > 0:
                raise ValueError(f"interior prior required: prior {x} is {p}")
        total = sum(v)
        if abs(total - 1.0) > PRIOR_SUM_TOL:
            raise ValueError(f"priors sum to {total:.12g}, expected 1")
        return [p / total for p in v]

    @field_validator("matrices")
    @classmethod
    def _square_matrices(cls, v: Optional[List[ComplexMatrix]]) -> Optional[List[ComplexMatrix]]:
        if v is not None:
            for x, rows in enumerate(v):
                _check_rectangular(rows, f"matrix {x}", square=True)
        return v

    @field_validator("kraus")
    @classmethod
    def _rectangular_kraus(cls, v: Optional[List[List[ComplexMatrix]]]) -> Optional[List[List[ComplexMatrix]]]:
        if v is not None:
            for x, ops in enumerate(v):
                if not ops:
                    raise ValueError(f"channel {x} has no Kraus operators")
                for k, rows in enumerate(ops):
                    _check_rectangular(rows, f"Kraus operator {k} of channel {x}", square=False)
        return v

    # ---- numerical validation ----

    def _count(self, name: str, items: Optional[list]) -> list:
        if items is None:
            raise ProblemValidationError(name, f"required for kind '{self.kind}'")
        if len(items) != len(self.priors):
            raise ProblemValidationError(name, f"{len(items)} entries for {len(self.priors)} priors")
        return items

    def _state(self, x: int, rows: ComplexMatrix, dim: int) -> DensityOperator:
        a = matrix_from_pairs(rows)
        if a.shape[0] != dim:
            raise ProblemValidationError(f"matrices.{x}", f"dimension {a.shape[0]}, expected {dim}")
        defect = np.abs(a - a.conj().T)
        if defect.max() > HERMITIAN_TOL:
            i, j = np.unravel_index(int(np.argmax(defect)), defect.shape)
            raise ProblemValidationError(
                f"matrices.{x}.{i}.{j}", f"not Hermitian: differs from conj(entry [{j}][{i}]) by {defect[i, j]:.3e}"
            )
        h = hermitian_part(a)
        w = np.linalg.eigvalsh(h)
        if w[0] < -PSD_TOL:
            raise ProblemValidationError(f"matrices.{x}", f"not positive semidefinite (min eigenvalue {w[0]:.3e})")
        tr = float(np.sum(w))
        if abs(tr - 1.0) > TRACE_TOL:
            raise ProblemValidationError(f"matrices.{x}", f"trace {tr:.12g}, expected 1")
        return DensityOperator.from_array(h / tr)

    def _channel(self, x: int, ops: List[ComplexMatrix], shape: Tuple[int, int]) -> QuantumChannel:
        kraus = [matrix_from_pairs(rows) for rows in ops]
        for k, op in enumerate(kraus):
            if op.shape != shape:
                raise ProblemValidationError(f"kraus.{x}.{k}", f"shape {op.shape}, expected {shape}")
        s = sum(k.conj().T @ k for k in kraus)
        defect = float(np.max(np.abs(s - np.eye(shape[1]))))
        if defect > TRACE_TOL:
            raise ProblemValidationError(f"kraus.{x}", f"not trace preserving: |Σ K†K − I| = {defect:.3e}")
        s_inv_half = support_power(hermitian_part(s), -0.5)
        labels = self.metadata.get("labels")
        label = str(labels[x]) if isinstance(labels, list) and x < len(labels) else ""
        return QuantumChannel(tuple(k @ s_inv_half for k in kraus), label=label)

    def to_ensemble(self) -> Union[StateEnsemble, ChannelEnsemble]:
        if self.kind == "states":
            mats = self._count("matrices", self.matrices)
            dim = len(mats[0])
            states = tuple(self._state(x, rows, dim) for x, rows in enumerate(mats))
            return StateEnsemble(np.array(self.priors), states)
        chans = self._count("kraus", self.kraus)
        first = chans[0][0]
        shape = (len(first), len(first[0]))
        return ChannelEnsemble(np.array(self.priors), tuple(self._channel(x, ops, shape) for x, ops in enumerate(chans)))
