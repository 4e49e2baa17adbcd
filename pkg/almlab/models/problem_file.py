import json
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from almlab.errors import InvalidProblemError
from almlab.linalg import DenseOperator, LinearOperator, StackedOperator, TridiagonalInverseOperator
from almlab.problem import ModelProblem, QuadraticObjective
from almlab.sets import set_from_dict


class ObjectiveDocument(BaseModel):
    """theta(u) = 1/2 <u, Q u> - <b, u> + c"""
    Q: List[List[float]] = Field(..., description="Symmetric positive definite matrix")
    b: List[float] = Field(..., description="Linear term")
    c: float = Field(0.0, description="Constant term")


class OperatorDocument(BaseModel):
    """Constraint operator S"""
    kind: Literal["dense", "stack", "tridiagonal_inverse"]
    matrix: Optional[List[List[float]]] = None
    blocks: Optional[List["OperatorDocument"]] = None
    diagonal: Optional[List[float]] = None
    off_diagonal: Optional[List[float]] = None

    @model_validator(mode="after")
    def check_kind_fields(self):
        required = {"dense": ["matrix"], "stack": ["blocks"], "tridiagonal_inverse": ["diagonal", "off_diagonal"]}
        missing = [name for name in required[self.kind] if getattr(self, name) is None]
        if missing:
            raise ValueError(f"operator kind '{self.kind}' requires {', '.join(missing)}")
        return self


OperatorDocument.model_rebuild()


class ProblemFile(BaseModel):
    """Problem document for the solve command"""
    model_config = ConfigDict(populate_by_name=True)

    objective: ObjectiveDocument
    operator: OperatorDocument
    set_: Dict[str, Any] = Field(..., alias="set", description="Constraint set, keyed by 'type'")
    witness: Optional[List[float]] = Field(None, description="Feasible starting point")


def operator_from_document(doc: OperatorDocument) -> LinearOperator:
    if doc.kind == "dense":
        return DenseOperator(doc.matrix)
    if doc.kind == "stack":
        return StackedOperator([operator_from_document(b) for b in doc.blocks])
    return TridiagonalInverseOperator(doc.diagonal, doc.off_diagonal)


def operator_to_document(op: LinearOperator) -> OperatorDocument:
    if isinstance(op, StackedOperator):
        return OperatorDocument(kind="stack", blocks=[operator_to_document(b) for b in op.blocks])
    if isinstance(op, TridiagonalInverseOperator):
        return OperatorDocument(
            kind="tridiagonal_inverse",
            diagonal=op.diagonal.tolist(),
            off_diagonal=op.off_diagonal.tolist(),
        )
    return OperatorDocument(kind="dense", matrix=op.to_dense().tolist())


def problem_from_file(doc: ProblemFile) -> ModelProblem:
    try:
        K = set_from_dict(doc.set_)
    except (KeyError, TypeError) as exc:
        raise InvalidProblemError(f"malformed set description: {exc}")
    except ValueError as exc:
        raise InvalidProblemError(str(exc))
    objective = QuadraticObjective(np.asarray(doc.objective.Q, dtype=np.float64), doc.objective.b, doc.objective.c)
    witness = None if doc.witness is None else np.asarray(doc.witness, dtype=np.float64)
    return ModelProblem(objective, operator_from_document(doc.operator), K, witness)


def problem_to_file(problem: ModelProblem) -> ProblemFile:
    objective = problem.objective
    return ProblemFile(
        objective=ObjectiveDocument(Q=objective.dense_hessian().tolist(), b=objective.b.tolist(), c=objective.c),
        operator=operator_to_document(problem.S),
        set=problem.K.to_dict(),
        witness=None if problem.feasible_witness is None else problem.feasible_witness.tolist(),
    )


def parse_problem_text(text: str) -> ProblemFile:
    """Parse a problem document; JSON syntax errors report line and column."""
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InvalidProblemError(
            f"malformed JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}",
            {"line": exc.lineno, "column": exc.colno},
        )
    try:
        return ProblemFile.model_validate(data)
    except ValidationError as exc:
        raise InvalidProblemError("problem file does not match the schema", {"errors": exc.errors(include_url=False)})


def load_problem_file(path: Union[str, Path]) -> ProblemFile:
    path = Path(path)
    if not path.is_file():
        raise InvalidProblemError(f"problem file not found: {path}")
    return parse_problem_text(path.read_text(encoding="utf-8"))
