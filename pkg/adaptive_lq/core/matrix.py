# File: adaptive_lq/core/matrix.py
"""Dense matrix helpers: determinant, adjugate, truncated and reference exponentials."""
import logging
import math
import warnings
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np
from scipy import linalg
from scipy.special import gammaln

from ..config import settings
from ..exceptions import DimensionError, MatrixOverflowError, NumericError, ParameterError
from ..schemas.enums import NormKind

logger = logging.getLogger(__name__)

# log(sys.float_info.max)
_LOG_FLOAT_MAX = 709.78


@dataclass
class Spectrum:
    """Eigenvalues sorted by real part, then imaginary part."""
    values: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=complex))

    @property
    def real(self) -> List[float]:
        return [float(v) for v in self.values.real]

    @property
    def imag(self) -> List[float]:
        return [float(v) for v in self.values.imag]

    def to_dict(self) -> dict:
        return {'real': self.real, 'imag': self.imag}


def _require_square(a: np.ndarray, name: str = "matrix") -> np.ndarray:
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionError(f"{name} must be square, got shape {a.shape}")
    return a


def ensure_finite(a: np.ndarray, stage: str, k: Optional[int] = None) -> np.ndarray:
    """Raise MatrixOverflowError if ``a`` holds inf or nan."""
    if not np.all(np.isfinite(a)):
        raise MatrixOverflowError(stage, k=k)
    return a


def det(a: np.ndarray) -> float:
    """
    Determinant of a square matrix.

    Closed forms up to 3x3, LU pivots beyond. Exactly singular input gives 0.

    Args:
        a: Square matrix

    Returns:
        det(a) as a float
    """
    a = _require_square(a)
    n = a.shape[0]
    if n == 0:
        return 1.0
    if n == 1:
        return float(a[0, 0])
    if n == 2:
        return float(a[0, 0] * a[1, 1] - a[0, 1] * a[1, 0])
    if n == 3:
        return float(
            a[0, 0] * (a[1, 1] * a[2, 2] - a[1, 2] * a[2, 1])
            - a[0, 1] * (a[1, 0] * a[2, 2] - a[1, 2] * a[2, 0])
            + a[0, 2] * (a[1, 0] * a[2, 1] - a[1, 1] * a[2, 0])
        )

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", linalg.LinAlgWarning)
        lu, piv = linalg.lu_factor(a, check_finite=False)
    swaps = int(np.count_nonzero(piv != np.arange(n)))
    sign = -1.0 if swaps % 2 else 1.0
    return float(sign * np.prod(np.diag(lu)))


def _minor(a: np.ndarray, i: int, j: int) -> np.ndarray:
    return np.delete(np.delete(a, i, axis=0), j, axis=1)


def adjugate(a: np.ndarray) -> np.ndarray:
    """
    Classical adjugate, adj(a) @ a = a @ adj(a) = det(a) I.

    Built from cofactors, so it stays defined for singular input.
    """
    a = _require_square(a)
    n = a.shape[0]
    if n == 1:
        return np.ones((1, 1))
    if n == 2:
        return np.array([[a[1, 1], -a[0, 1]], [-a[1, 0], a[0, 0]]])

    adj = np.empty((n, n))
    if n <= 4:
        for i in range(n):
            for j in range(n):
                # adj[j, i] is the (i, j) cofactor
                adj[j, i] = (-1.0) ** (i + j) * det(_minor(a, i, j))
        return adj

    # adj[i, j] = det(a with column i replaced by e_j)
    stack = np.broadcast_to(a, (n, n, n, n)).copy()
    eye = np.eye(n)
    for i in range(n):
        for j in range(n):
            stack[i, j, :, i] = eye[:, j]
    return np.linalg.det(stack)


def mat_exp_taylor(d: np.ndarray, tau: float, p: int) -> np.ndarray:
    """
    Degree-p Taylor sum of exp(d*tau), accumulated term by term.

    Raises:
        ParameterError: p < 0 or tau not finite
        MatrixOverflowError: a partial term overflowed; names the term index
    """
    d = _require_square(d, "d")
    if p < 0:
        raise ParameterError(f"Taylor degree must be non-negative, got {p}")
    if not math.isfinite(tau):
        raise ParameterError(f"tau must be finite, got {tau}")

    scaled = d * tau
    term = np.eye(d.shape[0])
    total = term.copy()
    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(1, p + 1):
            term = term @ scaled / k
            total = total + term
            if not (np.all(np.isfinite(term)) and np.all(np.isfinite(total))):
                raise MatrixOverflowError("Taylor expansion of exp(D tau)", k=k)
    return total


def mat_exp_oracle(d: np.ndarray, tau: float) -> np.ndarray:
    """Reference exp(d*tau) by scaling and squaring a short Taylor sum."""
    d = _require_square(d, "d")
    scaled = d * tau
    size = float(np.linalg.norm(scaled, 1))
    s = 0
    target = settings.ORACLE_SCALED_NORM
    if size > target:
        s = int(math.ceil(math.log2(size / target)))
    result = mat_exp_taylor(scaled / (2.0 ** s), 1.0, settings.ORACLE_TAYLOR_DEGREE)
    with np.errstate(over="ignore", invalid="ignore"):
        for _ in range(s):
            result = result @ result
    return ensure_finite(result, "reference exponential")


def taylor_remainder_bound(d: np.ndarray, tau: float, p: int) -> float:
    """
    A-priori bound on ||exp(d tau) - Taylor_p(d tau)||.

    (x^p / (p+1)!) (e^x - 1) with x = ||d|| tau, evaluated in log space.
    Returns inf when the bound exceeds the float range.
    """
    d = _require_square(d, "d")
    x = float(np.linalg.norm(d, 2)) * abs(tau)
    if x == 0.0:
        return 0.0
    if x > 30.0:
        log_tail = x + math.log1p(-math.exp(-x))
    else:
        log_tail = math.log(math.expm1(x))
    log_bound = p * math.log(x) - float(gammaln(p + 2)) + log_tail
    if log_bound > _LOG_FLOAT_MAX:
        return math.inf
    return math.exp(log_bound)


def eigenvalues(a: np.ndarray) -> Spectrum:
    """Eigenvalues sorted ascending by real part, ties by imaginary part."""
    a = _require_square(a)
    try:
        vals = linalg.eigvals(a)
    except (linalg.LinAlgError, ValueError) as e:
        raise NumericError(f"Eigenvalue computation failed: {e}") from e
    order = np.lexsort((vals.imag, vals.real))
    return Spectrum(values=vals[order])


def norm(a: np.ndarray, kind: NormKind = NormKind.SPECTRAL) -> float:
    """Spectral or Frobenius norm."""
    if kind == NormKind.FROBENIUS:
        return float(np.linalg.norm(a, 'fro'))
    return float(np.linalg.norm(a, 2))


def norms(a: np.ndarray) -> Tuple[float, float]:
    """(spectral, frobenius)"""
    return norm(a, NormKind.SPECTRAL), norm(a, NormKind.FROBENIUS)


def condition_number(a: np.ndarray) -> float:
    """2-norm condition number, inf for singular input."""
    with np.errstate(divide="ignore", invalid="ignore"):
        c = float(np.linalg.cond(a))
    return c if math.isfinite(c) else math.inf
