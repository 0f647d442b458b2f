import logging

import numpy as np
from numpy.typing import ArrayLike, NDArray

from dsslab.errors import InvalidInputError


logger = logging.getLogger(__name__)

Mat = NDArray[np.float64]

SYMMETRY_TOL = 1e-12


def as_matrix(m: ArrayLike, name: str = "matrix") -> Mat:
    """
    Привести вход к плотной вещественной матрице

    Args:
        m: Матрица (вложенные списки или ndarray); скаляр трактуется как 1×1
        name: Имя для сообщений об ошибке

    Returns:
        Mat: Копия входа типа float64 размера r×c, r, c ≥ 1
    """
    a = np.array(m, dtype=float)
    if a.ndim == 0:
        a = a.reshape(1, 1)
    if a.ndim != 2 or a.shape[0] < 1 or a.shape[1] < 1:
        raise InvalidInputError(f"{name}: ожидалась матрица, получена форма {a.shape}")
    if not np.all(np.isfinite(a)):
        raise InvalidInputError(f"{name}: матрица содержит нечисловые значения")
    return a


def _as_symmetric(m: ArrayLike, name: str) -> Mat:
    a = as_matrix(m, name)
    if a.shape[0] != a.shape[1]:
        raise InvalidInputError(f"{name}: матрица не квадратная, форма {a.shape}")
    scale = max(np.linalg.norm(a, np.inf), 1.0)
    if np.max(np.abs(a - a.T)) > SYMMETRY_TOL * scale:
        raise InvalidInputError(f"{name}: матрица не симметрична")
    return 0.5 * (a + a.T)


def jacobi_eigenvalues(m: ArrayLike, tol: float = 1e-13, max_sweeps: int = 100) -> NDArray:
    """
    Собственные значения симметричной матрицы циклическим методом Якоби

    Args:
        m: Симметричная матрица n×n
        tol: Порог остановки по внедиагональной норме Фробениуса относительно ‖m‖_F
        max_sweeps: Предельное число проходов

    Returns:
        NDArray: Собственные значения по возрастанию
    """
    a = _as_symmetric(m, "m")
    n = a.shape[0]
    fro = np.linalg.norm(a)
    if fro == 0.0:
        return np.zeros(n)

    for sweep in range(max_sweeps):
        off = np.linalg.norm(a - np.diag(np.diag(a)))
        if off <= tol * fro:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                if theta == 0.0:
                    t = 1.0
                else:
                    t = np.sign(theta) / (abs(theta) + np.sqrt(theta * theta + 1.0))
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c

                col_p = a[:, p].copy()
                col_q = a[:, q].copy()
                a[:, p] = c * col_p - s * col_q
                a[:, q] = s * col_p + c * col_q

                row_p = a[p, :].copy()
                row_q = a[q, :].copy()
                a[p, :] = c * row_p - s * row_q
                a[q, :] = s * row_p + c * row_q

                a[p, q] = 0.0
                a[q, p] = 0.0
    else:
        logger.warning(f"Jacobi did not converge in {max_sweeps} sweeps (n={n})")

    return np.sort(np.diag(a))


def min_eig_sym(m: ArrayLike) -> float:
    """Наименьшее собственное значение симметризованной матрицы."""
    return float(jacobi_eigenvalues(m)[0])


def max_eig_sym(m: ArrayLike) -> float:
    """Наибольшее собственное значение симметризованной матрицы."""
    return float(jacobi_eigenvalues(m)[-1])


def spectral_norm(m: ArrayLike) -> float:
    """
    Спектральная норма ‖m‖₂ = sqrt(λ_max(mᵀm))

    Args:
        m: Произвольная вещественная матрица

    Returns:
        float: Наибольшее сингулярное число
    """
    a = as_matrix(m)
    gram = a.T @ a
    gram = 0.5 * (gram + gram.T)
    return float(np.sqrt(max(max_eig_sym(gram), 0.0)))


def is_pd_above(m: ArrayLike, zeta: float) -> bool:
    """m > ζI в смысле квадратичных форм (строго)."""
    return min_eig_sym(m) > zeta


def spectral_radius(m: ArrayLike) -> float:
    a = as_matrix(m)
    if a.shape[0] != a.shape[1]:
        raise InvalidInputError(f"m: матрица не квадратная, форма {a.shape}")
    return float(np.max(np.abs(np.linalg.eigvals(a))))
