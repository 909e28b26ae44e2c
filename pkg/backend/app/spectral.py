"""
Spectral radii, optimal Richardson parameters and convergence regions.

The synchronous rate of the second order method is read off the roots of
``l^2 - (1+b)(1-a mu) l + b = 0`` over mu in spec(A); the asynchronous one off
``l^2 - |1+b| mu l - |b| = 0`` over mu in spec(|I - a A|).
"""

import logging
import math
import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import LinearOperator, aslinearoperator
from typing import Callable, Optional, Sequence, Tuple, Union

from .config import settings
from .errors import AssumptionViolationError, CertificationFailedError, InvalidArgumentError
from .models import (
    IterParams,
    OptimalParams,
    PerronWeight,
    RadiusEstimate,
    SparseMatrix,
    SpectralGrid,
    SpectrumBounds,
    SplittingSystem,
    SystemSpectrum,
)
from .sparse_core import matvec

logger = logging.getLogger(__name__)

Operator = Union[LinearOperator, sp.spmatrix, np.ndarray, Callable[[np.ndarray], np.ndarray]]


def as_operator(apply: Operator, n: int) -> LinearOperator:
    if isinstance(apply, LinearOperator):
        operator = apply
    elif sp.issparse(apply) or isinstance(apply, np.ndarray):
        operator = aslinearoperator(apply)
    elif callable(apply):
        operator = LinearOperator((n, n), matvec=apply, dtype=np.float64)
    else:
        raise InvalidArgumentError(f"cannot use {type(apply).__name__} as a linear operator")
    if operator.shape != (n, n):
        raise InvalidArgumentError(f"operator has shape {operator.shape}, expected ({n}, {n})")
    return operator


class SpectralAnalyzer:
    """Spectral radius oracles and the parameter theory built on them."""

    def __init__(self):
        self.power_tol = settings.POWER_TOL
        self.radius_samples = settings.RADIUS_SAMPLES
        # delta halvings tried by the Perron weight certification
        self.max_halvings = 60

    # ------------------------------------------------------------------ oracles

    def power_iteration_radius(self, apply: Operator, n: int, tol: Optional[float] = None,
                               max_iters: Optional[int] = None) -> RadiusEstimate:
        """
        Spectral radius of a nonnegative operator by power iteration from the ones vector.

        The estimate is the geometric mean of the last two growth factors
        ``|A x_k| / |x_k|``, which also settles when the dominant eigenvalues
        form a pair ``+l, -l`` (bipartite stencils). The stop test is the
        relative eigen-residual of ``A^2`` at ``x_{k-2}``, which with unit
        iterates is ``|x_k - x_{k-2}|``; for normal operators the estimate is
        then within ``tol / 2`` (relative) of an eigenvalue modulus.
        """
        tol = self.power_tol if tol is None else tol
        max_iters = 100 * n if max_iters is None else max_iters
        operator = as_operator(apply, n)
        if n == 0:
            return RadiusEstimate(value=0.0, converged=True, iterations=0, vector=np.zeros(0))

        x = np.ones(n) / math.sqrt(n)
        x_back = x_two_back = None
        previous_growth = None
        estimate = None
        for k in range(1, max_iters + 1):
            y = np.asarray(operator.matvec(x), dtype=np.float64).reshape(-1)
            growth = float(np.linalg.norm(y))
            if growth == 0.0:
                return RadiusEstimate(value=0.0, converged=True, iterations=k, vector=x)
            if not math.isfinite(growth):
                raise InvalidArgumentError("operator produced non-finite values during power iteration")
            x_back, x = x, y / growth
            if previous_growth is not None:
                estimate = math.sqrt(growth * previous_growth)
                if np.linalg.norm(x - x_two_back) <= tol:
                    return RadiusEstimate(value=estimate, converged=True, iterations=k, vector=x)
            x_two_back = x_back
            previous_growth = growth

        value = estimate if estimate is not None else previous_growth
        logger.warning(f"power iteration did not converge in {max_iters} iterations (estimate {value:.12g})")
        return RadiusEstimate(value=value, converged=False, iterations=max_iters, vector=x)

    def system_operator(self, system: SplittingSystem) -> LinearOperator:
        """``T = I - A`` applied as ``x - A x``."""
        n = system.n
        return LinearOperator((n, n), matvec=lambda x: x - matvec(system.A, np.ravel(x)), dtype=np.float64)

    def system_spectrum(self, system: SplittingSystem, tol: Optional[float] = None) -> SystemSpectrum:
        """rho(T) by power iteration (cached on the system) plus the closed form for generated Laplacians."""
        exact = math.cos(math.pi / (system.grid_size + 1)) if system.grid_size else None
        if system._rho is None or tol is not None:
            estimate = self.power_iteration_radius(self.system_operator(system), system.n, tol=tol)
            system._rho = estimate.value
            converged = estimate.converged
        else:
            converged = True
        return SystemSpectrum(rho=system._rho, converged=converged, exact_rho=exact)

    def check_assumptions(self, system: SplittingSystem, tol: Optional[float] = None) -> SystemSpectrum:
        """Unit diagonal, ``T >= 0`` and ``rho(T) < 1``; raises on the first violation."""
        system.require_unit_diagonal()
        system.require_nonnegative()
        spectrum = self.system_spectrum(system, tol=tol)
        if not spectrum.rho < 1.0:
            raise AssumptionViolationError("rho(T) < 1", f"estimated rho(T) = {spectrum.rho:.6g}")
        return spectrum

    def assemble_doubled_operator(self, A: SparseMatrix, params: IterParams, absolute: bool = False) -> sp.csr_matrix:
        """
        Block companion matrix of the three-term recurrence on ``(x_k, x_{k-1})``.

        Signed: ``[[(1+b)(I - a A), -b I], [I, 0]]``.
        Absolute: ``[[|1+b| |I - a A|, |b| I], [I, 0]]``.
        """
        n = A.nrows
        eye = sp.identity(n, format="csr")
        if absolute:
            top_left = abs(1.0 + params.beta) * A.iteration_matrix_abs(params.alpha)
            top_right = abs(params.beta) * eye
        else:
            top_left = (1.0 + params.beta) * (eye - params.alpha * A.to_scipy())
            top_right = -params.beta * eye
        return sp.csr_matrix(sp.bmat([[top_left, top_right], [eye, None]], format="csr"))

    def abs_operator(self, A: SparseMatrix, params: IterParams, doubled: Optional[bool] = None) -> LinearOperator:
        """
        Entrywise absolute iteration operator.

        First order: ``|I - a A|``. Second order (or ``doubled=True``): the
        2n block operator ``[[|1+b| |I - a A|, |b| I], [I, 0]]``.
        """
        if doubled is None:
            doubled = not params.is_first_order
        if doubled:
            return aslinearoperator(self.assemble_doubled_operator(A, params, absolute=True))
        return aslinearoperator(A.iteration_matrix_abs(params.alpha))

    def doubled_radius_dense(self, A: SparseMatrix, params: IterParams, absolute: bool = False) -> float:
        """Dense eigensolve of the doubled operator; intended for small systems."""
        dense = self.assemble_doubled_operator(A, params, absolute=absolute).toarray()
        return float(np.max(np.abs(np.linalg.eigvals(dense))))

    # --------------------------------------------------------------- first order

    def optimal_first_order_alpha(self, bounds: SpectrumBounds) -> float:
        return 2.0 / (bounds.a + bounds.b)

    def first_order_sync_radius(self, alpha: float, bounds: SpectrumBounds) -> float:
        return max(abs(1.0 - alpha * bounds.a), abs(1.0 - alpha * bounds.b))

    def first_order_async_bound(self, alpha: float, rho: float) -> float:
        """``|1 - a| + a rho``, below 1 exactly for ``a`` in (0, 2/(1+rho))."""
        if alpha <= 0.0:
            raise InvalidArgumentError(f"alpha must be positive, got {alpha}")
        return abs(1.0 - alpha) + alpha * rho

    def nonstationary_contraction(self, alpha_schedule: Sequence[float], rho: float) -> float:
        """Worst weighted max-norm contraction ``max_k |1 - a_k| + a_k rho`` over a damping pool."""
        if len(alpha_schedule) == 0:
            raise InvalidArgumentError("alpha schedule must not be empty")
        return max(self.first_order_async_bound(alpha, rho) for alpha in alpha_schedule)

    # -------------------------------------------------------------- second order

    def optimal_second_order(self, bounds: SpectrumBounds) -> OptimalParams:
        if bounds.a == bounds.b:
            return OptimalParams(alpha=1.0 / bounds.a, beta=0.0, q=0.0)
        root_a, root_b = math.sqrt(bounds.a), math.sqrt(bounds.b)
        q = (root_b - root_a) / (root_b + root_a)
        return OptimalParams(alpha=2.0 / (bounds.a + bounds.b), beta=q * q, q=q)

    def quadratic_roots_sync(self, mu: float, params: IterParams) -> Tuple[complex, complex]:
        p = (1.0 + params.beta) * (1.0 - params.alpha * mu)
        root = complex(np.emath.sqrt(p * p - 4.0 * params.beta))
        return (p + root) / 2.0, (p - root) / 2.0

    def quadratic_roots_async(self, mu: float, params: IterParams) -> Tuple[float, float]:
        """Roots of the absolute quadratic, largest first."""
        if mu < 0.0:
            raise InvalidArgumentError(f"mu must be nonnegative, got {mu}")
        s = abs(1.0 + params.beta) * mu
        root = math.sqrt(s * s + 4.0 * abs(params.beta))
        return (s + root) / 2.0, (s - root) / 2.0

    def second_order_sync_radius(self, params: IterParams, bounds: SpectrumBounds,
                                 samples: Optional[int] = None) -> float:
        """Largest root modulus over ``samples`` uniform points of [a, b], endpoints included."""
        samples = self.radius_samples if samples is None else samples
        if samples < 2:
            raise InvalidArgumentError(f"need at least 2 samples, got {samples}")
        mu = np.linspace(bounds.a, bounds.b, samples)
        p = (1.0 + params.beta) * (1.0 - params.alpha * mu)
        disc = p * p - 4.0 * params.beta
        real_roots = disc >= 0.0
        modulus = np.empty_like(mu)
        modulus[real_roots] = (np.abs(p[real_roots]) + np.sqrt(disc[real_roots])) / 2.0
        # complex pair: both roots have modulus sqrt(beta)
        modulus[~real_roots] = math.sqrt(params.beta) if params.beta > 0.0 else 0.0
        return float(modulus.max())

    def second_order_async_radius(self, params: IterParams, rho: float) -> float:
        """Largest absolute-quadratic root at ``mu = |1 - a| + a rho``."""
        mu = self.first_order_async_bound(params.alpha, rho)
        return self.quadratic_roots_async(mu, params)[0]

    def async_radius(self, system: SplittingSystem, params: IterParams) -> float:
        """
        rho(|T_ab|) for a system: closed form on zero-diagonal nonnegative
        splittings, power iteration on the assembled absolute operator otherwise.
        """
        if system.unit_diagonal and system.nonnegative:
            rho = self.system_spectrum(system).rho
            if params.is_first_order:
                return self.first_order_async_bound(params.alpha, rho)
            return self.second_order_async_radius(params, rho)
        operator = self.abs_operator(system.A, params)
        return self.power_iteration_radius(operator, operator.shape[0]).value

    def async_condition_holds(self, params: IterParams, rho: float) -> bool:
        if params.alpha <= 0.0:
            return False
        nu = abs(1.0 - params.alpha) + params.alpha * rho
        return abs(1.0 + params.beta) * nu + abs(params.beta) < 1.0

    def beta_upper_bound(self, alpha: float, rho: float) -> Optional[float]:
        """Supremum of admissible beta for the asynchronous method, None if no beta works."""
        nu = self.first_order_async_bound(alpha, rho)
        if nu >= 1.0:
            return None
        return (1.0 - nu) / (1.0 + nu)

    def error_bound_factor(self, q: float, k: int) -> float:
        """``q^k (1 + k (1 - q^2)/(1 + q^2))``."""
        if not (0.0 <= q < 1.0):
            raise InvalidArgumentError(f"q must lie in [0, 1), got {q}")
        if k < 0:
            raise InvalidArgumentError(f"k must be nonnegative, got {k}")
        return q ** k * (1.0 + k * (1.0 - q * q) / (1.0 + q * q))

    # ------------------------------------------------------------ Perron weight

    def _perron_vector(self, operator: LinearOperator, n: int, delta: float) -> np.ndarray:
        """Max-normalized power iteration on ``T + delta E + I`` until the vector settles."""
        x = np.ones(n)
        for _ in range(max(1000, 100 * n)):
            y = np.asarray(operator.matvec(x), dtype=np.float64).ravel() + delta * np.sum(x) + x
            y /= y.max()
            if np.max(np.abs(y - x)) <= 1e-14:
                return y
            x = y
        logger.warning(f"Perron vector did not settle for delta={delta:.3g}")
        return x

    def perron_weight(self, T_apply: Operator, n: int, epsilon: float) -> PerronWeight:
        """
        Positive ``w`` with ``T w <= rho_eps w`` componentwise and ``rho_eps <= rho(T) + epsilon``.

        ``w`` is the Perron vector of ``T + delta E`` (``E`` all ones),
        computed on the shifted operator ``T + delta E + I``; ``delta`` starts
        at ``epsilon / n`` and is halved until the certificate holds.
        """
        if epsilon <= 0.0:
            raise InvalidArgumentError(f"epsilon must be positive, got {epsilon}")
        operator = as_operator(T_apply, n)
        rho = self.power_iteration_radius(operator, n).value

        delta = epsilon / n
        for _ in range(self.max_halvings + 1):
            w = self._perron_vector(operator, n, delta)
            if np.all(w > 0.0):
                Tw = np.asarray(operator.matvec(w), dtype=np.float64).ravel()
                rho_eps = float(np.max(Tw / w))
                # rounding in rho_eps * w can undercut Tw by an ulp
                while np.any(Tw > rho_eps * w):
                    rho_eps = float(np.nextafter(rho_eps, np.inf))
                # min_i (Tw)_i / w_i is a lower bound on rho(T) for positive w
                reference = max(rho, float(np.min(Tw / w)))
                if rho_eps <= reference + epsilon:
                    logger.debug(f"Perron weight certified: rho_eps={rho_eps:.12g}, delta={delta:.3g}")
                    return PerronWeight(w=w, epsilon=epsilon, rho_eps=rho_eps, delta=delta)
            delta /= 2.0
        raise CertificationFailedError(
            f"no certified weight with rho_eps <= {rho + epsilon:.12g} after {self.max_halvings} halvings")

    # ----------------------------------------------------------------- contours

    def contour_grid(self, alpha_range: Tuple[float, float], beta_range: Tuple[float, float], rho: float,
                     resolution: int, samples: Optional[int] = None) -> SpectralGrid:
        """Synchronous and asynchronous radii on a uniform (alpha, beta) grid; async is NaN where alpha <= 0."""
        if resolution < 2:
            raise InvalidArgumentError(f"resolution must be at least 2, got {resolution}")
        bounds = SpectrumBounds.from_rho(rho)
        alphas = np.linspace(alpha_range[0], alpha_range[1], resolution)
        betas = np.linspace(beta_range[0], beta_range[1], resolution)
        radius_sync = np.empty((resolution, resolution))
        radius_async = np.full((resolution, resolution), np.nan)
        for row, beta in enumerate(betas):
            for col, alpha in enumerate(alphas):
                params = IterParams(alpha=float(alpha), beta=float(beta))
                radius_sync[row, col] = self.second_order_sync_radius(params, bounds, samples)
                if alpha > 0.0:
                    radius_async[row, col] = self.second_order_async_radius(params, rho)
        logger.info(f"contour grid for rho={rho}: {resolution}x{resolution} points")
        return SpectralGrid(alpha_values=alphas, beta_values=betas, radius_sync=radius_sync,
                            radius_async=radius_async, rho=rho)


# Global spectral analyzer instance
spectral_analyzer = SpectralAnalyzer()

power_iteration_radius = spectral_analyzer.power_iteration_radius
abs_operator = spectral_analyzer.abs_operator
assemble_doubled_operator = spectral_analyzer.assemble_doubled_operator
system_spectrum = spectral_analyzer.system_spectrum
optimal_first_order_alpha = spectral_analyzer.optimal_first_order_alpha
first_order_sync_radius = spectral_analyzer.first_order_sync_radius
first_order_async_bound = spectral_analyzer.first_order_async_bound
nonstationary_contraction = spectral_analyzer.nonstationary_contraction
optimal_second_order = spectral_analyzer.optimal_second_order
quadratic_roots_sync = spectral_analyzer.quadratic_roots_sync
quadratic_roots_async = spectral_analyzer.quadratic_roots_async
second_order_sync_radius = spectral_analyzer.second_order_sync_radius
second_order_async_radius = spectral_analyzer.second_order_async_radius
async_condition_holds = spectral_analyzer.async_condition_holds
beta_upper_bound = spectral_analyzer.beta_upper_bound
perron_weight = spectral_analyzer.perron_weight
error_bound_factor = spectral_analyzer.error_bound_factor
contour_grid = spectral_analyzer.contour_grid
