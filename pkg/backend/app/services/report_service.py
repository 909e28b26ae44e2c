from typing import Any, Dict, Optional
import logging

from ..models import IterParams, SpectrumBounds, SplittingSystem
from ..spectral import spectral_analyzer

logger = logging.getLogger(__name__)


class ReportService:
    def __init__(self):
        # horizon of the printed second order error bound factor
        self.bound_steps = 500

    def parameter_report(self, rho: float, params: Optional[IterParams] = None) -> Dict[str, Any]:
        """Optimal parameters and convergence regions for the Jacobi bounds (1 - rho, 1 + rho)."""
        bounds = SpectrumBounds.from_rho(rho)
        optimal = spectral_analyzer.optimal_second_order(bounds)
        alpha_opt = spectral_analyzer.optimal_first_order_alpha(bounds)
        report = {
            "rho": rho,
            "a": bounds.a,
            "b": bounds.b,
            "alpha_first_order": alpha_opt,
            "first_order_rate": spectral_analyzer.first_order_sync_radius(alpha_opt, bounds),
            "alpha_second_order": optimal.alpha,
            "beta_opt": optimal.beta,
            "q": optimal.q,
            "bound_steps": self.bound_steps,
            "error_bound_factor": spectral_analyzer.error_bound_factor(optimal.q, self.bound_steps),
            "async_beta_bound": spectral_analyzer.beta_upper_bound(1.0, rho),
        }
        if params is not None:
            positive = params.alpha > 0
            report.update({
                "alpha": params.alpha,
                "beta": params.beta,
                "sync_radius": spectral_analyzer.second_order_sync_radius(params, bounds),
                "async_radius": spectral_analyzer.second_order_async_radius(params, rho) if positive else None,
                "async_condition": spectral_analyzer.async_condition_holds(params, rho),
                "beta_bound_at_alpha": spectral_analyzer.beta_upper_bound(params.alpha, rho) if positive else None,
            })
        return report

    def spectra_report(self, system: SplittingSystem, params: Optional[IterParams] = None,
                       tol: Optional[float] = None) -> Dict[str, Any]:
        """Assumption checks, rho(T) by power iteration, then the parameter report."""
        spectrum = spectral_analyzer.check_assumptions(system, tol=tol)
        report = {"n": system.n, "rho_converged": spectrum.converged, "rho_exact": spectrum.exact_rho}
        report.update(self.parameter_report(spectrum.rho, params))
        if params is not None and params.alpha > 0:
            report["async_radius"] = spectral_analyzer.async_radius(system, params)
        logger.info(f"spectra report: rho={spectrum.rho:.10f}, beta_opt={report['beta_opt']:.6f}, q={report['q']:.6f}")
        return report

    def format_report(self, report: Dict[str, Any]) -> str:
        def fmt(value):
            if value is None:
                return "none"
            if isinstance(value, bool):
                return "yes" if value else "no"
            if isinstance(value, float):
                return f"{value:.10g}"
            return str(value)

        labels = [
            ("n", "dimension n"),
            ("rho", "rho(T)"),
            ("rho_converged", "power iteration converged"),
            ("rho_exact", "rho(T) closed form"),
            ("a", "spectrum lower bound a = 1 - rho"),
            ("b", "spectrum upper bound b = 1 + rho"),
            ("alpha_first_order", "optimal first order alpha"),
            ("first_order_rate", "first order rate at optimal alpha"),
            ("alpha_second_order", "optimal second order alpha"),
            ("beta_opt", "optimal second order beta"),
            ("q", "convergence factor q"),
            ("error_bound_factor", f"error bound factor after {report.get('bound_steps')} steps"),
            ("async_beta_bound", "async beta upper bound (alpha = 1)"),
            ("alpha", "given alpha"),
            ("beta", "given beta"),
            ("sync_radius", "rho(T_ab) synchronous"),
            ("async_radius", "rho(|T_ab|) asynchronous"),
            ("async_condition", "asynchronous convergence condition holds"),
            ("beta_bound_at_alpha", "async beta upper bound at given alpha"),
        ]
        width = max(len(label) for _, label in labels)
        return "\n".join(f"{label.ljust(width)} : {fmt(report[key])}" for key, label in labels if key in report)


# Global report service instance
report_service = ReportService()
