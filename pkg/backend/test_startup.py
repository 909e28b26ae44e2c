#!/usr/bin/env python3
"""
Smoke test: the package imports, numba kernels compile and the CLI parser builds
"""
import sys
import os

import numpy as np

# Add the current directory to Python path
sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))


def test_imports():
    """All modules import and every subcommand is registered"""
    from app.cli import build_parser
    from app.services.experiment_service import experiment_service
    from app.services.export_service import export_service
    from app.services.report_service import report_service

    assert experiment_service and export_service and report_service
    parser = build_parser()
    for command in ("spectra", "contour", "solve", "experiment", "simulate", "validate"):
        args = parser.parse_args([command, "x"] if command == "validate" else
                                 [command, "--rho", "0.5"] if command == "contour" else [command])
        assert args.command == command


def test_kernels_compile():
    """One call per kernel family compiles and runs"""
    from app.kernels import csr_matvec, gauss_seidel_sweep
    from app.sparse_core import laplacian_system

    system = laplacian_system(2, 0)
    A = system.A
    y = np.empty(system.n)
    csr_matvec(A.row_start, A.col_index, A.value, np.ones(system.n), y)
    np.testing.assert_allclose(y, np.full(4, 0.5))
    x = np.zeros(system.n)
    gauss_seidel_sweep(A.row_start, A.col_index, A.value, A.diagonal(), system.c, x, 1.0, 0, system.n)
    assert np.all(np.isfinite(x))


if __name__ == "__main__":
    test_imports()
    test_kernels_compile()
    print("🎉 All startup checks passed")
