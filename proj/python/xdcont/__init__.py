"""Python interface to the xdcont continuation library."""

from ._core import (
    Branch,
    BranchPoint,
    ContinuationSettings,
    DomainSpec,
    EventRecord,
    Mesh,
    Params,
    SteadyProblem,
    build_mesh,
    char_det,
    continue_branch,
    critical_d,
    equilibrium_cross,
    equilibrium_fast,
    fit_order,
    init_from_homogeneous,
    leading_spectrum,
    linearize,
    predict_bifurcations,
    ring_report,
    run_config,
    sweep_epsilon,
    switch_branch,
)


def jacobian_csc(problem, fields, param_value):
    """Steady-state Jacobian as a scipy.sparse CSC matrix."""
    from scipy.sparse import csc_matrix

    data, indices, indptr, shape = problem.jacobian_parts(fields, param_value)
    return csc_matrix((data, indices, indptr), shape=shape)


__all__ = [name for name in dir() if not name.startswith("_")]
