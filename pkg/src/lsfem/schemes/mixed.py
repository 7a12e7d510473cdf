"""Mixed Dirichlet/Neumann elasticity on a level-set domain.

The boundary is split by a secondary level set psi into a Dirichlet part
(psi < 0) and a Neumann part (psi > 0). The dual Dirichlet coupling acts
on the strip cells entirely on the Dirichlet side; on the Neumann side a
tensor-valued stress proxy y = -sigma(u) and a vector multiplier p_N
impose the traction through y grad(phi) + p_N phi = -g |grad(phi)|.
Strip cells where psi changes sign carry no boundary condition at all and
are controlled by the stabilization terms only.
"""

from __future__ import annotations

import numpy as np

from ..assembly import CellBatch, SystemBuilder, chunked, fadd, fcontract, fgrad
from ..elasticity import div_lsq_kernel, lsq_residual_kernel, stress
from ..mesh import mark_dirichlet_neumann
from ..spaces import FEFunction, FunctionSpace, interpolate_fn
from .common import (
    FESolution,
    ProblemSpec,
    SchemeResult,
    apply_ghost,
    boundary_trace,
    displacement_penalty_combo,
    proxy_normal_combo,
    setup_geometry,
    timer,
)


def solve_mixed(spec: ProblemSpec) -> SchemeResult:
    """Dual Dirichlet coupling plus a stress proxy on the Neumann strip."""
    case = spec.case
    lame = case.lame
    k = spec.k
    gamma = spec.param("gamma")
    sigma_d = spec.param("sigma_D")
    gamma_u = spec.param("gamma_u")
    gamma_p = spec.param("gamma_p")
    gamma_div = spec.param("gamma_div")
    mesh, phi_h, ams = setup_geometry(spec, "boundary")
    mark_dirichlet_neumann(ams, case.secondary)
    h = mesh.h
    qd = 4 * k

    V = FunctionSpace(mesh, ams.active_cells, k, (2,))
    blocks = {"u": V.ndofs}
    QD = Y = QN = None
    if len(ams.dirichlet_cells):
        QD = FunctionSpace(mesh, ams.dirichlet_cells, k, (2,))
        blocks["pD"] = QD.ndofs
    if len(ams.neumann_cells):
        Y = FunctionSpace(mesh, ams.neumann_cells, k, (2, 2))
        QN = FunctionSpace(mesh, ams.neumann_cells, k - 1, (2,))
        blocks["y"] = Y.ndofs
        blocks["pN"] = QN.ndofs
    builder = SystemBuilder(blocks)
    ug = interpolate_fn(V, case.dirichlet_ext)

    neumann_facets = ams.boundary_tags.get("neumann", np.empty(0, np.int64))
    other_facets = np.setdiff1d(ams.boundary_facets, neumann_facets)

    with timer() as t_asm:
        for chunk in chunked(ams.active_cells):
            cb = CellBatch.volume(mesh, chunk, qd)
            bu = cb.basis(V, "u", 1)
            builder.add(cb.weights, fgrad(bu), stress(bu, lame))
            builder.add_rhs(cb.weights, bu, cb.data_from(case.source, (2,)))

        # fictitious-boundary traction, exact on the non-Neumann part and
        # replaced by the proxy on facets with a Neumann inner cell
        if len(other_facets):
            fb, tcb, n = boundary_trace(mesh, other_facets,
                                        ams.active_cells, qd)
            but = tcb.basis(V, "u", 1)
            builder.add(-fb.weights, but, fcontract(stress(but, lame), n))
        if len(neumann_facets):
            fb, tcb, n = boundary_trace(mesh, neumann_facets,
                                        ams.active_cells, qd)
            builder.add(fb.weights, tcb.basis(V, "u", 0),
                        fcontract(tcb.basis(Y, "y", 0), n))

        apply_ghost(builder, mesh, ams.ghost_facets,
                    lambda tc: tc.basis(V, "u", 1), lame, sigma_d * h, qd)

        if QD is not None:
            pen_d = gamma / h ** 2
            for chunk in chunked(ams.dirichlet_cells):
                cb = CellBatch.volume(mesh, chunk, qd)
                phi = cb.known_scalar(phi_h, 0)
                combo = displacement_penalty_combo(
                    phi, cb.basis(V, "u", 0), cb.basis(QD, "pD", 0), h)
                builder.add(pen_d * cb.weights, combo, combo)
                builder.add_rhs(pen_d * cb.weights, combo,
                                cb.known_field(ug, 0))

        if Y is not None:
            pen_n = gamma_p / h ** 2
            for chunk in chunked(ams.neumann_cells):
                cb = CellBatch.volume(mesh, chunk, qd)
                by = cb.basis(Y, "y", 1)
                mismatch = fadd(by, stress(cb.basis(V, "u", 1), lame))
                builder.add(gamma_u * cb.weights, mismatch, mismatch)
                phi = cb.known_scalar(phi_h, 1)
                combo = proxy_normal_combo(phi, by, cb.basis(QN, "pN", 0), h)
                builder.add(pen_n * cb.weights, combo, combo)
                gvals = np.asarray(case.neumann_ext(cb.phys.reshape(-1, 2)))
                gvals = gvals.reshape(cb.phys.shape[:2] + (2,))
                scale = np.linalg.norm(phi.s1, axis=-1)[..., None]
                builder.add_rhs(-pen_n * cb.weights, combo,
                                cb.data(gvals * scale, (2,)))
                div_lsq_kernel(builder, cb, lambda c: c.basis(Y, "y", 1),
                               gamma_div,
                               source=cb.data_from(case.source, (2,)))

        # strong residual least squares away from the Neumann strip
        lsq_cells = np.setdiff1d(ams.gamma_cells, ams.neumann_cells)
        for chunk in chunked(lsq_cells):
            cb = CellBatch.volume(mesh, chunk, qd)
            lsq_residual_kernel(builder, cb, lambda c: c.basis(V, "u", 2),
                                lame, sigma_d * h * h,
                                source=cb.data_from(case.source, (2,)))

    with timer() as t_slv:
        x = builder.solve()

    u = FEFunction(V, x["u"])
    extras = {"u": u}
    if QD is not None:
        extras["pD"] = FEFunction(QD, x["pD"])
    if Y is not None:
        extras["y"] = FEFunction(Y, x["y"])
        extras["pN"] = FEFunction(QN, x["pN"])
    return SchemeResult(spec, ams, phi_h, FESolution(u),
                        x, builder.n, t_asm.total, t_slv.total, extras=extras)
