"""Two-material elasticity with a level-set interface.

Each material occupies one side of {phi = 0}; the two one-sided active
meshes overlap on the interface strip. Displacement continuity is imposed
there through a strip multiplier p, traction continuity through per-side
stress proxies y_i = -sigma_i(u_i) whose normal components are penalized
against each other. The outer box boundary carries strong interpolated
Dirichlet data.
"""

from __future__ import annotations

from ..assembly import (
    CellBatch,
    SystemBuilder,
    chunked,
    fadd,
    fcontract,
    fgrad,
    fmul,
    fscale,
)
from ..elasticity import div_lsq_kernel, stress
from ..spaces import FEFunction, FunctionSpace
from .common import (
    FESolution,
    PairSolution,
    ProblemSpec,
    SchemeResult,
    apply_ghost,
    boundary_trace,
    box_boundary_constraints,
    setup_geometry,
    timer,
)


def solve_interface(spec: ProblemSpec) -> SchemeResult:
    """Overlapping one-sided meshes glued by strip multipliers and proxies."""
    case = spec.case
    k = spec.k
    gamma_p = spec.param("gamma_p")
    gamma_u = spec.param("gamma_u")
    gamma_y = spec.param("gamma_y")
    gamma_div = spec.param("gamma_div")
    sigma_d = spec.param("sigma_D")
    mesh, phi_h, ams = setup_geometry(spec, "interface")
    h = mesh.h
    qd = 4 * k

    V1 = FunctionSpace(mesh, ams.side1_cells, k, (2,))
    V2 = FunctionSpace(mesh, ams.side2_cells, k, (2,))
    Q = FunctionSpace(mesh, ams.gamma_cells, k, (2,))
    Y = FunctionSpace(mesh, ams.gamma_cells, k, (2, 2))
    builder = SystemBuilder({"u1": V1.ndofs, "u2": V2.ndofs, "p": Q.ndofs,
                             "y1": Y.ndofs, "y2": Y.ndofs})
    sides = (("u1", "y1", V1, ams.side1_cells, case.lame_by_side["side1"]),
             ("u2", "y2", V2, ams.side2_cells, case.lame_by_side["side2"]))

    with timer() as t_asm:
        for ub, yb, V, cells, lam in sides:
            for chunk in chunked(cells):
                cb = CellBatch.volume(mesh, chunk, qd)
                bu = cb.basis(V, ub, 1)
                builder.add(cb.weights, fgrad(bu), stress(bu, lam))
                builder.add_rhs(cb.weights, bu,
                                cb.data_from(case.source, (2,)))

            # fictitious-boundary traction carried by the stress proxy
            bf = ams.boundary_tags[ub.replace("u", "side")]
            if len(bf):
                fb, tcb, n = boundary_trace(mesh, bf, cells, qd)
                builder.add(fb.weights, tcb.basis(V, ub, 0),
                            fcontract(tcb.basis(Y, yb, 0), n))

            if sigma_d != 0.0:
                apply_ghost(builder, mesh,
                            ams.ghost_tags[ub.replace("u", "side")],
                            lambda tc: tc.basis(V, ub, 1), lam,
                            sigma_d * h, qd)

            dofs, vals = box_boundary_constraints(V, case.dirichlet_ext)
            builder.set_dirichlet(ub, dofs, vals)

        pen_p = gamma_p / h ** 2
        pen_y = gamma_y / h ** 2
        for chunk in chunked(ams.gamma_cells):
            cb = CellBatch.volume(mesh, chunk, qd)
            phi = cb.known_scalar(phi_h, 1)
            glue = fadd(cb.basis(V1, "u1", 0),
                        fscale(cb.basis(V2, "u2", 0), -1.0),
                        fscale(fmul(phi, cb.basis(Q, "p", 0), nderiv=0),
                               1.0 / h))
            builder.add(pen_p * cb.weights, glue, glue)

            traces = []
            for ub, yb, V, _, lam in sides:
                by = cb.basis(Y, yb, 1)
                mismatch = fadd(by, stress(cb.basis(V, ub, 1), lam))
                builder.add(gamma_u * cb.weights, mismatch, mismatch)
                div_lsq_kernel(builder, cb,
                               lambda c, yb=yb: c.basis(Y, yb, 1), gamma_div,
                               source=cb.data_from(case.source, (2,)))
                traces.append(fcontract(by, phi.s1))
            jump = fadd(traces[0], fscale(traces[1], -1.0))
            builder.add(pen_y * cb.weights, jump, jump)

    with timer() as t_slv:
        x = builder.solve()

    u1 = FEFunction(V1, x["u1"])
    u2 = FEFunction(V2, x["u2"])
    sol = PairSolution(FESolution(u1), FESolution(u2))
    return SchemeResult(spec, ams, phi_h, sol, x, builder.n,
                        t_asm.total, t_slv.total,
                        extras={"u1": u1, "u2": u2,
                                "p": FEFunction(Q, x["p"]),
                                "y1": FEFunction(Y, x["y1"]),
                                "y2": FEFunction(Y, x["y2"])})
