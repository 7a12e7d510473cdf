"""Elasticity on a domain cut by a crack along a level-set front.

The front {phi = 0} is split by a secondary level set psi into the actual
crack (psi > 0), which carries a traction condition on both faces, and a
fictitious internal interface (psi < 0) across which displacement and
normal stress stay continuous. Both halves of the domain are discretized
on overlapping one-sided meshes as in the two-material problem; the
interface strip couplings act only on cells entirely on the fictitious
side, the per-side traction proxies only on cells entirely on the crack
side. Strip cells straddling the front tip carry stabilization only.
"""

from __future__ import annotations

import numpy as np

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
    proxy_normal_combo,
    setup_geometry,
    timer,
)
from ..mesh import mark_crack


def solve_crack(spec: ProblemSpec) -> SchemeResult:
    """Overlapping one-sided meshes with per-side crack traction proxies."""
    case = spec.case
    lame = case.lame
    k = spec.k
    gamma_p = spec.param("gamma_p")
    gamma_u = spec.param("gamma_u")
    gamma_y = spec.param("gamma_y")
    gamma_div = spec.param("gamma_div")
    gamma_u_n = spec.param("gamma_u_N")
    gamma_p_n = spec.param("gamma_p_N")
    sigma_d = spec.param("sigma_D")
    mesh, phi_h, ams = setup_geometry(spec, "interface")
    mark_crack(ams, case.secondary)
    h = mesh.h
    qd = 4 * k

    V1 = FunctionSpace(mesh, ams.side1_cells, k, (2,))
    V2 = FunctionSpace(mesh, ams.side2_cells, k, (2,))
    blocks = {"u1": V1.ndofs, "u2": V2.ndofs}
    Qi = Yi = Yf = Qf = None
    if len(ams.internal_cells):
        Qi = FunctionSpace(mesh, ams.internal_cells, k, (2,))
        Yi = FunctionSpace(mesh, ams.internal_cells, k, (2, 2))
        blocks.update({"p": Qi.ndofs, "y1": Yi.ndofs, "y2": Yi.ndofs})
    if len(ams.crack_cells):
        Yf = FunctionSpace(mesh, ams.crack_cells, k, (2, 2))
        Qf = FunctionSpace(mesh, ams.crack_cells, k - 1, (2,))
        blocks.update({"y1N": Yf.ndofs, "y2N": Yf.ndofs,
                       "p1N": Qf.ndofs, "p2N": Qf.ndofs})
    builder = SystemBuilder(blocks)
    sides = (("u1", V1, ams.side1_cells, "side1"),
             ("u2", V2, ams.side2_cells, "side2"))

    with timer() as t_asm:
        for ub, V, cells, tag in sides:
            for chunk in chunked(cells):
                cb = CellBatch.volume(mesh, chunk, qd)
                bu = cb.basis(V, ub, 1)
                builder.add(cb.weights, fgrad(bu), stress(bu, lame))
                builder.add_rhs(cb.weights, bu,
                                cb.data_from(case.source, (2,)))

            # fictitious boundary: stress proxies where the inner cell is
            # marked, the plain traction on the remaining (straddling) part
            bf_int = ams.boundary_tags[tag + "_int"]
            bf_f = ams.boundary_tags[tag + "_f"]
            rest = np.setdiff1d(ams.boundary_tags[tag],
                                np.concatenate([bf_int, bf_f]))
            yb = ub.replace("u", "y")
            if len(bf_int):
                fb, tcb, n = boundary_trace(mesh, bf_int, cells, qd)
                builder.add(fb.weights, tcb.basis(V, ub, 0),
                            fcontract(tcb.basis(Yi, yb, 0), n))
            if len(bf_f):
                fb, tcb, n = boundary_trace(mesh, bf_f, cells, qd)
                builder.add(fb.weights, tcb.basis(V, ub, 0),
                            fcontract(tcb.basis(Yf, yb + "N", 0), n))
            if len(rest):
                fb, tcb, n = boundary_trace(mesh, rest, cells, qd)
                but = tcb.basis(V, ub, 1)
                builder.add(-fb.weights, but,
                            fcontract(stress(but, lame), n))

            apply_ghost(builder, mesh, ams.ghost_tags[tag],
                        lambda tc: tc.basis(V, ub, 1), lame, sigma_d * h, qd)

            dofs, vals = box_boundary_constraints(V, case.dirichlet_ext)
            builder.set_dirichlet(ub, dofs, vals)

        if Qi is not None:
            pen_p = gamma_p / h ** 2
            pen_y = gamma_y / h ** 2
            for chunk in chunked(ams.internal_cells):
                cb = CellBatch.volume(mesh, chunk, qd)
                phi = cb.known_scalar(phi_h, 1)
                glue = fadd(cb.basis(V1, "u1", 0),
                            fscale(cb.basis(V2, "u2", 0), -1.0),
                            fscale(fmul(phi, cb.basis(Qi, "p", 0), nderiv=0),
                                   1.0 / h))
                builder.add(pen_p * cb.weights, glue, glue)
                traces = []
                for ub, V, _, _ in sides:
                    yb = ub.replace("u", "y")
                    by = cb.basis(Yi, yb, 1)
                    mismatch = fadd(by, stress(cb.basis(V, ub, 1), lame))
                    builder.add(gamma_u * cb.weights, mismatch, mismatch)
                    div_lsq_kernel(builder, cb,
                                   lambda c, yb=yb: c.basis(Yi, yb, 1),
                                   gamma_div,
                                   source=cb.data_from(case.source, (2,)))
                    traces.append(fcontract(by, phi.s1))
                jump = fadd(traces[0], fscale(traces[1], -1.0))
                builder.add(pen_y * cb.weights, jump, jump)

        if Yf is not None:
            pen_n = gamma_p_n / h ** 2
            for chunk in chunked(ams.crack_cells):
                cb = CellBatch.volume(mesh, chunk, qd)
                phi = cb.known_scalar(phi_h, 1)
                gvals = np.asarray(case.neumann_ext(cb.phys.reshape(-1, 2)))
                gvals = gvals.reshape(cb.phys.shape[:2] + (2,))
                gdata = cb.data(
                    gvals * np.linalg.norm(phi.s1, axis=-1)[..., None], (2,))
                for ub, V, _, _ in sides:
                    yb = ub.replace("u", "y") + "N"
                    pb = ub.replace("u", "p") + "N"
                    by = cb.basis(Yf, yb, 1)
                    mismatch = fadd(by, stress(cb.basis(V, ub, 1), lame))
                    builder.add(gamma_u_n * cb.weights, mismatch, mismatch)
                    combo = proxy_normal_combo(phi, by, cb.basis(Qf, pb, 0), h)
                    builder.add(pen_n * cb.weights, combo, combo)
                    builder.add_rhs(-pen_n * cb.weights, combo, gdata)
                    div_lsq_kernel(builder, cb,
                                   lambda c, yb=yb: c.basis(Yf, yb, 1),
                                   gamma_div,
                                   source=cb.data_from(case.source, (2,)))

    with timer() as t_slv:
        x = builder.solve()

    u1 = FEFunction(V1, x["u1"])
    u2 = FEFunction(V2, x["u2"])
    sol = PairSolution(FESolution(u1), FESolution(u2))
    return SchemeResult(spec, ams, phi_h, sol, x, builder.n,
                        t_asm.total, t_slv.total,
                        extras={"u1": u1, "u2": u2})
