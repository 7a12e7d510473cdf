"""Linear elasticity constitutive operators on assembly fields.

Plane problems with Lame parameters derived from Young's modulus and
Poisson ratio. The operators act on the derivative tables of assembly
field parts, so they apply uniformly to trial, test and data factors.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .assembly import AssemblyError, FieldPart


@dataclass(frozen=True)
class Lame:
    mu: float
    lam: float


def lame_from_E_nu(E: float, nu: float) -> Lame:
    """Plane-strain Lame parameters from engineering constants."""
    if E <= 0.0:
        raise ValueError(f"Young modulus must be positive, got {E}")
    if not -1.0 < nu < 0.5:
        raise ValueError(f"Poisson ratio must lie in (-1, 1/2), got {nu}")
    mu = E / (2.0 * (1.0 + nu))
    lam = E * nu / ((1.0 + nu) * (1.0 - 2.0 * nu))
    return Lame(mu, lam)


def stress(field, lame: Lame):
    """Cauchy stress of a vector displacement field, value shape (2, 2)."""
    out = []
    for p in field:
        if p.vshape != (2,) or p.d1 is None:
            raise AssemblyError("stress needs a vector field with first derivatives")
        sym = p.d1 + p.d1.swapaxes(2, 3)
        s = lame.mu * sym
        div = p.d1[:, :, 0, 0, :] + p.d1[:, :, 1, 1, :]
        s[:, :, 0, 0, :] += lame.lam * div
        s[:, :, 1, 1, :] += lame.lam * div
        d1 = None
        if p.d2 is not None:
            sym2 = p.d2 + p.d2.swapaxes(2, 3)
            s1 = lame.mu * sym2
            divg = p.d2[:, :, 0, 0, :, :] + p.d2[:, :, 1, 1, :, :]
            s1[:, :, 0, 0, :, :] += lame.lam * divg
            s1[:, :, 1, 1, :, :] += lame.lam * divg
            d1 = s1
        out.append(FieldPart(p.block, p.dofs, (2, 2), s, d1))
    return out


def div_stress(field, lame: Lame):
    """Divergence of the stress, the elasticity operator applied pointwise."""
    out = []
    for p in field:
        if p.vshape != (2,) or p.d2 is None:
            raise AssemblyError("stress divergence needs second derivatives")
        lap = p.d2[:, :, :, 0, 0, :] + p.d2[:, :, :, 1, 1, :]
        graddiv = p.d2[:, :, 0, :, 0, :] + p.d2[:, :, 1, :, 1, :]
        d0 = lame.mu * lap + (lame.mu + lame.lam) * graddiv
        out.append(FieldPart(p.block, p.dofs, (2,), d0))
    return out


def stress_from_grad(grad_u, lame: Lame):
    """Stress tensor from a pointwise displacement gradient array (..., 2, 2)."""
    g = np.asarray(grad_u, dtype=float)
    sym = g + np.swapaxes(g, -1, -2)
    s = lame.mu * sym
    div = g[..., 0, 0] + g[..., 1, 1]
    s[..., 0, 0] += lame.lam * div
    s[..., 1, 1] += lame.lam * div
    return s


def ghost_penalty_kernel(builder, fb, make_field, lame: Lame, coeff: float):
    """Facet jump penalty on normal stresses across a strip of facets.

    make_field(trace_batch) must return the displacement field restricted
    to the cells of the trace; the kernel forms the stress-jump pairing
    with itself, scaled by coeff times the facet weights.
    """
    fc = fb.mesh.facet_cells[fb.facets]
    n = fb.normals(fc[:, 0])

    def stress_n(cells):
        from .assembly import fcontract
        return fcontract(stress(make_field(fb.trace(cells)), lame), n)

    from .assembly import fadd, fscale
    jump = fadd(stress_n(fc[:, 0]), fscale(stress_n(fc[:, 1]), -1.0))
    builder.add(coeff * fb.weights, jump, jump)


def lsq_residual_kernel(builder, cb, make_field, lame: Lame, coeff: float,
                        source=None):
    """Least-squares penalty on the strong residual over strip cells.

    Adds coeff * (div sigma(u), div sigma(v)) to the matrix and, when a
    source field is given, coeff * (f, div sigma(v)) to the rhs, matching
    the sign convention of the momentum balance div sigma = -f.
    """
    divs = div_stress(make_field(cb), lame)
    builder.add(coeff * cb.weights, divs, divs)
    if source is not None:
        builder.add_rhs(-coeff * cb.weights, divs, source)


def div_lsq_kernel(builder, cb, make_tensor, coeff: float, source=None):
    """Least-squares penalty on the divergence of a stress proxy field."""
    from .assembly import fdiv_tensor
    divy = fdiv_tensor(make_tensor(cb))
    builder.add(coeff * cb.weights, divy, divy)
    if source is not None:
        builder.add_rhs(coeff * cb.weights, divy, source)
