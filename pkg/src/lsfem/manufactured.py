"""Manufactured solutions, test case definitions and error measurement.

Each case bundles the geometry, material and scheme parameters with the
exact solution and the derived data (source terms, boundary extensions).
Errors are integrated on the active cells with quadrature weights masked
to the side of the interpolated level set the solution lives on.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import levelsets
from .assembly import CellBatch
from .elasticity import Lame, lame_from_E_nu, stress_from_grad
from .mesh import ActiveMeshSet


@dataclass
class Case:
    """A manufactured problem: geometry, data and scheme parameters."""

    name: str
    kind: str
    levelset: levelsets.LevelSet
    degree: int
    params: dict
    secondary: levelsets.LevelSet | None = None
    u_exact: callable = None
    grad_exact: callable = None
    source: callable = None
    dirichlet_ext: callable = None
    dirichlet_ext_grad: callable = None
    dirichlet_ext_hess: callable = None
    dirichlet_ext_lap: callable = None
    neumann_ext: callable = None
    lame: Lame | None = None
    lame_by_side: dict = field(default_factory=dict)


# -- smooth displacement (sin(x) e^y, sin(y) e^x) ---------------------------


def _u_smooth(p):
    x, y = p[..., 0], p[..., 1]
    return np.stack([np.sin(x) * np.exp(y), np.sin(y) * np.exp(x)], axis=-1)


def _grad_u_smooth(p):
    x, y = p[..., 0], p[..., 1]
    g = np.empty(p.shape[:-1] + (2, 2))
    g[..., 0, 0] = np.cos(x) * np.exp(y)
    g[..., 0, 1] = np.sin(x) * np.exp(y)
    g[..., 1, 0] = np.sin(y) * np.exp(x)
    g[..., 1, 1] = np.cos(y) * np.exp(x)
    return g


def _hess_u_smooth(p):
    x, y = p[..., 0], p[..., 1]
    sxey = np.sin(x) * np.exp(y)
    cxey = np.cos(x) * np.exp(y)
    syex = np.sin(y) * np.exp(x)
    cyex = np.cos(y) * np.exp(x)
    H = np.empty(p.shape[:-1] + (2, 2, 2))
    H[..., 0, 0, 0] = -sxey
    H[..., 0, 0, 1] = cxey
    H[..., 0, 1, 0] = cxey
    H[..., 0, 1, 1] = sxey
    H[..., 1, 0, 0] = syex
    H[..., 1, 0, 1] = cyex
    H[..., 1, 1, 0] = cyex
    H[..., 1, 1, 1] = -syex
    return H


def _f_smooth(p, lame: Lame):
    # both components of u are harmonic, only the grad-div part survives
    x, y = p[..., 0], p[..., 1]
    c = lame.mu + lame.lam
    f = np.empty(p.shape)
    f[..., 0] = c * (np.sin(x) * np.exp(y) - np.cos(y) * np.exp(x))
    f[..., 1] = c * (np.sin(y) * np.exp(x) - np.cos(x) * np.exp(y))
    return f


def _stress_exact(p, lame: Lame):
    return stress_from_grad(_grad_u_smooth(p), lame)


# -- radial two-material displacement ----------------------------------------


def _sinc_ratios(r):
    """sin(r)/r and (sin(r) - r cos(r))/r^3 with stable small-r series."""
    small = r < 1e-4
    rs = np.where(small, 1.0, r)
    s1 = np.where(small, 1.0 - r * r / 6.0, np.sin(rs) / rs)
    s3 = np.where(small, 1.0 / 3.0 - r * r / 30.0,
                  (np.sin(rs) - rs * np.cos(rs)) / rs ** 3)
    return s1, s3


def _radial_u(p, R, E_in, E_out):
    x = p[..., 0] - 0.5
    y = p[..., 1] - 0.5
    r = np.hypot(x, y)
    amp = np.where(r < R, 1.0 / E_in, 1.0 / E_out) * (np.cos(r) - np.cos(R))
    return np.stack([amp, amp], axis=-1)


def _radial_grad_u(p, R, E_in, E_out):
    x = p[..., 0] - 0.5
    y = p[..., 1] - 0.5
    r = np.hypot(x, y)
    s1, _ = _sinc_ratios(r)
    scale = np.where(r < R, 1.0 / E_in, 1.0 / E_out)
    gx = -scale * s1 * x
    gy = -scale * s1 * y
    g = np.empty(p.shape[:-1] + (2, 2))
    g[..., 0, 0] = gx
    g[..., 0, 1] = gy
    g[..., 1, 0] = gx
    g[..., 1, 1] = gy
    return g


def _radial_f(p, R, nu):
    """Source for the radial solution, smooth across the interface.

    The amplitude 1/E_i cancels against the material stress, so f equals
    -div sigma_hat(v) with unit-modulus Lame parameters and
    v = (cos r - cos R)(1, 1).
    """
    hat = lame_from_E_nu(1.0, nu)
    x = p[..., 0] - 0.5
    y = p[..., 1] - 0.5
    r = np.hypot(x, y)
    s1, s3 = _sinc_ratios(r)
    common = hat.mu * np.cos(r) + (2.0 * hat.mu + hat.lam) * s1
    mix = (hat.mu + hat.lam) * s3 * (x + y)
    f = np.empty(p.shape)
    f[..., 0] = common - mix * x
    f[..., 1] = common - mix * y
    return f


# -- heat ---------------------------------------------------------------------


def _heat_u(p, t):
    return np.exp(p[..., 0]) * np.sin(2.0 * np.pi * p[..., 1]) * np.sin(t)


def _heat_grad_u(p, t):
    g = np.empty(p.shape)
    ex = np.exp(p[..., 0])
    g[..., 0] = ex * np.sin(2.0 * np.pi * p[..., 1]) * np.sin(t)
    g[..., 1] = 2.0 * np.pi * ex * np.cos(2.0 * np.pi * p[..., 1]) * np.sin(t)
    return g


def _heat_f(p, t):
    # u_t - Delta u with Delta u = (1 - 4 pi^2) u
    base = np.exp(p[..., 0]) * np.sin(2.0 * np.pi * p[..., 1])
    return base * (np.cos(t) + (4.0 * np.pi ** 2 - 1.0) * np.sin(t))


# -- case constructors --------------------------------------------------------


def case_dirichlet(E: float = 2.0, nu: float = 0.3) -> Case:
    """Pure Dirichlet elasticity on the circular domain."""
    phi = levelsets.circle_levelset()
    lame = lame_from_E_nu(E, nu)

    def dirichlet_ext(p):
        return _u_smooth(p) * (1.0 + phi(p))[..., None]

    def dirichlet_ext_grad(p):
        s = (1.0 + phi(p))[..., None, None]
        return _grad_u_smooth(p) * s + np.einsum(
            "...i,...j->...ij", _u_smooth(p), phi.gradient(p))

    def dirichlet_ext_hess(p):
        s = (1.0 + phi(p))[..., None, None, None]
        gu = _grad_u_smooth(p)
        gp = phi.gradient(p)
        H = _hess_u_smooth(p) * s
        H += np.einsum("...ij,...k->...ijk", gu, gp)
        H += np.einsum("...ik,...j->...ijk", gu, gp)
        H += np.einsum("...i,...jk->...ijk", _u_smooth(p), phi.hessian(p))
        return H

    return Case(
        name="dirichlet",
        kind="dirichlet",
        levelset=phi,
        degree=2,
        params={"gamma": 20.0, "sigma_D": 20.0},
        u_exact=_u_smooth,
        grad_exact=_grad_u_smooth,
        source=lambda p: _f_smooth(p, lame),
        dirichlet_ext=dirichlet_ext,
        dirichlet_ext_grad=dirichlet_ext_grad,
        dirichlet_ext_hess=dirichlet_ext_hess,
        lame=lame,
    )


def case_mixed(E: float = 2.0, nu: float = 0.3) -> Case:
    """Mixed Dirichlet/Neumann elasticity, split at the line x = 1/2."""
    base = case_dirichlet(E, nu)
    phi = base.levelset
    lame = base.lame

    def neumann_ext(p):
        n = phi.gradient(p)
        norm = np.linalg.norm(n, axis=-1, keepdims=True)
        g = np.einsum("...ij,...j->...i", _stress_exact(p, lame), n) / norm
        return g + _u_smooth(p) * phi(p)[..., None]

    return Case(
        name="mixed",
        kind="mixed",
        levelset=phi,
        secondary=levelsets.mixed_secondary_levelset(),
        degree=2,
        params={"gamma": 20.0, "sigma_D": 20.0, "gamma_u": 1.0,
                "gamma_p": 1.0, "gamma_div": 1.0},
        u_exact=_u_smooth,
        grad_exact=_grad_u_smooth,
        source=base.source,
        dirichlet_ext=base.dirichlet_ext,
        dirichlet_ext_grad=base.dirichlet_ext_grad,
        dirichlet_ext_hess=base.dirichlet_ext_hess,
        neumann_ext=neumann_ext,
        lame=lame,
    )


def case_interface(R: float = 0.3, E_in: float = 7.0, E_out: float = 2.28,
                   nu: float = 0.3) -> Case:
    """Two materials separated by a circular interface of radius R.

    The stiffer material fills the inner disc, the negative side of the
    level set. The radial exact solution is continuous with continuous
    normal stresses across the interface.
    """
    phi = levelsets.interface_levelset(R)

    # the strip coupling terms keep the overlapping meshes tied together
    # strongly enough that the stress-jump ghost penalty is not needed
    # here; a positive weight only inflates the L2 constant
    return Case(
        name="interface",
        kind="interface",
        levelset=phi,
        degree=2,
        params={"gamma_p": 1.0, "gamma_u": 1.0, "gamma_y": 1.0,
                "gamma_div": 1.0, "sigma_D": 0.0},
        u_exact=lambda p: _radial_u(p, R, E_in, E_out),
        grad_exact=lambda p: _radial_grad_u(p, R, E_in, E_out),
        source=lambda p: _radial_f(p, R, nu),
        dirichlet_ext=lambda p: _radial_u(p, R, E_in, E_out),
        lame_by_side={"side1": lame_from_E_nu(E_out, nu),
                      "side2": lame_from_E_nu(E_in, nu)},
    )


def case_crack(E: float = 2.0, nu: float = 0.3) -> Case:
    """Elasticity on a domain cut by a crack along a sine-shaped front."""
    phi, psi = levelsets.crack_levelsets()
    lame = lame_from_E_nu(E, nu)

    def neumann_ext(p):
        n = phi.gradient(p)
        norm = np.linalg.norm(n, axis=-1, keepdims=True)
        g = np.einsum("...ij,...j->...i", _stress_exact(p, lame), n) / norm
        return g + _u_smooth(p) * phi(p)[..., None]

    return Case(
        name="crack",
        kind="crack",
        levelset=phi,
        secondary=psi,
        degree=2,
        params={"gamma_p": 1.0, "gamma_u": 1.0, "gamma_y": 1.0,
                "gamma_div": 1.0, "gamma_u_N": 1.0, "gamma_p_N": 1.0,
                "sigma_D": 20.0},
        u_exact=_u_smooth,
        grad_exact=_grad_u_smooth,
        source=lambda p: _f_smooth(p, lame),
        dirichlet_ext=_u_smooth,
        neumann_ext=neumann_ext,
        lame=lame,
        lame_by_side={"side1": lame, "side2": lame},
    )


def case_heat(T_final: float = 1.0) -> Case:
    """Heat equation on the circular domain with a time-harmonic solution."""
    phi = levelsets.circle_levelset()

    def dirichlet_ext(p, t):
        return _heat_u(p, t) * (1.0 + phi(p))

    def dirichlet_ext_grad(p, t):
        s = (1.0 + phi(p))[..., None]
        return _heat_grad_u(p, t) * s + \
            _heat_u(p, t)[..., None] * phi.gradient(p)

    def dirichlet_ext_lap(p, t):
        # Delta u = (1 - 4 pi^2) u for this solution
        lap_u = (1.0 - 4.0 * np.pi ** 2) * _heat_u(p, t)
        lap_phi = np.trace(phi.hessian(p), axis1=-2, axis2=-1)
        cross = np.einsum("...i,...i->...", _heat_grad_u(p, t),
                          phi.gradient(p))
        return lap_u * (1.0 + phi(p)) + 2.0 * cross + _heat_u(p, t) * lap_phi

    return Case(
        name="heat",
        kind="heat",
        levelset=phi,
        degree=1,
        # with a P1 level-set interpolant the normal-derivative jumps of
        # phi_h w_h carry O(h) interpolation kinks of phi itself, and a
        # large ghost weight penalizes them into the solution; the strip
        # least-squares term alone keeps the extension stable here
        params={"sigma": 20.0, "sigma_D": 0.0, "T_final": T_final},
        u_exact=_heat_u,
        grad_exact=_heat_grad_u,
        source=_heat_f,
        dirichlet_ext=dirichlet_ext,
        dirichlet_ext_grad=dirichlet_ext_grad,
        dirichlet_ext_lap=dirichlet_ext_lap,
    )


# -- error measurement --------------------------------------------------------


def _masked_norms(solution, cells, mesh, phi_h, keep_sign, u_ref, grad_ref,
                  degree):
    """Squared L2/H1 numerator and denominator over one masked region."""
    num_l2 = den_l2 = num_h1 = den_h1 = 0.0
    from .assembly import chunked
    for chunk in chunked(cells):
        cb = CellBatch.volume(mesh, chunk, degree)
        w = cb.weights.copy()
        phi_vals = cb.known_scalar(phi_h, nderiv=0).s0
        if keep_sign < 0:
            w[phi_vals > 0.0] = 0.0
        else:
            w[phi_vals < 0.0] = 0.0
        pts = cb.phys.reshape(-1, 2)
        ue = np.asarray(u_ref(pts)).reshape(cb.phys.shape[:2] + (-1,))
        ge = np.asarray(grad_ref(pts)).reshape(cb.phys.shape[:2] + (-1,))
        uh, gh = solution.eval(chunk, cb.ref_pts)
        uh = uh.reshape(ue.shape)
        gh = gh.reshape(ge.shape)
        num_l2 += np.einsum("nq,nqd->", w, (uh - ue) ** 2)
        den_l2 += np.einsum("nq,nqd->", w, ue ** 2)
        num_h1 += np.einsum("nq,nqd->", w, (gh - ge) ** 2)
        den_h1 += np.einsum("nq,nqd->", w, ge ** 2)
    return num_l2, den_l2, num_h1, den_h1


def compute_errors(u_h, case: Case, ams: ActiveMeshSet, phi_h=None,
                   degree: int | None = None) -> dict:
    """Relative L2 and H1 (gradient seminorm) errors of a solved case.

    For one-sided problems integration runs over the active cells with
    weights masked to the interior; for interface and crack problems the
    per-side contributions are accumulated before taking square roots.
    """
    from .levelsets import interpolate
    from .spaces import FunctionSpace
    mesh = ams.background
    if degree is None:
        degree = 2 * case.degree + 4
    if phi_h is None:
        space = FunctionSpace(mesh, np.arange(mesh.n_cells), case.degree)
        phi_h = interpolate(case.levelset, space)

    if case.kind in ("dirichlet", "mixed", "heat"):
        parts = [(u_h, ams.active_cells, -1)]
    elif case.kind in ("interface", "crack"):
        parts = [(u_h.side1, ams.side1_cells, +1),
                 (u_h.side2, ams.side2_cells, -1)]
    else:
        raise ValueError(f"unknown case kind {case.kind!r}")

    totals = np.zeros(4)
    for sol, cells, sign in parts:
        totals += _masked_norms(sol, cells, mesh, phi_h, sign,
                                case.u_exact, case.grad_exact, degree)
    num_l2, den_l2, num_h1, den_h1 = totals
    return {
        "rel_l2": float(np.sqrt(num_l2 / den_l2)),
        "rel_h1": float(np.sqrt(num_h1 / den_h1)),
        "abs_l2": float(np.sqrt(num_l2)),
        "abs_h1": float(np.sqrt(num_h1)),
    }


def time_errors(series, case: Case, dt: float) -> dict:
    """Aggregate per-step norms into Linf(L2) and L2(H1) relative errors.

    series rows are (t, num_l2, den_l2, num_h1, den_h1) with unsquared
    norms; the initial time enters the max norms but not the quadrature.
    """
    arr = np.asarray([row[1:] for row in series], dtype=float)
    num_inf = arr[:, 0].max()
    den_inf = arr[:, 1].max()
    steps = arr[1:]
    num_l2h1 = np.sqrt(dt * np.sum(steps[:, 2] ** 2))
    den_l2h1 = np.sqrt(dt * np.sum(steps[:, 3] ** 2))
    return {
        "rel_l2": float(num_inf / den_inf),
        "rel_h1": float(num_l2h1 / den_l2h1),
    }


# -- convergence reports ------------------------------------------------------


@dataclass
class ConvergenceReport:
    """Rows of a mesh refinement study for one case."""

    case: str
    params: dict = field(default_factory=dict)
    rows: list = field(default_factory=list)

    COLUMNS = ("N", "h", "ndofs", "rel_l2", "rel_h1", "assemble_s", "solve_s")

    def add_row(self, **kw):
        if self.rows and kw["h"] >= self.rows[-1]["h"]:
            raise ValueError("report rows must have strictly decreasing h")
        self.rows.append({c: kw[c] for c in self.COLUMNS})

    def column(self, name):
        return np.array([row[name] for row in self.rows], dtype=float)

    def to_csv(self, path, zero_timings: bool = False):
        lines = ["case,N,h,ndofs,rel_l2,rel_h1,assemble_s,solve_s"]
        for row in self.rows:
            r = dict(row)
            if zero_timings:
                r["assemble_s"] = 0.0
                r["solve_s"] = 0.0
            lines.append(",".join([
                self.case, str(int(r["N"])), repr(float(r["h"])),
                str(int(r["ndofs"])), repr(float(r["rel_l2"])),
                repr(float(r["rel_h1"])), f"{r['assemble_s']:.6f}",
                f"{r['solve_s']:.6f}"]))
        text = "\n".join(lines) + "\n"
        with open(path, "w") as fh:
            fh.write(text)

    def to_json(self) -> dict:
        try:
            orders = fit_order(self)
        except ValueError:
            orders = {"l2": None, "h1": None}
        return {"case": self.case, "params": self.params,
                "rows": self.rows, "orders": orders}


def fit_order(report) -> dict:
    """Least-squares convergence orders of both error columns in log-log."""
    if isinstance(report, ConvergenceReport):
        h = report.column("h")
        e2 = report.column("rel_l2")
        e1 = report.column("rel_h1")
    else:
        h = np.asarray(report["h"], dtype=float)
        e2 = np.asarray(report["rel_l2"], dtype=float)
        e1 = np.asarray(report["rel_h1"], dtype=float)
    if len(h) < 3:
        raise ValueError("order fit needs at least three refinement levels")
    if np.any(e2 <= 0.0) or np.any(e1 <= 0.0):
        raise ValueError("order fit needs positive errors")
    out = {}
    out["l2"] = float(np.polyfit(np.log(h), np.log(e2), 1)[0])
    out["h1"] = float(np.polyfit(np.log(h), np.log(e1), 1)[0])
    return out
