"""Second-order check of the per-round progress ``f(a, b) = 1 / R`` (up to a constant).

``f(a, b) = g((b / gamma) g(a / zeta))`` with ``g(x) = 1 - exp(-x)``. Its
Hessian entries are evaluated in closed form and cross-checked against
central finite differences taken in high precision.
"""

from __future__ import annotations

from dataclasses import dataclass

import mpmath
import numpy as np


def hessian(a, b, zeta: float, gamma: float):
    """Closed-form ``(f_aa, f_bb, f_ab)``; elementwise on arrays."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    x = a / zeta
    k = b / gamma
    t = -np.expm1(-x)  # g(x)
    gp_x = np.exp(-x)  # g'(x)
    gp_u = np.exp(-k * t)  # g'(k g(x))
    f_aa = b / (gamma * zeta**2) * gp_x * gp_u * (-k * gp_x - 1.0)
    f_bb = -((t / gamma) ** 2) * gp_u
    f_ab = 1.0 / (gamma * zeta) * gp_x * gp_u * (1.0 - k * t)
    return f_aa, f_bb, f_ab


def hessian_scale(a, b, zeta: float, gamma: float):
    """Magnitude of the summands making up each entry.

    ``f_ab`` changes sign where ``k t = 1``; relative errors are measured
    against these scales rather than the (possibly vanishing) entry itself.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    x = a / zeta
    k = b / gamma
    t = -np.expm1(-x)
    gp_x = np.exp(-x)
    gp_u = np.exp(-k * t)
    s_aa = b / (gamma * zeta**2) * gp_x * gp_u * (k * gp_x + 1.0)
    s_bb = (t / gamma) ** 2 * gp_u
    s_ab = 1.0 / (gamma * zeta) * gp_x * gp_u * (1.0 + k * t)
    return s_aa, s_bb, s_ab


def determinant_factor(a, b, zeta: float, gamma: float):
    """``k t (2 - t) - (1 - t)``; the Hessian determinant has its sign."""
    t = -np.expm1(-np.asarray(a, dtype=float) / zeta)
    k = np.asarray(b, dtype=float) / gamma
    return k * t * (2.0 - t) - (1.0 - t)


def fd_hessian(a: float, b: float, zeta: float, gamma: float, dps: int = 80, rel_step: float = 1e-10):
    """Central-difference Hessian of ``f`` in ``dps``-digit arithmetic.

    Differences are taken on ``1 - f = exp(-(b/gamma)(1 - exp(-a/zeta)))``,
    which keeps full relative precision where the derivatives are tiny.
    """
    with mpmath.workdps(dps):
        z, g = mpmath.mpf(zeta), mpmath.mpf(gamma)
        a0, b0 = mpmath.mpf(a), mpmath.mpf(b)
        ha = a0 * rel_step
        hb = b0 * rel_step

        def tail(x, y):
            return mpmath.exp(-(y / g) * (-mpmath.expm1(-x / z)))

        c = tail(a0, b0)
        t_aa = (tail(a0 + ha, b0) - 2 * c + tail(a0 - ha, b0)) / ha**2
        t_bb = (tail(a0, b0 + hb) - 2 * c + tail(a0, b0 - hb)) / hb**2
        t_ab = (
            tail(a0 + ha, b0 + hb)
            - tail(a0 + ha, b0 - hb)
            - tail(a0 - ha, b0 + hb)
            + tail(a0 - ha, b0 - hb)
        ) / (4 * ha * hb)
        return -float(t_aa), -float(t_bb), -float(t_ab)


@dataclass(frozen=True)
class ConcavityReport:
    points: int
    f_aa_max: float
    f_aa_violations: int
    region_points: int
    region_det_min: float
    region_det_violations: int
    outside_negative_det: int
    fd_points: int
    fd_max_rel_err: float
    fd_violations: int

    @property
    def ok(self) -> bool:
        return self.f_aa_violations == 0 and self.region_det_violations == 0 and self.fd_violations == 0


def concavity_check(
    zeta: float,
    gamma: float,
    a_grid,
    b_grid,
    fd_stride: int | None = 1,
    fd_rtol: float = 1e-4,
    det_atol: float = 1e-12,
) -> ConcavityReport:
    """Check ``f_aa < 0`` everywhere on the grid and ``det >= -det_atol`` where
    ``k t (2 - t) >= 1 - t``; outside that region negative determinants are
    counted, not flagged. Every ``fd_stride``-th grid point along each axis is
    compared with :func:`fd_hessian` (``None`` skips the comparison)."""
    a_grid = np.asarray(a_grid, dtype=float)
    b_grid = np.asarray(b_grid, dtype=float)
    if np.any(a_grid <= 0) or np.any(b_grid <= 0):
        raise ValueError("grids must be positive")
    aa, bb = np.meshgrid(a_grid, b_grid, indexing="ij")
    f_aa, f_bb, f_ab = hessian(aa, bb, zeta, gamma)
    det = f_aa * f_bb - f_ab**2
    region = determinant_factor(aa, bb, zeta, gamma) >= 0

    fd_errs = []
    if fd_stride:
        s_aa, s_bb, s_ab = hessian_scale(aa, bb, zeta, gamma)
        for i in range(0, len(a_grid), fd_stride):
            for j in range(0, len(b_grid), fd_stride):
                fd = fd_hessian(a_grid[i], b_grid[j], zeta, gamma)
                an = (f_aa[i, j], f_bb[i, j], f_ab[i, j])
                sc = (s_aa[i, j], s_bb[i, j], s_ab[i, j])
                fd_errs.append(max(abs(x - y) / s for x, y, s in zip(fd, an, sc)))
    fd_errs = np.array(fd_errs)

    return ConcavityReport(
        points=aa.size,
        f_aa_max=float(f_aa.max()),
        f_aa_violations=int(np.count_nonzero(f_aa >= 0)),
        region_points=int(region.sum()),
        region_det_min=float(det[region].min()) if region.any() else float("nan"),
        region_det_violations=int(np.count_nonzero(det[region] < -det_atol)),
        outside_negative_det=int(np.count_nonzero(det[~region] < 0)),
        fd_points=len(fd_errs),
        fd_max_rel_err=float(fd_errs.max()) if len(fd_errs) else 0.0,
        fd_violations=int(np.count_nonzero(fd_errs > fd_rtol)),
    )
