"""Direct reference solver for the rotating strip, mode by horizontal mode.

The linear system decouples exactly over horizontal Fourier modes, so each
k_h owns an independent z-resolved velocity-pressure differential-algebraic
system.  Discretisation: graded second-order finite differences in z (tanh
stretching toward both walls, enforced to put at least eight nodes inside the
Ekman scale), pressure on a staggered cell grid with the discrete gradient
chosen adjoint to the divergence (pressure then does no work discretely),
trapezoidal time stepping (A-stable and free of numerical damping, so any
measured decay is physical), and a monolithic sparse LU of the saddle system
factorised once per run.  Splitting the pressure would be fatal here: the
1/eps Coriolis-pressure balance amplifies any projection error.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .params import Params
from .spectral import SpectralField, basis_profile, semigroup
from .layers import BoundaryTrace


# ---------------------------------------------------------------------------
# graded grid
# ---------------------------------------------------------------------------


def graded_nodes(Nz: int, delta: float, min_wall_nodes: int = 8,
                 max_strength: float = 30.0, max_center_spacing: float = 0.05) -> np.ndarray:
    """Nodes in [0,1], tanh-clustered so >= min_wall_nodes lie within delta
    of each wall without starving the interior.  Rejects hopeless (Nz, delta)
    pairs with the computed requirement instead of silently under-resolving."""
    if Nz < 4 * min_wall_nodes:
        raise ValueError(f"Nz={Nz} too small: need at least {4 * min_wall_nodes} nodes")
    xi = np.linspace(0.0, 1.0, Nz + 1)

    def nodes(s):
        return 0.5 * (1.0 + np.tanh(s * (2.0 * xi - 1.0)) / math.tanh(s))

    if delta >= min_wall_nodes / Nz:
        return xi  # uniform grid already resolves the layer
    lo, hi = 1e-3, max_strength
    if nodes(hi)[min_wall_nodes] > delta:
        raise ValueError(
            f"cannot place {min_wall_nodes} nodes within delta={delta:.3e} of the wall "
            f"with Nz={Nz}: increase Nz (roughly Nz >= {int(min_wall_nodes / delta ** 0.5)})"
        )
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        if nodes(mid)[min_wall_nodes] > delta:
            lo = mid
        else:
            hi = mid
    out = nodes(hi)
    spacing = float(np.max(np.diff(out)))
    if spacing > max_center_spacing:
        # clustering this strong leaves the core under-resolved
        need = int(math.ceil(Nz * spacing / max_center_spacing))
        raise ValueError(
            f"grading for delta={delta:.3e} leaves a core spacing of {spacing:.3e} "
            f"(> {max_center_spacing}); increase Nz to roughly {need}"
        )
    return out


def node_weights(z: np.ndarray) -> np.ndarray:
    """Trapezoid quadrature weights on the (nonuniform) nodes."""
    w = np.zeros_like(z)
    h = np.diff(z)
    w[0] = h[0] / 2
    w[-1] = h[-1] / 2
    w[1:-1] = (h[:-1] + h[1:]) / 2
    return w


# ---------------------------------------------------------------------------
# trajectories
# ---------------------------------------------------------------------------


@dataclass
class ModeTrajectory:
    """Time history of one horizontal mode on its z grid."""

    k_h: tuple
    z: np.ndarray
    times: list = field(default_factory=list)
    snapshots: list = field(default_factory=list)  # (u: (Nz+1, 3), p: (Nz,))
    diagnostics: list = field(default_factory=list)

    @property
    def weights(self):
        return node_weights(self.z)

    def l2_norm(self, index: int) -> float:
        u, _ = self.snapshots[index]
        return l2_norm(u, self.weights)

    def mode_coefficient(self, k) -> np.ndarray:
        """<N_k, u(t)> over saved snapshots (k must share this k_h)."""
        k = tuple(int(c) for c in k)
        if (k[0], k[1]) != tuple(self.k_h):
            raise ValueError(f"mode {k} does not belong to column k_h={self.k_h}")
        prof = basis_profile(k, self.z)  # (3, Nz+1)
        w = self.weights
        out = np.empty(len(self.snapshots), dtype=complex)
        for i, (u, _) in enumerate(self.snapshots):
            out[i] = 4.0 * math.pi ** 2 * np.sum(w * np.sum(np.conj(prof) * u.T, axis=0))
        return out


def l2_norm(u: np.ndarray, weights: np.ndarray) -> float:
    """L2(omega) norm of one mode's nodal profile (Parseval in x_h)."""
    return 2.0 * math.pi * math.sqrt(float(np.sum(weights * np.sum(np.abs(u) ** 2, axis=1))))


def l2_difference(u: np.ndarray, analytic: np.ndarray, weights: np.ndarray) -> float:
    """Weighted mismatch between a nodal state (Nz+1, 3) and analytic samples
    of the same shape (or (3, Nz+1))."""
    a = np.asarray(analytic)
    if a.shape != u.shape:
        a = a.T
    return l2_norm(u - a, weights)


# ---------------------------------------------------------------------------
# per-mode system assembly
# ---------------------------------------------------------------------------


class _ModeSystem:
    """CN-discretised DAE for one k_h != 0 (full) or k_h = 0 (reduced)."""

    def __init__(self, k_h, params: Params, z: np.ndarray, dt: float,
                 diffusion: bool = True):
        self.k_h = (int(k_h[0]), int(k_h[1]))
        self.params = params
        self.z = z
        self.dt = dt
        self.diffusion = diffusion
        self.Nz = len(z) - 1
        self.wn = node_weights(z)
        self.reduced = self.k_h == (0, 0)
        self._assemble()

    # unknown layout: u-major [u1_i, u2_i, (u3_i)] then cells of p
    def _iu(self, i, c):
        return (2 if self.reduced else 3) * i + c

    def _assemble(self):
        k1, k2 = self.k_h
        kh2 = k1 * k1 + k2 * k2
        Nz = self.Nz
        z = self.z
        eps, nu = self.params.epsilon, self.params.nu
        ncomp = 2 if self.reduced else 3
        nu_unk = ncomp * (Nz + 1)
        np_unk = 0 if self.reduced else Nz
        n = nu_unk + np_unk
        ip = lambda j: nu_unk + j

        h = np.diff(z)
        wc = h  # cell measures
        wn = self.wn

        lhs = sp.lil_matrix((n, n), dtype=complex)
        rhs = sp.lil_matrix((n, n), dtype=complex)
        self.stress_rows = []  # (row, component)

        def lap_row(i):
            hm, hp = h[i - 1], h[i]
            return (2.0 / (hm * (hm + hp)), -2.0 / (hm * hp), 2.0 / (hp * (hm + hp)))

        # divergence operator D: cells x unknowns (for the full system)
        D = None
        if not self.reduced:
            D = sp.lil_matrix((Nz, n), dtype=complex)
            for j in range(Nz):
                D[j, self._iu(j, 0)] += 0.5j * k1
                D[j, self._iu(j + 1, 0)] += 0.5j * k1
                D[j, self._iu(j, 1)] += 0.5j * k2
                D[j, self._iu(j + 1, 1)] += 0.5j * k2
                D[j, self._iu(j, 2)] += -1.0 / h[j]
                D[j, self._iu(j + 1, 2)] += 1.0 / h[j]
            D = D.tocsr()

        def add_diff_row(row, i, c, visc: bool):
            """Mass + CN spatial terms for component c at node i."""
            lhs[row, row] += 1.0 / self.dt
            rhs[row, row] += 1.0 / self.dt
            if visc and self.diffusion:
                lhs[row, self._iu(i, c)] += 0.5 * kh2
                rhs[row, self._iu(i, c)] -= 0.5 * kh2
                cm, c0, cp = lap_row(i)
                for off, coef in ((-1, cm), (0, c0), (1, cp)):
                    lhs[row, self._iu(i + off, c)] += -0.5 * nu * coef
                    rhs[row, self._iu(i + off, c)] -= -0.5 * nu * coef
            # Coriolis: e3 ^ u = (-u2, u1, 0)
            if c == 0:
                lhs[row, self._iu(i, 1)] += -0.5 / eps
                rhs[row, self._iu(i, 1)] -= -0.5 / eps
            elif c == 1:
                lhs[row, self._iu(i, 0)] += 0.5 / eps
                rhs[row, self._iu(i, 0)] -= 0.5 / eps

        interior = range(1, Nz)
        if self.diffusion:
            h_nodes = interior
        else:
            h_nodes = range(0, Nz + 1)  # no-slip not imposed without viscosity

        for i in h_nodes:
            for c in (0, 1):
                add_diff_row(self._iu(i, c), i, c, visc=(1 <= i <= Nz - 1))
        if not self.reduced:
            for i in interior:
                add_diff_row(self._iu(i, 2), i, 2, visc=True)

        # pressure gradient (fully implicit) adjoint to the divergence:
        # G = -W_n^{-1} D^H W_c, so the pressure does no work discretely
        if not self.reduced:
            Gmat = -(D.conj().T).multiply(wc).tocsr()
            scale = sp.diags(np.concatenate([np.repeat(1.0 / wn, ncomp), np.zeros(np_unk)]))
            Gmat = scale.dot(Gmat)
            rows_used = set()
            for i in h_nodes:
                rows_used.add(self._iu(i, 0))
                rows_used.add(self._iu(i, 1))
            for i in interior:
                rows_used.add(self._iu(i, 2))
            Gc = Gmat.tocoo()
            for r, cell, v in zip(Gc.row, Gc.col, Gc.data):
                if r in rows_used:
                    lhs[r, nu_unk + cell] += v

        # algebraic rows
        if self.diffusion:
            for c in range(ncomp):  # no-slip bottom
                lhs[self._iu(0, c), self._iu(0, c)] = 1.0
            # top: u3 = 0 and CN-averaged stress on u_h
            if not self.reduced:
                lhs[self._iu(Nz, 2), self._iu(Nz, 2)] = 1.0
            hm, hp = h[-2], h[-1]
            # one-sided second-order derivative at z = 1
            d0 = (2 * hp + hm) / (hp * (hp + hm))
            d1 = -(hp + hm) / (hp * hm)
            d2 = hp / (hm * (hp + hm))
            for c in (0, 1):
                row = self._iu(Nz, c)
                for off, coef in ((0, d0), (-1, d1), (-2, d2)):
                    lhs[row, self._iu(Nz + off, c)] += 0.5 * coef
                    rhs[row, self._iu(Nz + off, c)] -= 0.5 * coef
                self.stress_rows.append((row, c))
        else:
            if not self.reduced:
                lhs[self._iu(0, 2), self._iu(0, 2)] = 1.0
                lhs[self._iu(Nz, 2), self._iu(Nz, 2)] = 1.0

        if not self.reduced:
            lc = D.tocoo()
            for j, cidx, v in zip(lc.row, lc.col, lc.data):
                lhs[ip(j), cidx] += v

        self.n = n
        self.nu_unk = nu_unk
        try:
            self.lu = spla.splu(lhs.tocsc())
        except RuntimeError as exc:  # singular saddle system: should not occur for nu > 0
            raise RuntimeError(
                f"saddle system factorisation failed for k_h={self.k_h} "
                f"(Nz={self.Nz}, dt={self.dt}, eps={self.params.epsilon}, "
                f"nu={self.params.nu}, diffusion={self.diffusion}): {exc}"
            ) from exc
        self.rhs_mat = rhs.tocsr()
        self.D = D if not self.reduced else None

    def initial_state(self, gamma: SpectralField) -> np.ndarray:
        x = np.zeros(self.n, dtype=complex)
        prof = gamma.profile(self.k_h, self.z)  # (3, Nz+1)
        ncomp = 2 if self.reduced else 3
        idx = np.arange(self.Nz + 1) * ncomp
        for c in range(ncomp):
            x[idx + c] = prof[c]
        return x

    def velocity(self, x: np.ndarray) -> np.ndarray:
        ncomp = 2 if self.reduced else 3
        u = x[: self.nu_unk].reshape(self.Nz + 1, ncomp)
        if self.reduced:
            u = np.column_stack([u, np.zeros(self.Nz + 1, dtype=complex)])
        return u

    def pressure(self, x: np.ndarray) -> np.ndarray:
        if self.reduced:
            return np.zeros(self.Nz, dtype=complex)
        return x[self.nu_unk:]

    def step(self, x: np.ndarray, g_half: np.ndarray) -> np.ndarray:
        b = self.rhs_mat.dot(x)
        for (row, c) in self.stress_rows:
            b[row] += g_half[c]
        return self.lu.solve(b)

    def divergence_residual(self, x: np.ndarray) -> float:
        if self.reduced:
            return 0.0
        scale = max(1.0, float(np.max(np.abs(x[: self.nu_unk]))))
        return float(np.max(np.abs(self.D.dot(x)))) / scale


# ---------------------------------------------------------------------------
# driver
# ---------------------------------------------------------------------------


def solve_direct(gamma: SpectralField, sigma, params: Params, t_end: float,
                 dt: float | None = None, Nz: int = 256, grading: np.ndarray | None = None,
                 save_every: int = 10, diffusion: bool = True,
                 min_wall_nodes: int = 8) -> dict:
    """Integrate the full linear system; returns {k_h: ModeTrajectory}.

    gamma supplies the initial data (finite eigenmode sum), sigma the surface
    stress table (side-1 BoundaryTrace or None).  Resolution preconditions
    are enforced up front: dt <= eps/10 and a grid with min_wall_nodes nodes
    inside sqrt(eps nu) of each wall.
    """
    if dt is None:
        dt = params.epsilon / 10.0
    if dt > params.epsilon / 10.0 + 1e-15:
        raise ValueError(
            f"dt={dt} too coarse for the rotation period: need dt <= eps/10 = "
            f"{params.epsilon / 10.0:.3e}")
    if grading is None:
        grading = graded_nodes(Nz, params.layer_scale if diffusion else 1.0,
                               min_wall_nodes=min_wall_nodes)
    z = np.asarray(grading, dtype=float)

    stress_table = {}
    if sigma is not None:
        if isinstance(sigma, BoundaryTrace):
            if sigma.side != 1:
                raise ValueError("stress acts on the surface (side 1)")
            items = sigma.entries()
        else:
            items = sorted(sigma.items())
        for (mu, k_h), v in items:
            stress_table.setdefault(tuple(k_h), []).append((float(mu), np.asarray(v, dtype=complex)))

    columns = sorted(set(gamma.horizontal_modes()) | set(stress_table))
    nsteps = int(round(t_end / dt))
    out = {}
    for k_h in columns:
        sys_ = _ModeSystem(k_h, params, z, dt, diffusion=diffusion)
        x = sys_.initial_state(gamma)
        traj = ModeTrajectory(k_h=k_h, z=z)
        w = traj.weights
        beta = params.beta

        def g_at(t):
            g = np.zeros(2, dtype=complex)
            for (mu, v) in stress_table.get(k_h, []):
                g += beta * v * np.exp(1j * mu * t / params.epsilon)
            return g

        def record(i, t, x, extra):
            u = sys_.velocity(x)
            traj.times.append(t)
            traj.snapshots.append((u, sys_.pressure(x).copy()))
            traj.diagnostics.append({
                "t": t,
                "energy": 0.5 * l2_norm(u, w) ** 2,
                "divergence_residual": sys_.divergence_residual(x),
                **extra,
            })

        record(0, 0.0, x, {"energy_balance_residual": 0.0,
                           "dissipation": 0.0, "cumulative_energy_residual": 0.0})
        kh2 = k_h[0] ** 2 + k_h[1] ** 2
        hcell = np.diff(z)
        cum_residual = 0.0
        for nstep in range(1, nsteps + 1):
            t_half = (nstep - 0.5) * dt
            g_half = g_at(t_half)
            x_new = sys_.step(x, g_half)
            # energy balance across the step, using the midpoint state
            u_old = sys_.velocity(x)
            u_new = sys_.velocity(x_new)
            u_mid = 0.5 * (u_old + u_new)
            E_old = 0.5 * l2_norm(u_old, w) ** 2
            E_new = 0.5 * l2_norm(u_new, w) ** 2
            if diffusion:
                dzu = np.diff(u_mid, axis=0) / hcell[:, None]
                diss = 4.0 * math.pi ** 2 * (
                    kh2 * float(np.sum(w * np.sum(np.abs(u_mid) ** 2, axis=1)))
                    + params.nu * float(np.sum(hcell * np.sum(np.abs(dzu) ** 2, axis=1))))
                work = 4.0 * math.pi ** 2 * params.nu * float(
                    np.real(np.vdot(u_mid[-1, :2], g_half)))
            else:
                diss, work = 0.0, 0.0
            resid = (E_new - E_old) / dt + diss - work
            cum_residual += resid * dt
            if nstep % save_every == 0 or nstep == nsteps:
                record(nstep, nstep * dt, x_new,
                       {"energy_balance_residual": resid,
                        "dissipation": diss,
                        "cumulative_energy_residual": cum_residual})
            x = x_new
        out[k_h] = traj
    return out


# ---------------------------------------------------------------------------
# decay fitting
# ---------------------------------------------------------------------------


@dataclass
class DecayFit:
    rate: complex
    residual: float
    flagged: bool
    reasons: tuple
    npoints: int


def fit_decay(traj: ModeTrajectory, window: tuple, mode,
              residual_tol: float = 0.1) -> DecayFit:
    """Least-squares exponential fit of the projected mode amplitude.

    Fits log c(t) = log c0 - rate * t over the window (complex rate: decay +
    oscillation).  Windows with poor exponential fit, or shorter than one
    slow e-fold of the fitted decay, are flagged rather than trusted."""
    t = np.asarray(traj.times)
    c = traj.mode_coefficient(mode)
    t0, t1 = window
    m = (t >= t0) & (t <= t1)
    if np.count_nonzero(m) < 3:
        raise ValueError("window contains fewer than 3 samples")
    tm = t[m]
    cm = c[m]
    if np.any(np.abs(cm) <= 0.0):
        raise ValueError("amplitude vanished inside the window")
    logc = np.log(np.abs(cm)) + 1j * np.unwrap(np.angle(cm))
    A = np.column_stack([np.ones_like(tm), tm])
    coef, *_ = np.linalg.lstsq(A, logc, rcond=None)
    rate = -coef[1]
    fitres = float(np.max(np.abs(A @ coef - logc)))
    reasons = []
    if fitres > residual_tol:
        reasons.append("non-exponential window")
    if rate.real > 0 and (t1 - t0) * rate.real < 1.0:
        reasons.append("window shorter than one slow e-fold")
    return DecayFit(rate=complex(rate), residual=fitres, flagged=bool(reasons),
                    reasons=tuple(reasons), npoints=int(np.count_nonzero(m)))


# ---------------------------------------------------------------------------
# CSV serialization
# ---------------------------------------------------------------------------


def snapshot_csv(traj: ModeTrajectory, path):
    """Line-oriented dump: t, z, Re/Im of u1, u2, u3, p (cell-interpolated)."""
    with open(path, "w") as f:
        f.write("t,z,re_u1,im_u1,re_u2,im_u2,re_u3,im_u3,re_p,im_p\n")
        zc = 0.5 * (traj.z[:-1] + traj.z[1:])
        for t, (u, p) in zip(traj.times, traj.snapshots):
            pn = np.interp(traj.z, zc, p.real) + 1j * np.interp(traj.z, zc, p.imag) \
                if len(p) else np.zeros_like(traj.z, dtype=complex)
            for i, zz in enumerate(traj.z):
                f.write(f"{t:.12g},{zz:.12g},"
                        f"{u[i, 0].real:.12g},{u[i, 0].imag:.12g},"
                        f"{u[i, 1].real:.12g},{u[i, 1].imag:.12g},"
                        f"{u[i, 2].real:.12g},{u[i, 2].imag:.12g},"
                        f"{pn[i].real:.12g},{pn[i].imag:.12g}\n")


def diagnostics_csv(traj: ModeTrajectory, path):
    keys = sorted({k for row in traj.diagnostics for k in row})
    with open(path, "w") as f:
        f.write(",".join(keys) + "\n")
        for row in traj.diagnostics:
            f.write(",".join(f"{row.get(k, 0.0):.12g}" for k in keys) + "\n")


def semigroup_samples(gamma: SpectralField, params: Params, t: float, k_h,
                      z: np.ndarray) -> np.ndarray:
    """Nodal samples of exp(-(t/eps) L) gamma on column k_h: the
    penalisation-only reference trajectory."""
    rotated = semigroup(t / params.epsilon, gamma)
    return rotated.profile(k_h, z)
