"""Langevin dynamics on the spring network and diffusion statistics.

The integrator is the BAOAB splitting (half kick / half drift / full
Ornstein-Uhlenbeck velocity step / half drift / half kick) with one
force evaluation per step.  The anchor atom is constrained exactly: it
receives no forces and never moves.  An optional reflective plane
through the anchor models the substrate the molecule is attached to;
without it an anchored network tumbles freely and the polar angle of
any atom eventually covers the full sphere.

Internal units: angstrom, picosecond, amu, kcal/mol.  Everything
returned to the rest of the package is converted to SI (seconds,
radians).
"""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np
from numba import njit
from scipy import stats as _sstats

from .constants import K_B_MM, KCAL_MOL_TO_MM, PICOSECOND
from .errors import EstimationError, SimulationError
from .molecule import Molecule, SpringNetwork
from .series import AngleSeries, VectorSeries

BURN_IN_DEFAULT_PS = 100.0
MAX_OMEGA_DT = 0.95  # stability bound on (fastest spring frequency) * dt


@dataclass(frozen=True)
class LangevinParams:
    """Thermostat and run-length parameters.

    ``steps`` counts production steps of size ``dt`` (ps) recorded every
    ``record_stride`` steps after ``burn_in_ps`` of discarded
    equilibration.  ``wall`` enables the reflective substrate plane
    z >= z_anchor.
    """

    zeta: float  # friction, 1/ps
    temperature: float  # K
    dt: float  # ps
    steps: int
    seed: int = 0
    burn_in_ps: float = BURN_IN_DEFAULT_PS
    record_stride: int = 1
    wall: bool = False

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if self.zeta < 0:
            raise ValueError("zeta must be non-negative")
        if self.dt * self.zeta >= 1.0:
            raise ValueError(f"dt * zeta = {self.dt * self.zeta:.3g} >= 1: unstable")
        if self.steps < 1:
            raise ValueError("steps must be >= 1")
        if self.record_stride < 1:
            raise ValueError("record_stride must be >= 1")
        if self.temperature < 0:
            raise ValueError("temperature must be non-negative")


@dataclass(frozen=True)
class Trajectory:
    """Recorded frames of all atom positions (angstrom)."""

    dt_ps: float  # recording interval, ps
    positions: np.ndarray  # (n_frames, n_atoms, 3)
    anchor_index: int

    def __len__(self) -> int:
        return self.positions.shape[0]

    @property
    def times_ps(self) -> np.ndarray:
        return self.dt_ps * np.arange(len(self))


@dataclass(frozen=True)
class DiffusionFit:
    """Rotational diffusion coefficient from a short-time MSD fit."""

    d_r: float  # 1/s
    fit_window: tuple[float, float]  # s
    residual: float  # relative rms misfit in the window

    def __post_init__(self):
        if self.d_r < 0:
            raise ValueError("d_r must be non-negative")


@dataclass(frozen=True)
class OUFit:
    """Per-axis restoring rates and the isotropic diffusion coefficient."""

    eta: np.ndarray  # (3,), 1/s
    d: float  # m^2/s


@njit(cache=True)
def _forces(pos, pair_i, pair_j, rest, kappa_mm, out):
    out[:] = 0.0
    for n in range(pair_i.shape[0]):
        i, j = pair_i[n], pair_j[n]
        dx = pos[i, 0] - pos[j, 0]
        dy = pos[i, 1] - pos[j, 1]
        dz = pos[i, 2] - pos[j, 2]
        r = math.sqrt(dx * dx + dy * dy + dz * dz)
        if r < 1e-12:
            continue
        c = -kappa_mm * (r - rest[n]) / r
        fx, fy, fz = c * dx, c * dy, c * dz
        out[i, 0] += fx
        out[i, 1] += fy
        out[i, 2] += fz
        out[j, 0] -= fx
        out[j, 1] -= fy
        out[j, 2] -= fz


@njit(cache=True)
def _baoab_chunk(
    pos,
    vel,
    forces,
    inv_mass,
    pair_i,
    pair_j,
    rest,
    kappa_mm,
    dt,
    c1,
    c2_sqrt_im,
    anchor,
    wall_z,
    use_wall,
    noise,
):
    n_steps = noise.shape[0]
    n = pos.shape[0]
    half = 0.5 * dt
    for s in range(n_steps):
        for a in range(n):
            if a == anchor:
                continue
            for d in range(3):
                vel[a, d] += half * forces[a, d] * inv_mass[a]
                pos[a, d] += half * vel[a, d]
        for a in range(n):
            if a == anchor:
                continue
            for d in range(3):
                vel[a, d] = c1 * vel[a, d] + c2_sqrt_im[a] * noise[s, a, d]
                pos[a, d] += half * vel[a, d]
        if use_wall:
            for a in range(n):
                if a == anchor:
                    continue
                if pos[a, 2] < wall_z:
                    pos[a, 2] = 2.0 * wall_z - pos[a, 2]
                    vel[a, 2] = -vel[a, 2]
        _forces(pos, pair_i, pair_j, rest, kappa_mm, forces)
        for a in range(n):
            if a == anchor:
                continue
            for d in range(3):
                vel[a, d] += half * forces[a, d] * inv_mass[a]


def fastest_mode_frequency(net: SpringNetwork, m: Molecule) -> float:
    """Largest normal-mode angular frequency (1/ps) of the network at
    equilibrium, anchor constrained.  At the rest geometry each spring
    contributes stiffness only along its bond direction."""
    pi, pj, _ = net.index_arrays()
    n = len(m)
    if pi.size == 0:
        return 0.0
    pos = m.positions
    kappa_mm = net.kappa * KCAL_MOL_TO_MM
    hess = np.zeros((3 * n, 3 * n))
    for i, j in zip(pi, pj):
        d = pos[i] - pos[j]
        d /= np.linalg.norm(d)
        block = kappa_mm * np.outer(d, d)
        si, sj = 3 * i, 3 * j
        hess[si : si + 3, si : si + 3] += block
        hess[sj : sj + 3, sj : sj + 3] += block
        hess[si : si + 3, sj : sj + 3] -= block
        hess[sj : sj + 3, si : si + 3] -= block
    keep = np.ones(3 * n, bool)
    keep[3 * m.anchor_index : 3 * m.anchor_index + 3] = False
    hess = hess[np.ix_(keep, keep)]
    inv_sqrt_m = np.repeat(1.0 / np.sqrt(m.masses), 3)[keep]
    weighted = hess * np.outer(inv_sqrt_m, inv_sqrt_m)
    w_max = float(np.linalg.eigvalsh(weighted).max())
    return math.sqrt(max(w_max, 0.0))


def _stability_check(net: SpringNetwork, m: Molecule, dt: float) -> None:
    omega_max = fastest_mode_frequency(net, m)
    if omega_max * dt > MAX_OMEGA_DT:
        raise SimulationError(
            f"dt = {dt} ps too large: fastest mode frequency "
            f"{omega_max:.3g}/ps gives omega*dt = {omega_max * dt:.3g} "
            f"> {MAX_OMEGA_DT}"
        )


def potential_energy(net: SpringNetwork, positions: np.ndarray) -> float:
    """Harmonic network energy in kcal/mol."""
    pi, pj, rest = net.index_arrays()
    if pi.size == 0:
        return 0.0
    d = np.linalg.norm(positions[pi] - positions[pj], axis=1)
    return float(0.5 * net.kappa * np.sum((d - rest) ** 2))


def kinetic_energy(m: Molecule, velocities: np.ndarray) -> float:
    """Kinetic energy in kcal/mol."""
    ke_mm = 0.5 * float(np.sum(m.masses[:, None] * velocities**2))
    return ke_mm / KCAL_MOL_TO_MM


def simulate_langevin(
    net: SpringNetwork,
    m: Molecule,
    p: LangevinParams,
    initial_positions: np.ndarray | None = None,
) -> Trajectory:
    """Integrate the damped spring network; returns post-burn-in frames.

    The anchor atom is held fixed.  Raises :class:`SimulationError` on
    instability (stability bound at start, divergence during the run).
    """
    _stability_check(net, m, p.dt)
    rng = np.random.default_rng(p.seed)
    n = len(m)
    pos = np.array(
        initial_positions if initial_positions is not None else m.positions,
        dtype=float,
    )
    if pos.shape != (n, 3):
        raise ValueError("initial_positions must match the molecule")
    kT = K_B_MM * p.temperature
    inv_mass = 1.0 / m.masses
    vel = rng.standard_normal((n, 3)) * np.sqrt(kT * inv_mass)[:, None]
    vel[m.anchor_index] = 0.0
    pi, pj, rest = net.index_arrays()
    kappa_mm = net.kappa * KCAL_MOL_TO_MM
    c1 = math.exp(-p.zeta * p.dt)
    c2_sqrt_im = math.sqrt(kT * (1.0 - c1 * c1)) * np.sqrt(inv_mass)
    forces = np.zeros((n, 3))
    _forces(pos, pi, pj, rest, kappa_mm, forces)
    wall_z = float(m.positions[m.anchor_index, 2])

    def advance(n_steps: int) -> None:
        done = 0
        while done < n_steps:
            chunk = min(4096, n_steps - done)
            noise = rng.standard_normal((chunk, n, 3))
            _baoab_chunk(
                pos, vel, forces, inv_mass, pi, pj, rest, kappa_mm, p.dt,
                c1, c2_sqrt_im, m.anchor_index, wall_z, p.wall, noise,
            )
            done += chunk
            ke = kinetic_energy(m, vel) * KCAL_MOL_TO_MM
            dof = 3 * (n - 1)
            if not np.isfinite(ke) or ke > 1000.0 * dof * K_B_MM * max(
                p.temperature, 300.0
            ):
                raise SimulationError(
                    "Langevin dynamics diverged (kinetic energy blow-up); "
                    "reduce dt or check the network"
                )

    burn_steps = int(round(p.burn_in_ps / p.dt))
    if burn_steps:
        advance(burn_steps)

    n_frames = p.steps // p.record_stride + 1
    out = np.empty((n_frames, n, 3))
    out[0] = pos
    for frame in range(1, n_frames):
        advance(p.record_stride)
        out[frame] = pos
    return Trajectory(p.dt * p.record_stride, out, m.anchor_index)


def velocity_trace(
    net: SpringNetwork,
    m: Molecule,
    p: LangevinParams,
    initial_positions: np.ndarray | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """(positions, velocities) trace recorded every step; for the
    integrator sanity tests (energy conservation, equipartition)."""
    _stability_check(net, m, p.dt)
    rng = np.random.default_rng(p.seed)
    n = len(m)
    pos = np.array(
        initial_positions if initial_positions is not None else m.positions,
        dtype=float,
    )
    kT = K_B_MM * p.temperature
    inv_mass = 1.0 / m.masses
    vel = rng.standard_normal((n, 3)) * np.sqrt(kT * inv_mass)[:, None]
    vel[m.anchor_index] = 0.0
    pi, pj, rest = net.index_arrays()
    kappa_mm = net.kappa * KCAL_MOL_TO_MM
    c1 = math.exp(-p.zeta * p.dt)
    c2_sqrt_im = math.sqrt(kT * (1.0 - c1 * c1)) * np.sqrt(inv_mass)
    forces = np.zeros((n, 3))
    _forces(pos, pi, pj, rest, kappa_mm, forces)
    wall_z = float(m.positions[m.anchor_index, 2])
    out_p = np.empty((p.steps + 1, n, 3))
    out_v = np.empty((p.steps + 1, n, 3))
    out_p[0], out_v[0] = pos, vel
    for s in range(p.steps):
        noise = rng.standard_normal((1, n, 3))
        _baoab_chunk(
            pos, vel, forces, inv_mass, pi, pj, rest, kappa_mm, p.dt,
            c1, c2_sqrt_im, m.anchor_index, wall_z, p.wall, noise,
        )
        out_p[s + 1], out_v[s + 1] = pos, vel
    return out_p, out_v


def target_angles(
    traj: Trajectory, anchor_index: int, target_index: int
) -> AngleSeries:
    """Polar/azimuthal angles of the target about the anchor, z along the
    surface normal.  Frames where the target sits on the pole leave phi
    undefined; these are set to 0 and flagged with a warning."""
    n_atoms = traj.positions.shape[1]
    for idx in (anchor_index, target_index):
        if not 0 <= idx < n_atoms:
            raise IndexError(f"atom index {idx} out of range")
    v = traj.positions[:, target_index, :] - traj.positions[:, anchor_index, :]
    r = np.linalg.norm(v, axis=1)
    if np.any(r < 1e-9):
        raise ValueError("target coincides with the anchor in some frame")
    theta = np.arccos(np.clip(v[:, 2] / r, -1.0, 1.0))
    rho = np.hypot(v[:, 0], v[:, 1])
    degenerate = rho < 1e-12 * np.maximum(r, 1.0)
    phi = np.where(degenerate, 0.0, np.arctan2(v[:, 1], v[:, 0])) % (2 * np.pi)
    if degenerate.any():
        warnings.warn(
            f"{int(degenerate.sum())} frame(s) on the pole: phi undefined, set to 0"
        )
    dt_s = traj.dt_ps * PICOSECOND
    series = AngleSeries(dt_s, theta, phi)
    t_exp = _exploration_time(series)
    return replace(series, exploration_time=t_exp)


def mean_square_displacement(x: np.ndarray, max_lag: int) -> np.ndarray:
    """MSD over all time origins, FFT-accelerated; lags 0..max_lag-1.

    Accepts (n,) or (n, d) input; multidimensional displacements are
    summed over components.
    """
    x = np.asarray(x, float)
    if x.ndim == 1:
        x = x[:, None]
    n = x.shape[0]
    if max_lag > n:
        raise ValueError("max_lag exceeds series length")
    nfft = 1
    while nfft < 2 * n:
        nfft *= 2
    sq = np.sum(x * x, axis=1)
    # S1 part: sum over origins t of x(t)^2 + x(t+k)^2 via cumulative sums
    css = np.concatenate([[0.0], np.cumsum(sq)])
    total = css[n]
    lags = np.arange(max_lag)
    s1 = css[n - lags] + (total - css[lags])
    # S2 part: autocorrelation via FFT, summed over components
    s2 = np.zeros(max_lag)
    for d in range(x.shape[1]):
        f = np.fft.rfft(x[:, d], n=nfft)
        s2 += np.fft.irfft(f * np.conj(f), n=nfft)[:max_lag]
    counts = n - lags
    return (s1 - 2.0 * s2) / counts


def _exploration_time(a: AngleSeries) -> float:
    """Lag at which the theta MSD reaches 80% of its plateau."""
    n = len(a)
    if n < 16:
        return np.inf
    max_lag = n // 2
    msd = mean_square_displacement(a.theta, max_lag)
    plateau = msd[max_lag // 2 :].mean()
    if plateau <= 0:
        return np.inf
    above = np.nonzero(msd >= 0.8 * plateau)[0]
    return float(above[0] * a.dt) if above.size else np.inf


def fit_rotational_diffusion(
    a: AngleSeries,
    window_factor: float = 0.2,
    t_min: float | None = None,
    linearity_tol: float = 0.02,
    max_iter: int = 20,
) -> DiffusionFit:
    """Least-squares slope of <dtheta^2(t)> = 2 D_r t on a short-time window.

    The window upper edge starts at min(window_factor / D_guess, the lag
    where the MSD crosses a quarter of its plateau) and is refined
    iteratively: the estimate updates the 0.2/D rule, and the window
    shrinks while the slopes of its two halves disagree by more than
    ``linearity_tol`` (reflecting-boundary curvature).  The fit carries
    an intercept, and ``t_min`` can push the lower edge above a fast
    vibrational shoulder (molecular trajectories; a few damping times is
    a good choice).  Requires >= 10 lags in the final window.
    """
    n = len(a)
    if n < 32:
        raise EstimationError("series too short for an MSD fit")
    if np.all(a.theta == a.theta[0]):  # frozen series
        return DiffusionFit(0.0, (a.dt, a.dt * (n // 2)), 0.0)
    msd = mean_square_displacement(a.theta, n // 2)
    return fit_msd(a.dt, msd, window_factor, t_min, linearity_tol, max_iter)


def fit_msd(
    dt: float,
    msd: np.ndarray,
    window_factor: float = 0.2,
    t_min: float | None = None,
    linearity_tol: float = 0.02,
    max_iter: int = 20,
) -> DiffusionFit:
    """Windowed slope fit on an already-computed (possibly replica-pooled)
    MSD curve; see :func:`fit_rotational_diffusion`."""
    max_lag = len(msd)
    taus = dt * np.arange(max_lag)
    if msd[1:].max() <= 0:
        return DiffusionFit(0.0, (dt, taus[-1]), 0.0)
    i_lo = max(1, math.ceil((t_min or dt) / dt - 1e-9))
    if max_lag <= i_lo + 10:
        raise EstimationError("no linear window with >= 10 points")
    plateau = msd[max_lag // 2 :].mean()
    saturated = np.nonzero(msd > 0.25 * plateau)[0]
    i_cap = (
        int(saturated[0])
        if saturated.size and saturated[0] > i_lo + 10
        else max_lag - 1
    )

    def slope(i0: int, i1: int) -> tuple[float, float]:
        t_w, y_w = taus[i0 : i1 + 1], msd[i0 : i1 + 1]
        design = np.stack([2.0 * t_w, np.ones_like(t_w)], axis=1)
        coef, *_ = np.linalg.lstsq(design, y_w, rcond=None)
        resid = float(
            np.sqrt(np.mean((design @ coef - y_w) ** 2))
            / max(abs(y_w.mean()), 1e-300)
        )
        return float(coef[0]), resid

    d_est = msd[i_lo] / (2.0 * taus[i_lo])
    i_hi = i_cap
    resid = 0.0
    for _ in range(max_iter):
        if d_est > 0:
            i_want = int(window_factor / d_est / dt)
            i_hi = min(i_cap, max(i_lo + 10, i_want))
        d_new, resid = slope(i_lo, i_hi)
        mid = (i_lo + i_hi) // 2
        d_a, _ = slope(i_lo, mid)
        d_b, _ = slope(mid, i_hi)
        nonlinear = abs(d_a - d_b) > linearity_tol * max(abs(d_new), 1e-300)
        if nonlinear and i_hi > i_lo + 10:
            i_cap = max(i_lo + 10, int(0.6 * i_hi))
            d_est = d_new if d_new > 0 else d_est
            continue
        if d_est > 0 and abs(d_new - d_est) <= 0.02 * d_est:
            d_est = d_new
            break
        d_est = d_new
    return DiffusionFit(
        max(d_est, 0.0), (float(taus[i_lo]), float(taus[i_hi])), resid
    )


@dataclass(frozen=True)
class AngleHistograms:
    """Normalized angle densities and the fitted zone boundaries."""

    theta_centers: np.ndarray
    theta_density: np.ndarray
    phi_centers: np.ndarray
    phi_density: np.ndarray
    theta_min: float
    theta_max: float


def _zone_l2(centers, density, widths, tmin, tmax):
    norm = math.cos(tmin) - math.cos(tmax)
    if norm <= 0:
        return np.inf
    q = np.where(
        (centers >= tmin) & (centers <= tmax), np.sin(centers) / norm, 0.0
    )
    return float(np.sum((density - q) ** 2 * widths))


def angle_histograms(a: AngleSeries, bins: int = 36) -> AngleHistograms:
    """Empirical densities of theta and phi plus fitted zone boundaries.

    The boundaries minimise the L2 distance between the empirical theta
    density and sin(s)/(cos t_min - cos t_max) on its support; a grid
    search over bin edges is refined by a local simplex search.
    """
    if bins < 10:
        raise ValueError("bins must be >= 10")
    if len(a) == 0:
        raise ValueError("empty series")
    th_density, th_edges = np.histogram(a.theta, bins=bins, range=(0.0, np.pi), density=True)
    ph_density, ph_edges = np.histogram(
        a.phi, bins=bins, range=(0.0, 2 * np.pi), density=True
    )
    centers = 0.5 * (th_edges[1:] + th_edges[:-1])
    widths = np.diff(th_edges)

    best = (np.inf, 0.0, np.pi)
    for i in range(bins):
        for j in range(i + 1, bins + 1):
            val = _zone_l2(centers, th_density, widths, th_edges[i], th_edges[j])
            if val < best[0]:
                best = (val, th_edges[i], th_edges[j])
    from scipy.optimize import minimize

    def objective(x):
        tmin, tmax = x
        if not (0.0 <= tmin < tmax <= np.pi):
            return np.inf
        return _zone_l2(centers, th_density, widths, tmin, tmax)

    res = minimize(
        objective, [best[1], best[2]], method="Nelder-Mead",
        options={"xatol": 1e-4, "fatol": 1e-12},
    )
    tmin, tmax = (res.x if res.fun <= best[0] else (best[1], best[2]))
    return AngleHistograms(
        centers,
        th_density,
        0.5 * (ph_edges[1:] + ph_edges[:-1]),
        ph_density,
        float(tmin),
        float(tmax),
    )


def phi_uniformity_pvalue(phi: np.ndarray, bins: int = 12) -> float:
    """Chi-square p-value against a flat azimuthal distribution.

    Samples must be decorrelated (subsample a trajectory before use)."""
    counts, _ = np.histogram(np.asarray(phi) % (2 * np.pi), bins=bins, range=(0, 2 * np.pi))
    return float(_sstats.chisquare(counts).pvalue)


def estimate_ou_parameters(series: VectorSeries) -> OUFit:
    """Restoring rates and diffusion coefficient of a bounded-vibration
    trajectory: D from the first-lag MSD slope pooled over axes,
    eta_k = D / Var(q_k) per axis."""
    q = series.q - series.q.mean(axis=0)
    n = len(series)
    if n < 64:
        raise EstimationError("series too short for OU estimation")
    var = q.var(axis=0)
    if np.any(var <= 0):
        raise EstimationError("non-positive variance estimate")
    msd1 = float(np.mean(np.sum((q[1:] - q[:-1]) ** 2, axis=1))) / 3.0
    d = msd1 / (2.0 * series.dt)
    eta = d / var
    return OUFit(eta, d)


def normality_pvalue(samples: np.ndarray) -> float:
    """D'Agostino-Pearson normality test p-value for a stationary marginal."""
    return float(_sstats.normaltest(np.asarray(samples).ravel()).pvalue)


# --- replica ensembles --------------------------------------------------------


def _replica_angles_worker(args) -> tuple[np.ndarray, np.ndarray]:
    net, mol, params, target_index = args
    traj = simulate_langevin(net, mol, params)
    series = target_angles(traj, mol.anchor_index, target_index)
    return series.theta, series.phi


def run_replica_angles(
    net: SpringNetwork,
    mol: Molecule,
    params: LangevinParams,
    target_index: int,
    n_replicas: int,
    workers: int = 1,
) -> list[AngleSeries]:
    """Independent replicas with seeds ``params.seed ^ replica_index``.

    Results are returned in replica order, so they do not depend on the
    worker count or scheduling.
    """
    jobs = [
        (net, mol, replace(params, seed=params.seed ^ k), target_index)
        for k in range(n_replicas)
    ]
    if workers <= 1:
        results = [_replica_angles_worker(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_replica_angles_worker, jobs))
    dt_s = params.dt * params.record_stride * PICOSECOND
    return [AngleSeries(dt_s, th, ph) for th, ph in results]
