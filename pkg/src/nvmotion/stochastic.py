"""Stochastic trajectory generators and hyperfine-fluctuation statistics.

Two parametric models generate target motion:

* diffusion on a spherical zone (anchored molecule), Ito equations
  ``d theta = D_r cot(theta) dt + sqrt(2 D_r) dW1``,
  ``d phi = sqrt(2 D_r) / sin(theta) dW2``,
  reflective in theta at the zone edges, wrapped in phi;
* an Ornstein-Uhlenbeck process for bounded vibrations,
  ``d q_k = -eta_k q_k dt + sqrt(2 D) dW``.

The hyperfine map converts positions (NV frame, z along the NV axis)
into coupling vectors, and ``estimate_stats`` reduces a hyperfine
trajectory to the inputs of the spin solvers: mean, covariance,
correlation functions, and the zero-frequency dissipation matrix.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Iterator

import numpy as np
from scipy.optimize import curve_fit

from .constants import dipolar_prefactor
from .errors import EstimationError
from .series import AngleSeries, HyperfineSeries, VectorSeries

MIN_THETA_MIN = 1e-3  # rad; cot drift diverges at the pole
MAX_DT_DR = 1e-2  # Euler-Maruyama accuracy bound on dt * D_r
MIXING_FACTOR = 20.0  # per-step zone mixing at which records are i.i.d.
MIN_RADIUS = 1e-10  # m; below this the point-dipole map is unphysical


@dataclass(frozen=True)
class SphereDiffusionParams:
    """Rotational diffusion on a spherical zone of fixed radius."""

    d_r: float  # 1/s
    theta_min: float  # rad
    theta_max: float  # rad
    radius: float  # m
    dt: float  # s, recorded sample spacing
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.theta_min < self.theta_max <= np.pi:
            raise ValueError("need 0 <= theta_min < theta_max <= pi")
        if self.radius <= 0:
            raise ValueError("radius must be positive")
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if self.d_r < 0:
            raise ValueError("d_r must be non-negative")


@dataclass(frozen=True)
class OUParams:
    """Isotropic-diffusion OU process with per-axis restoring rates."""

    eta: np.ndarray  # (3,), 1/s
    d: float  # m^2/s
    equilibrium_offset: np.ndarray = field(default_factory=lambda: np.zeros(3))
    dt: float = 1e-12  # s
    seed: int = 0

    def __post_init__(self):
        eta = np.asarray(self.eta, float)
        off = np.asarray(self.equilibrium_offset, float)
        if eta.shape != (3,) or np.any(eta <= 0):
            raise ValueError("eta must be three positive rates")
        if self.d < 0:
            raise ValueError("d must be non-negative")
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        object.__setattr__(self, "eta", eta)
        object.__setattr__(self, "equilibrium_offset", off)


@dataclass(frozen=True)
class Geometry:
    """NV placement relative to the anchor; NV axis defaults to the
    surface normal (+z)."""

    nv_position: np.ndarray  # m
    anchor_position: np.ndarray = field(default_factory=lambda: np.zeros(3))
    nv_axis: np.ndarray = field(default_factory=lambda: np.array([0.0, 0.0, 1.0]))

    def __post_init__(self):
        nv = np.asarray(self.nv_position, float)
        anchor = np.asarray(self.anchor_position, float)
        axis = np.asarray(self.nv_axis, float)
        if nv.shape != (3,) or anchor.shape != (3,):
            raise ValueError("positions must be 3-vectors")
        if abs(np.linalg.norm(axis) - 1.0) > 1e-9:
            raise ValueError("nv_axis must be unit norm")
        object.__setattr__(self, "nv_position", nv)
        object.__setattr__(self, "anchor_position", anchor)
        object.__setattr__(self, "nv_axis", axis)

    def frame(self) -> np.ndarray:
        """Rows are the NV-frame basis vectors expressed in the lab frame."""
        z = self.nv_axis
        ref = np.array([1.0, 0.0, 0.0])
        if abs(z @ ref) > 0.9:
            ref = np.array([0.0, 1.0, 0.0])
        x = ref - (ref @ z) * z
        x /= np.linalg.norm(x)
        y = np.cross(z, x)
        return np.array([x, y, z])

    def to_nv_frame(self, lab_positions: np.ndarray) -> np.ndarray:
        """Lab-frame absolute positions -> NV-relative positions in the NV frame."""
        rel = np.asarray(lab_positions, float) - self.nv_position
        return rel @ self.frame().T


# --- spherical-zone law ---------------------------------------------------


def zone_pdf(s: np.ndarray, theta_min: float, theta_max: float) -> np.ndarray:
    """Stationary polar-angle density sin(s)/(cos(t_min) - cos(t_max))."""
    s = np.asarray(s, float)
    norm = math.cos(theta_min) - math.cos(theta_max)
    out = np.sin(s) / norm
    return np.where((s >= theta_min) & (s <= theta_max), out, 0.0)


def zone_cdf(s: np.ndarray, theta_min: float, theta_max: float) -> np.ndarray:
    s = np.clip(np.asarray(s, float), theta_min, theta_max)
    norm = math.cos(theta_min) - math.cos(theta_max)
    return (math.cos(theta_min) - np.cos(s)) / norm


def sample_zone_theta(
    rng: np.random.Generator, n: int, theta_min: float, theta_max: float
) -> np.ndarray:
    """Inverse-CDF draws from the zone law."""
    u = rng.random(n)
    c = math.cos(theta_min) - u * (math.cos(theta_min) - math.cos(theta_max))
    return np.arccos(np.clip(c, -1.0, 1.0))


def _theta_drift(theta: np.ndarray, d_r: float) -> np.ndarray:
    """Ito drift of the polar angle, D_r * cot(theta)."""
    return d_r * np.cos(theta) / np.sin(theta)


def _reflect(theta: np.ndarray, lo: float, hi: float) -> np.ndarray:
    while True:
        below = theta < lo
        above = theta > hi
        if not (below.any() or above.any()):
            return theta
        theta = np.where(below, 2 * lo - theta, theta)
        theta = np.where(above, 2 * hi - theta, theta)


def _fully_mixed(p: SphereDiffusionParams) -> bool:
    """True when one recorded step decorrelates the zone completely, so
    recorded samples are indistinguishable from i.i.d. stationary draws."""
    if p.d_r == 0.0:
        return False
    width = p.theta_max - p.theta_min
    per_step = p.d_r * p.dt
    return (
        per_step >= MIXING_FACTOR
        and per_step * (np.pi / width) ** 2 >= MIXING_FACTOR
    )


def sphere_trajectory_batch(
    p: SphereDiffusionParams,
    n_steps: int,
    n_chains: int,
    rng: np.random.Generator,
    method: str = "auto",
    substeps: int | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """(theta, phi) arrays of shape (n_chains, n_steps), stationary start.

    ``method``: "auto" picks exact stationary resampling when a single
    recorded step fully mixes the zone, Euler-Maruyama otherwise; "em"
    and "equilibrium" force the choice.  Euler-Maruyama substeps each
    recorded interval so that the internal step obeys dt * D_r <= 1e-2
    (a warning is raised when an explicit ``substeps`` violates this).
    """
    if p.theta_min < MIN_THETA_MIN:
        raise ValueError(
            f"theta_min = {p.theta_min} below {MIN_THETA_MIN} rad: "
            "cot drift is singular at the pole"
        )
    if method == "auto":
        method = "equilibrium" if _fully_mixed(p) else "em"
    if method == "equilibrium":
        theta = sample_zone_theta(rng, n_chains * n_steps, p.theta_min, p.theta_max)
        phi = rng.random(n_chains * n_steps) * 2 * np.pi
        return (
            theta.reshape(n_chains, n_steps),
            phi.reshape(n_chains, n_steps),
        )
    if method != "em":
        raise ValueError(f"unknown method {method!r}")

    if substeps is None:
        substeps = max(1, math.ceil(p.dt * p.d_r / MAX_DT_DR)) if p.d_r > 0 else 1
    h = p.dt / substeps
    if p.d_r * h > MAX_DT_DR * (1 + 1e-9):
        warnings.warn(
            f"dt * D_r = {p.d_r * h:.3g} exceeds {MAX_DT_DR}; "
            "Euler-Maruyama accuracy degraded"
        )
    theta = sample_zone_theta(rng, n_chains, p.theta_min, p.theta_max)
    phi = rng.random(n_chains) * 2 * np.pi
    out_t = np.empty((n_chains, n_steps))
    out_p = np.empty((n_chains, n_steps))
    out_t[:, 0] = theta
    out_p[:, 0] = phi
    amp = math.sqrt(2.0 * p.d_r * h)
    for k in range(1, n_steps):
        for _ in range(substeps):
            noise = rng.standard_normal((2, n_chains))
            # coefficients evaluated at the left point (Ito)
            dphi = amp / np.sin(theta) * noise[1]
            theta = theta + _theta_drift(theta, p.d_r) * h + amp * noise[0]
            theta = _reflect(theta, p.theta_min, p.theta_max)
            phi = (phi + dphi) % (2 * np.pi)
        out_t[:, k] = theta
        out_p[:, k] = phi
    return out_t, out_p


def generate_sphere_trajectory(
    p: SphereDiffusionParams,
    n_steps: int,
    method: str = "auto",
    substeps: int | None = None,
) -> AngleSeries:
    """One stationary trajectory of (theta, phi) on the zone."""
    rng = np.random.default_rng(p.seed)
    theta, phi = sphere_trajectory_batch(p, n_steps, 1, rng, method, substeps)
    if p.d_r > 0:
        t_exp = (p.theta_max - p.theta_min) ** 2 / (2.0 * p.d_r)
    else:
        t_exp = np.inf
    return AngleSeries(p.dt, theta[0], phi[0], exploration_time=t_exp)


def sphere_hyperfine_ensemble(
    p: SphereDiffusionParams,
    n_steps: int,
    n_traj: int,
    g: "Geometry",
    gamma_n: float,
    chunk: int = 64,
    method: str = "auto",
) -> Iterator[HyperfineSeries]:
    """Lazily yield ``n_traj`` hyperfine trajectories of the sphere model.

    Trajectories are generated in fixed chunks of ``chunk`` chains (the
    SDE stepping is vectorised across a chunk) with per-chunk seeds
    ``p.seed ^ (chunk_index + 1)``, so the ensemble is deterministic and
    independent of consumer scheduling.
    """
    produced = 0
    chunk_index = 0
    while produced < n_traj:
        b = min(chunk, n_traj - produced)
        rng = np.random.default_rng(p.seed ^ (chunk_index + 1))
        theta, phi = sphere_trajectory_batch(p, n_steps, b, rng, method=method)
        for row in range(b):
            pos = angles_to_positions(theta[row], phi[row], p.radius, g)
            yield HyperfineSeries(p.dt, hyperfine_from_position(pos, gamma_n))
        produced += b
        chunk_index += 1


def generate_ou_trajectory(
    p: OUParams, n_steps: int, q0: np.ndarray | None = None
) -> VectorSeries:
    """Exact-in-distribution OU trajectory (stationary start by default)."""
    rng = np.random.default_rng(p.seed)
    decay = np.exp(-p.eta * p.dt)
    stat_var = p.d / p.eta
    step_sd = np.sqrt(stat_var * (1.0 - decay**2))
    if q0 is None:
        q = rng.standard_normal(3) * np.sqrt(stat_var)
    else:
        q = np.asarray(q0, float).copy()
    out = np.empty((n_steps, 3))
    out[0] = q
    noise = rng.standard_normal((n_steps - 1, 3))
    for k in range(1, n_steps):
        q = q * decay + step_sd * noise[k - 1]
        out[k] = q
    return VectorSeries(p.dt, out, offset=p.equilibrium_offset)


# --- hyperfine map ----------------------------------------------------------


def hyperfine_from_position(r: np.ndarray, gamma_n: float) -> np.ndarray:
    """Dipolar hyperfine vector (rad/s) for NV-relative position(s) ``r``.

    ``r`` is expressed in the NV frame (z along the NV axis), in meters;
    shape (3,) or (n, 3).  Positions closer than 0.1 nm are rejected as
    unphysical contact.
    """
    r = np.asarray(r, float)
    single = r.ndim == 1
    r = np.atleast_2d(r)
    norm = np.linalg.norm(r, axis=1)
    if np.any(norm < MIN_RADIUS):
        raise ValueError(f"position closer than {MIN_RADIUS} m to the NV")
    rhat = r / norm[:, None]
    pref = dipolar_prefactor(gamma_n) / norm**3
    a = np.empty_like(r)
    a[:, 0] = 3.0 * rhat[:, 0] * rhat[:, 2]
    a[:, 1] = 3.0 * rhat[:, 1] * rhat[:, 2]
    a[:, 2] = 3.0 * rhat[:, 2] ** 2 - 1.0
    a *= -pref[:, None]
    return a[0] if single else a


def angles_to_positions(
    theta: np.ndarray, phi: np.ndarray, radius: float, g: Geometry
) -> np.ndarray:
    """Zone angles -> NV-relative positions in the NV frame (m)."""
    sin_t = np.sin(theta)
    lab = np.stack(
        [
            radius * sin_t * np.cos(phi),
            radius * sin_t * np.sin(phi),
            radius * np.cos(theta),
        ],
        axis=-1,
    )
    return g.to_nv_frame(g.anchor_position + lab)


def trajectory_to_hyperfine(
    series: AngleSeries | VectorSeries,
    g: Geometry,
    gamma_n: float,
    radius: float | None = None,
) -> HyperfineSeries:
    """Elementwise application of the hyperfine map to a trajectory.

    For an :class:`AngleSeries` the shell ``radius`` (m) is required;
    positions are taken relative to the anchor.  For a
    :class:`VectorSeries` the stored equilibrium offset is interpreted as
    the NV -> target equilibrium vector in the NV frame.
    """
    if isinstance(series, AngleSeries):
        if radius is None:
            raise ValueError("radius is required for an AngleSeries")
        pos = angles_to_positions(series.theta, series.phi, radius, g)
    elif isinstance(series, VectorSeries):
        pos = (series.offset + series.q) @ g.frame().T if not np.allclose(
            g.nv_axis, [0, 0, 1]
        ) else series.offset + series.q
    else:
        raise TypeError(f"unsupported series type {type(series).__name__}")
    return HyperfineSeries(series.dt, hyperfine_from_position(pos, gamma_n))


# --- statistics -------------------------------------------------------------


@dataclass(frozen=True)
class HyperfineStats:
    """Reduced statistics of a hyperfine trajectory.

    ``gamma`` is the zero-frequency power-spectrum matrix; its
    eigenvalues ``gamma_eigenvalues`` (clamped to >= 0) and orthonormal
    ``gamma_axes`` (columns) feed the diffusion dissipator.  ``sigma_hat2``
    and ``tau_hat`` are the typical fluctuation amplitude and correlation
    time used by the cumulant-validity check.
    """

    mean: np.ndarray  # (3,), rad/s
    covariance: np.ndarray  # (3, 3), rad^2/s^2
    taus: np.ndarray  # (n_tau,), s
    corr: np.ndarray  # (n_tau, 3, 3)
    gamma: np.ndarray  # (3, 3), rad^2/s
    gamma_eigenvalues: np.ndarray  # (3,), >= 0
    gamma_axes: np.ndarray  # (3, 3), columns are eigenaxes
    sigma_hat2: float
    tau_hat: float
    sigma2_fit: np.ndarray | None = None  # (3, 3) fitted amplitudes
    tau_fit: np.ndarray | None = None  # (3, 3) fitted correlation times


def _correlation_fft(xi: np.ndarray, n_lags: int) -> np.ndarray:
    """Biased (1/N) correlation tensor C_ij(tau) over all time origins."""
    n, dim = xi.shape
    nfft = 1
    while nfft < 2 * n:
        nfft *= 2
    f = np.fft.rfft(xi, n=nfft, axis=0)
    corr = np.empty((n_lags, dim, dim))
    for i in range(dim):
        for j in range(i, dim):
            # cross-spectrum; 1/N normalization keeps S(0) >= 0
            c = np.fft.irfft(f[:, i] * np.conj(f[:, j]), n=nfft)[:n_lags] / n
            corr[:, i, j] = c
            if i != j:
                cj = np.fft.irfft(f[:, j] * np.conj(f[:, i]), n=nfft)[:n_lags] / n
                corr[:, j, i] = cj
    return corr


def _fit_exponential(taus: np.ndarray, c: np.ndarray, scale: float):
    """Least-squares fit c(tau) = a * exp(-tau/tc); returns (a, tc) or None."""
    a0 = c[0]
    if abs(a0) < 1e-12 * scale:
        return 0.0, 0.0
    integral = np.trapezoid(c, taus)
    tc0 = max(abs(integral / a0), taus[1])

    def model(t, a, tc):
        return a * np.exp(-t / tc)

    # correlation times beyond the tabulated window are unmeasurable;
    # capping them keeps noise-level cross terms from dominating gamma
    try:
        popt, _ = curve_fit(
            model, taus, c, p0=(a0, min(tc0, taus[-1])), maxfev=5000,
            bounds=([-np.inf, taus[1] * 1e-3], [np.inf, taus[-1]]),
        )
    except (RuntimeError, ValueError):
        return None
    return float(popt[0]), float(popt[1])


def estimate_stats(
    h: HyperfineSeries, tau_max: float, fit_exponential: bool = True
) -> HyperfineStats:
    """Sample moments, correlation functions and the dissipation matrix.

    With ``fit_exponential`` the rates are gamma_ij = 2 sigma_ij^2 tau_ij
    from per-component exponential fits (falling back to the numerical
    integral when a fit fails); otherwise gamma_ij = 2 * integral of
    C_ij(tau) to tau_max (trapezoid).  The symmetrised matrix is
    eigendecomposed; small negative eigenvalues (above -eps with
    eps = 1e-6 * max gamma_k) are clamped to zero, larger ones raise
    :class:`EstimationError`.
    """
    a = h.a
    n_lags = int(round(tau_max / h.dt)) + 1
    if n_lags < 2:
        raise EstimationError("tau_max must cover at least one lag")
    if len(h) < 4 * n_lags:
        raise EstimationError(
            f"series too short: {len(h)} samples for {n_lags} lags"
        )
    mean = a.mean(axis=0)
    xi = a - mean
    covariance = (xi.T @ xi) / len(h)
    taus = h.dt * np.arange(n_lags)
    corr = _correlation_fft(xi, n_lags)

    scale = float(np.max(np.abs(np.diagonal(corr[0]))))
    sigma2_fit = None
    tau_fit = None
    gamma = np.empty((3, 3))
    if fit_exponential and scale > 0:
        sigma2_fit = np.zeros((3, 3))
        tau_fit = np.zeros((3, 3))
        for i in range(3):
            for j in range(3):
                res = _fit_exponential(taus, corr[:, i, j], scale)
                if res is None:
                    gamma[i, j] = 2.0 * np.trapezoid(corr[:, i, j], taus)
                    sigma2_fit[i, j] = corr[0, i, j]
                    tau_fit[i, j] = np.nan
                else:
                    s2, tc = res
                    sigma2_fit[i, j] = s2
                    tau_fit[i, j] = tc
                    gamma[i, j] = 2.0 * s2 * tc
    else:
        for i in range(3):
            for j in range(3):
                gamma[i, j] = 2.0 * np.trapezoid(corr[:, i, j], taus)

    gamma = 0.5 * (gamma + gamma.T)
    evals, axes = np.linalg.eigh(gamma)
    eps = 1e-6 * max(float(evals.max()), 0.0)
    if np.any(evals < -eps - 1e-30):
        raise EstimationError(
            f"dissipation matrix has significantly negative eigenvalue "
            f"{evals.min():.3g} (clamp threshold {-eps:.3g}); "
            "correlation estimation is unreliable"
        )
    evals = np.clip(evals, 0.0, None)

    diag0 = np.diagonal(corr[0])
    sigma_hat2 = float(np.max(diag0)) if diag0.size else 0.0
    if tau_fit is not None and np.all(np.isfinite(np.diagonal(tau_fit))):
        tau_hat = float(np.max(np.diagonal(tau_fit)))
    else:
        # integral timescale of the dominant component
        i = int(np.argmax(diag0))
        tau_hat = (
            float(np.trapezoid(corr[:, i, i], taus) / corr[0, i, i])
            if corr[0, i, i] > 0
            else 0.0
        )
    return HyperfineStats(
        mean=mean,
        covariance=covariance,
        taus=taus,
        corr=corr,
        gamma=gamma,
        gamma_eigenvalues=evals,
        gamma_axes=axes,
        sigma_hat2=sigma_hat2,
        tau_hat=tau_hat,
        sigma2_fit=sigma2_fit,
        tau_fit=tau_fit,
    )


def power_spectrum(
    taus: np.ndarray, corr: np.ndarray, omega: np.ndarray
) -> np.ndarray:
    """S(omega) = integral of C(tau) e^{-i omega tau} over symmetric tau.

    ``corr`` is tabulated on non-negative ``taus`` and extended evenly,
    so S(omega) = 2 * integral_0^taumax C(tau) cos(omega tau) dtau
    (trapezoid).  Shapes: corr (n_tau, ...) -> S (n_omega, ...).
    """
    taus = np.asarray(taus, float)
    corr = np.asarray(corr, float)
    omega = np.atleast_1d(np.asarray(omega, float))
    cos = np.cos(omega[:, None] * taus[None, :])
    flat = corr.reshape(len(taus), -1)
    out = np.empty((len(omega), flat.shape[1]))
    for k in range(flat.shape[1]):
        out[:, k] = 2.0 * np.trapezoid(cos * flat[:, k][None, :], taus, axis=1)
    return out.reshape((len(omega),) + corr.shape[1:])
