"""Measurement-time planning for time-resolved detachment detection.

The measurable signal is the transfer-probability difference between
target present and target departed,
``dP(tau) = P(tau) - P_{J=0}(tau)``; the departed-target baseline keeps
the intrinsic NV flip dissipator but drops the transverse coupling and
the diffusion dissipator.  Detection at signal-to-noise ratio R requires
``dP >= R / (C sqrt(N))`` over ``N = T/(tau + tau0)`` runs, giving the
total time ``T = R^2 (tau + tau0) / (C^2 dP^2)`` to be minimised over
the interrogation time.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .constants import GAMMA_F19
from .errors import DetectionError, EstimationError
from .spins import (
    DissipationRates,
    SpinParams,
    SpinState,
    build_average_hamiltonian,
    effective_coupling,
    lindblad_evolve,
    transfer_probability,
)
from .stochastic import Geometry, hyperfine_from_position, sample_zone_theta

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class ExperimentConfig:
    """Physical parameters of one detection experiment."""

    spin: SpinParams
    a_mean: np.ndarray  # (3,) mean hyperfine vector, rad/s
    rates: DissipationRates
    contrast: float  # readout contrast / collection factor, in (0, 1]
    tau0: float = 100e-9  # preparation + readout time, s
    snr: float = 1.0  # detection threshold R_SN

    def __post_init__(self):
        a = np.asarray(self.a_mean, float)
        if a.shape != (3,):
            raise ValueError("a_mean must be a 3-vector")
        if not 0.0 < self.contrast <= 1.0:
            raise ValueError("contrast must be in (0, 1]")
        if self.tau0 < 0:
            raise ValueError("tau0 must be non-negative")
        if self.snr <= 0:
            raise ValueError("snr must be positive")
        object.__setattr__(self, "a_mean", a)

    @classmethod
    def from_coupling(
        cls,
        j: float,
        gamma_flip: float,
        contrast: float,
        delta: float = 0.0,
        gamma_k: np.ndarray | None = None,
        tau0: float = 100e-9,
        omega: float = 2 * math.pi * 1e6,
        gamma_n: float = GAMMA_F19,
        snr: float = 1.0,
    ) -> "ExperimentConfig":
        """Config from the effective pair (delta, J) directly: the mean
        hyperfine vector is (4J, 0, 0) and B_z realises the detuning."""
        if j < 0:
            raise ValueError("j must be non-negative")
        bz = (omega - 2.0 * delta) / gamma_n
        spin = SpinParams(omega, np.array([0.0, 0.0, bz]), gamma_n, gamma_flip)
        rates = (
            DissipationRates.none()
            if gamma_k is None
            else DissipationRates(np.asarray(gamma_k, float), np.eye(3))
        )
        return cls(spin, np.array([4.0 * j, 0.0, 0.0]), rates, contrast, tau0, snr=snr)

    @property
    def coupling(self):
        return effective_coupling(self.a_mean, self.spin)


@dataclass(frozen=True)
class DetectionResult:
    """Optimised detection budget.

    Invariants hold by construction and are re-verified in
    ``__post_init__``: T = snr^2 (tau_int + tau0) / (C^2 dP^2) and
    N = T / (tau_int + tau0).
    """

    tau_int: float  # s
    total_time: float  # s
    delta_p: float
    n_measurements: float
    contrast: float
    tau0: float
    snr: float = 1.0
    boundary: bool = False

    def __post_init__(self):
        expected = (
            self.snr**2
            * (self.tau_int + self.tau0)
            / (self.contrast**2 * self.delta_p**2)
        )
        if not math.isclose(self.total_time, expected, rel_tol=1e-12):
            raise ValueError("total_time inconsistent with its defining relation")
        if not math.isclose(
            self.n_measurements,
            self.total_time / (self.tau_int + self.tau0),
            rel_tol=1e-12,
        ):
            raise ValueError("n_measurements inconsistent with total_time")


def transfer_curves(
    cfg: ExperimentConfig, taus: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """(P_signal, P_baseline) at the given interrogation times.

    Signal: full mean coupling and diffusion rates.  Baseline: transverse
    mean coupling zeroed and diffusion rates dropped (the departed target
    no longer drives them); the flip dissipator remains.
    """
    taus = np.asarray(taus, float)
    order = np.argsort(taus)
    sorted_taus = taus[order]
    rho0 = SpinState.nv_plus_mixed_nucleus()
    h_sig = build_average_hamiltonian(cfg.a_mean, cfg.spin)
    a_base = np.array([0.0, 0.0, cfg.a_mean[2]])
    h_base = build_average_hamiltonian(a_base, cfg.spin)
    sig = lindblad_evolve(
        h_sig, cfg.rates, cfg.spin, rho0, sorted_taus, method="expm"
    )
    base = lindblad_evolve(
        h_base, DissipationRates.none(), cfg.spin, rho0, sorted_taus, method="expm"
    )
    p_sig = np.empty_like(taus)
    p_base = np.empty_like(taus)
    p_sig[order] = [transfer_probability(s) for s in sig]
    p_base[order] = [transfer_probability(s) for s in base]
    return p_sig, p_base


def delta_p(cfg: ExperimentConfig, tau_int: float) -> float:
    """Measurable signal dP(tau) = P(tau) - P_{J=0}(tau)."""
    if tau_int <= 0:
        raise ValueError("tau_int must be positive")
    p_sig, p_base = transfer_curves(cfg, np.array([tau_int]))
    return float(p_sig[0] - p_base[0])


def measurement_time(
    dp: float, contrast: float, tau_int: float, tau0: float, snr: float = 1.0
) -> tuple[float, float]:
    """(T, N) reaching the threshold dP = snr / (C sqrt(N)) with equality.

    Raises :class:`DetectionError` for non-positive signals (the
    threshold is unreachable in finite time).
    """
    if dp <= 0.0:
        raise DetectionError(
            f"signal dP = {dp:.3g} <= 0: unbounded measurement time"
        )
    n = snr**2 / (contrast**2 * dp**2)
    t_total = n * (tau_int + tau0)
    assert math.isclose(dp, snr / (contrast * math.sqrt(n)), rel_tol=1e-12)
    return t_total, n


def _budget(cfg: ExperimentConfig, tau: float, dp: float) -> float:
    if dp <= 0.0:
        return math.inf
    return cfg.snr**2 * (tau + cfg.tau0) / (cfg.contrast**2 * dp**2)


def optimize_interrogation_time(
    cfg: ExperimentConfig,
    bracket: tuple[float, float] | None = None,
    coarse_points: int = 60,
    rel_tol: float = 1e-3,
) -> DetectionResult:
    """Minimise T(tau) over the interrogation time.

    Coarse logarithmic scan (>= 60 points) over the bracket (default
    [1e-6 s, 10/J], or 10/gamma_flip when J = 0), then golden-section
    refinement between the neighbours of the coarse minimum to relative
    precision ``rel_tol``.  Ties break toward smaller tau.  A minimum on
    the bracket edge is reported with ``boundary=True``.
    """
    if bracket is None:
        ec = cfg.coupling
        scale = ec.j if ec.j > 0 else cfg.spin.gamma_flip
        if scale <= 0:
            raise DetectionError("no coupling and no flip rate: nothing to optimise")
        bracket = (1e-6, 10.0 / scale)
    lo, hi = bracket
    if not 0 < lo < hi:
        raise ValueError("invalid bracket")
    n_pts = max(coarse_points, 60)
    taus = np.geomspace(lo, hi, n_pts)
    p_sig, p_base = transfer_curves(cfg, taus)
    dps = p_sig - p_base
    budgets = np.array([_budget(cfg, t, d) for t, d in zip(taus, dps)])
    if not np.any(np.isfinite(budgets)):
        raise DetectionError("signal non-positive over the whole bracket")
    i_min = int(np.argmin(budgets))  # argmin returns the first (smallest tau) tie

    boundary = i_min in (0, n_pts - 1)
    a = taus[max(i_min - 1, 0)]
    b = taus[min(i_min + 1, n_pts - 1)]
    if not boundary:
        c = b - GOLDEN * (b - a)
        d = a + GOLDEN * (b - a)
        fc = _budget(cfg, c, delta_p(cfg, c))
        fd = _budget(cfg, d, delta_p(cfg, d))
        while (b - a) > rel_tol * a:
            if fc <= fd:  # prefer the smaller-tau side on ties
                b, d, fd = d, c, fc
                c = b - GOLDEN * (b - a)
                fc = _budget(cfg, c, delta_p(cfg, c))
            else:
                a, c, fc = c, d, fd
                d = a + GOLDEN * (b - a)
                fd = _budget(cfg, d, delta_p(cfg, d))
        tau_best = a if fc <= fd else b
    else:
        tau_best = float(taus[i_min])
    dp_best = delta_p(cfg, tau_best)
    t_total, n = measurement_time(
        dp_best, cfg.contrast, tau_best, cfg.tau0, cfg.snr
    )
    return DetectionResult(
        tau_int=float(tau_best),
        total_time=t_total,
        delta_p=dp_best,
        n_measurements=n,
        contrast=cfg.contrast,
        tau0=cfg.tau0,
        snr=cfg.snr,
        boundary=boundary,
    )


def flip_rate_sweep(
    cfg: ExperimentConfig, gamma_flip_grid: np.ndarray
) -> list[DetectionResult]:
    """Optimised (tau_int, T) for each flip rate on the grid."""
    out = []
    for gf in np.asarray(gamma_flip_grid, float):
        spin = SpinParams(cfg.spin.omega, cfg.spin.b_field, cfg.spin.gamma_n, float(gf))
        out.append(optimize_interrogation_time(replace(cfg, spin=spin)))
    return out


# --- coupling maps -----------------------------------------------------------


def zone_average_hyperfine(
    g: Geometry,
    theta_min: float,
    theta_max: float,
    radius: float,
    gamma_n: float,
    n_theta: int = 64,
    n_phi: int = 128,
    tol: float = 1e-6,
    max_refine: int = 6,
) -> np.ndarray:
    """Mean hyperfine vector over the uniform spherical-zone law.

    Gauss-Legendre quadrature in cos(theta) (the zone law is uniform
    there) times an equal-weight periodic grid in phi, refined by
    doubling until the result is stable to ``tol`` (relative to the
    vector norm).  Raises :class:`EstimationError` on non-convergence.
    """
    prev = None
    for _ in range(max_refine):
        u, w = np.polynomial.legendre.leggauss(n_theta)
        # map [-1, 1] -> [cos(theta_max), cos(theta_min)]
        a_, b_ = math.cos(theta_max), math.cos(theta_min)
        cos_t = 0.5 * (b_ - a_) * u + 0.5 * (a_ + b_)
        weights = w / 2.0  # uniform density in cos(theta)
        theta = np.arccos(np.clip(cos_t, -1.0, 1.0))
        phi = 2.0 * np.pi * np.arange(n_phi) / n_phi
        th_grid, ph_grid = np.meshgrid(theta, phi, indexing="ij")
        sin_t = np.sin(th_grid)
        lab = np.stack(
            [
                radius * sin_t * np.cos(ph_grid),
                radius * sin_t * np.sin(ph_grid),
                radius * np.cos(th_grid),
            ],
            axis=-1,
        ).reshape(-1, 3)
        pos = g.to_nv_frame(g.anchor_position + lab)
        a_vals = hyperfine_from_position(pos, gamma_n).reshape(n_theta, n_phi, 3)
        mean = np.einsum("t,tpc->c", weights, a_vals) / n_phi
        if prev is not None:
            scale = max(np.linalg.norm(mean), 1e-300)
            if np.linalg.norm(mean - prev) <= tol * scale:
                return mean
        prev = mean
        n_theta *= 2
        n_phi *= 2
    raise EstimationError("zone-average quadrature did not converge")


def zone_sample_hyperfine(
    g: Geometry,
    theta_min: float,
    theta_max: float,
    radius: float,
    gamma_n: float,
    n_samples: int,
    seed: int = 0,
) -> np.ndarray:
    """(n, 3) hyperfine samples drawn from the uniform zone law."""
    rng = np.random.default_rng(seed)
    theta = sample_zone_theta(rng, n_samples, theta_min, theta_max)
    phi = rng.random(n_samples) * 2.0 * np.pi
    sin_t = np.sin(theta)
    lab = np.stack(
        [
            radius * sin_t * np.cos(phi),
            radius * sin_t * np.sin(phi),
            radius * np.cos(theta),
        ],
        axis=-1,
    )
    pos = g.to_nv_frame(g.anchor_position + lab)
    return hyperfine_from_position(pos, gamma_n)


def coupling_map(
    z_nv: np.ndarray,
    x_nv: np.ndarray,
    theta_min: float,
    theta_max: float,
    radius: float,
    gamma_n: float = GAMMA_F19,
) -> np.ndarray:
    """Averaged coupling J (rad/s) over a grid of NV placements.

    ``z_nv`` is depth below the anchor plane, ``x_nv`` lateral offset
    (m); output shape (len(z_nv), len(x_nv)).
    """
    z_nv = np.atleast_1d(np.asarray(z_nv, float))
    x_nv = np.atleast_1d(np.asarray(x_nv, float))
    out = np.empty((z_nv.size, x_nv.size))
    for iz, z in enumerate(z_nv):
        for ix, x in enumerate(x_nv):
            g = Geometry(nv_position=np.array([x, 0.0, -z]))
            a_mean = zone_average_hyperfine(
                g, theta_min, theta_max, radius, gamma_n
            )
            out[iz, ix] = 0.25 * math.hypot(a_mean[0], a_mean[1])
    return out
