"""Quantum dynamics of the driven NV / target spin pair.

Basis and conventions
---------------------
The 4-dimensional Hilbert space is ordered
``{|+,up>, |+,dn>, |-,up>, |-,dn>}`` (dressed NV state first, nuclear
second).  All spin operators entering Hamiltonians and dissipators are
spin-1/2 operators, i.e. Pauli matrices divided by two.  With that
normalization the resonant two-level block of the average Hamiltonian
has gap ``2*delta`` and coupling ``J = (Ax^2+Ay^2)^(1/2)/4`` exactly, so
the closed-form transfer probability drops out of the full model with no
extra factors; the measurement-time regression in the acceptance suite
validates the convention end to end.

All frequencies are angular (rad/s); flip and diffusion rates are 1/s.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy.linalg import expm

from .errors import SolverError
from .series import HyperfineSeries
from .stochastic import HyperfineStats

PX = np.array([[0, 1], [1, 0]], dtype=complex)
PY = np.array([[0, -1j], [1j, 0]], dtype=complex)
PZ = np.array([[1, 0], [0, -1]], dtype=complex)
ID2 = np.eye(2, dtype=complex)
ID4 = np.eye(4, dtype=complex)
PAULI = (PX, PY, PZ)
SPIN = tuple(p / 2 for p in PAULI)  # spin-1/2 operators

SIGMA_PLUS = np.array([[0, 1], [0, 0]], dtype=complex)  # |+><-|
SIGMA_MINUS = SIGMA_PLUS.T.conj()

# basis indices
P_UP, P_DN, M_UP, M_DN = 0, 1, 2, 3

HERM_TOL = 1e-12
TRACE_TOL = 1e-9
POSITIVITY_TOL = -1e-8


@dataclass(frozen=True)
class SpinParams:
    """Drive, static field and incoherent NV flip rate."""

    omega: float  # Rabi frequency, rad/s
    b_field: np.ndarray  # (3,), tesla
    gamma_n: float  # nuclear gyromagnetic ratio, rad/s/T
    gamma_flip: float = 0.0  # dressed-state flip rate 1/T_1rho, 1/s

    def __post_init__(self):
        b = np.asarray(self.b_field, float)
        if b.shape != (3,):
            raise ValueError("b_field must be a 3-vector")
        if self.omega <= 0:
            raise ValueError("omega must be positive")
        if self.gamma_flip < 0:
            raise ValueError("gamma_flip must be non-negative")
        object.__setattr__(self, "b_field", b)

    @classmethod
    def at_resonance(
        cls, omega: float, gamma_n: float, a_z: float = 0.0, gamma_flip: float = 0.0
    ) -> "SpinParams":
        """Pick B_z so the averaged detuning vanishes for mean A_z = ``a_z``."""
        bz = (omega + 0.5 * a_z) / gamma_n
        return cls(omega, np.array([0.0, 0.0, bz]), gamma_n, gamma_flip)


@dataclass(frozen=True)
class SpinState:
    """Density matrix on the ordered 4-dimensional basis."""

    rho: np.ndarray

    def __post_init__(self):
        rho = np.asarray(self.rho, complex)
        if rho.shape != (4, 4):
            raise ValueError("rho must be 4x4")
        object.__setattr__(self, "rho", rho)

    def validate(self) -> "SpinState":
        r = self.rho
        herm = np.abs(r - r.T.conj()).max()
        if herm > HERM_TOL:
            raise SolverError(f"state not Hermitian: deviation {herm:.3g}")
        tr = abs(r.trace() - 1.0)
        if tr > TRACE_TOL:
            raise SolverError(f"state trace deviates by {tr:.3g}")
        ev = np.linalg.eigvalsh(0.5 * (r + r.T.conj()))
        if ev.min() < POSITIVITY_TOL:
            raise SolverError(f"state has negative eigenvalue {ev.min():.3g}")
        return self

    @property
    def purity(self) -> float:
        return float(np.real(np.trace(self.rho @ self.rho)))

    @classmethod
    def nv_plus_mixed_nucleus(cls) -> "SpinState":
        """|+><+| (x) 1/2, the HHDR initial state with unpolarised target."""
        return cls(np.diag([0.5, 0.5, 0.0, 0.0]).astype(complex))

    @classmethod
    def pure(cls, index: int) -> "SpinState":
        rho = np.zeros((4, 4), complex)
        rho[index, index] = 1.0
        return cls(rho)


@dataclass(frozen=True)
class EffectiveCoupling:
    """Averaged detuning and flip-flop coupling of the resonant pair."""

    delta: float  # rad/s
    j: float  # rad/s

    def __post_init__(self):
        if self.j < 0:
            raise ValueError("j must be non-negative")


@dataclass(frozen=True)
class CumulantScales:
    """Typical fluctuation amplitude and correlation time."""

    sigma_hat2: float  # rad^2/s^2
    tau_hat: float  # s

    def __post_init__(self):
        if self.sigma_hat2 < 0 or self.tau_hat < 0:
            raise ValueError("scales must be non-negative")


@dataclass(frozen=True)
class DissipationRates:
    """Diffusion-induced rates gamma_k (1/s) along orthonormal axes
    (columns of ``axes``)."""

    gamma: np.ndarray  # (3,)
    axes: np.ndarray  # (3, 3), columns are eigenaxes

    def __post_init__(self):
        g = np.asarray(self.gamma, float)
        ax = np.asarray(self.axes, float)
        if g.shape != (3,) or np.any(g < 0):
            raise ValueError("gamma must be three non-negative rates")
        if ax.shape != (3, 3) or np.abs(ax.T @ ax - np.eye(3)).max() > 1e-9:
            raise ValueError("axes must be orthonormal columns")
        object.__setattr__(self, "gamma", g)
        object.__setattr__(self, "axes", ax)

    @classmethod
    def none(cls) -> "DissipationRates":
        return cls(np.zeros(3), np.eye(3))

    @classmethod
    def from_stats(cls, stats: HyperfineStats) -> "DissipationRates":
        return cls(stats.gamma_eigenvalues, stats.gamma_axes)


def build_average_hamiltonian(a_mean: np.ndarray, p: SpinParams) -> np.ndarray:
    """H_A = Omega Sz_e + (gamma_n B - A/2) . S_n - Sx_e (A . S_n).

    Doubles as the instantaneous Hamiltonian H(A(t)) of a trajectory,
    since the two have identical functional form.
    """
    a = np.asarray(a_mean, float)
    h = p.omega * np.kron(SPIN[2], ID2)
    nuc = sum(
        (p.gamma_n * p.b_field[k] - 0.5 * a[k]) * SPIN[k] for k in range(3)
    )
    h = h + np.kron(ID2, nuc)
    a_dot_s = sum(a[k] * SPIN[k] for k in range(3))
    h = h - np.kron(SPIN[0], a_dot_s)
    return h


def build_fluctuation_hamiltonian(xi: np.ndarray) -> np.ndarray:
    """H_xi = -(xi . S_n)/2 - Sx_e (xi . S_n), the stochastic part."""
    xi = np.asarray(xi, float)
    x_dot_s = sum(xi[k] * SPIN[k] for k in range(3))
    return -0.5 * np.kron(ID2, x_dot_s) - np.kron(SPIN[0], x_dot_s)


def effective_coupling(a_mean: np.ndarray, p: SpinParams) -> EffectiveCoupling:
    """delta = (Omega - gamma_n B_z + A_z/2)/2, J = (Ax^2+Ay^2)^(1/2)/4."""
    a = np.asarray(a_mean, float)
    delta = 0.5 * (p.omega - p.gamma_n * p.b_field[2] + 0.5 * a[2])
    j = 0.25 * math.hypot(a[0], a[1])
    return EffectiveCoupling(delta, j)


def fast_transfer_probability(
    t: np.ndarray | float, ec: EffectiveCoupling
) -> np.ndarray | float:
    """P(t) = (1/2) J^2/(J^2+delta^2) sin^2(sqrt(J^2+delta^2) t).

    The 1/2 accounts for the completely mixed initial nuclear state.
    """
    t = np.asarray(t, float)
    if np.any(t < 0):
        raise ValueError("t must be non-negative")
    nu2 = ec.j**2 + ec.delta**2
    if nu2 == 0.0:
        out = np.zeros_like(t)
    else:
        out = 0.5 * ec.j**2 / nu2 * np.sin(np.sqrt(nu2) * t) ** 2
    return float(out) if out.ndim == 0 else out


def reduced_two_level(
    a_mean: np.ndarray, delta: float, omega: float | None = None
) -> np.ndarray:
    """2x2 Hamiltonian on span{|+,dn>, |-,up>}:
    H = 2 delta Sz - (Ax/2) Sx + (Ay/2) Sy  (spin-1/2 operators).

    When ``omega`` is given, warns if (|A|/Omega)^2 >= 1e-3, outside the
    validity domain of the two-level reduction.
    """
    a = np.asarray(a_mean, float)
    if omega is not None:
        ratio2 = float(a @ a) / omega**2
        if ratio2 >= 1e-3:
            warnings.warn(
                f"(|A|/Omega)^2 = {ratio2:.2e} >= 1e-3: "
                "two-level reduction inaccurate"
            )
    return 2 * delta * SPIN[2] - 0.5 * a[0] * SPIN[0] + 0.5 * a[1] * SPIN[1]


# --- Lindblad equation ------------------------------------------------------


def _dissipator_super(lop: np.ndarray, weight: float) -> np.ndarray:
    """weight * (L . L+ - {L+L, .}/2) as a superoperator on row-major vec."""
    ld = lop.T.conj()
    ldl = ld @ lop
    return weight * (
        np.kron(lop, ld.T)
        - 0.5 * (np.kron(ldl, ID4) + np.kron(ID4, ldl.T))
    )


def diffusion_lindblad_operators(rates: DissipationRates) -> list[np.ndarray]:
    """L_k = (Sx_e + 1/2) (x) (n_k . S_n) on the dissipation eigenaxes."""
    electron = SPIN[0] + 0.5 * ID2
    ops = []
    for k in range(3):
        axis = rates.axes[:, k]
        nuc = sum(axis[i] * SPIN[i] for i in range(3))
        ops.append(np.kron(electron, nuc))
    return ops


def liouvillian(
    h: np.ndarray, rates: DissipationRates, gamma_flip: float
) -> np.ndarray:
    """16x16 generator: -i[H, .] + diffusion dissipator + flip dissipator.

    Diffusion part: sum_k (gamma_k/2) (L_k . L_k - {L_k^2, .}/2).
    Flip part: (gamma_flip/2) sum over {sigma+_e, sigma-_e}.
    Acts on rho.reshape(-1) (row-major).
    """
    sup = -1j * (np.kron(h, ID4) - np.kron(ID4, h.T))
    for lop, g in zip(diffusion_lindblad_operators(rates), rates.gamma):
        if g > 0:
            sup = sup + _dissipator_super(lop, 0.5 * g)
    if gamma_flip > 0:
        for e_op in (SIGMA_PLUS, SIGMA_MINUS):
            sup = sup + _dissipator_super(np.kron(e_op, ID2), 0.5 * gamma_flip)
    return sup


def _spectral_norm(h: np.ndarray) -> float:
    return float(np.abs(np.linalg.eigvalsh(h)).max())


def lindblad_evolve(
    h: np.ndarray,
    rates: DissipationRates,
    p: SpinParams,
    rho0: SpinState,
    t_grid: Sequence[float],
    method: str = "rk4",
    max_step: float | None = None,
    validate: bool = True,
) -> list[SpinState]:
    """Propagate the Lindblad equation, returning states at ``t_grid``.

    ``method="rk4"``: fixed-step classical 4th-order scheme on the
    vectorized superoperator, step bounded by 1e-2 / max(||H||, gamma_k,
    gamma_flip) (or ``max_step`` if smaller).  ``method="expm"``: exact
    dense matrix exponentials of the generator between grid points.
    States are checked against the Hermiticity/trace/positivity
    invariants at every grid point unless ``validate=False``.
    """
    t_grid = np.asarray(t_grid, float)
    if t_grid.ndim != 1 or len(t_grid) == 0:
        raise ValueError("t_grid must be a non-empty 1-d array")
    if np.any(np.diff(t_grid) < 0) or t_grid[0] < 0:
        raise ValueError("t_grid must be sorted and non-negative")
    if validate:
        rho0.validate()
    sup = liouvillian(h, rates, p.gamma_flip)
    y = rho0.rho.reshape(-1).astype(complex)
    out: list[SpinState] = []

    if method == "expm":
        t_prev = 0.0
        cache: dict[float, np.ndarray] = {}
        for t in t_grid:
            dt = t - t_prev
            if dt > 0:
                key = round(dt, 18)
                if key not in cache:
                    cache[key] = expm(sup * dt)
                y = cache[key] @ y
            t_prev = t
            out.append(_record(y, validate))
        return out

    if method != "rk4":
        raise ValueError(f"unknown method {method!r}")

    scale = max(_spectral_norm(h), float(np.max(rates.gamma)), p.gamma_flip, 1e-300)
    h_bound = 1e-2 / scale
    if max_step is not None:
        h_bound = min(h_bound, max_step)
    t_prev = 0.0
    for t in t_grid:
        span = t - t_prev
        if span > 0:
            n_sub = max(1, math.ceil(span / h_bound))
            hh = span / n_sub
            for _ in range(n_sub):
                k1 = sup @ y
                k2 = sup @ (y + 0.5 * hh * k1)
                k3 = sup @ (y + 0.5 * hh * k2)
                k4 = sup @ (y + hh * k3)
                y = y + (hh / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        t_prev = t
        out.append(_record(y, validate))
    return out


def _record(y: np.ndarray, validate: bool) -> SpinState:
    state = SpinState(y.reshape(4, 4).copy())
    return state.validate() if validate else state


def transfer_probability(rho: SpinState | np.ndarray) -> float:
    """Population of the reversed dressed state: <-|Tr_N rho|->."""
    r = rho.rho if isinstance(rho, SpinState) else np.asarray(rho)
    return float(np.real(r[M_UP, M_UP] + r[M_DN, M_DN]))


def slow_regime_probability(
    a_samples: np.ndarray,
    t: np.ndarray | float,
    p: SpinParams,
) -> tuple[np.ndarray, np.ndarray]:
    """Monte Carlo average of the static-coupling transfer over samples
    of the hyperfine vector (slow-diffusion limit).

    Per sample: delta~ = (Omega - gamma_n B_z + A_z/2)/2,
    J = (Ax^2+Ay^2)^(1/2)/4, nu = (J^2+delta~^2)^(1/2) and
    P = (1/2) J^2/nu^2 sin^2(nu t).  Returns (mean, standard error),
    each shaped like ``t``.
    """
    a = np.atleast_2d(np.asarray(a_samples, float))
    if a.shape[0] == 0:
        raise ValueError("empty sample set")
    t_arr = np.atleast_1d(np.asarray(t, float))
    delta = 0.5 * (p.omega - p.gamma_n * p.b_field[2] + 0.5 * a[:, 2])
    j = 0.25 * np.hypot(a[:, 0], a[:, 1])
    nu2 = j**2 + delta**2
    weight = np.divide(j**2, nu2, out=np.zeros_like(nu2), where=nu2 > 0)
    vals = 0.5 * weight[:, None] * np.sin(np.sqrt(nu2)[:, None] * t_arr[None, :]) ** 2
    mean = vals.mean(axis=0)
    se = vals.std(axis=0, ddof=1) / math.sqrt(a.shape[0]) if a.shape[0] > 1 else np.zeros_like(mean)
    if np.isscalar(t) or np.asarray(t).ndim == 0:
        return float(mean[0]), float(se[0])
    return mean, se


# --- Monte Carlo over trajectories -------------------------------------------


def _batched_propagators(h_batch: np.ndarray, dt: float) -> np.ndarray:
    """Exact exponentials exp(-i H dt) for a (b, 4, 4) Hermitian stack."""
    evals, vecs = np.linalg.eigh(h_batch)
    phases = np.exp(-1j * evals * dt)
    return np.einsum("bik,bk,bjk->bij", vecs, phases, vecs.conj())


def _hamiltonian_batch(a: np.ndarray, p: SpinParams) -> np.ndarray:
    """Vectorized build_average_hamiltonian over (b, 3) hyperfine vectors."""
    b = a.shape[0]
    h = np.zeros((b, 4, 4), complex)
    h += p.omega * np.kron(SPIN[2], ID2)
    for k in range(3):
        h += (p.gamma_n * p.b_field[k] - 0.5 * a[:, k])[:, None, None] * np.kron(
            ID2, SPIN[k]
        )
        h -= a[:, k][:, None, None] * np.kron(SPIN[0], SPIN[k])
    return h


def _mc_accumulate(
    ensemble: Iterable[HyperfineSeries],
    p: SpinParams,
    rho0: SpinState,
    t_grid: np.ndarray,
    batch_size: int,
) -> tuple[np.ndarray, np.ndarray, np.ndarray, int]:
    """Shared Monte Carlo loop: per-batch unitary propagation, with
    accumulation of the state sum and of per-trajectory transfer
    moments, all in trajectory index order."""
    rho0.validate()
    n_out = len(t_grid)
    sums = np.zeros((n_out, 4, 4), complex)
    p_sum = np.zeros(n_out)
    p_sumsq = np.zeros(n_out)
    count = 0

    def flush(batch: list[HyperfineSeries]):
        nonlocal count
        if not batch:
            return
        dt = batch[0].dt
        n = len(batch[0])
        for s in batch:
            if abs(s.dt - dt) > 1e-15 * dt or len(s) != n:
                raise ValueError("ensemble series must share dt and length")
        out_idx = np.round(t_grid / dt).astype(int)
        if np.any(np.abs(out_idx * dt - t_grid) > 1e-9 * max(dt, t_grid.max() or dt)):
            raise ValueError("t_grid must align to multiples of the series dt")
        if out_idx.max() > n - 1:
            raise ValueError("series do not cover t_grid")
        a = np.stack([s.a for s in batch])  # (b, n, 3)
        bsz = a.shape[0]
        rho = np.broadcast_to(rho0.rho, (bsz, 4, 4)).copy()
        where = {k: i for i, k in enumerate(out_idx)}

        def record(k: int):
            i = where[k]
            sums[i] += rho.sum(axis=0)
            pv = np.real(rho[:, M_UP, M_UP] + rho[:, M_DN, M_DN])
            p_sum[i] += pv.sum()
            p_sumsq[i] += (pv**2).sum()

        if 0 in where:
            record(0)
        for k in range(int(out_idx.max())):
            u = _batched_propagators(_hamiltonian_batch(a[:, k, :], p), dt)
            rho = np.einsum("bij,bjk,blk->bil", u, rho, u.conj())
            if (k + 1) in where:
                record(k + 1)
        count += bsz

    batch: list[HyperfineSeries] = []
    for series in ensemble:
        batch.append(series)
        if len(batch) >= batch_size:
            flush(batch)
            batch = []
    flush(batch)
    if count == 0:
        raise ValueError("empty ensemble")
    return sums, p_sum, p_sumsq, count


def monte_carlo_evolve(
    ensemble: Iterable[HyperfineSeries],
    p: SpinParams,
    rho0: SpinState,
    t_grid: Sequence[float],
    batch_size: int = 64,
) -> list[SpinState]:
    """Average the unitary per-trajectory evolution over an ensemble.

    Each trajectory is propagated with a piecewise-constant Hamiltonian
    over its sampling steps using exact 4x4 exponentials (via the
    unitary eigendecomposition); the averaged density matrix is
    accumulated in trajectory index order, so the result does not depend
    on batching or scheduling.  The ensemble may be any iterable
    (including a lazy generator); all series must share ``dt`` and cover
    the grid, and grid times must align to multiples of ``dt``.
    """
    t_grid = np.asarray(t_grid, float)
    sums, _, _, count = _mc_accumulate(ensemble, p, rho0, t_grid, batch_size)
    return [SpinState(s / count).validate() for s in sums]


def monte_carlo_transfer(
    ensemble: Iterable[HyperfineSeries],
    p: SpinParams,
    rho0: SpinState,
    t_grid: Sequence[float],
    batch_size: int = 64,
) -> tuple[np.ndarray, np.ndarray]:
    """Ensemble-averaged transfer probability and its standard error."""
    t_grid = np.asarray(t_grid, float)
    _, p_sum, p_sumsq, count = _mc_accumulate(ensemble, p, rho0, t_grid, batch_size)
    mean = p_sum / count
    if count > 1:
        var = np.clip(p_sumsq / count - mean**2, 0.0, None) * count / (count - 1)
        se = np.sqrt(var / count)
    else:
        se = np.zeros_like(mean)
    return mean, se


def cumulant_validity_check(
    s: CumulantScales, tau_int: float, threshold: float = 0.1
) -> tuple[bool, float]:
    """Second-order cumulant validity: sigma_hat^2 tau_hat tau_int <= 0.1.

    Returns (passes, margin); the boundary value passes.
    """
    margin = s.sigma_hat2 * s.tau_hat * tau_int
    return margin <= threshold, margin
