"""Batch front-end: configs in, CSV/JSON artifacts out, with manifests.

Every run writes its artifacts plus a ``manifest.json`` carrying the
canonical config, its hash, the master seed and library versions, which
is sufficient to re-run the command bit-identically.  Exit codes:
0 success, 2 configuration error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np
import scipy

from . import __version__, anm, detection, molecule, spins, stochastic
from .config import apply_overrides, load_config
from .constants import GAMMA_E, PICOSECOND, TWO_PI, hz_to_angular
from .errors import ConfigError, NVMotionError
from .io import canonical_json, derive_seed, sha256_of, write_csv, write_json


class ArtifactSink:
    """Collects artifact paths for one run and writes the manifest."""

    def __init__(self, out_dir: Path, command: str, cfg: dict):
        self.out_dir = Path(out_dir)
        self.command = command
        self.cfg = cfg
        self.names: list[str] = []

    def csv(self, name: str, header, rows) -> Path:
        self.names.append(name)
        return write_csv(self.out_dir / name, header, rows)

    def json(self, name: str, obj) -> Path:
        self.names.append(name)
        return write_json(self.out_dir / name, obj)

    def finish(self) -> Path:
        cfg_text = canonical_json(self.cfg)
        manifest = {
            "command": self.command,
            "config": self.cfg,
            "config_sha256": sha256_of(cfg_text),
            "seed": self.cfg.get("seed"),
            "versions": {
                "nvmotion": __version__,
                "numpy": np.__version__,
                "scipy": scipy.__version__,
            },
            "artifacts": sorted(self.names),
        }
        return write_json(self.out_dir / "manifest.json", manifest)


# --- config -> domain objects ------------------------------------------------


def _load_molecule(cfg: dict) -> molecule.Molecule:
    path = cfg["molecule"]["path"]
    if path == "bundled:nhc_ru":
        return molecule.load_nhc_ru()
    return molecule.parse_xyz(Path(path).read_text())


def _geometry(cfg: dict) -> stochastic.Geometry:
    g = cfg["geometry"]
    return stochastic.Geometry(
        nv_position=np.array([g["nv_offset_m"], 0.0, -g["nv_depth_m"]])
    )


def _sphere_params(cfg: dict, seed_tag: str) -> stochastic.SphereDiffusionParams:
    s = cfg["stochastic"]
    return stochastic.SphereDiffusionParams(
        d_r=s["d_r_per_s"],
        theta_min=s["theta_min_rad"],
        theta_max=s["theta_max_rad"],
        radius=s["radius_m"],
        dt=s["dt_s"],
        seed=derive_seed(cfg["seed"], seed_tag),
    )


def _ou_params(cfg: dict, seed_tag: str) -> stochastic.OUParams:
    s = cfg["stochastic"]
    return stochastic.OUParams(
        eta=np.array(s["eta_per_s"], float),
        d=s["d_m2_s"],
        equilibrium_offset=np.array(s["offset_m"], float),
        dt=s["dt_s"],
        seed=derive_seed(cfg["seed"], seed_tag),
    )


def _spin_params(cfg: dict, a_z: float = 0.0) -> spins.SpinParams:
    sp = cfg["spins"]
    omega = hz_to_angular(sp["omega_hz"])
    delta = hz_to_angular(sp["delta_hz"])
    gamma_n = hz_to_angular(sp["gamma_n_hz_per_t"])
    bz = (omega + 0.5 * a_z - 2.0 * delta) / gamma_n
    return spins.SpinParams(
        omega,
        np.array([0.0, 0.0, bz]),
        gamma_n,
        hz_to_angular(sp["gamma_flip_hz"]),
    )


def _zone(cfg: dict) -> tuple[float, float, float]:
    s = cfg["stochastic"]
    return s["theta_min_rad"], s["theta_max_rad"], s["radius_m"]


def _gamma_n(cfg: dict) -> float:
    return hz_to_angular(cfg["spins"]["gamma_n_hz_per_t"])


# --- subcommands ---------------------------------------------------------------


def cmd_anm_sim(cfg: dict, args) -> int:
    mol = _load_molecule(cfg)
    a = cfg["anm"]
    net = molecule.build_spring_network(mol, a["cutoff_a"], a["kappa_kcal_mol_a2"])
    params = anm.LangevinParams(
        zeta=a["zeta_per_ps"],
        temperature=a["temperature_k"],
        dt=a["dt_ps"],
        steps=a["steps"],
        seed=derive_seed(cfg["seed"], "anm"),
        burn_in_ps=a["burn_in_ps"],
        record_stride=a["record_stride"],
        wall=a["wall"],
    )
    z_target = cfg["molecule"]["target_atomic_number"]
    matches = np.nonzero(mol.atomic_numbers == z_target)[0]
    if matches.size == 0:
        raise ConfigError(f"molecule has no atom with atomic number {z_target}")
    target = int(matches[0])
    series_list = anm.run_replica_angles(
        net, mol, params, target, a["replicas"], workers=args.workers
    )
    sink = ArtifactSink(Path(cfg["output"]["directory"]), "anm-sim", cfg)
    _write_anm_artifacts(sink, series_list, zeta_per_ps=a["zeta_per_ps"], prefix="anm")
    sink.finish()
    return 0


def _write_anm_artifacts(sink, series_list, zeta_per_ps, prefix) -> dict:
    dt = series_list[0].dt
    max_lag = min(len(s) for s in series_list) // 2
    msd = np.mean(
        [anm.mean_square_displacement(s.theta, max_lag) for s in series_list], axis=0
    )
    t_min = max(2.0 * PICOSECOND / max(zeta_per_ps, 1.0), 5.0 * dt)
    fit = anm.fit_msd(dt, msd, t_min=t_min)
    taus = dt * np.arange(max_lag)
    sink.csv(
        f"{prefix}_msd.csv",
        ["tau_s", "msd_rad2", "fit_2drt"],
        zip(taus, msd, 2.0 * fit.d_r * taus),
    )
    theta = np.concatenate([s.theta for s in series_list])
    phi = np.concatenate([s.phi for s in series_list])
    pooled = anm.AngleSeries(dt, theta, phi)
    hist = anm.angle_histograms(pooled, bins=36)
    zone_law = stochastic.zone_pdf(hist.theta_centers, hist.theta_min, hist.theta_max)
    sink.csv(
        f"{prefix}_theta_hist.csv",
        ["theta_rad", "density", "zone_law"],
        zip(hist.theta_centers, hist.theta_density, zone_law),
    )
    sink.csv(
        f"{prefix}_phi_hist.csv",
        ["phi_rad", "density", "uniform_law"],
        zip(hist.phi_centers, hist.phi_density, np.full_like(hist.phi_centers, 1.0 / (2 * np.pi))),
    )
    # decorrelated azimuth subsample for the flatness test
    stride = max(1, len(series_list[0]) // 8)
    phi_sub = np.concatenate([s.phi[stride::stride] for s in series_list])
    pval = anm.phi_uniformity_pvalue(phi_sub, bins=8)
    summary = {
        "d_r_per_s": fit.d_r,
        "fit_window_s": list(fit.fit_window),
        "fit_residual": fit.residual,
        "theta_min_rad": hist.theta_min,
        "theta_max_rad": hist.theta_max,
        "phi_flatness_pvalue": pval,
        "replicas": len(series_list),
        "samples_per_replica": len(series_list[0]),
    }
    sink.json(f"{prefix}_summary.json", summary)
    return summary


def cmd_trajectory(cfg: dict, args) -> int:
    sink = ArtifactSink(Path(cfg["output"]["directory"]), "trajectory", cfg)
    n = cfg["stochastic"]["steps"]
    if cfg["stochastic"]["model"] == "sphere":
        series = stochastic.generate_sphere_trajectory(_sphere_params(cfg, "sphere"), n)
        sink.csv(
            "angles.csv",
            ["t_s", "theta_rad", "phi_rad"],
            zip(series.times, series.theta, series.phi),
        )
    else:
        series = stochastic.generate_ou_trajectory(_ou_params(cfg, "ou"), n)
        sink.csv(
            "vector.csv",
            ["t_s", "qx_m", "qy_m", "qz_m"],
            zip(series.times, *series.q.T),
        )
    sink.finish()
    return 0


def _hyperfine_series(cfg: dict) -> stochastic.HyperfineSeries:
    n = cfg["stochastic"]["steps"]
    g = _geometry(cfg)
    gamma_n = _gamma_n(cfg)
    if cfg["stochastic"]["model"] == "sphere":
        p = _sphere_params(cfg, "sphere")
        series = stochastic.generate_sphere_trajectory(p, n)
        return stochastic.trajectory_to_hyperfine(series, g, gamma_n, radius=p.radius)
    series = stochastic.generate_ou_trajectory(_ou_params(cfg, "ou"), n)
    return stochastic.trajectory_to_hyperfine(series, g, gamma_n)


def _stats_payload(stats: stochastic.HyperfineStats) -> dict:
    return {
        "mean_rad_s": stats.mean.tolist(),
        "covariance_rad2_s2": stats.covariance.tolist(),
        "gamma_rad2_s": stats.gamma.tolist(),
        "gamma_eigenvalues_per_s": stats.gamma_eigenvalues.tolist(),
        "gamma_axes_columns": stats.gamma_axes.tolist(),
        "sigma_hat2_rad2_s2": stats.sigma_hat2,
        "tau_hat_s": stats.tau_hat,
        "sigma2_fit": None if stats.sigma2_fit is None else stats.sigma2_fit.tolist(),
        "tau_fit_s": None if stats.tau_fit is None else stats.tau_fit.tolist(),
    }


def _corr_rows(stats: stochastic.HyperfineStats):
    sd = np.sqrt(np.clip(np.diag(stats.covariance), 1e-300, None))
    norm = np.outer(sd, sd)
    for k, tau in enumerate(stats.taus):
        c = stats.corr[k] / norm
        yield (tau, c[0, 0], c[1, 1], c[2, 2], c[0, 1], c[0, 2], c[1, 2])


CORR_HEADER = ["tau_s", "c_xx", "c_yy", "c_zz", "c_xy", "c_xz", "c_yz"]


def cmd_stats(cfg: dict, args) -> int:
    sink = ArtifactSink(Path(cfg["output"]["directory"]), "stats", cfg)
    h = _hyperfine_series(cfg)
    stats = stochastic.estimate_stats(h, cfg["stochastic"]["tau_max_s"])
    sink.json("stats.json", _stats_payload(stats))
    sink.csv("corr.csv", CORR_HEADER, _corr_rows(stats))
    sink.finish()
    return 0


def _regime_context(cfg: dict):
    """(geometry, a_mean, spin params, effective coupling) for transfer runs."""
    g = _geometry(cfg)
    tmin, tmax, radius = _zone(cfg)
    gamma_n = _gamma_n(cfg)
    a_mean = detection.zone_average_hyperfine(g, tmin, tmax, radius, gamma_n)
    sp = cfg["spins"]
    omega = hz_to_angular(sp["omega_hz"])
    delta = hz_to_angular(sp["delta_hz"])
    bz = (omega + 0.5 * a_mean[2] - 2.0 * delta) / hz_to_angular(sp["gamma_n_hz_per_t"])
    p = spins.SpinParams(
        omega,
        np.array([0.0, 0.0, bz]),
        hz_to_angular(sp["gamma_n_hz_per_t"]),
        hz_to_angular(sp["gamma_flip_hz"]),
    )
    return g, a_mean, p, spins.effective_coupling(a_mean, p)


def _moderate_rates(cfg: dict, d_r: float, seed_tag: str) -> spins.DissipationRates:
    """Diffusion rates estimated from a sphere run at the given D_r."""
    tmin, tmax, radius = _zone(cfg)
    p = stochastic.SphereDiffusionParams(
        d_r=d_r, theta_min=tmin, theta_max=tmax, radius=radius,
        dt=0.1 / d_r, seed=derive_seed(cfg["seed"], seed_tag),
    )
    series = stochastic.generate_sphere_trajectory(p, 300_000)
    h = stochastic.trajectory_to_hyperfine(series, _geometry(cfg), _gamma_n(cfg), radius=radius)
    stats = stochastic.estimate_stats(h, tau_max=30.0 / d_r)
    return spins.DissipationRates.from_stats(stats)


def cmd_transfer(cfg: dict, args) -> int:
    sink = ArtifactSink(Path(cfg["output"]["directory"]), "transfer", cfg)
    _write_transfer_curves(cfg, sink, prefix="transfer")
    sink.finish()
    return 0


def _write_transfer_curves(cfg: dict, sink: ArtifactSink, prefix: str) -> None:
    g, a_mean, p, ec = _regime_context(cfg)
    t_end = 3.0 * np.pi / (2.0 * max(ec.j, 1.0))
    taus = np.linspace(0.0, t_end, 400)
    p_fast = spins.fast_transfer_probability(taus, ec)
    rates = _moderate_rates(cfg, d_r=1e7, seed_tag="transfer-moderate")
    h = spins.build_average_hamiltonian(a_mean, p)
    rho0 = spins.SpinState.nv_plus_mixed_nucleus()
    states = spins.lindblad_evolve(h, rates, p, rho0, taus, method="expm")
    p_mod = [spins.transfer_probability(s) for s in states]
    tmin, tmax, radius = _zone(cfg)
    samples = detection.zone_sample_hyperfine(
        g, tmin, tmax, radius, _gamma_n(cfg), 100_000,
        seed=derive_seed(cfg["seed"], "transfer-slow"),
    )
    p_slow, _ = spins.slow_regime_probability(samples, taus, p)
    sink.csv(
        f"{prefix}_curves.csv",
        ["tau_s", "p_fast", "p_moderate", "p_slow"],
        zip(taus, p_fast, p_mod, p_slow),
    )


def cmd_montecarlo(cfg: dict, args) -> int:
    sink = ArtifactSink(Path(cfg["output"]["directory"]), "montecarlo", cfg)
    _write_montecarlo_curve(
        cfg, sink, d_r=cfg["stochastic"]["d_r_per_s"],
        n_traj=args.trajectories, name="montecarlo.csv",
    )
    sink.finish()
    return 0


def _mc_grid(d_r: float, t_end: float) -> tuple[float, int, np.ndarray]:
    """(series dt, series length, output grid) for a Monte Carlo run."""
    if d_r <= 0:
        dt = t_end / 200.0
    else:
        dt = min(max(2e-8, 0.1 / d_r), t_end / 200.0)
    n_out = 200
    stride = max(1, int(round(t_end / n_out / dt)))
    n_steps = 200 * stride + 1
    grid = dt * stride * np.arange(201)
    return dt, n_steps, grid


def _write_montecarlo_curve(cfg, sink, d_r, n_traj, name, seed_tag="mc", t_end=None):
    g, a_mean, p, ec = _regime_context(cfg)
    tmin, tmax, radius = _zone(cfg)
    if t_end is None:
        t_end = 3.0 * np.pi / (2.0 * max(ec.j, 1.0))
    dt, n_steps, grid = _mc_grid(d_r, t_end)
    sp = stochastic.SphereDiffusionParams(
        d_r=d_r, theta_min=tmin, theta_max=tmax, radius=radius, dt=dt,
        seed=derive_seed(cfg["seed"], seed_tag),
    )
    ensemble = stochastic.sphere_hyperfine_ensemble(
        sp, n_steps, n_traj, g, _gamma_n(cfg)
    )
    rho0 = spins.SpinState.nv_plus_mixed_nucleus()
    p_mc, p_se = spins.monte_carlo_transfer(ensemble, p, rho0, grid)
    p_fast = spins.fast_transfer_probability(grid, ec)
    sink.csv(
        name,
        ["tau_s", "p_mc", "p_mc_se", "p_fast"],
        zip(grid, p_mc, p_se, p_fast),
    )


def cmd_detect(cfg: dict, args) -> int:
    sink = ArtifactSink(Path(cfg["output"]["directory"]), "detect", cfg)
    d = cfg["detection"]
    exp = detection.ExperimentConfig.from_coupling(
        j=hz_to_angular(d["j_hz"]),
        gamma_flip=hz_to_angular(cfg["spins"]["gamma_flip_hz"]),
        contrast=d["contrast"],
        delta=hz_to_angular(cfg["spins"]["delta_hz"]),
        tau0=d["tau0_s"],
        omega=hz_to_angular(cfg["spins"]["omega_hz"]),
        gamma_n=_gamma_n(cfg),
        snr=d["snr"],
    )
    res = detection.optimize_interrogation_time(exp)
    sink.json("detect.json", _detection_payload(cfg, res))
    sink.finish()
    print(
        f"tau_int = {res.tau_int:.4g} s, T = {res.total_time:.4g} s, "
        f"dP = {res.delta_p:.4g}, N = {res.n_measurements:.4g}"
    )
    return 0


def _detection_payload(cfg: dict, res: detection.DetectionResult) -> dict:
    return {
        "j_hz": cfg["detection"]["j_hz"],
        "gamma_flip_hz": cfg["spins"]["gamma_flip_hz"],
        "contrast": cfg["detection"]["contrast"],
        "tau0_s": cfg["detection"]["tau0_s"],
        "tau_int_s": res.tau_int,
        "total_time_s": res.total_time,
        "delta_p": res.delta_p,
        "n_measurements": res.n_measurements,
        "boundary": res.boundary,
    }


def cmd_coupling_map(cfg: dict, args) -> int:
    sink = ArtifactSink(Path(cfg["output"]["directory"]), "coupling-map", cfg)
    _write_coupling_map(cfg, sink, "map.csv")
    sink.finish()
    return 0


def _write_coupling_map(cfg: dict, sink: ArtifactSink, name: str) -> None:
    d = cfg["detection"]
    tmin, tmax, radius = _zone(cfg)
    z = np.array(d["map_z_nv_m"], float)
    x = np.array(d["map_x_nv_m"], float)
    j = detection.coupling_map(z, x, tmin, tmax, radius, _gamma_n(cfg))
    rows = []
    for iz in range(z.size):
        for ix in range(x.size):
            rows.append((z[iz], x[ix], j[iz, ix] / TWO_PI))
    sink.csv(name, ["z_nv_m", "x_nv_m", "j_hz"], rows)


# --- reproduce presets ---------------------------------------------------------

TABLE1_ROWS = [  # (j_hz, gamma_flip_hz)
    (700.0, 500.0),
    (700.0, 1000.0),
    (700.0, 2000.0),
    (250.0, 500.0),
    (250.0, 1000.0),
]


def reproduce_table1(cfg: dict, sink: ArtifactSink, quick: bool) -> None:
    rows = []
    payload = []
    for j_hz, gf_hz in TABLE1_ROWS:
        exp = detection.ExperimentConfig.from_coupling(
            j=hz_to_angular(j_hz), gamma_flip=hz_to_angular(gf_hz), contrast=0.05
        )
        res = detection.optimize_interrogation_time(exp)
        rows.append((j_hz, 0.05, gf_hz, res.tau_int, res.total_time, res.delta_p))
        payload.append(
            {
                "j_hz": j_hz,
                "contrast": 0.05,
                "gamma_flip_hz": gf_hz,
                "tau_int_s": res.tau_int,
                "total_time_s": res.total_time,
                "delta_p": res.delta_p,
            }
        )
    exp = detection.ExperimentConfig.from_coupling(
        j=hz_to_angular(20e3), gamma_flip=hz_to_angular(1e3), contrast=0.03
    )
    res = detection.optimize_interrogation_time(exp)
    sink.csv(
        "table1.csv",
        ["j_hz", "contrast", "gamma_flip_hz", "tau_int_s", "total_time_s", "delta_p"],
        rows,
    )
    sink.json(
        "table1.json",
        {
            "rows": payload,
            "spin_label_case": {
                "j_hz": 20e3,
                "contrast": 0.03,
                "gamma_flip_hz": 1e3,
                "tau_int_s": res.tau_int,
                "total_time_s": res.total_time,
                "delta_p": res.delta_p,
            },
        },
    )


def reproduce_fig3(cfg: dict, sink: ArtifactSink, quick: bool, workers: int) -> None:
    mol = _load_molecule(cfg)
    net = molecule.build_spring_network(mol, 10.0, 1.0)
    replicas = 2 if quick else 6
    steps = 300_000 if quick else 1_500_000  # x 4 fs = 1.2 / 6 ns each
    params = anm.LangevinParams(
        zeta=5.0, temperature=300.0, dt=0.004, steps=steps,
        seed=derive_seed(cfg["seed"], "fig3"), burn_in_ps=100.0,
        record_stride=50, wall=True,
    )
    target = int(np.nonzero(mol.atomic_numbers == 9)[0][0])
    series_list = anm.run_replica_angles(net, mol, params, target, replicas, workers)
    _write_anm_artifacts(sink, series_list, zeta_per_ps=5.0, prefix="fig3")


def reproduce_fig4(cfg: dict, sink: ArtifactSink, quick: bool) -> None:
    cfg = dict(cfg, spins=dict(cfg["spins"], delta_hz=1800.0, gamma_flip_hz=0.0))
    n_traj = 48 if quick else 160
    t_end = 2.0e-4 if quick else 4.0e-4
    g, a_mean, p, ec = _regime_context(cfg)
    regimes = {"fast": 1e9, "moderate": 1e7, "slow": 0.0}
    for name, d_r in regimes.items():
        _write_montecarlo_curve(
            cfg, sink, d_r=d_r, n_traj=n_traj, name=f"fig4_{name}.csv",
            seed_tag=f"fig4-{name}", t_end=t_end,
        )
    # analytic comparison curves for the same grid
    _, _, grid = _mc_grid(1e9, t_end)
    rates = _moderate_rates(cfg, d_r=1e7, seed_tag="fig4-rates")
    h = spins.build_average_hamiltonian(a_mean, p)
    rho0 = spins.SpinState.nv_plus_mixed_nucleus()
    states = spins.lindblad_evolve(h, rates, p, rho0, grid, method="expm")
    tmin, tmax, radius = _zone(cfg)
    samples = detection.zone_sample_hyperfine(
        g, tmin, tmax, radius, _gamma_n(cfg), 50_000,
        seed=derive_seed(cfg["seed"], "fig4-slow-samples"),
    )
    p_slow, _ = spins.slow_regime_probability(samples, grid, p)
    sink.csv(
        "fig4_analytic.csv",
        ["tau_s", "p_fast", "p_moderate", "p_slow"],
        zip(
            grid,
            spins.fast_transfer_probability(grid, ec),
            [spins.transfer_probability(s) for s in states],
            p_slow,
        ),
    )


def reproduce_fig5(cfg: dict, sink: ArtifactSink, quick: bool) -> None:
    tmin, tmax, radius = _zone(cfg)
    d_r = 2.1e9
    p = stochastic.SphereDiffusionParams(
        d_r=d_r, theta_min=tmin, theta_max=tmax, radius=radius,
        dt=4e-12, seed=derive_seed(cfg["seed"], "fig5"),
    )
    n = 150_000 if quick else 600_000
    series = stochastic.generate_sphere_trajectory(p, n)
    h = stochastic.trajectory_to_hyperfine(series, _geometry(cfg), _gamma_n(cfg), radius=radius)
    stats = stochastic.estimate_stats(h, tau_max=1.2e-9)
    sink.csv("fig5_corr.csv", CORR_HEADER, _corr_rows(stats))
    sink.json("fig5_stats.json", _stats_payload(stats))


def reproduce_fig6(cfg: dict, sink: ArtifactSink, quick: bool) -> None:
    couplings = [700.0] if quick else [700.0, 250.0]
    gamma_grid_hz = np.geomspace(150.0, 6400.0, 6 if quick else 12)
    rows = []
    for j_hz in couplings:
        exp = detection.ExperimentConfig.from_coupling(
            j=hz_to_angular(j_hz), gamma_flip=0.0, contrast=0.05
        )
        for res, gf in zip(
            detection.flip_rate_sweep(exp, hz_to_angular(gamma_grid_hz)),
            gamma_grid_hz,
        ):
            rows.append((j_hz, gf, res.tau_int, res.total_time, res.delta_p))
    sink.csv(
        "fig6_sweep.csv",
        ["j_hz", "gamma_flip_hz", "tau_int_s", "total_time_s", "delta_p"],
        rows,
    )
    _write_coupling_map(cfg, sink, "fig6_map.csv")


def reproduce_fig7(cfg: dict, sink: ArtifactSink, quick: bool) -> None:
    p = stochastic.OUParams(
        eta=np.array([1e13, 1e13, 1e13]),
        d=1e-9,
        equilibrium_offset=np.array([0.0, 0.0, 8e-9]),
        dt=2e-14,
        seed=derive_seed(cfg["seed"], "fig7"),
    )
    n = 300_000 if quick else 1_200_000
    series = stochastic.generate_ou_trajectory(p, n)
    # electron spin label: electron gyromagnetic ratio on the target side
    h = stochastic.trajectory_to_hyperfine(series, _geometry(cfg), GAMMA_E)
    stats = stochastic.estimate_stats(h, tau_max=1e-12)
    sink.csv("fig7_corr.csv", CORR_HEADER, _corr_rows(stats))
    xi = h.a[:, 0] - stats.mean[0]
    density, edges = np.histogram(xi, bins=60, density=True)
    centers = 0.5 * (edges[1:] + edges[:-1])
    sd = float(np.sqrt(stats.covariance[0, 0]))
    gauss = np.exp(-0.5 * (centers / sd) ** 2) / (sd * np.sqrt(2 * np.pi))
    sink.csv(
        "fig7_hist.csv",
        ["ax_fluctuation_rad_s", "density", "gaussian"],
        zip(centers, density, gauss),
    )
    sink.json("fig7_stats.json", _stats_payload(stats))


def cmd_reproduce(cfg: dict, args) -> int:
    target = args.target
    out_dir = Path(cfg["output"]["directory"]) / target
    sink = ArtifactSink(out_dir, f"reproduce {target}", cfg)
    if target == "table1":
        reproduce_table1(cfg, sink, args.quick)
    elif target == "fig3":
        reproduce_fig3(cfg, sink, args.quick, args.workers)
    elif target == "fig4":
        reproduce_fig4(cfg, sink, args.quick)
    elif target == "fig5":
        reproduce_fig5(cfg, sink, args.quick)
    elif target == "fig6":
        reproduce_fig6(cfg, sink, args.quick)
    elif target == "fig7":
        reproduce_fig7(cfg, sink, args.quick)
    else:  # pragma: no cover - argparse restricts choices
        raise ConfigError(f"unknown reproduce target {target!r}")
    sink.finish()
    return 0


# --- entry point ----------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=str, default=None, help="JSON config path")
    common.add_argument(
        "--set", action="append", default=[], metavar="KEY=VALUE",
        help="dotted config override, e.g. --set spins.omega_hz=2e6",
    )
    common.add_argument("--out", type=str, default=None, help="output directory")
    common.add_argument("--seed", type=int, default=None, help="master seed")
    common.add_argument("--workers", type=int, default=1, help="worker processes")

    parser = argparse.ArgumentParser(
        prog="nvmotion",
        description="Simulate and plan NV-center detection of diffusing target spins.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    for name, fn, help_ in [
        ("anm-sim", cmd_anm_sim, "Langevin run on the spring network + statistics"),
        ("trajectory", cmd_trajectory, "generate a stochastic trajectory"),
        ("stats", cmd_stats, "hyperfine statistics of a stochastic trajectory"),
        ("transfer", cmd_transfer, "analytic regime transfer curves"),
        ("montecarlo", cmd_montecarlo, "Monte Carlo transfer curve"),
        ("detect", cmd_detect, "optimise the detection budget"),
        ("coupling-map", cmd_coupling_map, "averaged coupling over NV placements"),
    ]:
        p = sub.add_parser(name, help=help_, parents=[common])
        p.set_defaults(func=fn)
        if name == "montecarlo":
            p.add_argument("--trajectories", type=int, default=100)

    p = sub.add_parser(
        "reproduce", help="write a bundled artifact set", parents=[common]
    )
    p.add_argument(
        "target", choices=["table1", "fig3", "fig4", "fig5", "fig6", "fig7"]
    )
    p.add_argument("--quick", action="store_true", help="reduced-size preset")
    p.set_defaults(func=cmd_reproduce)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        cfg = apply_overrides(cfg, args.set)
        if args.seed is not None:
            cfg["seed"] = args.seed
        if args.out is not None:
            cfg["output"]["directory"] = args.out
        return args.func(cfg, args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except NVMotionError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
