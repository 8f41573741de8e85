"""Scenario engine behind the command-line interface.

Each scenario consumes a resolved configuration dictionary (already schema
validated) and returns (tables, metadata): `tables` maps a table name to an
ordered {column_name: 1-d array} mapping, `metadata` is a plain dict.  Column
names carry their unit after the last underscore-separated tag; complex
quantities are split into paired _re/_im columns by the CSV writer.
"""

import time

import numpy as np

from . import exact, observables, twotime
from .core import (AtomArray, DetectionDirection, TransitionKind,
                   build_line_array, build_standing_wave_array,
                   eigenmode_drive, plane_wave_drive)
from .cumulant import initial_all_excited, initial_ground
from .cumulant.driver import (evolve_hierarchy, steady_state_hierarchy)
from .errors import CapabilityError, InvalidArgument
from .integrate import SteadyCriterion, StepControl, evolve
from .kernel import coupling_set

HIERARCHY_ORDERS = {"mf1": 1, "mf2": 2, "mf3": 3, "linear": 1}


def transition_from(config):
    return TransitionKind(config["transition"])


def build_geometry(config, seed=None) -> AtomArray:
    geo = config["geometry"]
    kind = geo["type"]
    if kind == "line":
        return build_line_array(geo["n_atoms"], geo["spacing"],
                                np.asarray(geo["axis"], dtype=float),
                                transition_from(config))
    if kind == "standing-wave":
        return build_standing_wave_array(
            seed=config["seed"] if seed is None else seed,
            n_sites=geo["n_sites"],
            fill_probability=geo["fill_probability"],
            trap_wavelength_ratio=geo["trap_wavelength_ratio"],
            waist=geo["waist"],
            sigma_rho=geo["sigma_rho"],
            transition=transition_from(config),
        )
    raise InvalidArgument(f"unknown geometry type {kind!r}")


def build_drive(config, array, couplings, omega=None, detuning=None):
    drv = config["drive"]
    omega = drv["omega"] if omega is None else omega
    if drv["kind"] == "plane-wave":
        delta = drv.get("detuning", 0.0) if detuning is None else detuning
        return plane_wave_drive(array, omega,
                                np.asarray(drv["direction"], dtype=float), delta)
    if drv["kind"] == "eigenmode":
        modes = observables.eigenmodes(couplings)
        return eigenmode_drive(array, modes.mode(drv["mode_index"]), omega)
    raise InvalidArgument(f"unknown drive kind {drv['kind']!r}")


def build_controls(config):
    integ = config.get("integrator", {})
    control = StepControl(
        method=integ.get("method", "rk45"),
        dt=integ.get("dt", 1e-3),
        rtol=integ.get("rtol", 1e-9),
        atol=integ.get("atol", 1e-12),
        t_max=integ.get("t_max", 200.0),
    )
    st = config.get("steady", {})
    criterion = SteadyCriterion(window=st.get("window", 1.0),
                                rel_tol=st.get("rel_tol", 1e-8))
    return control, criterion


def check_capabilities(config, n_atoms):
    solver = config["solver"]
    if solver == "exact" and n_atoms > exact.MAX_ATOMS:
        raise CapabilityError(
            f"exact solver capped at N = {exact.MAX_ATOMS}, geometry has {n_atoms}")
    if config["scenario"] == "g2" and solver not in ("exact", "mf2", "mf3"):
        raise CapabilityError("g2 needs pair correlations: solver exact, mf2 or mf3")


def detection_directions(config, array):
    angles = config.get("detection", {}).get("angles_pi", [0.0])
    dets = []
    for a in angles:
        khat = [np.cos(np.pi * a), np.sin(np.pi * a), 0.0]
        dets.append((a, DetectionDirection.from_array(array, khat)))
    return dets


def _steady_for(config, solver, array, couplings, drive, control, criterion,
                backend="auto", tracked=None):
    if solver == "exact":
        rho, t = exact.steady_state(array, drive, couplings=couplings,
                                    control=control, criterion=criterion)
        return rho, t
    order = HIERARCHY_ORDERS[solver]
    return steady_state_hierarchy(drive, couplings, order,
                                  linear=(solver == "linear"), control=control,
                                  criterion=criterion, backend=backend,
                                  tracked=tracked)


def run_dicke_decay(config):
    array = build_geometry(config)
    couplings = coupling_set(array)
    check_capabilities(config, array.n_atoms)
    solver = config["solver"]
    control, _ = build_controls(config)
    tgrid = np.linspace(0.0, config["time"]["max"], config["time"]["points"])
    drive = build_drive(config, array, couplings, omega=0.0)
    t0 = time.time()
    if solver == "exact":
        system = exact.ExactSystem(drive, couplings)
        _, states = evolve(exact.DensityMatrix.all_excited(array.n_atoms).data,
                           system.rhs, control, (0.0, tgrid[-1]), record_grid=tgrid)
    else:
        order = HIERARCHY_ORDERS[solver]
        state0 = initial_all_excited(array.n_atoms, order)
        _, states = evolve_hierarchy(state0, drive, couplings,
                                     t_span=(0.0, tgrid[-1]), record_grid=tgrid,
                                     control=control)
    gamma = np.array([observables.scattering_rates(s, couplings).gamma_total
                      for s in states])
    tables = {"decay": {"time_invgamma": tgrid, "gamma_total_gamma": gamma}}
    meta = {"elapsed_s": time.time() - t0, "n_atoms": array.n_atoms}
    return tables, meta


def run_normal_mode(config, omega=None):
    array = build_geometry(config)
    couplings = coupling_set(array)
    check_capabilities(config, array.n_atoms)
    solver = config["solver"]
    control, criterion = build_controls(config)
    drive = build_drive(config, array, couplings, omega=omega)
    t0 = time.time()
    state, t_steady = _steady_for(config, solver, array, couplings, drive,
                                  control, criterion)
    rates = observables.scattering_rates(state, couplings)
    lin_state, _ = steady_state_hierarchy(drive, couplings, 1, linear=True,
                                          control=control, criterion=criterion)
    dgc = observables.delta_gamma_c(state, lin_state, couplings)
    omega_val = config["drive"]["omega"] if omega is None else omega
    tables = {"rates": {
        "intensity_sat": np.array([2.0 * omega_val**2]),
        "gamma_total_gamma": np.array([rates.gamma_total]),
        "gamma_coherent_gamma": np.array([rates.gamma_coherent]),
        "gamma_incoherent_gamma": np.array([rates.gamma_incoherent]),
        "delta_gamma_c": np.array([dgc]),
        "gamma_i_over_gamma_c": np.array([rates.gamma_incoherent
                                          / rates.gamma_coherent]),
    }}
    meta = {"elapsed_s": time.time() - t0, "t_steady": t_steady,
            "n_atoms": array.n_atoms}
    return tables, meta


def run_g2(config):
    array = build_geometry(config)
    couplings = coupling_set(array)
    check_capabilities(config, array.n_atoms)
    solver = config["solver"]
    control, criterion = build_controls(config)
    drive = build_drive(config, array, couplings)
    tau = np.linspace(0.0, config["tau"]["max"], config["tau"]["points"])
    dets = detection_directions(config, array)
    t0 = time.time()
    if solver == "exact":
        steady, t_steady = exact.steady_state(array, drive, couplings=couplings,
                                              control=control, criterion=criterion)
        intensities = [exact.detector_expectation(steady, d) for _, d in dets]
        results = [exact.g2_exact(array, drive, d, tau, couplings=couplings,
                                  control=control, rho_steady=steady,
                                  t_steady=t_steady) for _, d in dets]
    else:
        order = HIERARCHY_ORDERS[solver]
        steady, t_steady = steady_state_hierarchy(drive, couplings, order,
                                                  control=control,
                                                  criterion=criterion)
        intensities = [twotime.detector_value(steady, d) for _, d in dets]
        results = [twotime.g2_hierarchy(array, drive, couplings, d, order, tau,
                                        control=control, steady=steady,
                                        t_steady=t_steady) for _, d in dets]
    g2_table = {"tau_invgamma": tau}
    for (a, _), res in zip(dets, results):
        g2_table[f"g2_theta_{a:g}pi"] = res.values
    tables = {
        "g2": g2_table,
        "intensity": {
            "theta_pi": np.array([a for a, _ in dets]),
            "intensity_gamma": np.array(intensities),
        },
    }
    meta = {
        "elapsed_s": time.time() - t0,
        "t_steady": t_steady,
        "n_atoms": array.n_atoms,
        "diagnostics": {
            f"theta_{a:g}pi": dict(res.diagnostics, norm=res.norm)
            for (a, _), res in zip(dets, results)
        },
    }
    return tables, meta


def run_collective_shift(config, seed=None, detunings=None):
    """One seeded configuration: steady mean excitation per detuning."""
    array = build_geometry(config, seed=seed)
    couplings = coupling_set(array)
    check_capabilities(config, array.n_atoms)
    solver = config["solver"]
    control, criterion = build_controls(config)
    if detunings is None:
        detunings = np.asarray(config["sweep"]["values"], dtype=float)
    n = array.n_atoms

    def mean_e(vec):
        return np.array([np.mean(vec[1:3 * n:3].real)])

    t0 = time.time()
    exc = []
    state = None
    for delta in detunings:
        drive = build_drive(config, array, couplings, detuning=float(delta))
        if solver == "exact":
            state, _ = exact.steady_state(array, drive, couplings=couplings,
                                          control=control, criterion=criterion,
                                          rho0=state)
            e_vals = observables.singles_vector(state, 0, n).real
        else:
            order = HIERARCHY_ORDERS[solver]
            state, _ = steady_state_hierarchy(
                drive, couplings, order, state0=state, control=control,
                criterion=criterion, tracked=mean_e)
            e_vals = state.singles[:, 1].real
        exc.append(float(np.mean(e_vals)))
    tables = {"shift": {"detuning_gamma": np.asarray(detunings, dtype=float),
                        "mean_excitation": np.array(exc)}}
    meta = {"elapsed_s": time.time() - t0, "n_atoms": n,
            "seed": config["seed"] if seed is None else seed}
    return tables, meta


SCENARIOS = {
    "dicke-decay": run_dicke_decay,
    "normal-mode": run_normal_mode,
    "g2": run_g2,
    "collective-shift": run_collective_shift,
}


def run_scenario(config):
    scenario = config["scenario"]
    if scenario not in SCENARIOS:
        raise InvalidArgument(f"unknown scenario {scenario!r}")
    return SCENARIOS[scenario](config)
