"""Pilot: collective-shift ensemble statistics (not part of the package)."""
import sys, time
import numpy as np
import atomlight as al
from atomlight import observables
from atomlight.cumulant.driver import steady_state_hierarchy
from atomlight.integrate import StepControl, SteadyCriterion

TRAP = 940/780; WAIST = 3300/780; SRHO = 300/780
n_configs = int(sys.argv[1]) if len(sys.argv) > 1 else 16
rtol = float(sys.argv[2]) if len(sys.argv) > 2 else 1e-5
rel = float(sys.argv[3]) if len(sys.argv) > 3 else 2e-5

dets = np.linspace(-3, 3, 9)
ctl = StepControl(method="rk45", rtol=rtol, atol=1e-9, t_max=100)
crit = SteadyCriterion(window=1.0, rel_tol=rel)

curves = []
t00 = time.time()
for seed in range(n_configs):
    arr = al.build_standing_wave_array(seed=seed, n_sites=200, fill_probability=0.5,
        trap_wavelength_ratio=TRAP, waist=WAIST, sigma_rho=SRHO,
        transition=al.TransitionKind.DELTA_MPM1)
    cpl = al.coupling_set(arr)
    n = arr.n_atoms
    def mean_e(vec):
        return np.array([np.mean(vec[1:3*n:3].real)])
    state = None
    exc = []
    t0 = time.time()
    for d in dets:
        drv = al.plane_wave_drive(arr, 2.0, [0,0,1], d)
        st, tss = steady_state_hierarchy(drv, cpl, 2, state0=state, control=ctl,
                                         criterion=crit, backend="numpy", tracked=mean_e)
        state = st
        exc.append(float(np.mean(st.singles[:,1].real)))
    curves.append(exc)
    fit = observables.lorentzian_fit(dets, np.array(exc))
    print(f"seed {seed:3d} N={n:3d} shift {fit.center:+.4f} [{time.time()-t0:.0f}s]", flush=True)

mean_curve = np.mean(curves, axis=0)
fit = observables.lorentzian_fit(dets, mean_curve)
per = [observables.lorentzian_fit(dets, np.array(c)).center for c in curves]
print(f"ensemble fit: {fit.center:+.4f}  per-config mean {np.mean(per):+.4f} "
      f"std {np.std(per):.4f} SE {np.std(per)/np.sqrt(len(per)):.4f} "
      f"[total {time.time()-t00:.0f}s]")
