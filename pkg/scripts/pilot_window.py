import time
import numpy as np
import atomlight as al
from atomlight import observables
from atomlight.cumulant.driver import steady_state_hierarchy
from atomlight.integrate import StepControl, SteadyCriterion

TRAP = 940/780; WAIST = 3300/780; SRHO = 300/780
dets = np.linspace(-4, 4, 17)
ctl = StepControl(method="rk45", rtol=1e-5, atol=1e-9, t_max=100)
crit = SteadyCriterion(window=1.0, rel_tol=2e-5)
curves = []
for seed in range(3):
    arr = al.build_standing_wave_array(seed=seed, n_sites=200, fill_probability=0.5,
        trap_wavelength_ratio=TRAP, waist=WAIST, sigma_rho=SRHO,
        transition=al.TransitionKind.DELTA_MPM1)
    cpl = al.coupling_set(arr)
    n = arr.n_atoms
    mean_e = lambda vec: np.array([np.mean(vec[1:3*n:3].real)])
    state = None; exc = []
    t0 = time.time()
    for d in dets:
        drv = al.plane_wave_drive(arr, 2.0, [0,0,1], d)
        st, _ = steady_state_hierarchy(drv, cpl, 2, state0=state, control=ctl,
                                       criterion=crit, backend="numpy", tracked=mean_e)
        state = st
        exc.append(float(np.mean(st.singles[:,1].real)))
    curves.append(exc)
    print(f"seed {seed} N={n} [{time.time()-t0:.0f}s]", flush=True)
mean_curve = np.mean(curves, axis=0)
np.save("/tmp/shift_curves.npy", np.array(curves))
for lo, hi in ((-2,2), (-3,3), (-4,4)):
    m = (dets >= lo) & (dets <= hi)
    fit = observables.lorentzian_fit(dets[m], mean_curve[m])
    print(f"window [{lo},{hi}]: center {fit.center:+.4f} width {fit.width:.3f} rms {fit.residual_rms:.2e}")
