#!/usr/bin/env python3
"""Independent reference values frozen into the C++ tests.

Everything here is recomputed from CODATA constants and numpy/scipy
primitives; nothing is read back from the library.  Run with no arguments
to print the table as JSON.
"""
import json
import math

import numpy as np

C_SI = 299792458.0
H_SI = 6.62607015e-34
KB_SI = 1.380649e-23
AMU = 1.66053906660e-27

C_CM_FS = C_SI * 1e2 * 1e-15
TWO_PI_C = 2 * math.pi * C_CM_FS
KB_CM = KB_SI / (H_SI * C_SI * 1e2)


def rotational_constant(inertia):
    return H_SI / (8 * math.pi**2 * C_SI * 1e2 * inertia * AMU * 1e-20)


def grid_spectrum(n, n_keep, inertia=5.0, a0=15900.0, a1=17500.0, a2=7500.0, veg=1000.0):
    b = rotational_constant(inertia)
    phi = 2 * np.pi * np.arange(n) / n
    k = np.fft.fftfreq(n, 1.0 / n)
    kin = np.real(np.fft.ifft((b * k**2)[:, None] * np.fft.fft(np.eye(n), axis=0), axis=0))
    h = np.zeros((2 * n, 2 * n))
    h[:n, :n] = kin + np.diag(a0 * (1 - np.cos(phi)))
    h[n:, n:] = kin + np.diag(a1 + a2 * np.cos(phi))
    h[:n, n:] = veg * np.eye(n)
    h[n:, :n] = veg * np.eye(n)
    lam, vec = np.linalg.eigh(h)
    return lam[:n_keep], vec[:, :n_keep], phi


def classify(lam, vec, phi, a0=15900.0, a1=17500.0, a2=7500.0, veg=1000.0):
    n = len(phi)
    g, e = vec[:n], vec[n:]
    lower = []
    for p in phi:
        w, v = np.linalg.eigh([[a0 * (1 - math.cos(p)), veg], [veg, a1 + a2 * math.cos(p)]])
        lower.append(v[:, 0])
    lower = np.array(lower)
    weight = ((lower[:, 0][:, None] * g + lower[:, 1][:, None] * e) ** 2).sum(0)
    cosq = (np.cos(phi)[:, None] * (g**2 + e**2)).sum(0)
    trans = [i for i in range(len(lam)) if weight[i] > 0.5 and cosq[i] > 0][:49]
    cis = [i for i in range(len(lam)) if weight[i] > 0.5 and cosq[i] < 0][:23]
    return trans, cis


def field_peak(amplitude=5.0, omega0=25000.0, domega=200.0):
    f = 24800.0 + 3.125 * np.arange(128)
    return float(np.sum(amplitude * np.exp(-(((f - omega0) / (2 * domega)) ** 2))))


def unmodulated_area(dt=0.01, t_end=20000.0, t0=2000.0, width=2000.0, mu=10.0):
    f = 24800.0 + 3.125 * np.arange(128)
    amp = 5.0 * np.exp(-(((f - 25000.0) / 400.0) ** 2))
    w = f * TWO_PI_C
    total = 0.0
    n = int(round(t_end / dt)) + 1
    chunk = 200000
    for s in range(0, n, chunk):
        t = dt * np.arange(s, min(n, s + chunk))
        e = np.exp(-(((t - t0) / (2 * width)) ** 2)) * (amp[None, :] * np.cos(np.outer(t - t0, w))).sum(1)
        a = np.abs(e)
        total += a.sum()
        if s == 0:
            total -= 0.5 * a[0]
        if s + chunk >= n:
            total -= 0.5 * a[-1]
    debye_mvm = (1e-21 / C_SI) * 1e6 / (H_SI * C_SI * 1e2)
    hbar = 1.0 / TWO_PI_C
    return mu * debye_mvm * total * dt / hbar


def main():
    kt = KB_CM * 300.0
    lam512, _, _ = grid_spectrum(512, 200)
    lam256, vec256, phi256 = grid_spectrum(256, 200)
    trans, cis = classify(lam256, vec256, phi256)
    gibbs = np.exp(-(lam256 - lam256[0]) / kt)
    gibbs /= gibbs.sum()
    out = {
        "rad_per_fs_per_wavenumber": TWO_PI_C,
        "hbar_wavenumber_fs": 1.0 / TWO_PI_C,
        "kT_300K_wavenumber": kt,
        "J_at_omega_c": 5 * 450 / math.e,
        "W0_per_fs": 5 * kt * TWO_PI_C,
        "two_level_ratio_1000": math.exp(1000.0 / kt),
        "rotational_constant_5amuA2": rotational_constant(5.0),
        "lambda0_grid512": float(lam512[0]),
        "lambda199_grid512": float(lam512[199]),
        "max_grid_shift_200": float(np.max(np.abs(lam512 - lam256))),
        "harmonic_half_quantum": 0.5 * math.sqrt(2 * 15900.0 * rotational_constant(5.0)),
        "first_cis_index": int(cis[0]),
        "last_trans_index": int(trans[-1]),
        "gibbs_cis_300K": float(gibbs[cis].sum()),
        "aligned_peak_field": field_peak(),
        "unmodulated_area_dt0.01": unmodulated_area(),
    }
    print(json.dumps(out, indent=1))


if __name__ == "__main__":
    main()
