"""Gaussian second-moment description of one fiber spool under pulsed pumping.

Four-wave mixing converts pump photon pairs into Stokes (signal) and
anti-Stokes (idler) photons; spontaneous Raman scattering off the thermal
phonon bath adds phase-insensitive background in both bands.  The state of
each spool is zero-mean Gaussian and fully described by the normal moments
N = <a^dag a> and anomalous moments M = <a a> over the two bands.

Moments are stored in the discrete normalization: with mode operators
a_m = a(w_m) sqrt(dw/2pi), N[m,m] is the photon occupation of grid cell m
and trace(N) is the photon number in the band.

The pair-production term is evaluated per Schmidt pair of the joint
spectral amplitude as an exact two-mode squeezer (sinh/cosh kernels), which
preserves the output commutators identically; the Raman term is linear in
the bath operators with thermal occupation n_T.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from importlib import resources

import numpy as np
from scipy.constants import hbar, k as k_B

from .grids import TWO_PI, FrequencyGrid

THERMAL_OCCUPATION_CAP = 1e12
PUMP_CONTAINMENT = 0.999
MAX_MODE_OCCUPATION = 0.5
MAX_PAIR_PROBABILITY = 0.2

RIGHT, LEFT = "right", "left"
STOKES, ANTISTOKES = "stokes", "antistokes"


class SourceModelError(ValueError):
    """Raised for invalid pump, gain, or grid configurations."""


# ---------------------------------------------------------------------------
# pump
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PumpPulse:
    """Pump spectral amplitude A_p(w) on a grid, in sqrt(J*s).

    Normalized so that 2*pi * sum |A_p|^2 dw equals the pulse energy.
    """

    grid: FrequencyGrid
    amplitude: np.ndarray
    shape: str
    duration: float  # intensity FWHM in seconds

    @property
    def energy(self):
        return TWO_PI * self.grid.integrate(np.abs(self.amplitude) ** 2)

    @property
    def center(self):
        return self.grid.center


def _carved_field_envelope(t, duration, rise):
    """Field amplitude of a carved pulse: flat top, cosine edges.

    The intensity is a Tukey window of FWHM `duration`; the field is its
    square root, i.e. cos(pi u / 2) over each edge of width `rise`.
    """
    flat = duration - rise
    at = np.abs(t)
    f = np.zeros_like(at)
    f[at <= flat / 2] = 1.0
    edge = (at > flat / 2) & (at <= flat / 2 + rise)
    f[edge] = np.cos(np.pi * (at[edge] - flat / 2) / (2 * rise))
    return f


def pump_spectrum(shape, params, energy, grid):
    """Sample a transform-limited pump spectrum and normalize to `energy`.

    shape: ``cw_carved_rect`` (params: duration, optional rise_time),
    ``transform_limited_gaussian`` (params: power_fwhm, rad/s), or
    ``sampled`` (params: omega, amplitude).  Rejects grids holding less
    than 99.9% of the pulse energy.
    """
    if not energy > 0:
        raise SourceModelError("pump energy must be positive")
    w = grid.points
    wc = grid.center
    if shape == "cw_carved_rect":
        T = params["duration"]
        rise = params.get("rise_time", 0.0)
        if not 0 <= rise < T:
            raise SourceModelError("rise_time must satisfy 0 <= rise < duration")
        if rise == 0.0:
            amp = T * np.sinc((w - wc) * T / 2 / np.pi)
            total_time = T  # integral |f|^2 dt of the unit rectangle
        else:
            # FFT of the field envelope on the time lattice dual to the grid
            window = TWO_PI / grid.spacing
            n_fft = 1
            while n_fft < max(4 * grid.n_points, 16 * window / min(rise, T)):
                n_fft *= 2
            dt = window / n_fft
            t = (np.arange(n_fft) - n_fft // 2) * dt
            if t[-1] < 0.75 * T:
                raise SourceModelError("grid spacing too coarse to hold this pulse in time")
            f = _carved_field_envelope(t, T, rise)
            spec = np.fft.fftshift(np.fft.fft(np.fft.ifftshift(f))) * dt
            freqs = np.fft.fftshift(np.fft.fftfreq(n_fft, d=dt)) * TWO_PI
            amp = np.interp(w - wc, freqs, spec.real) + 1j * np.interp(w - wc, freqs, spec.imag)
            total_time = np.sum(f**2) * dt
        duration = T
    elif shape == "transform_limited_gaussian":
        fw = params["power_fwhm"]
        if not fw > 0:
            raise SourceModelError("power_fwhm must be positive")
        amp = np.exp(-2 * np.log(2) * ((w - wc) / fw) ** 2)
        # time-bandwidth product of a transform-limited gaussian
        duration = 2 * np.log(2) / np.pi / (fw / TWO_PI)
        total_time = None
    elif shape == "sampled":
        omega = np.asarray(params["omega"], float)
        values = np.asarray(params["amplitude"], complex)
        amp = np.interp(w, omega, values.real) + 1j * np.interp(w, omega, values.imag)
        duration = params.get("duration", 0.0)
        total_time = None
    else:
        raise SourceModelError(f"unknown pump shape {shape!r}")

    amp = np.asarray(amp, dtype=complex)
    sampled = grid.integrate(np.abs(amp) ** 2)
    if total_time is not None:
        # Parseval: integral |A|^2 dw = 2 pi * integral |f|^2 dt
        fraction = sampled / (TWO_PI * total_time)
    elif shape == "transform_limited_gaussian":
        # analytic Gaussian tail outside the grid; |A|^2 has std fw/(2 sqrt(2 ln 2))
        from scipy.special import erf
        sig_pow = fw / (2 * np.sqrt(2 * np.log(2)))
        fraction = float(erf(grid.span / 2 / (np.sqrt(2) * sig_pow)))
    else:
        fraction = 1.0
    if fraction < PUMP_CONTAINMENT:
        missing = max(1e-12, 1.0 - fraction)
        needed = grid.span * max(2.0, np.sqrt(missing / (1.0 - PUMP_CONTAINMENT)))
        raise SourceModelError(
            f"grid holds only {fraction:.4%} of the pump energy "
            f"(needs >= {PUMP_CONTAINMENT:.1%}); widen the pump grid span "
            f"to roughly {needed:.3e} rad/s")
    amp *= np.sqrt(energy / (TWO_PI * sampled))
    return PumpPulse(grid=grid, amplitude=amp, shape=shape, duration=duration)


# ---------------------------------------------------------------------------
# Raman gain and thermal occupation
# ---------------------------------------------------------------------------

def thermal_occupation(detuning, temperature):
    """Phonon-bath occupation entering the Raman noise.

    Returns 1/(exp(hbar |nu| / k_B T) - 1) + theta(-nu): red (Stokes)
    detunings nu < 0 carry the +1 spontaneous term.  The nu = 0 divergence
    is capped at 1e12.
    """
    if not temperature > 0:
        raise SourceModelError("temperature must be positive")
    nu = np.asarray(detuning, dtype=float)
    x = hbar * np.abs(nu) / (k_B * temperature)
    with np.errstate(divide="ignore", over="ignore"):
        n = 1.0 / np.expm1(x)
    capped = ~np.isfinite(n) | (n > THERMAL_OCCUPATION_CAP)
    if np.any(capped):
        warnings.warn("thermal occupation capped at 1e12 near zero detuning",
                      RuntimeWarning, stacklevel=2)
        n = np.where(capped, THERMAL_OCCUPATION_CAP, n)
    return n + (nu < 0)


@dataclass(frozen=True)
class RamanGain:
    """Tabulated gain g(|nu|) >= 0 in 1/(W*m); linear interpolation inside
    the table, zero outside (with a warning), symmetric in the detuning sign."""

    detuning: np.ndarray  # rad/s, ascending, non-negative
    gain: np.ndarray      # 1/(W*m)
    scale: float = 1.0

    def __post_init__(self):
        if np.any(np.asarray(self.gain) < 0):
            raise SourceModelError("Raman gain must be non-negative")

    def __call__(self, nu):
        a = np.abs(np.asarray(nu, dtype=float))
        if np.any(a > self.detuning[-1] + 1e-6 * self.detuning[-1]):
            warnings.warn("Raman gain queried outside the tabulated range; using 0",
                          RuntimeWarning, stacklevel=2)
        return self.scale * np.interp(a, self.detuning, self.gain, left=self.gain[0], right=0.0)

    def rescaled(self, factor):
        return RamanGain(detuning=self.detuning, gain=self.gain, scale=self.scale * factor)


def load_raman_gain(path, scale=1.0):
    """Read a 'detuning_THz gain_per_W_m' file ('#' comments allowed)."""
    nu, g = [], []
    with open(path) as fh:
        for line in fh:
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            cols = line.split()
            if len(cols) != 2:
                raise SourceModelError(f"bad row in Raman gain file {path!r}: {line!r}")
            nu.append(float(cols[0]))
            g.append(float(cols[1]))
    if len(nu) < 2:
        raise SourceModelError("Raman gain table needs at least two rows")
    nu = np.asarray(nu) * TWO_PI * 1e12
    g = np.asarray(g)
    order = np.argsort(nu)
    return RamanGain(detuning=nu[order], gain=g[order], scale=scale)


def default_raman_gain(scale=1.0):
    """The bundled silica-like gain curve."""
    with resources.as_file(resources.files("homsim.data") / "raman_silica.txt") as p:
        return load_raman_gain(p, scale=scale)


@dataclass(frozen=True)
class SourceParams:
    """Fiber spool parameters shared by both spools."""

    gamma: float            # SFWM coefficient, 1/(W*m)
    length: float           # effective spool length, m
    temperature: float      # phonon bath, K
    raman_gain: RamanGain
    pump_center: float      # rad/s
    stokes_center: float
    antistokes_center: float

    def __post_init__(self):
        if not self.length > 0:
            raise SourceModelError("length must be positive")
        if not self.temperature > 0:
            raise SourceModelError("temperature must be positive")

    @property
    def gamma_length(self):
        return self.gamma * self.length

    def check_energy_conservation(self, spacing):
        gap = abs(self.stokes_center + self.antistokes_center - 2 * self.pump_center)
        if gap > spacing * (1 + 1e-9):
            raise SourceModelError(
                f"band centers violate energy conservation by {gap:.3e} rad/s "
                f"(> one grid spacing {spacing:.3e})")


# ---------------------------------------------------------------------------
# FWM and Raman moment blocks
# ---------------------------------------------------------------------------

def fwm_joint_amplitude(pump, gamma_length, grid_s, grid_a):
    """Joint spectral amplitude JSA(w_s, w_a) = i * gammaL * Phi(w_s + w_a),
    with Phi the discrete pump autoconvolution, in seconds (continuum units)."""
    for g in (grid_s, grid_a):
        if not pump.grid.compatible(g):
            raise SourceModelError("signal, idler and pump grids must share one spacing")
        if not pump.grid.aligned_with(g):
            raise SourceModelError("signal/idler grids are not on the pump lattice")
    d = pump.grid.spacing
    phi = np.convolve(pump.amplitude, pump.amplitude) * d
    n_p = pump.grid.n_points
    om0 = 2 * pump.grid.center - (n_p - 1) * d
    total = grid_s.points[:, None] + grid_a.points[None, :]
    idx = np.rint((total - om0) / d).astype(int)
    inside = (idx >= 0) & (idx < len(phi))
    jsa = np.zeros(total.shape, dtype=complex)
    jsa[inside] = phi[idx[inside]]
    return 1j * gamma_length * jsa


def _pump_shift_matrix(band_grid, pump):
    """Ash[m, k] = A_p(w_m - nu_k) on the common lattice, with the detuning
    lattice nu_k covering every difference between band and pump samples."""
    d = band_grid.spacing
    nb, n_p = band_grid.n_points, pump.grid.n_points
    n_nu = nb + n_p - 1
    nu = (band_grid.points[0] - pump.grid.points[-1]) + np.arange(n_nu) * d
    m = np.arange(nb)[:, None]
    k = np.arange(n_nu)[None, :]
    j = m - k + n_p - 1
    ok = (j >= 0) & (j < n_p)
    ash = np.zeros((nb, n_nu), dtype=complex)
    ash[ok] = pump.amplitude[j[ok]]
    return ash, nu


def raman_moments(pump, params, grid, band):
    """Hermitian PSD Raman occupation block for one band (discrete units).

    N[m,n] = L dw dnu sum_k g(nu_k) n_T(nu_k) conj(A_p(w_m - nu_k)) A_p(w_n - nu_k),
    with the detuning measured from the pump carrier.
    """
    if band not in (STOKES, ANTISTOKES):
        raise SourceModelError(f"unknown band {band!r}")
    d = grid.spacing
    ash, nu = _pump_shift_matrix(grid, pump)
    gain = params.raman_gain(nu)
    weight = np.zeros_like(gain)
    # the |nu| < dw/2 cell is elastic (pump) scattering, not Raman
    active = (gain > 0) & (np.abs(nu) >= 0.5 * d)
    weight[active] = gain[active] * thermal_occupation(nu[active], params.temperature)
    block = (ash.conj() * weight[None, :]) @ ash.T * (params.length * d * d)
    return 0.5 * (block + block.conj().T)


# ---------------------------------------------------------------------------
# assembled state
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GaussianMoments:
    """Normal and anomalous moments over (spool, band) registers.

    Blocks are stored sparsely: `normal[(k1, k2)]` holds <a_k1^dag a_k2>
    and `anomalous[(k1, k2)]` holds <a_k1 a_k2> for the register pairs that
    are nonzero; absent pairs are zero (cross-spool correlations vanish for
    independently pumped spools).  All blocks use the discrete
    normalization, so diagonal traces are photon numbers per pulse.
    """

    registers: tuple
    grids: dict
    normal: dict
    anomalous: dict
    fwm_normal: dict = field(default_factory=dict)
    raman_normal: dict = field(default_factory=dict)

    def normal_block(self, k1, k2):
        if (k1, k2) in self.normal:
            return self.normal[(k1, k2)]
        if (k2, k1) in self.normal:
            return self.normal[(k2, k1)].conj().T
        n1 = self.grids[k1[1]].n_points
        n2 = self.grids[k2[1]].n_points
        return np.zeros((n1, n2), dtype=complex)

    def anomalous_block(self, k1, k2):
        if (k1, k2) in self.anomalous:
            return self.anomalous[(k1, k2)]
        if (k2, k1) in self.anomalous:
            return self.anomalous[(k2, k1)].T
        n1 = self.grids[k1[1]].n_points
        n2 = self.grids[k2[1]].n_points
        return np.zeros((n1, n2), dtype=complex)

    def photon_number(self, key):
        return float(np.real(np.trace(self.normal_block(key, key))))

    def spool_physicality_min_eig(self, spool):
        """Smallest eigenvalue of [[N, conj(M)], [M, N^T + I]] for one spool."""
        ks, ka = (spool, STOKES), (spool, ANTISTOKES)
        ns = self.normal_block(ks, ks)
        na = self.normal_block(ka, ka)
        m = self.anomalous_block(ks, ka)
        n1, n2 = ns.shape[0], na.shape[0]
        N = np.zeros((n1 + n2, n1 + n2), dtype=complex)
        N[:n1, :n1] = ns
        N[n1:, n1:] = na
        M = np.zeros_like(N)
        M[:n1, n1:] = m
        M[n1:, :n1] = m.T
        top = np.hstack([N, M.conj()])
        bot = np.hstack([M, N.T + np.eye(n1 + n2)])
        dbl = np.vstack([top, bot])
        dbl = 0.5 * (dbl + dbl.conj().T)
        return float(np.linalg.eigvalsh(dbl)[0])


def _bogoliubov_blocks(jsa_discrete):
    """Exact two-mode-squeezer moments from the discrete pair amplitude.

    The Schmidt pairs of the (first-order) pair amplitude are squeezed with
    parameters r_k equal to its singular values, giving M = U sinh r cosh r V
    and N = conj(U) sinh^2 r U^T on the Stokes side (V^dag ... V on the
    anti-Stokes side).  Reduces to N ~ J J^dag, M ~ J at small gain.
    """
    u, s, vt = np.linalg.svd(jsa_discrete, full_matrices=False)
    rank = int(np.sum(s > 1e-12 * s[0])) if s.size and s[0] > 0 else 0
    u, s, vt = u[:, :rank], s[:rank], vt[:rank]
    sh, ch = np.sinh(s), np.cosh(s)
    m_block = (u * (sh * ch)[None, :]) @ vt
    n_s = (u.conj() * (sh**2)[None, :]) @ u.T
    n_a = (vt.conj().T * (sh**2)[None, :]) @ vt
    return n_s, n_a, m_block, (u, s, vt)


def source_moments(pump, params, grids):
    """Full two-spool Gaussian state (identical, independent spools).

    `grids` maps band name to FrequencyGrid.  Registers are ordered
    (right, stokes), (right, antistokes), (left, stokes), (left, antistokes).
    """
    grid_s, grid_a = grids[STOKES], grids[ANTISTOKES]
    params.check_energy_conservation(grid_s.spacing)
    jsa = fwm_joint_amplitude(pump, params.gamma_length, grid_s, grid_a)
    n_s_fwm, n_a_fwm, m_block, (_, sing, _) = _bogoliubov_blocks(jsa * grid_s.spacing)
    peak = float(np.sinh(sing[0]) ** 2) if len(sing) else 0.0
    if peak > MAX_MODE_OCCUPATION:
        raise SourceModelError(
            f"leading pair-mode occupation {peak:.3f} exceeds "
            f"{MAX_MODE_OCCUPATION}; gain too high for a perturbative pair source")
    r_s = raman_moments(pump, params, grid_s, STOKES)
    r_a = raman_moments(pump, params, grid_a, ANTISTOKES)
    registers = tuple((spool, band) for spool in (RIGHT, LEFT)
                      for band in (STOKES, ANTISTOKES))
    normal, anomalous, fwm, raman = {}, {}, {}, {}
    for spool in (RIGHT, LEFT):
        ks, ka = (spool, STOKES), (spool, ANTISTOKES)
        normal[(ks, ks)] = n_s_fwm + r_s
        normal[(ka, ka)] = n_a_fwm + r_a
        anomalous[(ks, ka)] = m_block
        fwm[ks] = n_s_fwm
        fwm[ka] = n_a_fwm
        raman[ks] = r_s
        raman[ka] = r_a
    return GaussianMoments(registers=registers, grids=dict(grids),
                           normal=normal, anomalous=anomalous,
                           fwm_normal=fwm, raman_normal=raman)


def pair_production_probability(moments, band_filter):
    """Mean FWM photon number per pulse in the filtered Stokes band
    (Raman photons are excluded: they are not paired emission)."""
    key = (RIGHT, STOKES)
    if key not in moments.fwm_normal:
        return 0.0
    n_fwm = moments.fwm_normal[key]
    h2 = np.abs(band_filter.amplitude) ** 2
    return float(np.real(np.sum(h2 * np.diag(n_fwm))))


def calibrate_gain(target_pair_prob, pump, params, band_filter, grids,
                   rtol=1e-6):
    """Bisection on gamma*L until the filtered pair probability matches.

    The forward model is monotone in gammaL, so the root is unique.
    Returns the calibrated gammaL in 1/W.
    """
    if not 0 <= target_pair_prob < MAX_PAIR_PROBABILITY:
        raise SourceModelError(
            f"target pair probability {target_pair_prob} outside the "
            f"perturbative range [0, {MAX_PAIR_PROBABILITY})")
    if target_pair_prob == 0.0:
        return 0.0
    grid_s, grid_a = grids[STOKES], grids[ANTISTOKES]
    base = fwm_joint_amplitude(pump, 1.0, grid_s, grid_a) * grid_s.spacing
    u, s, _ = np.linalg.svd(base, full_matrices=False)
    s = s[s > 1e-12 * s[0]]
    u = u[:, :len(s)]
    h2 = np.abs(band_filter.amplitude) ** 2
    mode_weight = h2 @ (np.abs(u) ** 2)  # filtered weight of each Schmidt mode

    def filtered_pairs(gl):
        return float(np.sum(np.sinh(gl * s) ** 2 * mode_weight))

    lo, hi = 0.0, 1.0 / s[0]
    while filtered_pairs(hi) < target_pair_prob:
        hi *= 2.0
        if hi > 1e6 / s[0]:
            raise SourceModelError("calibration failed to bracket the target")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if filtered_pairs(mid) < target_pair_prob:
            lo = mid
        else:
            hi = mid
        if hi - lo <= rtol * hi:
            break
    return 0.5 * (lo + hi)


def commutator_residual(pump, params, grids):
    """Deviation of [a, a^dag] from the identity after the self-consistent
    vacuum-scattering correction, normalized as a spectral norm.

    The squeezer part preserves commutators exactly; the Raman term adds
    its commutator C_r, compensated at leading order by the correction
    alpha = (I + C_r)^(-1/2).  The residual is therefore O(C_r^2).
    """
    grid_s = grids[STOKES]
    d = grid_s.spacing
    ash, nu = _pump_shift_matrix(grid_s, pump)
    c_r = (ash * params.raman_gain(nu)[None, :]) @ ash.conj().T * (params.length * d * d)
    c_r = 0.5 * (c_r + c_r.conj().T)
    n = c_r.shape[0]
    vals, vecs = np.linalg.eigh(c_r)
    inv = (vecs / (1.0 + vals)[None, :]) @ vecs.conj().T
    residual = inv + c_r - np.eye(n)
    return float(np.linalg.norm(residual, 2))
