"""Scenario assembly, delay scans, visibility fits, and expected counts.

A scenario bundles the pump, the fiber-source parameters, the per-arm
gate+filter chains, and the four detectors.  The built-in presets encode
the two published configurations of the experiment this simulator models:

``multimode``
    CW-carved 100 ps pump (30 ps rise), grating-like Gaussian filters of
    24.6 GHz FWHM on all arms (B*T/4 = 3.9), pair probability 12.5% per
    pulse, arm transmissions 3.4% / 5.0%, detector quantum efficiency 20%,
    dark probability 1.6e-4, 2e10 pulses.

``single_mode``
    Mode-locked Gaussian pump (68.3 GHz power FWHM, 6.4 ps), flat-top
    0.4 nm filters (69.9 GHz at 1310 nm, B*T/4 = 0.70), pair probability
    3.9%, transmissions 5.5% / 7.0%, 1e10 pulses.

Quantities the underlying experiment left unstated are set here and
documented in the README: the pump pulse energies (75 pJ / 2 pJ), the
+-1.2 THz signal/idler detunings, the bundled silica Raman-gain curve, and
the flux calibration of the measured arm transmissions (they are read as
Klyshko-style photon-flux transmissions, so the model divides out the
chain's conditioned transmission and the signal arms' 50:50 coupler split
before applying its own projection).
"""

from __future__ import annotations

import configparser
import io
import warnings
from dataclasses import dataclass
from functools import cached_property
from importlib import resources

import numpy as np
from scipy.optimize import curve_fit

from .detection import coincidence_probability, singles_probability
from .grids import TWO_PI, FrequencyGrid, angular_from_nm
from .modes import (
    DEFAULT_GRID_POINTS,
    DEFAULT_SPAN_FACTOR,
    GateProfile,
    build_kernel,
    make_profile,
    schmidt_decompose,
)
from .network import (
    DetectorModel,
    detection_mode_projection,
    hom_dip_width_estimate,
    spool_view,
)
from .source import (
    ANTISTOKES,
    STOKES,
    SourceParams,
    calibrate_gain,
    default_raman_gain,
    load_raman_gain,
    pump_spectrum,
    source_moments,
)

CSV_HEADER = "tau_ps, p4, p2_ab, p2_acc, pA, pB, pC, pD"
DEFAULT_SCAN_POINTS = 41
DEFAULT_SCAN_HALFWIDTHS = 3.0


class ExperimentError(ValueError):
    """Raised for invalid scenario configurations or unusable scans."""


class FitError(RuntimeError):
    """Raised when a visibility fit cannot be performed."""


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------

_REQUIRED = {
    "scenario": ["label", "pulses"],
    "pump": ["shape", "center_nm", "energy_pj"],
    "source": ["detuning_thz", "length_m", "temperature_k", "pair_probability"],
    "filters": ["signal_shape", "idler_shape"],
    "detectors": ["signal_transmission", "idler_transmission",
                  "quantum_efficiency", "dark_count_probability"],
}

PRESET_NAMES = ("multimode", "single_mode")


def _preset_text(name):
    if name not in PRESET_NAMES:
        raise ExperimentError(f"unknown preset {name!r}; available: {PRESET_NAMES}")
    path = resources.files("homsim.presets") / f"{name}.ini"
    return path.read_text()


def load_scenario(config_text, overrides=None):
    """Parse a scenario from INI-style text (see the shipped preset files).

    `overrides` is an optional list of "section.key=value" strings applied
    after parsing, last one wins.
    """
    cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    try:
        cp.read_string(config_text)
    except configparser.Error as exc:
        raise ExperimentError(f"config parse failure: {exc}") from exc
    for ov in overrides or []:
        if "=" not in ov or "." not in ov.split("=", 1)[0]:
            raise ExperimentError(f"override {ov!r} is not section.key=value")
        target, value = ov.split("=", 1)
        section, key = target.split(".", 1)
        if not cp.has_section(section.strip()):
            cp.add_section(section.strip())
        cp.set(section.strip(), key.strip(), value.strip())
    missing = []
    for section, keys in _REQUIRED.items():
        if not cp.has_section(section):
            missing.extend(f"{section}.{key}" for key in keys)
            continue
        for key in keys:
            if not cp.has_option(section, key):
                missing.append(f"{section}.{key}")
    if missing:
        raise ExperimentError("missing required fields: " + ", ".join(missing))
    return Scenario(config=cp)


def preset_scenario(name, overrides=None):
    return load_scenario(_preset_text(name), overrides=overrides)


def _filter_spec(cp, arm, grid, center):
    shape = cp.get("filters", f"{arm}_shape")
    if shape == "rectangular":
        bw = TWO_PI * 1e9 * cp.getfloat("filters", f"{arm}_bandwidth_ghz")
        return make_profile("rectangular", {"bandwidth": bw, "center": center}, grid)
    if shape == "gaussian":
        bw = TWO_PI * 1e9 * cp.getfloat("filters", f"{arm}_bandwidth_ghz")
        return make_profile("gaussian", {"fwhm": bw, "center": center}, grid)
    if shape == "tabulated":
        files = [f.strip() for f in cp.get("filters", f"{arm}_files").split(",")]
        return make_profile("tabulated", {"files": files}, grid)
    raise ExperimentError(f"unknown filter shape {shape!r}")


@dataclass
class Scenario:
    """Materialized experiment description; heavy pieces build lazily."""

    config: configparser.ConfigParser

    # -- raw accessors ------------------------------------------------
    @property
    def label(self):
        return self.config.get("scenario", "label")

    @property
    def pulses(self):
        return self.config.getfloat("scenario", "pulses")

    @property
    def pump_center(self):
        return angular_from_nm(self.config.getfloat("pump", "center_nm"))

    @property
    def pump_duration(self):
        cp = self.config
        if cp.get("pump", "shape") == "cw_carved_rect":
            return cp.getfloat("pump", "duration_ps") * 1e-12
        fw = TWO_PI * 1e9 * cp.getfloat("pump", "power_fwhm_ghz")
        return 2 * np.log(2) / np.pi / (fw / TWO_PI)

    @property
    def gate_duration(self):
        if self.config.has_option("filters", "gate_duration_ps"):
            return self.config.getfloat("filters", "gate_duration_ps") * 1e-12
        return self.pump_duration

    # -- lattice ------------------------------------------------------
    @cached_property
    def grids(self):
        cp = self.config
        n_points = (cp.getint("filters", "grid_points")
                    if cp.has_option("filters", "grid_points") else DEFAULT_GRID_POINTS)
        span_factor = (cp.getfloat("filters", "grid_span_factor")
                       if cp.has_option("filters", "grid_span_factor")
                       else DEFAULT_SPAN_FACTOR)
        bw = TWO_PI * 1e9 * cp.getfloat("filters", "signal_bandwidth_ghz")
        span = span_factor * bw
        spacing = span / (n_points - 1)
        wp = self.pump_center
        detune = TWO_PI * 1e12 * cp.getfloat("source", "detuning_thz")
        offset = round(detune / spacing) * spacing
        grid_s = FrequencyGrid(center=wp - offset, span=span, n_points=n_points)
        grid_a = FrequencyGrid(center=wp + offset, span=span, n_points=n_points)
        if cp.has_option("pump", "grid_half_span_thz"):
            half = TWO_PI * 1e12 * cp.getfloat("pump", "grid_half_span_thz")
        else:
            half = max(8.0 * span, TWO_PI * 0.5e12)
        n_pump = int(2 * half / spacing) // 2 * 2 + 1
        grid_p = FrequencyGrid(center=wp, span=spacing * (n_pump - 1), n_points=n_pump)
        return {STOKES: grid_s, ANTISTOKES: grid_a, "pump": grid_p}

    @cached_property
    def pump(self):
        cp = self.config
        shape = cp.get("pump", "shape")
        energy = cp.getfloat("pump", "energy_pj") * 1e-12
        if shape == "cw_carved_rect":
            params = {"duration": cp.getfloat("pump", "duration_ps") * 1e-12,
                      "rise_time": (cp.getfloat("pump", "rise_time_ps") * 1e-12
                                    if cp.has_option("pump", "rise_time_ps") else 0.0)}
        elif shape == "transform_limited_gaussian":
            params = {"power_fwhm": TWO_PI * 1e9 * cp.getfloat("pump", "power_fwhm_ghz")}
        else:
            raise ExperimentError(f"unknown pump shape {shape!r}")
        return pump_spectrum(shape, params, energy, self.grids["pump"])

    @cached_property
    def filters(self):
        return {
            "signal": _filter_spec(self.config, "signal", self.grids[STOKES],
                                   self.grids[STOKES].center),
            "idler": _filter_spec(self.config, "idler", self.grids[ANTISTOKES],
                                  self.grids[ANTISTOKES].center),
        }

    @cached_property
    def bases(self):
        gate = GateProfile(duration=self.gate_duration, kind="rectangular")
        basis_s = schmidt_decompose(build_kernel(self.filters["signal"], gate))
        basis_a = schmidt_decompose(build_kernel(self.filters["idler"], gate))
        return {"A": basis_s, "B": basis_s, "C": basis_a, "D": basis_a}

    @cached_property
    def source_params(self):
        cp = self.config
        if cp.has_option("source", "raman_file"):
            gain = load_raman_gain(cp.get("source", "raman_file"))
        else:
            gain = default_raman_gain()
        if cp.has_option("source", "raman_scale"):
            gain = gain.rescaled(cp.getfloat("source", "raman_scale"))
        base = SourceParams(gamma=1e-6,
                            length=cp.getfloat("source", "length_m"),
                            temperature=cp.getfloat("source", "temperature_k"),
                            raman_gain=gain,
                            pump_center=self.pump_center,
                            stokes_center=self.grids[STOKES].center,
                            antistokes_center=self.grids[ANTISTOKES].center)
        target = cp.getfloat("source", "pair_probability")
        gl = calibrate_gain(target, self.pump, base, self.filters["signal"],
                            {k: self.grids[k] for k in (STOKES, ANTISTOKES)})
        return SourceParams(gamma=gl / base.length, length=base.length,
                            temperature=base.temperature, raman_gain=gain,
                            pump_center=base.pump_center,
                            stokes_center=base.stokes_center,
                            antistokes_center=base.antistokes_center)

    @cached_property
    def source(self):
        return source_moments(self.pump, self.source_params,
                              {k: self.grids[k] for k in (STOKES, ANTISTOKES)})

    # -- detectors ------------------------------------------------------
    def _chain_matrices(self):
        def chain(basis):
            k = basis.retained()
            psi = basis.unit_vectors[:, :k]
            return (psi * basis.eigenvalues[:k][None, :]) @ psi.conj().T
        return chain(self.bases["A"]), chain(self.bases["C"])

    @cached_property
    def conditioned_transmissions(self):
        """Klyshko-style chain transmissions: the signal's chain averaged
        over modes heralded through the idler chain, and vice versa."""
        k_s, k_a = self._chain_matrices()
        m = self.source.anomalous_block(("right", STOKES), ("right", ANTISTOKES))
        n_s_cond = m @ k_a.conj() @ m.conj().T
        n_a_cond = m.T @ k_s.conj() @ m.conj()
        chi_s = float(np.real(np.trace(k_s @ n_s_cond)) / np.real(np.trace(n_s_cond)))
        chi_i = float(np.real(np.trace(k_a @ n_a_cond)) / np.real(np.trace(n_a_cond)))
        return chi_s, chi_i

    @cached_property
    def detectors(self):
        cp = self.config
        qe = cp.getfloat("detectors", "quantum_efficiency")
        mu = cp.getfloat("detectors", "dark_count_probability")
        t_s = cp.getfloat("detectors", "signal_transmission")
        t_i = cp.getfloat("detectors", "idler_transmission")
        flux_cal = (cp.getboolean("detectors", "flux_calibration")
                    if cp.has_option("detectors", "flux_calibration") else True)
        if flux_cal:
            chi_s, chi_i = self.conditioned_transmissions
            eta_s = min(1.0, 2.0 * t_s * qe / chi_s)
            eta_i = min(1.0, t_i * qe / chi_i)
        else:
            eta_s = t_s * qe
            eta_i = t_i * qe
        out = []
        for name, eta, basis in (("A", eta_s, self.bases["A"]),
                                 ("B", eta_s, self.bases["B"]),
                                 ("C", eta_i, self.bases["C"]),
                                 ("D", eta_i, self.bases["D"])):
            k = basis.retained()
            out.append(DetectorModel(name=name, efficiency=eta,
                                     mode_weights=basis.eigenvalues[:k],
                                     dark_mean=mu, band=basis.grid))
        return out

    # -- scan plan ------------------------------------------------------
    @cached_property
    def dip_width(self):
        return hom_dip_width_estimate(self.bases["A"], self.pump)

    @cached_property
    def tau_list(self):
        cp = self.config
        points = (cp.getint("scan", "points")
                  if cp.has_option("scan", "points") else DEFAULT_SCAN_POINTS)
        if cp.has_option("scan", "tau_min_ps") and cp.has_option("scan", "tau_max_ps"):
            lo = cp.getfloat("scan", "tau_min_ps") * 1e-12
            hi = cp.getfloat("scan", "tau_max_ps") * 1e-12
        else:
            half = DEFAULT_SCAN_HALFWIDTHS * self.dip_width
            lo, hi = -half, half
        if not hi > lo:
            raise ExperimentError("scan range is empty")
        return np.linspace(lo, hi, points)


# ---------------------------------------------------------------------------
# scans
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DelayScan:
    """Delay-resolved coincidence and singles probabilities."""

    label: str
    tau: np.ndarray
    p4: np.ndarray
    p2_ab: np.ndarray
    p2_acc: np.ndarray
    singles: dict
    dip_width: float = 0.0

    def observable(self, name):
        if name == "fourfold":
            return self.p4
        if name == "twofold_accsub":
            return self.p2_ab - self.p2_acc
        if name == "twofold":
            return self.p2_ab
        raise ExperimentError(f"unknown observable {name!r}")

    def to_csv(self):
        buf = io.StringIO()
        buf.write(CSV_HEADER + "\n")
        for i, t in enumerate(self.tau):
            row = [t * 1e12, self.p4[i], self.p2_ab[i], self.p2_acc[i],
                   self.singles["A"][i], self.singles["B"][i],
                   self.singles["C"][i], self.singles["D"][i]]
            buf.write(", ".join(format(v, ".12e") for v in row) + "\n")
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text, label="from_csv"):
        lines = [ln.strip() for ln in text.strip().splitlines() if ln.strip()]
        if not lines:
            raise ExperimentError("empty scan CSV")
        header = [c.strip() for c in lines[0].split(",")]
        expected = [c.strip() for c in CSV_HEADER.split(",")]
        if header != expected:
            raise ExperimentError(f"unexpected CSV header {lines[0]!r}")
        data = np.array([[float(c) for c in ln.split(",")] for ln in lines[1:]])
        if data.size == 0:
            raise ExperimentError("scan CSV has no rows")
        return cls(label=label, tau=data[:, 0] * 1e-12, p4=data[:, 1],
                   p2_ab=data[:, 2], p2_acc=data[:, 3],
                   singles={"A": data[:, 4], "B": data[:, 5],
                            "C": data[:, 6], "D": data[:, 7]})


def run_delay_scan(scenario):
    """Sweep the delay list; the source moments are computed once."""
    right = spool_view(scenario.source, "right")
    left = spool_view(scenario.source, "left")
    bases = scenario.bases
    detectors = scenario.detectors
    taus = scenario.tau_list
    p4 = np.empty(len(taus))
    p2 = np.empty(len(taus))
    acc = np.empty(len(taus))
    singles = {name: np.empty(len(taus)) for name in "ABCD"}
    for i, tau in enumerate(taus):
        try:
            dm = detection_mode_projection(right, left, bases, tau)
            query = dm.click_query(detectors)
            p4[i] = coincidence_probability(dm.normal, dm.anomalous, query,
                                            ("A", "B", "C", "D"), delay=tau).probability
            p2[i] = coincidence_probability(dm.normal, dm.anomalous, query,
                                            ("A", "B"), delay=tau).probability
            for name in "ABCD":
                singles[name][i] = singles_probability(dm.normal, dm.anomalous,
                                                       query, name)
            acc[i] = singles["A"][i] * singles["B"][i]
        except Exception as exc:
            raise ExperimentError(f"scan failed at tau = {tau * 1e12:.3f} ps: {exc}") from exc
    return DelayScan(label=scenario.label, tau=taus, p4=p4, p2_ab=p2, p2_acc=acc,
                     singles=singles, dip_width=scenario.dip_width)


# ---------------------------------------------------------------------------
# fits and counts
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class VisibilityFit:
    visibility: float
    visibility_err: float
    center: float
    width: float
    baseline: float
    covariance: np.ndarray

    def summary(self):
        return (f"V = {self.visibility:.6f}\n"
                f"V_err = {self.visibility_err:.6f}\n"
                f"tau0_ps = {self.center * 1e12:.6f}\n"
                f"sigma_ps = {self.width * 1e12:.6f}\n"
                f"baseline = {self.baseline:.6e}\n")


def fit_visibility(scan, observable="fourfold", sigma=None):
    """Gaussian least-squares fit C(tau) = base * (1 - V exp(-(t-t0)^2/2s^2)).

    Initialized from the data's (min, max, centroid).  Flat data pins V to
    zero; non-convergence raises FitError.
    """
    y = np.asarray(scan.observable(observable), float)
    t = np.asarray(scan.tau, float)
    if len(t) < 5:
        raise FitError("need at least 5 scan rows to fit a dip")
    if scan.dip_width > 0 and (t.max() - t.min()) < 3 * scan.dip_width:
        raise FitError("scan range does not span 3x the estimated dip width")
    base0 = float(np.max(y))
    depth0 = base0 - float(np.min(y))
    if base0 <= 0 or depth0 <= 1e-12 * base0:
        zero_cov = np.zeros((4, 4))
        return VisibilityFit(0.0, 0.0, 0.0, float(t.max() - t.min()), base0, zero_cov)
    # fit in scaled units: time in units of the scan range, y in units of max
    t_scale = float(np.ptp(t))
    t_mid = float(t.min())
    ts = (t - t_mid) / t_scale
    ys = y / base0
    centroid = float(np.sum(ts * (1.0 - ys)) / np.sum(1.0 - ys))
    width0 = 1.0 / 8.0

    def model(tt, base, vis, t0, sig):
        return base * (1 - vis * np.exp(-((tt - t0) ** 2) / (2 * sig**2)))

    p0 = [1.0, depth0 / base0, centroid, width0]
    bounds = ([0.0, 0.0, -1.0, 1e-3], [np.inf, 1.5, 2.0, 10.0])
    if sigma is not None:
        sigma = np.asarray(sigma, float) / base0
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            popt, pcov = curve_fit(model, ts, ys, p0=p0, sigma=sigma,
                                   bounds=bounds, maxfev=20000)
    except RuntimeError as exc:
        raise FitError(f"visibility fit did not converge: {exc}") from exc
    err = float(np.sqrt(np.abs(pcov[1, 1]))) if np.all(np.isfinite(pcov)) else float("nan")
    return VisibilityFit(visibility=float(popt[1]), visibility_err=err,
                         center=float(popt[2] * t_scale + t_mid),
                         width=float(popt[3] * t_scale),
                         baseline=float(popt[0] * base0), covariance=pcov)


def expected_counts(scan, pulses, observable="fourfold"):
    """counts = probability * pulses with sqrt(counts) errors.

    Zero-count rows get an error bar of 1 (stated convention).
    """
    if not pulses > 0:
        raise ExperimentError("pulse count must be positive")
    probs = np.asarray(scan.observable(observable), float)
    counts = probs * pulses
    errors = np.sqrt(counts)
    errors[counts == 0] = 1.0
    return counts, errors
