"""Delay, 50:50 mixing, and projection onto detection-mode registers.

The two spools' Stokes fields reach the coupler with a relative delay tau
(applied symmetrically as +-tau/2); the coupler ports feed detectors A and
B, while each spool's anti-Stokes field goes directly to its herald (C for
the right spool, D for the left).

Every detector counts photons behind its own gate+filter chain.  With the
chain's kernel written as K = t^dag t, the port-A number operator is the
transmitted intensity of the retimed chain,

    n_A = (1/2) || P_{+tau/2} t E_r + P_{-tau/2} t E_l ||^2 ,

where P_s = diag(e^{i s w}).  At tau = 0 this is exactly E_A^dag K E_A for
the mixed port field; the self terms stay E_x^dag K E_x at every delay (a
photon is never dropped for arriving late, matching detectors whose
electrical gates are far longer than the pulse), and the interference
cross term carries the sandwiched kernel K^(1/2) diag(e^{-i tau w}) K^(1/2),
which decays over the photon coherence time and produces the
Hong-Ou-Mandel dip.  The operator is PSD by construction and the two ports
sum to the full transmitted intensity at every delay.

All forms are supported on the span of the retained Schmidt modes, so the
click computation restricts exactly to a small register.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .detection import ClickQuery
from .grids import TWO_PI
from .source import ANTISTOKES, STOKES


class NetworkError(ValueError):
    """Raised for incompatible grids or degenerate network configurations."""


@dataclass(frozen=True)
class DetectorModel:
    """One threshold detector behind a gate+filter chain.

    mode_weights are the chain's transmission eigenvalues chi_j for the
    retained modes; efficiency collects propagation loss and quantum
    efficiency and multiplies every weight.
    """

    name: str
    efficiency: float
    mode_weights: np.ndarray
    dark_mean: float
    band: object  # FrequencyGrid

    def __post_init__(self):
        if not 0.0 <= self.efficiency <= 1.0:
            raise NetworkError(f"efficiency {self.efficiency} outside [0, 1]")
        if self.dark_mean < 0:
            raise NetworkError("dark mean must be non-negative")
        w = np.asarray(self.mode_weights, dtype=float)
        if np.any(w < -1e-12) or np.any(w > 1.0 + 1e-9):
            raise NetworkError("mode weights must lie in [0, 1]")
        if np.any(np.diff(w) > 1e-9):
            raise NetworkError("mode weights must be sorted descending")


@dataclass(frozen=True)
class SpoolMoments:
    """One spool's (N_s, N_a, M_sa) blocks in discrete normalization."""

    normal_stokes: np.ndarray
    normal_antistokes: np.ndarray
    anomalous: np.ndarray


def spool_view(moments, spool):
    """Extract one spool's blocks from a two-spool GaussianMoments."""
    ks, ka = (spool, STOKES), (spool, ANTISTOKES)
    return SpoolMoments(normal_stokes=moments.normal_block(ks, ks),
                        normal_antistokes=moments.normal_block(ka, ka),
                        anomalous=moments.anomalous_block(ks, ka))


def vacuum_spool(n_stokes, n_antistokes):
    return SpoolMoments(normal_stokes=np.zeros((n_stokes, n_stokes), complex),
                        normal_antistokes=np.zeros((n_antistokes, n_antistokes), complex),
                        anomalous=np.zeros((n_stokes, n_antistokes), complex))


@dataclass(frozen=True)
class DetectionMoments:
    """Moments over the retained detection register, with per-detector
    number-operator forms (unit efficiency; efficiencies scale them in the
    click query).

    The register is ordered (right stokes modes, left stokes modes, right
    anti-Stokes modes, left anti-Stokes modes).
    """

    mode_labels: tuple
    normal: np.ndarray
    anomalous: np.ndarray
    delay: float
    forms: dict

    @property
    def n_modes(self):
        return self.normal.shape[0]

    def click_query(self, detectors):
        """Assemble the engine query from DetectorModel efficiencies/darks."""
        forms = {}
        darks = {}
        for det in detectors:
            if det.name not in self.forms:
                raise NetworkError(f"no projection form for detector {det.name!r}")
            forms[det.name] = det.efficiency * self.forms[det.name]
            darks[det.name] = det.dark_mean
        return ClickQuery(forms=forms, dark_means=darks)

    def mean_photons(self, name, efficiency=1.0):
        q = efficiency * self.forms[name]
        return float(np.real(np.sum(q * self.normal)))


def _retained(basis):
    k = basis.retained()
    if k == 0:
        raise NetworkError("no retained detection modes (all chi below cutoff)")
    return basis.unit_vectors[:, :k], basis.eigenvalues[:k]


def detection_mode_projection(source_r, source_l, bases, tau, tau_left=None):
    """Project two spools onto the detection register at relative delay tau.

    Parameters
    ----------
    source_r, source_l : SpoolMoments (or two-spool GaussianMoments views)
    bases : dict with per-arm ModeBasis entries "A", "B", "C", "D"; A and B
        must share one signal basis (one physical coupler), C and D may
        differ.
    tau : relative Stokes delay in seconds (right leads by +tau/2), or the
        right spool's delay when `tau_left` is given.
    tau_left : optional explicit left-spool delay; only the difference
        tau - tau_left is observable (each spool's chain co-moves with its
        own arrival, so a common shift of both delays cancels exactly).
    """
    if tau_left is not None:
        tau = tau - tau_left
    basis_a, basis_b = bases["A"], bases["B"]
    if basis_a is not basis_b and not np.array_equal(
            basis_a.eigenmodes, basis_b.eigenmodes):
        raise NetworkError("A and B must share the signal-arm Schmidt basis")
    psi_s, chi_s = _retained(basis_a)
    psi_c, chi_c = _retained(bases["C"])
    psi_d, chi_d = _retained(bases["D"])
    grid_s = basis_a.grid
    n_grid = grid_s.n_points
    for spool in (source_r, source_l):
        if spool.normal_stokes.shape[0] != n_grid:
            raise NetworkError("basis grid does not match the moments grid")
    k_s = psi_s.shape[1]
    k_c, k_d = psi_c.shape[1], psi_d.shape[1]
    m_tot = 2 * k_s + k_c + k_d
    sl_rs = slice(0, k_s)
    sl_ls = slice(k_s, 2 * k_s)
    sl_ra = slice(2 * k_s, 2 * k_s + k_c)
    sl_la = slice(2 * k_s + k_c, m_tot)

    # moments restricted to the retained register (exact: detection forms
    # vanish outside this span, so dropped directions contribute factors of 1)
    normal = np.zeros((m_tot, m_tot), dtype=complex)
    anomalous = np.zeros((m_tot, m_tot), dtype=complex)
    normal[sl_rs, sl_rs] = psi_s.conj().T @ source_r.normal_stokes @ psi_s
    normal[sl_ls, sl_ls] = psi_s.conj().T @ source_l.normal_stokes @ psi_s
    normal[sl_ra, sl_ra] = psi_c.conj().T @ source_r.normal_antistokes @ psi_c
    normal[sl_la, sl_la] = psi_d.conj().T @ source_l.normal_antistokes @ psi_d
    m_r = psi_s.conj().T @ source_r.anomalous @ psi_c.conj()
    m_l = psi_s.conj().T @ source_l.anomalous @ psi_d.conj()
    anomalous[sl_rs, sl_ra] = m_r
    anomalous[sl_ra, sl_rs] = m_r.T
    anomalous[sl_ls, sl_la] = m_l
    anomalous[sl_la, sl_ls] = m_l.T

    # port forms: overlap of the delayed and advanced Schmidt modes
    phases = np.exp(-1j * tau * grid_s.points)
    overlap = psi_s.conj().T @ (phases[:, None] * psi_s)
    sq = np.sqrt(chi_s)
    cross = 0.5 * (sq[:, None] * overlap * sq[None, :])
    forms = {}
    for name, sign in (("A", +1.0), ("B", -1.0)):
        q = np.zeros((m_tot, m_tot), dtype=complex)
        q[sl_rs, sl_rs] = 0.5 * np.diag(chi_s)
        q[sl_ls, sl_ls] = 0.5 * np.diag(chi_s)
        q[sl_rs, sl_ls] = sign * cross
        q[sl_ls, sl_rs] = sign * cross.conj().T
        forms[name] = q
    q_c = np.zeros((m_tot, m_tot), dtype=complex)
    q_c[sl_ra, sl_ra] = np.diag(chi_c)
    forms["C"] = q_c
    q_d = np.zeros((m_tot, m_tot), dtype=complex)
    q_d[sl_la, sl_la] = np.diag(chi_d)
    forms["D"] = q_d

    labels = ([("right", STOKES, j) for j in range(k_s)]
              + [("left", STOKES, j) for j in range(k_s)]
              + [("right", ANTISTOKES, j) for j in range(k_c)]
              + [("left", ANTISTOKES, j) for j in range(k_d)])
    return DetectionMoments(mode_labels=tuple(labels), normal=normal,
                            anomalous=anomalous, delay=tau, forms=forms)


def _fwhm(x, y):
    y = np.asarray(y, float)
    top = y.max()
    if top <= 0:
        return 0.0
    above = x[y >= top / 2]
    return float(above[-1] - above[0])


def hom_dip_width_estimate(signal_basis, pump):
    """Rough temporal width of the coincidence dip, used for scan ranges.

    The interference survives over the coherence time of the slower of the
    two spectral scales in play, so the estimate is the reciprocal of the
    narrower of the signal-filter bandwidth and the pump-induced
    correlation bandwidth; it brackets the simulated dip width within a
    factor of about two.
    """
    chi = signal_basis.eigenvalues
    modes = signal_basis.eigenmodes
    kern_diag = (np.abs(modes) ** 2 @ chi) * signal_basis.grid.spacing / TWO_PI
    b_filter = _fwhm(signal_basis.grid.points, kern_diag)
    phi = np.convolve(pump.amplitude, pump.amplitude)
    d = pump.grid.spacing
    omega_sum = np.arange(len(phi)) * d
    b_corr = _fwhm(omega_sum, np.abs(phi) ** 2)
    if b_filter <= 0 or b_corr <= 0:
        raise NetworkError("degenerate zero-bandwidth input")
    return TWO_PI / min(b_filter, b_corr)
