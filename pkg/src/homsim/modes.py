"""Spectral correlation kernel of a gate+filter chain and its Schmidt decomposition.

A temporal gate with amplitude f(t) followed by a spectral filter with
amplitude h(w) acts on incident light through the Hermitian kernel

    kappa(w, w') = conj(h(w)) h(w') F(w - w'),   F(D) = integral dt |f(t)|^2 e^{iDt}.

Diagonalizing kappa yields transmission eigenvalues chi_j in [0, 1] and
eigenmodes phi_j(w) normalized to integral dw |phi_j|^2 = 2*pi.  For a
rectangular filter of bandwidth B and a rectangular gate of duration T the
eigenvalues depend only on c = B*T/4 (the bandlimited/timelimited
concentration problem), with a single dominant mode for c < 1.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grids import TWO_PI, FrequencyGrid, angular_from_nm

# Modes with chi below this are dropped from detection projections.
MODE_RETENTION_CUTOFF = 1e-3
MAX_RETAINED_MODES = 12

EIGENVALUE_FLOOR = 1e-12
EIGENVALUE_CEILING_TOL = 1e-6

DEFAULT_GRID_POINTS = 513
DEFAULT_SPAN_FACTOR = 4.0

_QUADRATURE_SAMPLES = 4096


class ModeAnalysisError(ValueError):
    """Raised for invalid profiles, kernels, or failed decompositions."""


# ---------------------------------------------------------------------------
# profiles
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FilterProfile:
    """Spectral amplitude h(w) sampled on a grid, |h| <= 1."""

    grid: FrequencyGrid
    amplitude: np.ndarray
    kind: str

    def __post_init__(self):
        amp = np.asarray(self.amplitude, dtype=complex)
        if amp.shape != (self.grid.n_points,):
            raise ModeAnalysisError("amplitude length does not match grid")
        if np.max(np.abs(amp)) > 1.0 + 1e-12:
            raise ModeAnalysisError("filter amplitude exceeds 1 (not passive)")
        object.__setattr__(self, "amplitude", amp)

    @property
    def power(self):
        return np.abs(self.amplitude) ** 2


@dataclass(frozen=True)
class GateProfile:
    """Temporal gate described by |f(t)|^2; |f| <= 1.

    kind is one of ``rectangular``, ``gaussian``, ``cw_carved`` (rectangle
    with raised-cosine rise/fall edges) or ``sampled``.  ``duration`` is the
    full width at half maximum of |f|^2.
    """

    duration: float
    kind: str
    rise_time: float = 0.0
    times: np.ndarray | None = None
    intensity: np.ndarray | None = None

    def __post_init__(self):
        if not self.duration > 0:
            raise ModeAnalysisError("gate duration must be positive (zero is degenerate)")
        if self.kind == "cw_carved" and not 0 <= self.rise_time < self.duration:
            raise ModeAnalysisError("rise time must satisfy 0 <= rise < duration")
        if self.kind == "sampled":
            if self.times is None or self.intensity is None:
                raise ModeAnalysisError("sampled gate needs times and intensity")
            if np.max(self.intensity) > 1.0 + 1e-12 or np.min(self.intensity) < 0:
                raise ModeAnalysisError("gate intensity must lie in [0, 1]")

    def intensity_samples(self, n=_QUADRATURE_SAMPLES):
        """|f(t)|^2 on a symmetric time grid wide enough for the support."""
        if self.kind == "sampled":
            return np.asarray(self.times, float), np.asarray(self.intensity, float)
        half = 0.5 * self.duration + self.rise_time
        if self.kind == "gaussian":
            half = 4.0 * self.duration
        t = np.linspace(-half, half, n)
        return t, self._intensity_on(t)

    def _intensity_on(self, t):
        at = np.abs(t)
        if self.kind == "rectangular":
            return (at <= self.duration / 2).astype(float)
        if self.kind == "gaussian":
            return np.exp(-4 * np.log(2) * (t / self.duration) ** 2)
        if self.kind == "cw_carved":
            # flat top with raised-cosine edges; FWHM stays at `duration`
            flat = self.duration - self.rise_time
            out = np.zeros_like(at)
            out[at <= flat / 2] = 1.0
            edge = (at > flat / 2) & (at <= flat / 2 + self.rise_time)
            out[edge] = 0.5 * (1 + np.cos(np.pi * (at[edge] - flat / 2) / self.rise_time))
            return out
        raise ModeAnalysisError(f"unknown gate kind {self.kind!r}")

    def fourier_intensity(self, delta):
        """F(D) = integral dt |f(t)|^2 e^{iDt}, closed form where available."""
        delta = np.asarray(delta, dtype=float)
        if self.kind == "rectangular":
            return self.duration * np.sinc(delta * self.duration / 2 / np.pi)
        if self.kind == "gaussian":
            a = 4 * np.log(2) / self.duration**2
            return np.sqrt(np.pi / a) * np.exp(-(delta**2) / (4 * a))
        t, inten = self.intensity_samples()
        dt = t[1] - t[0]
        # trapezoid quadrature of the Fourier integral, chunked to bound memory
        flat = delta.ravel()
        out = np.empty(flat.shape, dtype=complex)
        step = max(1, int(2e6 / len(t)))
        for lo in range(0, len(flat), step):
            block = flat[lo:lo + step]
            out[lo:lo + step] = np.trapezoid(
                inten[None, :] * np.exp(1j * np.outer(block, t)), dx=dt, axis=1)
        return out.reshape(delta.shape)


def _rect_amplitude_cell_averaged(grid, center, bandwidth):
    """Rectangular passband sampled with cell-averaged power at the edges.

    Each sample represents the cell [w - dw/2, w + dw/2]; the stored power is
    the fraction of the cell inside the band, so sum |h|^2 dw equals the
    bandwidth exactly regardless of how the edges fall on the lattice.
    """
    d = grid.spacing
    lo, hi = center - bandwidth / 2, center + bandwidth / 2
    w = grid.points
    overlap = np.clip(np.minimum(hi, w + d / 2) - np.maximum(lo, w - d / 2), 0.0, d) / d
    overlap[np.abs(overlap - 1.0) < 1e-12] = 1.0
    overlap[overlap < 1e-12] = 0.0
    return np.sqrt(overlap)


def load_tabulated_spectrum(path):
    """Read a two-column 'wavelength_nm transmission_dB' file.

    Returns (omega ascending, amplitude).  dB values are power transmission,
    converted to amplitude via 10^(dB/20).  Lines starting with '#' are
    comments.
    """
    wl, db = [], []
    with open(path) as fh:
        for line in fh:
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            cols = line.split()
            if len(cols) != 2:
                raise ModeAnalysisError(f"bad row in {path!r}: {line!r}")
            wl.append(float(cols[0]))
            db.append(float(cols[1]))
    if len(wl) < 2:
        raise ModeAnalysisError(f"tabulated spectrum {path!r} needs at least two rows")
    omega = angular_from_nm(np.asarray(wl))
    amp = 10.0 ** (np.asarray(db) / 20.0)
    order = np.argsort(omega)
    return omega[order], amp[order]


def make_profile(kind, params, grid):
    """Sample a filter profile on `grid`.

    kind: ``rectangular`` (params: bandwidth), ``gaussian`` (params: fwhm,
    power FWHM), or ``tabulated`` (params: files, a list of two-column
    spectrum files whose stages multiply pointwise).  Shapes are centered on
    the grid unless params contains an explicit ``center``.
    """
    center = params.get("center", grid.center)
    if kind == "rectangular":
        bw = params["bandwidth"]
        if not bw > 0:
            raise ModeAnalysisError(f"bandwidth must be positive, got {bw}")
        amp = _rect_amplitude_cell_averaged(grid, center, bw)
    elif kind == "gaussian":
        fwhm = params["fwhm"]
        if not fwhm > 0:
            raise ModeAnalysisError(f"fwhm must be positive, got {fwhm}")
        # power FWHM: |h|^2 falls to 1/2 at +-fwhm/2
        amp = np.exp(-2 * np.log(2) * ((grid.points - center) / fwhm) ** 2)
    elif kind == "tabulated":
        files = params["files"]
        amp = np.ones(grid.n_points)
        for path in files:
            omega, stage = load_tabulated_spectrum(path)
            if omega[0] > grid.points[0] or omega[-1] < grid.points[-1]:
                raise ModeAnalysisError(
                    f"tabulated spectrum {path!r} covers "
                    f"[{omega[0]:.4e}, {omega[-1]:.4e}] rad/s but the grid spans "
                    f"[{grid.points[0]:.4e}, {grid.points[-1]:.4e}]; extrapolation refused")
            amp = amp * np.interp(grid.points, omega, stage)
        if np.max(amp) > 1.0 + 1e-12:
            amp = amp / np.max(amp)
    else:
        raise ModeAnalysisError(f"unknown filter kind {kind!r}")
    return FilterProfile(grid=grid, amplitude=amp.astype(complex), kind=kind)


# ---------------------------------------------------------------------------
# kernel and decomposition
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class KernelMatrix:
    """kappa(w_m, w_n) sampled on a grid; Hermitian with real diagonal."""

    grid: FrequencyGrid
    entries: np.ndarray

    def __post_init__(self):
        k = np.asarray(self.entries)
        if k.shape != (self.grid.n_points, self.grid.n_points):
            raise ModeAnalysisError("kernel shape does not match grid")

    @property
    def scaled(self):
        """K * dw / 2pi, the matrix whose eigenvalues are the chi_j."""
        return self.entries * (self.grid.spacing / TWO_PI)

    def trace_chi(self):
        """sum_j chi_j via the diagonal: (dw/2pi) sum_m K[m,m]."""
        return float(np.real(np.trace(self.entries))) * self.grid.spacing / TWO_PI


def build_kernel(filt, gate):
    """Assemble kappa[m,n] = conj(h_m) h_n F(w_m - w_n), symmetrized.

    On a uniform grid the differences take only 2n-1 values, so F is
    evaluated once per unique difference.
    """
    grid = filt.grid
    n = grid.n_points
    diffs = np.arange(-(n - 1), n) * grid.spacing
    f_of_diff = gate.fourier_intensity(diffs)
    idx = np.arange(n)
    F = f_of_diff[idx[:, None] - idx[None, :] + (n - 1)]
    h = filt.amplitude
    K = np.conj(h)[:, None] * h[None, :] * F
    K = 0.5 * (K + K.conj().T)
    return KernelMatrix(grid=grid, entries=K)


@dataclass(frozen=True)
class ModeBasis:
    """Transmission eigenvalues (descending) with eigenmode samples.

    ``eigenmodes[:, j]`` holds phi_j(w_m), normalized so that
    sum_m |phi_j|^2 dw = 2*pi.  ``unit_vectors[:, j]`` are the same modes
    with unit Euclidean norm, convenient for projections.
    """

    grid: FrequencyGrid
    eigenvalues: np.ndarray
    eigenmodes: np.ndarray

    @property
    def unit_vectors(self):
        return self.eigenmodes * np.sqrt(self.grid.spacing / TWO_PI)

    def retained(self, cutoff=MODE_RETENTION_CUTOFF, max_modes=MAX_RETAINED_MODES):
        """Number of leading modes with chi >= cutoff, capped."""
        return min(int(np.sum(self.eigenvalues >= cutoff)), max_modes)

    def orthonormality_residual(self):
        g = self.eigenmodes.conj().T @ self.eigenmodes * self.grid.spacing
        return float(np.max(np.abs(g - TWO_PI * np.eye(g.shape[0]))))


def schmidt_decompose(kernel):
    """Eigendecomposition of the scaled kernel into (chi_j, phi_j)."""
    scaled = kernel.scaled
    herm_defect = np.max(np.abs(scaled - scaled.conj().T))
    if herm_defect > 1e-10 * max(1.0, np.max(np.abs(scaled))):
        raise ModeAnalysisError(f"kernel is not Hermitian (defect {herm_defect:.2e})")
    if np.max(np.abs(scaled.imag)) < 1e-14 * max(1.0, np.max(np.abs(scaled.real))):
        vals, vecs = np.linalg.eigh(scaled.real)
        vecs = vecs.astype(complex)
    else:
        vals, vecs = np.linalg.eigh(scaled)
        # kernel decomposition kappa = sum chi conj(phi) phi' puts conj(phi)
        # on the eigenvector side of the operator
        vecs = vecs.conj()
    vals = vals[::-1].copy()
    vecs = vecs[:, ::-1].copy()
    if vals[0] > 1.0 + EIGENVALUE_CEILING_TOL:
        raise ModeAnalysisError(
            f"leading eigenvalue {vals[0]:.8f} exceeds 1; check |h|, |f| <= 1 "
            "or refine the grid")
    vals[vals < EIGENVALUE_FLOOR] = 0.0
    # fix the free global phase: largest-|phi| sample made real positive
    scale = np.sqrt(TWO_PI / kernel.grid.spacing)
    for j in range(vecs.shape[1]):
        m = np.argmax(np.abs(vecs[:, j]))
        ref = vecs[m, j]
        if abs(ref) > 0:
            vecs[:, j] *= np.conj(ref) / abs(ref)
    return ModeBasis(grid=kernel.grid, eigenvalues=vals, eigenmodes=vecs * scale)


def effective_c(bandwidth, duration):
    """Time-bandwidth parameter c = B*T/4 of a gate+filter chain."""
    if bandwidth < 0 or duration < 0:
        raise ModeAnalysisError("bandwidth and duration must be non-negative")
    return bandwidth * duration / 4.0


def rect_rect_basis(c, n_points=DEFAULT_GRID_POINTS, span_factor=DEFAULT_SPAN_FACTOR):
    """Schmidt basis of the rectangular filter + rectangular gate at given c.

    Uses T = 1 and B = 4c; by scale invariance the eigenvalues depend on c
    only.
    """
    if not c > 0:
        raise ModeAnalysisError("c must be positive")
    B = 4.0 * c
    grid = FrequencyGrid(center=0.0, span=span_factor * B, n_points=n_points)
    filt = make_profile("rectangular", {"bandwidth": B}, grid)
    gate = GateProfile(duration=1.0, kind="rectangular")
    return schmidt_decompose(build_kernel(filt, gate))


def eigenvalue_curve(c_values, n_modes=3, n_points=DEFAULT_GRID_POINTS):
    """Rows of (c, chi_0 .. chi_{n_modes-1}) for rect-rect chains.

    c = 0 is the closed (zero-bandwidth) chain: all eigenvalues vanish.
    """
    rows = np.empty((len(c_values), n_modes + 1))
    for i, c in enumerate(c_values):
        if c < 0:
            raise ModeAnalysisError("c must be non-negative")
        if c == 0:
            rows[i] = 0.0
            continue
        basis = rect_rect_basis(c, n_points=n_points)
        chis = basis.eigenvalues[:n_modes]
        if len(chis) < n_modes:
            chis = np.pad(chis, (0, n_modes - len(chis)))
        rows[i, 0] = c
        rows[i, 1:] = chis
    return rows
