"""Linear cavity / spin-ensemble transfer dynamics.

In the low-excitation regime the coupled system is linear: the correlation
vector X(t) = (<a(t) c†(0)>, <b_1(t) c†(0)>, ...) obeys dX/dt = -i M X with
the arrow-structured matrix

    M = [[w_c - i k/2,  i g_1,        i g_2,       ...],
         [-i g_1,       w_1 - i y/2,  0,           ...],
         [-i g_2,       0,            w_2 - i y/2, ...]]

(k = cavity energy decay rate, y = spin linewidth gamma_0).  Two independent
routes to the transfer amplitude beta(t) are provided:

* a spectral route: resolvent matrix elements assembled from the memory
  kernel W and the cavity response t1, inverted to the time domain by a
  Bromwich integral evaluated on the line Im(omega) = eta > 0 (exact for any
  eta > 0 since all system poles lie in the closed lower half plane);
* a brute-force route: direct ODE propagation of dX/dt = -i M X.

Phase convention: with the matrix above, the degenerate lossless ensemble
gives beta(t) = +exp(-i w t) sin(g_K t), i.e. beta * exp(+i w t) is real
positive at small t.

All frequencies are angular (rad/s); times are seconds.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, replace
from typing import Callable, Optional, Sequence, Tuple

import numpy as np
from scipy.integrate import solve_ivp
from scipy.special import wofz

from .errors import NumericalGuardError, PoleCollisionError, WindowTooSmallError
from .spin_model import SpinDistribution, density_at

__all__ = [
    "CavityModel",
    "PulseEnvelope",
    "TransferResult",
    "InversionSettings",
    "MODE_NARROW",
    "MODE_EXACT",
    "memory_kernel_W",
    "cavity_amplitude_t1",
    "pulse_constant_A",
    "transfer_spectrum_t",
    "invert_to_time",
    "transfer_sweep",
    "time_domain_propagate",
]

MODE_NARROW = "narrow-pulse"
MODE_EXACT = "exact-convolution"
_MODES = (MODE_NARROW, MODE_EXACT)

_SQRT_8LN2 = 2.0 * math.sqrt(2.0 * math.log(2.0))


@dataclass(frozen=True)
class CavityModel:
    """Cavity frequency, energy decay rate kappa, and spin linewidth gamma_0.

    All rates angular (rad/s).  kappa = omega_c / Q for a loaded quality
    factor Q.
    """

    omega_c: float
    kappa: float
    gamma0: float = 0.0

    def __post_init__(self):
        if not (self.omega_c > 0 and np.isfinite(self.omega_c)):
            raise ValueError("CavityModel.omega_c must be positive and finite")
        if self.kappa < 0 or not np.isfinite(self.kappa):
            raise ValueError("CavityModel.kappa must be >= 0 and finite")
        if self.gamma0 < 0 or not np.isfinite(self.gamma0):
            raise ValueError("CavityModel.gamma0 must be >= 0 and finite")

    @classmethod
    def from_quality(cls, omega_c: float, q: float, gamma0: float = 0.0) -> "CavityModel":
        if not q > 0:
            raise ValueError("quality factor must be positive")
        return cls(omega_c=omega_c, kappa=omega_c / q, gamma0=gamma0)

    def tuned_to(self, omega_c: float, q: Optional[float] = None) -> "CavityModel":
        """Same cavity retuned; kappa rescales with omega_c when q is given."""
        if q is not None:
            return CavityModel(omega_c, omega_c / q, self.gamma0)
        return replace(self, omega_c=omega_c)


@dataclass(frozen=True)
class PulseEnvelope:
    """Spectral amplitude envelope alpha(x) of the spectroscopy pulse.

    x is the detuning from the pulse carrier (rad/s).  Shapes:

    * "lorentzian": alpha(x) = 1 / (1 + (4x/delta)^2) with delta = `fwhm`.
      The amplitude profile has FWHM delta/2; this scale definition makes the
      spectral constant exactly A = sqrt(pi*delta/2).
    * "gaussian": alpha(x) = exp(-4 ln2 x^2 / delta^2), amplitude FWHM delta.
    * "rectangular": a flat drive of `duration` T in time,
      alpha(x) = sinc(x T / 2); `fwhm` is derived (7.5820/T).
    """

    shape: str
    fwhm: Optional[float] = None
    duration: Optional[float] = None

    def __post_init__(self):
        if self.shape not in ("lorentzian", "gaussian", "rectangular"):
            raise ValueError(f"unknown pulse shape {self.shape!r}")
        if self.shape == "rectangular":
            if not (self.duration and self.duration > 0):
                raise ValueError("rectangular pulse requires duration > 0")
            # amplitude half max of sinc at x*T/2 = 1.89549
            object.__setattr__(self, "fwhm", 4.0 * 1.8954942670339809 / self.duration)
        else:
            if not (self.fwhm and self.fwhm > 0):
                raise ValueError(f"{self.shape} pulse requires fwhm > 0")
            if self.duration is not None:
                raise ValueError("duration applies to the rectangular shape only")

    @property
    def _lor_hwhm(self) -> float:
        return self.fwhm / 4.0

    @property
    def _gauss_sigma(self) -> float:
        return self.fwhm / _SQRT_8LN2

    @property
    def bandwidth_scale(self) -> float:
        """Characteristic spectral half-width (sets pole offsets and margins)."""
        if self.shape == "lorentzian":
            return self._lor_hwhm
        if self.shape == "gaussian":
            return self._gauss_sigma
        return 2.0 / self.duration

    def amplitude(self, x):
        """alpha(x); real, peak value 1 at x = 0."""
        x = np.asarray(x, dtype=float)
        if self.shape == "lorentzian":
            a = self._lor_hwhm
            return a * a / (x * x + a * a)
        if self.shape == "gaussian":
            s = self._gauss_sigma
            return np.exp(-0.5 * (x / s) ** 2)
        return np.sinc(x * self.duration / (2.0 * np.pi))

    @property
    def norm_l1(self) -> float:
        """integral of alpha dx."""
        if self.shape == "lorentzian":
            return math.pi * self._lor_hwhm
        if self.shape == "gaussian":
            return self._gauss_sigma * math.sqrt(2.0 * math.pi)
        return 2.0 * math.pi / self.duration

    @property
    def norm_l2_sq(self) -> float:
        """integral of alpha^2 dx."""
        if self.shape == "lorentzian":
            return math.pi * self._lor_hwhm / 2.0
        if self.shape == "gaussian":
            return self._gauss_sigma * math.sqrt(math.pi)
        return 2.0 * math.pi / self.duration

    def cauchy(self, u):
        """integral of alpha(x) / (u - x) dx for Im(u) > 0 (closed forms).

        Tends to norm_l1 / u as |u| grows; real-axis values are the
        boundary limit from above (PV - i pi alpha).
        """
        u = np.asarray(u, dtype=complex)
        if self.shape == "lorentzian":
            a = self._lor_hwhm
            return math.pi * a / (u + 1j * a)
        if self.shape == "gaussian":
            s = self._gauss_sigma
            return -1j * math.pi * wofz(u / (s * math.sqrt(2.0)))
        z = 0.5 * u * self.duration
        small = np.abs(z) < 1e-6
        zs = np.where(small, 1.0, z)
        out = (1.0 - np.exp(1j * zs)) / zs
        series = -1j + 0.5 * z  # (1 - e^{iz})/z to first order
        out = np.where(small, series, out)
        return out * math.pi


def pulse_constant_A(env: PulseEnvelope) -> float:
    """Spectral constant A = (int alpha) / sqrt(int alpha^2) in sqrt(rad/s).

    Closed forms: sqrt(pi*fwhm/2) (lorentzian), sqrt(2*sqrt(pi)*sigma)
    (gaussian), sqrt(2*pi/duration) (rectangular).
    """
    return env.norm_l1 / math.sqrt(env.norm_l2_sq)


@dataclass(frozen=True)
class TransferResult:
    """beta(t) = <a(t) b†(0)> on a time grid, for one pump frequency."""

    omega_p: float
    times: np.ndarray
    beta: np.ndarray
    method: str  # "contour" or "time-domain"

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        b = np.asarray(self.beta, dtype=complex)
        if t.shape != b.shape:
            raise ValueError("times and beta must have matching shapes")
        t.flags.writeable = False
        b.flags.writeable = False
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "beta", b)

    @property
    def abs2(self) -> np.ndarray:
        return np.abs(self.beta) ** 2

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            fh.write("t_s,re_beta,im_beta,abs2_beta\n")
            for t, b in zip(self.times, self.beta):
                fh.write(
                    f"{float(t)!r},{float(b.real)!r},{float(b.imag)!r},{float(abs(b) ** 2)!r}\n"
                )


# ---------------------------------------------------------------------------
# spectral building blocks


def _node_sums(
    dist: SpinDistribution,
    gamma0: float,
    zeta: np.ndarray,
    extra: Optional[np.ndarray] = None,
):
    """Sum g_j^2/(zeta - w_j + i gamma0/2) and optionally extra_j/(...).

    Shares the denominator matrix between the two sums; chunked to bound
    memory.  Raises PoleCollisionError on an exact real-axis node hit with
    gamma0 = 0 (the caller must offset or complex-shift instead).
    """
    zeta = np.asarray(zeta, dtype=complex)
    flat = zeta.ravel()
    nodes = dist.omega_nodes
    gsq = dist.couplings_sq
    if gamma0 == 0.0:
        real_mask = flat.imag == 0.0
        if np.any(real_mask) and np.any(np.isin(flat[real_mask].real, nodes)):
            raise PoleCollisionError(
                "evaluation frequency coincides with a spectral node and gamma_0 = 0; "
                "evaluate at a complex-shifted or offset frequency"
            )
    shift = 0.5j * gamma0
    W = np.empty(flat.shape, dtype=complex)
    E = np.empty(flat.shape, dtype=complex) if extra is not None else None
    step = max(1, 2_000_000 // max(nodes.size, 1))
    for s in range(0, flat.size, step):
        inv = 1.0 / (flat[s : s + step, None] - nodes[None, :] + shift)
        W[s : s + step] = inv @ gsq
        if extra is not None:
            E[s : s + step] = inv @ extra
    W = W.reshape(zeta.shape)
    if E is not None:
        E = E.reshape(zeta.shape)
    return W, E


def memory_kernel_W(dist: SpinDistribution, cavity: CavityModel, omega):
    """Spin memory kernel W(omega) = sum_j g_j^2 / (omega - w_j + i gamma0/2).

    omega may be real or complex, scalar or array.  With gamma0 = 0 and a
    dense grid, evaluating at omega + i*eta (node spacing << eta << line
    width) approximates the continuum kernel; for a single Lorentzian line of
    FWHM w that limit is g_K^2 / (omega - w_s + i w/2).
    """
    scalar = np.isscalar(omega)
    W, _ = _node_sums(dist, cavity.gamma0, np.asarray(omega, dtype=complex))
    return complex(W) if scalar else W


def cavity_amplitude_t1(dist: SpinDistribution, cavity: CavityModel, omega):
    """Cavity response t1(-i omega) = i / (omega - w_c + i kappa/2 - W(omega))."""
    if cavity.kappa == 0.0 and cavity.gamma0 == 0.0:
        raise ValueError("cavity_amplitude_t1 requires kappa > 0 or gamma0 > 0")
    scalar = np.isscalar(omega)
    zeta = np.asarray(omega, dtype=complex)
    W, _ = _node_sums(dist, cavity.gamma0, zeta)
    t1 = 1j / (zeta - cavity.omega_c + 0.5j * cavity.kappa - W)
    return complex(t1) if scalar else t1


def _narrow_scale(dist: SpinDistribution, env: PulseEnvelope, omega_p: float) -> float:
    """g_K * A * sqrt(rho(omega_p)) for the narrow-pulse factorization."""
    rho = density_at(dist, omega_p)
    return dist.g_collective * pulse_constant_A(env) * math.sqrt(max(rho, 0.0))


def _check_narrow(dist: SpinDistribution, env: PulseEnvelope) -> None:
    min_fwhm = min(ln.fwhm for ln in dist.lines)
    if env.fwhm > min_fwhm / 5.0:
        warnings.warn(
            "pulse bandwidth exceeds a fifth of the narrowest line; "
            "narrow-pulse mode is inaccurate, use exact-convolution",
            stacklevel=3,
        )


def _exact_weights(dist: SpinDistribution, env: PulseEnvelope, omega_p: float):
    """Per-node alpha_j g_j^2 and the normalization D = sqrt(sum alpha^2 g^2)."""
    alpha = env.amplitude(dist.omega_nodes - omega_p)
    gsq = dist.couplings_sq
    d_sq = float(np.sum(alpha * alpha * gsq))
    if not d_sq > 0.0:
        raise ValueError("pulse envelope has no overlap with the spectral grid")
    return alpha * gsq, math.sqrt(d_sq)


def transfer_spectrum_t(
    dist: SpinDistribution,
    cavity: CavityModel,
    env: PulseEnvelope,
    omega_p: float,
    omega,
    mode: str = MODE_NARROW,
):
    """Transfer spectrum t_wp(-i omega) = i t1(omega) N(omega) / D.

    In exact-convolution mode N and D are the node sums
    N = sum_k alpha(w_k - w_p) g_k^2 / (omega - w_k + i gamma0/2) and
    D = sqrt(sum_j alpha^2 g_j^2).  In narrow-pulse mode the ratio
    factorizes into g_K * A * sqrt(rho(w_p)) times the envelope's normalized
    Cauchy transform of (omega - w_p), which tends to 1/(omega - w_p) far
    from the pump.  omega may be complex (upper half plane for inversion).
    """
    if mode not in _MODES:
        raise ValueError(f"mode must be one of {_MODES}")
    scalar = np.isscalar(omega)
    zeta = np.asarray(omega, dtype=complex)
    if mode == MODE_NARROW:
        _check_narrow(dist, env)
        W, _ = _node_sums(dist, cavity.gamma0, zeta)
        t1 = 1j / (zeta - cavity.omega_c + 0.5j * cavity.kappa - W)
        shape = env.cauchy(zeta - omega_p + 0.5j * cavity.gamma0) / env.norm_l1
        out = 1j * t1 * _narrow_scale(dist, env, omega_p) * shape
    else:
        extra, d_norm = _exact_weights(dist, env, omega_p)
        W, N = _node_sums(dist, cavity.gamma0, zeta, extra=extra)
        t1 = 1j / (zeta - cavity.omega_c + 0.5j * cavity.kappa - W)
        out = 1j * t1 * N / d_norm
    return complex(out) if scalar else out


# ---------------------------------------------------------------------------
# contour inversion


@dataclass(frozen=True)
class InversionSettings:
    """Numerical controls for the Bromwich-contour inversion.

    Auto rules (used when a field is None): the contour offset is
    eta = eta_t / t_max; the step is d_omega = eta / samples_per_eta, which
    bounds the quadrature aliasing by e^{-eta (2 pi/d_omega - t_max)}, capped
    further at min(kappa, narrowest line FWHM)/20 so every spectral feature
    is resolved; the window starts from the line/cavity/pump structure plus
    margins scaled by g_K, the line widths, kappa and the pulse bandwidth,
    then grows by `growth` up to `max_growth` times until the subtracted
    integrand at the edges drops below edge_ratio times the spectrum peak.
    """

    window: Optional[Tuple[float, float]] = None
    d_omega: Optional[float] = None
    contour_offset: Optional[float] = None
    edge_ratio: float = 1e-4
    eta_t: float = 0.25
    samples_per_eta: float = 8.0
    growth: float = 1.6
    max_growth: int = 6


def _auto_window(
    dist: SpinDistribution,
    cavity: CavityModel,
    pulse_scale: float,
    anchors: Sequence[float],
) -> Tuple[float, float]:
    margin = (
        4.0 * dist.g_collective
        + 8.0 * max(ln.fwhm for ln in dist.lines)
        + 10.0 * cavity.kappa
        + 30.0 * pulse_scale
        + 5.0 * cavity.gamma0
    )
    pts = [cavity.omega_c, float(dist.omega_nodes[0]), float(dist.omega_nodes[-1])]
    pts.extend(anchors)
    return min(pts) - margin, max(pts) + margin


def _grid_controls(
    settings: InversionSettings,
    t_max: float,
    dist: SpinDistribution,
    cavity: CavityModel,
):
    eta = settings.contour_offset
    if eta is None:
        eta = settings.eta_t / t_max
    d_omega = settings.d_omega
    if d_omega is None:
        d_omega = eta / settings.samples_per_eta
        cap = min(ln.fwhm for ln in dist.lines) / 20.0
        if cavity.kappa > 0.0:
            cap = min(cap, cavity.kappa / 20.0)
        # On the shifted line Im(zeta) = eta every spectral feature is smoothed
        # to width >= eta, so eta/samples_per_eta already resolves the
        # integrand; the linewidth cap only tightens the step where that is
        # affordable.  Floor it at eta/64 so near-singular lines cannot demand
        # astronomically fine grids.
        d_omega = min(d_omega, max(cap, eta / 64.0))
    return eta, d_omega


_MAX_GRID_POINTS = 4_000_000


def _contour_grid(lo: float, hi: float, d_omega: float) -> np.ndarray:
    """Uniform frequency grid over [lo, hi], guarded against memory blow-up."""
    n = int(math.ceil((hi - lo) / d_omega)) + 1
    if n > _MAX_GRID_POINTS:
        raise NumericalGuardError(
            f"inversion grid would need {n} points "
            f"(window {hi - lo:.3e} rad/s wide at step {d_omega:.3e}); "
            "pass a coarser d_omega or a narrower window in InversionSettings"
        )
    return np.linspace(lo, hi, n)


def _invert_on_grid(
    eval_T: Callable[[np.ndarray], np.ndarray],
    c2: complex,
    p1: complex,
    p2: complex,
    times: np.ndarray,
    settings: InversionSettings,
    window: Tuple[float, float],
    eta: float,
    d_omega: float,
    window_fixed: bool,
) -> np.ndarray:
    """Invert T(zeta) to beta(t) with two-pole asymptote subtraction.

    T_far(zeta) = c2 / ((zeta - p1)(zeta - p2)) matches T to order 1/zeta^2;
    its inverse transform -i c2/(p1-p2) (e^{-i p1 t} - e^{-i p2 t}) is added
    analytically so the quadrature only sees a 1/zeta^3 remainder.
    """
    lo, hi = window
    for attempt in range(settings.max_growth + 1):
        omega = _contour_grid(lo, hi, d_omega)
        n = omega.size
        zeta = omega + 1j * eta
        T = eval_T(zeta)
        far = c2 / ((zeta - p1) * (zeta - p2))
        R = T - far
        peak = float(np.max(np.abs(T)))
        edge = float(max(abs(R[0]), abs(R[-1])))
        if peak == 0.0 or edge <= settings.edge_ratio * peak:
            break
        if window_fixed or attempt == settings.max_growth:
            raise WindowTooSmallError(
                f"inversion window [{lo:.6g}, {hi:.6g}] rad/s too small: edge "
                f"magnitude {edge:.3e} exceeds {settings.edge_ratio:.1e} x peak {peak:.3e}"
            )
        center = 0.5 * (lo + hi)
        half = 0.5 * (hi - lo) * settings.growth
        lo, hi = center - half, center + half

    w_trap = np.full(n, omega[1] - omega[0])
    w_trap[0] *= 0.5
    w_trap[-1] *= 0.5
    integ = R * w_trap
    omega_ref = 0.5 * (omega[0] + omega[-1])
    du = omega - omega_ref

    times = np.asarray(times, dtype=float)
    beta = np.empty(times.shape, dtype=complex)
    step = max(1, 4_000_000 // n)
    for s in range(0, times.size, step):
        t_chunk = times[s : s + step]
        phases = np.exp(-1j * np.outer(t_chunk, du))
        beta[s : s + step] = (phases @ integ) * np.exp((eta - 1j * omega_ref) * t_chunk) / (
            2.0 * math.pi
        )
    if abs(p1 - p2) == 0.0:
        # degenerate double pole: -i c2 t e^{-i p t}
        beta += -1j * c2 * times * np.exp(-1j * p1 * times)
    else:
        beta += (-1j * c2 / (p1 - p2)) * (
            np.exp(-1j * p1 * times) - np.exp(-1j * p2 * times)
        )
    return beta


def _require_dissipation(cavity: CavityModel) -> None:
    if cavity.kappa == 0.0 and cavity.gamma0 == 0.0:
        raise ValueError(
            "contour inversion requires kappa > 0 or gamma0 > 0; "
            "use time_domain_propagate for the lossless case"
        )


def _pump_pole(cavity: CavityModel, env: PulseEnvelope, omega_p: float) -> complex:
    return omega_p - 1j * (0.5 * cavity.gamma0 + env.bandwidth_scale)


def invert_to_time(
    dist: SpinDistribution,
    cavity: CavityModel,
    env: PulseEnvelope,
    omega_p: float,
    times,
    mode: str = MODE_EXACT,
    settings: Optional[InversionSettings] = None,
) -> TransferResult:
    """Transfer amplitude beta(omega_p, t) by contour inversion of t_wp.

    beta(t) = (e^{eta t}/2 pi) * integral e^{-i w t} t_wp(-i(w + i eta)) dw
    over the window, plus the analytically inverted two-pole asymptote.
    Raises WindowTooSmallError if the subtracted integrand at the window edge
    stays above edge_ratio times the spectrum peak after window growth.
    """
    if mode not in _MODES:
        raise ValueError(f"mode must be one of {_MODES}")
    _require_dissipation(cavity)
    settings = settings or InversionSettings()
    times = np.atleast_1d(np.asarray(times, dtype=float))
    if times.size == 0 or np.any(times < 0):
        raise ValueError("times must be non-empty and non-negative")
    t_max = float(times.max())
    if t_max <= 0:
        raise ValueError("times must reach beyond t = 0")
    eta, d_omega = _grid_controls(settings, t_max, dist, cavity)
    window_fixed = settings.window is not None
    window = settings.window or _auto_window(dist, cavity, env.bandwidth_scale, [omega_p])

    p1 = cavity.omega_c - 0.5j * cavity.kappa
    p2 = _pump_pole(cavity, env, omega_p)
    if mode == MODE_NARROW:
        _check_narrow(dist, env)
        scale = _narrow_scale(dist, env, omega_p)
        l1 = env.norm_l1
        gamma0 = cavity.gamma0

        def eval_T(zeta):
            W, _ = _node_sums(dist, gamma0, zeta)
            t1 = 1j / (zeta - cavity.omega_c + 0.5j * cavity.kappa - W)
            return 1j * t1 * scale * env.cauchy(zeta - omega_p + 0.5j * gamma0) / l1

        c2 = -scale
    else:
        extra, d_norm = _exact_weights(dist, env, omega_p)
        gamma0 = cavity.gamma0

        def eval_T(zeta):
            W, N = _node_sums(dist, gamma0, zeta, extra=extra)
            t1 = 1j / (zeta - cavity.omega_c + 0.5j * cavity.kappa - W)
            return 1j * t1 * N / d_norm

        c2 = -float(np.sum(extra)) / d_norm

    beta = _invert_on_grid(
        eval_T, c2, p1, p2, times, settings, window, eta, d_omega, window_fixed
    )
    return TransferResult(omega_p=float(omega_p), times=times, beta=beta, method="contour")


def _invert_cavity_response(
    dist: SpinDistribution,
    cavity: CavityModel,
    times,
    settings: Optional[InversionSettings] = None,
) -> TransferResult:
    """Cavity correlation <a(t) a†(0)> by contour inversion of t1.

    Cross-check companion to the time-domain route; the bare-cavity pole is
    subtracted analytically (T - i/(zeta - p1) decays like 1/zeta^3).
    """
    _require_dissipation(cavity)
    settings = settings or InversionSettings()
    times = np.atleast_1d(np.asarray(times, dtype=float))
    t_max = float(times.max())
    if t_max <= 0:
        raise ValueError("times must reach beyond t = 0")
    eta, d_omega = _grid_controls(settings, t_max, dist, cavity)
    window_fixed = settings.window is not None
    window = settings.window or _auto_window(dist, cavity, 0.0, [])
    p1 = cavity.omega_c - 0.5j * cavity.kappa
    gamma0 = cavity.gamma0

    lo, hi = window
    for attempt in range(settings.max_growth + 1):
        omega = _contour_grid(lo, hi, d_omega)
        n = omega.size
        zeta = omega + 1j * eta
        W, _ = _node_sums(dist, gamma0, zeta)
        T = 1j / (zeta - cavity.omega_c + 0.5j * cavity.kappa - W)
        R = T - 1j / (zeta - p1)
        peak = float(np.max(np.abs(T)))
        edge = float(max(abs(R[0]), abs(R[-1])))
        if edge <= settings.edge_ratio * peak:
            break
        if window_fixed or attempt == settings.max_growth:
            raise WindowTooSmallError(
                f"inversion window [{lo:.6g}, {hi:.6g}] rad/s too small for t1"
            )
        center = 0.5 * (lo + hi)
        half = 0.5 * (hi - lo) * settings.growth
        lo, hi = center - half, center + half

    w_trap = np.full(n, omega[1] - omega[0])
    w_trap[0] *= 0.5
    w_trap[-1] *= 0.5
    integ = R * w_trap
    omega_ref = 0.5 * (omega[0] + omega[-1])
    du = omega - omega_ref
    beta = np.empty(times.shape, dtype=complex)
    step = max(1, 4_000_000 // n)
    for s in range(0, times.size, step):
        t_chunk = times[s : s + step]
        phases = np.exp(-1j * np.outer(t_chunk, du))
        beta[s : s + step] = (phases @ integ) * np.exp((eta - 1j * omega_ref) * t_chunk) / (
            2.0 * math.pi
        )
    beta += np.exp(-1j * p1 * times)
    return TransferResult(omega_p=float("nan"), times=times, beta=beta, method="contour")


def transfer_sweep(
    dist: SpinDistribution,
    cavity: CavityModel,
    env: PulseEnvelope,
    omega_ps,
    tau: float,
    mode: str = MODE_NARROW,
    settings: Optional[InversionSettings] = None,
    threads: int = 1,
) -> np.ndarray:
    """beta(omega_p, tau) for many pump frequencies at one interaction time.

    Shares the inversion grid and the cavity response t1 across the sweep;
    in narrow-pulse mode each point then costs O(n_grid).  Points are
    independent, so results are identical for any thread count.
    """
    if mode not in _MODES:
        raise ValueError(f"mode must be one of {_MODES}")
    _require_dissipation(cavity)
    settings = settings or InversionSettings()
    omega_ps = np.asarray(omega_ps, dtype=float)
    if not tau > 0:
        raise ValueError("tau must be positive")
    eta, d_omega = _grid_controls(settings, float(tau), dist, cavity)
    window_fixed = settings.window is not None
    window = settings.window or _auto_window(
        dist, cavity, env.bandwidth_scale, [omega_ps.min(), omega_ps.max()]
    )
    if mode == MODE_NARROW:
        _check_narrow(dist, env)
    gamma0 = cavity.gamma0
    p1 = cavity.omega_c - 0.5j * cavity.kappa

    lo, hi = window
    for attempt in range(settings.max_growth + 1):
        omega = _contour_grid(lo, hi, d_omega)
        n = omega.size
        zeta = omega + 1j * eta
        W, _ = _node_sums(dist, gamma0, zeta)
        t1 = 1j / (zeta - cavity.omega_c + 0.5j * cavity.kappa - W)
        # edge screening: check the subtracted integrand at both edges for the
        # outermost pump frequencies (worst cases for window truncation)
        worst = [float(omega_ps.min()), float(omega_ps.max())]
        edge_ok = True
        for wp in worst:
            p2 = _pump_pole(cavity, env, wp)
            if mode == MODE_NARROW:
                scale = _narrow_scale(dist, env, wp)
                c2 = -scale
                Tedge = (
                    1j
                    * t1[[0, -1]]
                    * scale
                    * env.cauchy(zeta[[0, -1]] - wp + 0.5j * gamma0)
                    / env.norm_l1
                )
            else:
                extra, d_norm = _exact_weights(dist, env, wp)
                _, Ne = _node_sums(dist, gamma0, zeta[[0, -1]], extra=extra)
                c2 = -float(np.sum(extra)) / d_norm
                Tedge = 1j * t1[[0, -1]] * Ne / d_norm
            far = c2 / ((zeta[[0, -1]] - p1) * (zeta[[0, -1]] - p2))
            peak_guess = max(
                float(np.max(np.abs(t1))) * abs(c2) / (eta + env.bandwidth_scale), 1e-300
            )
            if float(np.max(np.abs(Tedge - far))) > settings.edge_ratio * peak_guess:
                edge_ok = False
                break
        if edge_ok:
            break
        if window_fixed or attempt == settings.max_growth:
            raise WindowTooSmallError(
                f"sweep window [{lo:.6g}, {hi:.6g}] rad/s too small"
            )
        center = 0.5 * (lo + hi)
        half = 0.5 * (hi - lo) * settings.growth
        lo, hi = center - half, center + half

    w_trap = np.full(n, omega[1] - omega[0])
    w_trap[0] *= 0.5
    w_trap[-1] *= 0.5
    omega_ref = 0.5 * (omega[0] + omega[-1])
    phases = np.exp(-1j * tau * (omega - omega_ref)) * w_trap
    pref = np.exp((eta - 1j * omega_ref) * tau) / (2.0 * math.pi)

    def one_point(wp: float) -> complex:
        p2 = _pump_pole(cavity, env, wp)
        if mode == MODE_NARROW:
            scale = _narrow_scale(dist, env, wp)
            c2 = -scale
            T = 1j * t1 * scale * env.cauchy(zeta - wp + 0.5j * gamma0) / env.norm_l1
        else:
            extra, d_norm = _exact_weights(dist, env, wp)
            _, N = _node_sums(dist, gamma0, zeta, extra=extra)
            c2 = -float(np.sum(extra)) / d_norm
            T = 1j * t1 * N / d_norm
        R = T - c2 / ((zeta - p1) * (zeta - p2))
        val = pref * np.dot(phases, R)
        if p1 == p2:
            val += -1j * c2 * tau * np.exp(-1j * p1 * tau)
        else:
            val += (-1j * c2 / (p1 - p2)) * (
                np.exp(-1j * p1 * tau) - np.exp(-1j * p2 * tau)
            )
        return val

    out = np.empty(omega_ps.shape, dtype=complex)
    if threads <= 1 or omega_ps.size <= 2:
        for i, wp in enumerate(omega_ps):
            out[i] = one_point(float(wp))
    else:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=threads) as ex:
            for i, val in enumerate(ex.map(one_point, [float(w) for w in omega_ps])):
                out[i] = val
    return out


# ---------------------------------------------------------------------------
# time-domain oracle


def _initial_vector(
    dist: SpinDistribution,
    initial: str,
    env: Optional[PulseEnvelope],
    omega_p: Optional[float],
) -> np.ndarray:
    n = dist.n_nodes
    x0 = np.zeros(n + 1, dtype=complex)
    if initial == "cavity":
        x0[0] = 1.0
        return x0
    if initial == "pulse":
        if env is None or omega_p is None:
            raise ValueError("pulse-excited start requires env and omega_p")
        alpha = env.amplitude(dist.omega_nodes - omega_p)
        g = dist.g_collective * np.sqrt(dist.weights)
        norm_sq = float(np.sum((alpha * g) ** 2))
        if not norm_sq > 0.0:
            raise ValueError("pulse envelope has no overlap with the spectral grid")
        x0[1:] = alpha * g / math.sqrt(norm_sq)
        return x0
    raise ValueError("initial must be 'cavity' or 'pulse'")


def _propagate_state(
    dist: SpinDistribution,
    cavity: CavityModel,
    x0: np.ndarray,
    times: np.ndarray,
    rtol: float,
    atol: float,
):
    """Propagate dX/dt = -i M X in the frame rotating at omega_c.

    Returns the full state matrix Y with shape (n_nodes + 1, n_times); the
    lab-frame amplitudes are Y * exp(-i omega_c t).  The arrow structure of M
    keeps each right-hand side O(N).
    """
    g = dist.g_collective * np.sqrt(dist.weights)
    det = dist.omega_nodes - cavity.omega_c
    diag_spins = -1j * det - 0.5 * cavity.gamma0
    diag_cav = -0.5 * cavity.kappa

    def rhs(t, y):
        dy = np.empty_like(y)
        dy[0] = diag_cav * y[0] + np.dot(g, y[1:])
        dy[1:] = diag_spins * y[1:] - g * y[0]
        return dy

    t_max = float(times.max())
    sol = solve_ivp(
        rhs,
        (0.0, t_max),
        x0,
        method="DOP853",
        t_eval=times,
        rtol=rtol,
        atol=atol,
    )
    if not sol.success:
        raise RuntimeError(f"time-domain propagation failed: {sol.message}")
    return sol.y


def time_domain_propagate(
    dist: SpinDistribution,
    cavity: CavityModel,
    initial: str,
    times,
    env: Optional[PulseEnvelope] = None,
    omega_p: Optional[float] = None,
    rtol: float = 1e-9,
    atol: float = 1e-12,
    max_nodes: int = 200_000,
) -> TransferResult:
    """Brute-force transfer amplitude by direct ODE propagation.

    initial = "cavity" starts from X = (1, 0, ..., 0); initial = "pulse"
    starts from the pulse-excited spin packet X_j(0) proportional to
    alpha(w_j - w_p) g_j, normalized.  Works for lossless systems too
    (kappa = gamma0 = 0), unlike the contour route.
    """
    if dist.n_nodes > max_nodes:
        raise ValueError(
            f"n_nodes = {dist.n_nodes} exceeds the memory budget ({max_nodes}); "
            "reduce the grid or raise max_nodes"
        )
    times = np.atleast_1d(np.asarray(times, dtype=float))
    if times.size == 0 or np.any(times < 0) or np.any(np.diff(times) < 0):
        raise ValueError("times must be non-negative and non-decreasing")
    x0 = _initial_vector(dist, initial, env, omega_p)
    y = _propagate_state(dist, cavity, x0, times, rtol, atol)
    beta = y[0] * np.exp(-1j * cavity.omega_c * times)
    return TransferResult(
        omega_p=float(omega_p) if omega_p is not None else float("nan"),
        times=times,
        beta=beta,
        method="time-domain",
    )
