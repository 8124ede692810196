"""Closed-form predictions for heralded-source rates and CAR.

The central quantity is the coincidence-to-accidental ratio of a single
channel.  With a coincidence probability per pulse ``c``, net arm
efficiencies ``eta_s`` (signal) and ``eta_i`` (idler), and per-gate dark
probabilities ``d_i`` (herald arm) and ``d_s`` (output arm),

    car = c / ((c/eta_s + d_i) * (c/eta_i + d_s))

where ``c/eta_s + d_i`` is the herald singles probability and
``c/eta_i + d_s`` the gated output singles probability.  The curve is
unimodal in ``c`` with an interior maximum at

    c* = sqrt(eta_s * eta_i * d_i * d_s)

The mux predictor extends the same first-order bookkeeping to N channels
behind a switch tree: it is accurate while the per-pulse herald
probabilities stay small (mu * eta_i << 1).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Optional, Sequence

import numpy as np

from .model import (
    MuxTopology,
    Scenario,
    dark_prob_per_gate,
    db_to_transmission,
)

SPEED_OF_LIGHT_M_S = 299792458.0

# relative tolerance on the peak CAR reached by fit_dark_signal
FIT_RELATIVE_TOL = 1e-6
_FIT_DARK_LO = 1e-12
_FIT_DARK_HI = 1.0


def car(
    coincidence_prob: float,
    signal_eff: float,
    idler_eff: float,
    idler_dark_prob: float,
    signal_dark_prob: float,
) -> float:
    """Coincidence-to-accidental ratio of a single heralded channel.

    Raises ValueError for a dark-free channel at zero coincidence
    probability, where the ratio is undefined.
    """
    _check_channel_params(signal_eff, idler_eff, idler_dark_prob, signal_dark_prob)
    if coincidence_prob < 0.0:
        raise ValueError("coincidence probability must be >= 0")
    if coincidence_prob == 0.0:
        if idler_dark_prob > 0.0 or signal_dark_prob > 0.0:
            return 0.0
        raise ValueError(
            "CAR is undefined at zero coincidence probability with no dark counts")
    herald_singles = coincidence_prob / signal_eff + idler_dark_prob
    output_singles = coincidence_prob / idler_eff + signal_dark_prob
    return coincidence_prob / (herald_singles * output_singles)


class OperatingPoint(NamedTuple):
    coincidence_prob: float
    car: float


def optimal_operating_point(
    signal_eff: float,
    idler_eff: float,
    idler_dark_prob: float,
    signal_dark_prob: float,
) -> OperatingPoint:
    """Interior maximum of the CAR curve over the coincidence probability.

    Setting d(car)/dc = 0 gives c* = sqrt(eta_s eta_i d_i d_s).  Without
    dark counts the curve rises monotonically towards c -> 0 and there is
    no interior maximum.
    """
    _check_channel_params(signal_eff, idler_eff, idler_dark_prob, signal_dark_prob)
    if idler_dark_prob == 0.0 or signal_dark_prob == 0.0:
        raise ValueError("no interior maximum: both dark probabilities must be > 0")
    c_star = math.sqrt(signal_eff * idler_eff * idler_dark_prob * signal_dark_prob)
    return OperatingPoint(c_star, car(c_star, signal_eff, idler_eff,
                                      idler_dark_prob, signal_dark_prob))


def fit_dark_signal(
    car_max_target: float,
    signal_eff: float,
    idler_eff: float,
    idler_dark_prob: float,
) -> float:
    """Output-arm dark probability whose peak CAR equals the target.

    The peak CAR decreases monotonically in the output dark probability, so
    a bisection over [1e-12, 1] converges; iteration stops once the achieved
    peak is within 1e-6 relative of the target.  Raises ValueError when the
    target lies outside the achievable range, reporting the bound.
    """
    if car_max_target <= 1.0:
        raise ValueError("target peak CAR must exceed 1")
    _check_channel_params(signal_eff, idler_eff, idler_dark_prob, 0.0)
    if idler_dark_prob == 0.0:
        raise ValueError("herald dark probability must be > 0 for the fit")

    def peak(dark: float) -> float:
        return optimal_operating_point(signal_eff, idler_eff,
                                       idler_dark_prob, dark).car

    lo, hi = _FIT_DARK_LO, _FIT_DARK_HI
    top, bottom = peak(lo), peak(hi)
    if car_max_target > top:
        raise ValueError(
            f"target peak CAR {car_max_target:g} unreachable: "
            f"at most {top:g} for this channel")
    if car_max_target < bottom:
        raise ValueError(
            f"target peak CAR {car_max_target:g} unreachable: "
            f"at least {bottom:g} even at unit dark probability")
    mid = math.sqrt(lo * hi)
    for _ in range(200):
        mid = math.sqrt(lo * hi)
        achieved = peak(mid)
        if abs(achieved - car_max_target) <= FIT_RELATIVE_TOL * car_max_target:
            return mid
        if achieved > car_max_target:
            lo = mid
        else:
            hi = mid
    raise RuntimeError("dark-count bisection failed to converge")


def coincidence_per_pulse(
    mean_pairs: float, signal_eff: float, idler_eff: float
) -> float:
    """First-order coincidence probability per pulse, mu * eta_s * eta_i."""
    if mean_pairs < 0.0:
        raise ValueError("mean pairs per pulse must be >= 0")
    _check_channel_params(signal_eff, idler_eff, 0.0, 0.0)
    return mean_pairs * signal_eff * idler_eff


def rate_hz(prob_per_pulse_value: float, rep_rate_hz: float) -> float:
    """Convert a per-pulse probability to an event rate in Hz."""
    if not 0.0 <= prob_per_pulse_value <= 1.0:
        raise ValueError("per-pulse probability must be in [0, 1]")
    if rep_rate_hz <= 0.0:
        raise ValueError("repetition rate must be > 0")
    return prob_per_pulse_value * rep_rate_hz


def prob_per_pulse(event_rate_hz: float, rep_rate_hz: float) -> float:
    """Convert an event rate in Hz to a per-pulse probability."""
    if event_rate_hz < 0.0:
        raise ValueError("rate must be >= 0")
    if rep_rate_hz <= 0.0:
        raise ValueError("repetition rate must be > 0")
    value = event_rate_hz / rep_rate_hz
    if value > 1.0:
        raise ValueError("rate exceeds one event per pulse")
    return value


# ---------------------------------------------------------------------------
# multiplexed prediction
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AnalyticChannel:
    """Per-channel inputs to the analytic pipeline.

    Efficiencies exclude the switch tree, which the topology contributes
    separately.  ``coincidence_prob`` must not exceed eta_s * eta_i, the
    value reached at one pair per pulse.
    """

    coincidence_prob: float
    signal_eff: float
    idler_eff: float
    idler_dark_prob: float
    signal_dark_prob: float

    def __post_init__(self) -> None:
        _check_channel_params(self.signal_eff, self.idler_eff,
                              self.idler_dark_prob, self.signal_dark_prob)
        if self.coincidence_prob < 0.0:
            raise ValueError("coincidence_prob must be >= 0")
        if self.coincidence_prob > self.signal_eff * self.idler_eff:
            raise ValueError(
                "coincidence_prob exceeds eta_s * eta_i, more than one pair per pulse")

    def herald_prob(self) -> float:
        """Per-pulse herald click probability, true pairs plus darks."""
        return self.coincidence_prob / self.signal_eff + self.idler_dark_prob


@dataclass(frozen=True)
class MuxPrediction:
    """First-order expectation values for a multiplexed arrangement."""

    herald_prob_per_pulse: float
    coincidence_prob_per_pulse: float
    accidental_prob_per_pulse: float
    car: float
    selection_probs: tuple[float, ...]


def mux_prediction(
    channels: Sequence[AnalyticChannel], topology: MuxTopology
) -> MuxPrediction:
    """Expected rates and CAR for N channels behind a switch tree.

    ``channels`` must be ordered like ``topology.policy`` (highest routing
    priority first).  In each pulse slot the highest-priority channel whose
    herald clicked is routed; channel i is therefore selected with
    probability s_i = h_i * prod_{j<i} (1 - h_j).  A selected true pair
    contributes a coincidence through its signal efficiency and switch
    path, while the accidental term pairs the selection with the channel's
    unconditional gated singles.  For a single switchless channel this
    reduces bit-for-bit to the plain CAR pipeline.

    Validity: first order in the herald probabilities, i.e. mu * eta_i << 1.
    """
    if len(channels) == 0:
        raise ValueError("mux prediction needs at least one channel")
    if len(channels) != topology.num_channels:
        raise ValueError("channel list does not match topology.num_channels")

    herald_probs = [ch.herald_prob() for ch in channels]
    for i, h in enumerate(herald_probs):
        if h > 1.0:
            raise ValueError(
                f"channel {i}: herald probability {h:g} exceeds 1, "
                "outside the model's validity range")

    selection = []
    coincidence = 0.0
    accidental = 0.0
    shadow = 1.0  # probability that no higher-priority channel heralded
    for label, ch, h in zip(topology.policy, channels, herald_probs):
        path_trans = topology.path_transmission(label)
        s = h * shadow
        selection.append(s)
        coincidence += shadow * ch.coincidence_prob * path_trans
        gated_singles = ((ch.coincidence_prob / ch.idler_eff) * path_trans
                         + ch.signal_dark_prob)
        accidental += s * gated_singles
        shadow *= 1.0 - h

    herald_prob_total = sum(selection)
    if accidental > 0.0:
        predicted_car = coincidence / accidental
    elif coincidence > 0.0:
        predicted_car = math.inf
    else:
        predicted_car = math.nan
    return MuxPrediction(
        herald_prob_per_pulse=herald_prob_total,
        coincidence_prob_per_pulse=coincidence,
        accidental_prob_per_pulse=accidental,
        car=predicted_car,
        selection_probs=tuple(selection),
    )


def channels_from_scenario(
    scenario: Scenario, mu_scale: float = 1.0
) -> tuple[AnalyticChannel, ...]:
    """Build the analytic channel list, ordered by routing priority.

    Arm efficiencies fold in the detector efficiency fields; switch-tree
    transmission is left to the topology.  ``mu_scale`` multiplies every
    channel's mean pair number (a common pump-power scale).
    """
    if mu_scale < 0.0:
        raise ValueError("mu_scale must be >= 0")
    rep = scenario.laser.rep_rate_hz
    signal_dark = dark_prob_per_gate(scenario.heralded_detector.dark_rate_hz, rep)
    out = []
    for label in scenario.topology.policy:
        ch = scenario.channel(label)
        herald_det = scenario.herald_detector(label)
        idler_eff = db_to_transmission(ch.idler_loss_db) * herald_det.efficiency
        signal_eff = (db_to_transmission(ch.signal_loss_db)
                      * scenario.heralded_detector.efficiency)
        out.append(AnalyticChannel(
            coincidence_prob=coincidence_per_pulse(
                ch.mean_pairs_per_pulse * mu_scale, signal_eff, idler_eff),
            signal_eff=signal_eff,
            idler_eff=idler_eff,
            idler_dark_prob=dark_prob_per_gate(herald_det.dark_rate_hz, rep),
            signal_dark_prob=signal_dark,
        ))
    return tuple(out)


# ---------------------------------------------------------------------------
# spectral model
# ---------------------------------------------------------------------------

def central_wavelength(temperature_k: float, spectral) -> float:
    """Signal/idler degeneracy wavelength at a crystal temperature, in nm.

    Linear tuning around the reference point:
    lambda(T) = center + slope * (T - T_ref).
    """
    if temperature_k <= 0.0:
        raise ValueError("temperature must be > 0 K")
    return (spectral.center_wavelength_nm
            + spectral.tuning_slope_nm_per_k
            * (temperature_k - spectral.temperature_ref_k))


def bandwidth_nm_to_ghz(bandwidth_nm: float, wavelength_nm: float) -> float:
    """Convert a wavelength span to a frequency span at a carrier."""
    if bandwidth_nm <= 0.0 or wavelength_nm <= 0.0:
        raise ValueError("bandwidths and wavelengths must be > 0")
    wavelength_m = wavelength_nm * 1e-9
    return SPEED_OF_LIGHT_M_S * bandwidth_nm * 1e-9 / wavelength_m ** 2 / 1e9


def _gaussian_profile(detuning_ghz, fwhm_ghz: float):
    # unnormalized Gaussian, peak 1; normalization cancels in the ratio
    return np.exp(-4.0 * math.log(2.0) * (detuning_ghz / fwhm_ghz) ** 2)


def spectral_overlap_factor(spectral, quad_points: int = 200) -> float:
    """Fraction of heralded signal photons passing the signal filter.

    The pump envelope (Gaussian, FWHM = pump bandwidth) pumps pairs whose
    idler detuning is drawn within the phase-matching acceptance (Gaussian,
    FWHM converted from nm at the center wavelength).  Energy conservation
    fixes the signal detuning as pump minus idler.  Heralding post-selects
    on the idler filter; the returned factor is the heralded average of the
    signal filter transmission, computed by Gauss-Legendre quadrature:

        factor = int g_p(p) a(i) T_i(i) T_s(p - i) / int g_p(p) a(i) T_i(i)

    All profiles are Gaussian in intensity.  The factor is 1 in the limit
    of a wide signal filter and decreases as the pump broadens.
    """
    pump_fwhm = spectral.pump_bandwidth_ghz
    idler_fwhm = spectral.idler_filter_bandwidth_ghz
    signal_fwhm = spectral.signal_filter_bandwidth_ghz
    accept_fwhm = bandwidth_nm_to_ghz(spectral.phasematch_bandwidth_nm,
                                      spectral.center_wavelength_nm)

    # integration half-widths: cover the narrower of acceptance and filter
    # on the idler axis, the pump envelope on the pump axis
    pump_half = 3.0 * pump_fwhm
    idler_half = 3.0 * min(accept_fwhm, idler_fwhm)

    nodes, weights = np.polynomial.legendre.leggauss(quad_points)
    pump_grid = nodes * pump_half
    idler_grid = nodes * idler_half

    pump_weight = _gaussian_profile(pump_grid, pump_fwhm) * weights * pump_half
    idler_weight = (_gaussian_profile(idler_grid, accept_fwhm)
                    * _gaussian_profile(idler_grid, idler_fwhm)
                    * weights * idler_half)

    signal_detuning = pump_grid[:, None] - idler_grid[None, :]
    if math.isinf(signal_fwhm):
        signal_trans = np.ones_like(signal_detuning)
    else:
        signal_trans = _gaussian_profile(signal_detuning, signal_fwhm)

    base = pump_weight[:, None] * idler_weight[None, :]
    denominator = float(base.sum())
    numerator = float((base * signal_trans).sum())
    if denominator <= 0.0:
        raise ValueError("degenerate spectral configuration, zero heralding weight")
    return numerator / denominator


def _check_channel_params(
    signal_eff: float,
    idler_eff: float,
    idler_dark_prob: float,
    signal_dark_prob: float,
) -> None:
    if not 0.0 < signal_eff <= 1.0:
        raise ValueError(f"signal efficiency must be in (0, 1], got {signal_eff}")
    if not 0.0 < idler_eff <= 1.0:
        raise ValueError(f"idler efficiency must be in (0, 1], got {idler_eff}")
    if not 0.0 <= idler_dark_prob <= 1.0:
        raise ValueError(
            f"idler dark probability must be in [0, 1], got {idler_dark_prob}")
    if not 0.0 <= signal_dark_prob <= 1.0:
        raise ValueError(
            f"signal dark probability must be in [0, 1], got {signal_dark_prob}")
