"""Scan-time-dependent detection: minimum SNR, maximum range, and the
coverage metric Gamma.

The radar sweeps 360/phi beams per cycle, so each beam integrates for
tau_beam = tau_scan * phi / 360. Detection range follows the radar range
equation at the minimum post-integration SNR required for (P_d, P_f);
Gamma = (r_max / r0)^2 compares the covered area against a reference.

Default radar constants are calibrated (not physical): transmit power is
solved so that r_max equals the reference range exactly when the scan gets
the time left over after a full tracking budget. Gamma is then the pure
dimensionless law sqrt(tau_scan / tau_scan_ref).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

BOLTZMANN = 1.380649e-23  # J/K, exact SI value

FOUR_PI_CUBED = (4.0 * math.pi) ** 3


def snr_min(p_d: float, p_f: float, n_pulses: int = 1) -> float:
    """Minimum single-look SNR (dB) for the required (P_d, P_f), by
    Albersheim's approximation for a nonfluctuating target.

    Accurate to a few tenths of a dB inside the validity region
    1e-7 <= P_f <= 1e-3, 0.1 <= P_d <= 0.9999.
    """
    if not 1e-7 <= p_f <= 1e-3:
        raise ValueError(f"P_f={p_f} outside Albersheim validity range [1e-7, 1e-3]")
    if not 0.1 <= p_d <= 0.9999:
        raise ValueError(f"P_d={p_d} outside Albersheim validity range [0.1, 0.9999]")
    a = math.log(0.62 / p_f)
    b = math.log(p_d / (1.0 - p_d))
    z = a + 0.12 * a * b + 1.7 * b
    return (6.2 + 4.54 / math.sqrt(n_pulses + 0.44)) * math.log10(z)


@dataclass(frozen=True)
class DetectionSpec:
    """Required detection/false-alarm probabilities and the implied SNR."""

    p_d: float = 0.9
    p_f: float = 1e-3

    def __post_init__(self):
        if not 0.0 < self.p_f < self.p_d < 1.0:
            raise ValueError(f"need 0 < P_f < P_d < 1, got P_f={self.p_f}, P_d={self.p_d}")

    @property
    def snr_min_db(self) -> float:
        return snr_min(self.p_d, self.p_f)

    @property
    def snr_min_linear(self) -> float:
        return 10.0 ** (self.snr_min_db / 10.0)


def beam_duration(tau_scan: float, beam_step_deg: float) -> float:
    """Per-beam integration time when tau_scan is split over 360/phi beams."""
    if tau_scan < 0:
        raise ValueError("tau_scan must be non-negative")
    if beam_step_deg <= 0:
        raise ValueError("beam_step_deg must be positive")
    return tau_scan * beam_step_deg / 360.0


@dataclass(frozen=True)
class RadarParams:
    """Radar-equation constants plus beam geometry and the reference range."""

    transmit_power: float
    gain_tx: float = 1e3
    gain_rx: float = 1e3
    wavelength: float = 0.03
    cross_section: float = 1.0
    loss: float = 10.0
    system_temperature: float = 500.0
    beam_step_deg: float = 3.6
    reference_range: float = 10e3

    def __post_init__(self):
        for name in (
            "transmit_power",
            "gain_tx",
            "gain_rx",
            "wavelength",
            "cross_section",
            "loss",
            "system_temperature",
            "beam_step_deg",
            "reference_range",
        ):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be strictly positive")
        beams = 360.0 / self.beam_step_deg
        if abs(beams - round(beams)) > 1e-9:
            raise ValueError(f"beam_step_deg={self.beam_step_deg} must divide 360 evenly")

    @classmethod
    def calibrated(
        cls,
        spec: DetectionSpec,
        reference_range: float = 10e3,
        tau_scan_ref: float = 0.25,
        **overrides,
    ) -> "RadarParams":
        """Solve transmit power so r_max(tau_scan_ref) == reference_range."""
        base = cls(transmit_power=1.0, reference_range=reference_range, **overrides)
        tau_beam = beam_duration(tau_scan_ref, base.beam_step_deg)
        power = (
            FOUR_PI_CUBED
            * base.loss
            * BOLTZMANN
            * base.system_temperature
            * spec.snr_min_linear
            * reference_range**4
            / (tau_beam * base.gain_tx * base.gain_rx * base.wavelength**2 * base.cross_section)
        )
        return cls(transmit_power=power, reference_range=reference_range, **overrides)


def scan_snr(params: RadarParams, r: float, tau_beam: float) -> float:
    """Post-integration SNR (linear) at range r for one beam dwell."""
    if r <= 0:
        raise ValueError("range must be positive")
    return (
        params.transmit_power
        * tau_beam
        * params.gain_tx
        * params.gain_rx
        * params.wavelength**2
        * params.cross_section
        / (
            FOUR_PI_CUBED
            * r**4
            * params.loss
            * BOLTZMANN
            * params.system_temperature
        )
    )


def max_range(params: RadarParams, spec: DetectionSpec, tau_beam: float) -> float:
    """Maximum detectable range for one beam dwell; zero when tau_beam = 0."""
    if tau_beam < 0:
        raise ValueError("tau_beam must be non-negative")
    if tau_beam == 0.0:
        return 0.0
    num = (
        params.transmit_power
        * tau_beam
        * params.gain_tx
        * params.gain_rx
        * params.wavelength**2
        * params.cross_section
    )
    den = FOUR_PI_CUBED * params.loss * BOLTZMANN * params.system_temperature * spec.snr_min_linear
    return (num / den) ** 0.25


def gamma(params: RadarParams, spec: DetectionSpec, tau_scan: float) -> float:
    """Coverage metric: squared ratio of max detectable range to reference."""
    r = max_range(params, spec, beam_duration(tau_scan, params.beam_step_deg))
    return (r / params.reference_range) ** 2


def detect_new_targets(
    truth,
    tracked_ids,
    params: RadarParams,
    spec: DetectionSpec,
    tau_scan: float,
    rng=None,
    *,
    baseline_cov=None,
    detect_draws=None,
    meas_units=None,
    slot_index: int = -1,
):
    """Bernoulli(P_d) detection of untracked targets inside r_max(tau_scan).

    Detections come back as measurements with baseline noise. `detect_draws`
    and `meas_units` (keyed by a target's slot) replace the rng for
    common-random-number evaluation.

    Returns a list of (truth, Measurement) pairs.
    """
    from .scenario import measure  # local import to avoid cycle at module load

    if baseline_cov is None:
        baseline_cov = np.diag([16.0, 1e-6])
    r_max = max_range(params, spec, beam_duration(tau_scan, params.beam_step_deg))
    out = []
    for target in truth:
        if target.id in tracked_ids:
            continue
        r = math.hypot(target.state[0], target.state[1])
        if r > r_max:
            continue
        if detect_draws is not None:
            u = detect_draws[target.slot]
        else:
            u = rng.uniform()
        if u >= spec.p_d:
            continue
        unit = meas_units[target.slot] if meas_units is not None else None
        out.append(
            (
                target,
                measure(
                    target.state,
                    baseline_cov,
                    rng,
                    unit=unit,
                    source_id=target.id,
                    slot=slot_index,
                ),
            )
        )
    return out
