"""Time-varying wideband multipath channel synthesis on an OFDM grid.

The channel between one transmit port and the receiver is a sum over
propagation paths,

    H(f, t) = sum_n  a_n * a_tr * exp(j*phi_n) * exp(-j*2*pi*f_c*tau_n)
              * exp(-j*2*pi*f*dtau_n) * exp(j*k_t.r_t) * exp(j*k_r.r_r)
              * exp(j*(k_r.v_r)*t),

with baseband frequency f, carrier f_c, path delay tau_n, relative delay
dtau_n, departure/arrival wave vectors k_t/k_r of magnitude 2*pi*f_c/c,
and receiver velocity v_r.  A "drop" fixes one random realization of the
path set; the grid spec fixes the OFDM time-frequency sampling.

Randomized drops use exponential delays, an exponential power-delay
profile, horizontal-ring arrival directions (Clarke's 2D isotropic
scattering, giving the classical J0 Doppler autocorrelation),
sphere-uniform departure directions and an optional Rician dominant path.
The transmit array is a vertical column of n_t/2 dual-polarized elements
at 0.7 wavelength spacing; per-port geometry enters as per-path static
phase offsets.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ConfigurationError, UnboundedCoherenceError

SPEED_OF_LIGHT = 299_792_458.0


@dataclass(frozen=True)
class GridSpec:
    """OFDM time-frequency sampling grid for one slot.

    ``slot_period`` is the spacing between consecutive slot starts; None
    means contiguous slots (= ``slot_duration``).  Baseband subcarrier
    offsets are centered: f_j = (j - F/2) * subcarrier_spacing.
    """

    num_subcarriers: int = 64
    num_symbols: int = 8
    subcarrier_spacing: float = 15e3
    slot_duration: float = 1e-3
    carrier_frequency: float = 3.5e9
    num_tx_ports: int = 8
    slot_period: float | None = None

    def __post_init__(self):
        if self.num_subcarriers < 1 or self.num_symbols < 1 or self.num_tx_ports < 1:
            raise ConfigurationError("grid dimensions must be >= 1")
        if self.subcarrier_spacing <= 0 or self.slot_duration <= 0:
            raise ConfigurationError("subcarrier_spacing and slot_duration must be > 0")
        if self.carrier_frequency <= 0:
            raise ConfigurationError("carrier_frequency must be > 0")
        if self.slot_period is not None and self.slot_period <= 0:
            raise ConfigurationError("slot_period must be > 0 when given")

    @property
    def wavelength(self) -> float:
        return SPEED_OF_LIGHT / self.carrier_frequency

    @property
    def wavenumber(self) -> float:
        """Magnitude of the wave vectors, 2*pi/lambda."""
        return 2.0 * math.pi * self.carrier_frequency / SPEED_OF_LIGHT

    @property
    def effective_slot_period(self) -> float:
        return self.slot_duration if self.slot_period is None else self.slot_period

    def subcarrier_offsets(self) -> np.ndarray:
        """Centered baseband frequency of every subcarrier, in Hz."""
        j = np.arange(self.num_subcarriers, dtype=np.float64)
        return (j - self.num_subcarriers / 2.0) * self.subcarrier_spacing

    def symbol_times(self, slot_index: int) -> np.ndarray:
        """Absolute time of every OFDM symbol in the given slot."""
        start = slot_index * self.effective_slot_period
        i = np.arange(self.num_symbols, dtype=np.float64)
        return start + i * (self.slot_duration / self.num_symbols)


def full_grid(num_tx_ports: int = 8) -> GridSpec:
    """Full-resolution 5G numerology grid (600 subcarriers, 14 symbols)."""
    return GridSpec(num_subcarriers=600, num_symbols=14, num_tx_ports=num_tx_ports)


@dataclass(frozen=True, eq=False)
class PathParams:
    """One propagation path as seen from one transmit port."""

    delay: float                     # tau_n, seconds
    relative_delay: float            # dtau_n = tau_n - min_j tau_j
    amplitude: float                 # a_n, linear
    antenna_gain: float              # a_tr, linear
    departure_direction: np.ndarray  # k_t,n, rad/m, |k| = 2*pi*f_c/c
    arrival_direction: np.ndarray    # k_r,n, rad/m
    static_phase: float              # rad

    def __post_init__(self):
        if self.delay < 0 or self.relative_delay < 0:
            raise ConfigurationError("path delays must be >= 0")
        if self.amplitude < 0 or self.antenna_gain < 0:
            raise ConfigurationError("path amplitude and antenna gain must be >= 0")


@dataclass(frozen=True, eq=False)
class DropParams:
    """One simulation drop: per-port path sets plus geometry.

    ``paths[p]`` holds the path list of transmit port p; ports share path
    delays/amplitudes/directions and differ only in static phases (array
    geometry and polarization offsets folded in at sampling time).
    """

    grid: GridSpec
    paths: tuple[tuple[PathParams, ...], ...]
    tx_position: np.ndarray
    rx_position: np.ndarray
    rx_velocity: np.ndarray
    rng_seed: int

    def __post_init__(self):
        if len(self.paths) != self.grid.num_tx_ports:
            raise ConfigurationError("one path list per tx port required")
        k_mag = self.grid.wavenumber
        for port_paths in self.paths:
            if len(port_paths) == 0:
                raise ConfigurationError("at least one path per port required")
            for p in port_paths:
                for k in (p.departure_direction, p.arrival_direction):
                    if abs(np.linalg.norm(k) - k_mag) > 1e-9 * k_mag:
                        raise ConfigurationError(
                            "direction vector magnitude must equal 2*pi*f_c/c"
                        )


@dataclass(frozen=True)
class DropConfig:
    """Randomized-drop sampling configuration.

    ``num_paths`` is an inclusive [lo, hi] range; ``delay_spread`` scales
    both the exponential delay distribution and the exponential power
    decay over relative delay.  ``rician_k_db`` adds one dominant
    zero-relative-delay path carrying K/(1+K) of the power.
    ``arrival_geometry`` is "horizontal" (Clarke ring, default) or
    "sphere".
    """

    grid: GridSpec = field(default_factory=GridSpec)
    num_paths: tuple[int, int] = (8, 24)
    delay_spread: float = 300e-9
    speed: float = 15.0 / 3.6
    rician_k_db: float | None = None
    antenna_gain: float = 1.0
    arrival_geometry: str = "horizontal"
    vertical_spacing_wavelengths: float = 0.7

    def __post_init__(self):
        lo, hi = self.num_paths
        if not (1 <= lo <= hi <= 64):
            raise ConfigurationError("num_paths range must satisfy 1 <= lo <= hi <= 64")
        if self.delay_spread <= 0:
            raise ConfigurationError("delay_spread must be > 0")
        if self.speed < 0:
            raise ConfigurationError("speed must be >= 0")
        if self.arrival_geometry not in ("horizontal", "sphere"):
            raise ConfigurationError("arrival_geometry must be 'horizontal' or 'sphere'")


def _unit_sphere(rng: np.random.Generator, n: int) -> np.ndarray:
    v = rng.standard_normal((n, 3))
    return v / np.linalg.norm(v, axis=1, keepdims=True)


def _unit_ring(rng: np.random.Generator, n: int) -> np.ndarray:
    phi = rng.uniform(0.0, 2.0 * math.pi, n)
    return np.stack([np.cos(phi), np.sin(phi), np.zeros(n)], axis=1)


def sample_drop(config: DropConfig, seed: int) -> DropParams:
    """Draw one random drop; identical (config, seed) is bitwise-reproducible."""
    rng = np.random.default_rng(seed)
    grid = config.grid
    lo, hi = config.num_paths
    n = int(rng.integers(lo, hi + 1))

    delays = rng.exponential(config.delay_spread, n)
    powers = np.exp(-(delays - delays.min()) / config.delay_spread)

    if config.arrival_geometry == "horizontal":
        arrivals = _unit_ring(rng, n)
    else:
        arrivals = _unit_sphere(rng, n)
    departures = _unit_sphere(rng, n)
    base_phases = rng.uniform(0.0, 2.0 * math.pi, n)

    if config.rician_k_db is not None:
        k_lin = 10.0 ** (config.rician_k_db / 10.0)
        powers = powers / powers.sum() / (1.0 + k_lin)
        delays = np.append(delays, delays.min())
        powers = np.append(powers, k_lin / (1.0 + k_lin))
        if config.arrival_geometry == "horizontal":
            arrivals = np.vstack([arrivals, _unit_ring(rng, 1)])
        else:
            arrivals = np.vstack([arrivals, _unit_sphere(rng, 1)])
        departures = np.vstack([departures, _unit_sphere(rng, 1)])
        base_phases = np.append(base_phases, rng.uniform(0.0, 2.0 * math.pi))
        n += 1

    amplitudes = np.sqrt(powers / powers.sum())
    rel_delays = delays - delays.min()

    heading = rng.uniform(0.0, 2.0 * math.pi)
    velocity = config.speed * np.array([math.cos(heading), math.sin(heading), 0.0])

    tx_pos = np.array([0.0, 0.0, 25.0])
    dist = rng.uniform(20.0, 200.0)
    bearing = rng.uniform(0.0, 2.0 * math.pi)
    rx_pos = np.array([dist * math.cos(bearing), dist * math.sin(bearing), 1.5])

    k_mag = grid.wavenumber
    k_t = departures * k_mag
    k_r = arrivals * k_mag

    n_ports = grid.num_tx_ports
    n_rows = n_ports // 2 if n_ports % 2 == 0 else n_ports
    dz = config.vertical_spacing_wavelengths * grid.wavelength
    pol_phases = rng.uniform(0.0, 2.0 * math.pi, n)  # second-polarization offsets

    per_port = []
    for port in range(n_ports):
        row, pol = port % n_rows, port // n_rows
        elem_z = row * dz
        port_paths = []
        for i in range(n):
            phase = base_phases[i] + k_t[i, 2] * elem_z + (pol_phases[i] if pol else 0.0)
            port_paths.append(PathParams(
                delay=float(delays[i]),
                relative_delay=float(rel_delays[i]),
                amplitude=float(amplitudes[i]),
                antenna_gain=config.antenna_gain,
                departure_direction=k_t[i],
                arrival_direction=k_r[i],
                static_phase=float(phase % (2.0 * math.pi)),
            ))
        per_port.append(tuple(port_paths))

    return DropParams(
        grid=grid,
        paths=tuple(per_port),
        tx_position=tx_pos,
        rx_position=rx_pos,
        rx_velocity=velocity,
        rng_seed=seed,
    )


def channel_transfer(drop: DropParams, port: int, f: float, t: float) -> complex:
    """Pointwise channel coefficient H(f, t) for one port.

    Pure scalar reference implementation; ``generate_slot`` uses the
    vectorized equivalent.  ``f`` is the centered baseband offset and must
    lie within +-(F/2)*subcarrier_spacing.
    """
    grid = drop.grid
    if not (0 <= port < grid.num_tx_ports):
        raise IndexError(f"port {port} out of range [0, {grid.num_tx_ports})")
    half_band = (grid.num_subcarriers / 2.0) * grid.subcarrier_spacing
    if abs(f) > half_band:
        raise ValueError(f"baseband offset {f} Hz outside +-{half_band} Hz")

    fc = grid.carrier_frequency
    total = 0j
    for p in drop.paths[port]:
        phase = (
            p.static_phase
            - 2.0 * math.pi * fc * p.delay
            - 2.0 * math.pi * f * p.relative_delay
            + float(np.dot(p.departure_direction, drop.tx_position))
            + float(np.dot(p.arrival_direction, drop.rx_position))
            + float(np.dot(p.arrival_direction, drop.rx_velocity)) * t
        )
        total += p.amplitude * p.antenna_gain * cmath.exp(1j * phase)
    return total


def _port_path_arrays(drop: DropParams, port: int):
    """Per-path arrays (complex static weight, Doppler rate, relative delay)."""
    paths = drop.paths[port]
    amp = np.array([p.amplitude * p.antenna_gain for p in paths])
    delay = np.array([p.delay for p in paths])
    rel = np.array([p.relative_delay for p in paths])
    k_r = np.stack([p.arrival_direction for p in paths])
    k_t = np.stack([p.departure_direction for p in paths])
    stat = np.array([p.static_phase for p in paths])

    fc = drop.grid.carrier_frequency
    base = (
        stat
        - 2.0 * math.pi * fc * delay
        + k_t @ drop.tx_position
        + k_r @ drop.rx_position
    )
    weights = amp * np.exp(1j * base)
    doppler = k_r @ drop.rx_velocity  # rad/s per path
    return weights, doppler, rel


def transfer_matrix(drop: DropParams, port: int, f: np.ndarray, t: np.ndarray) -> np.ndarray:
    """Vectorized H over the outer product of times ``t`` and offsets ``f``."""
    weights, doppler, rel = _port_path_arrays(drop, port)
    e_t = np.exp(1j * np.outer(t, doppler))              # (T, N)
    e_f = np.exp(-2j * math.pi * np.outer(rel, f))       # (N, F)
    return (e_t * weights) @ e_f


def generate_slot(drop: DropParams, slot_index: int) -> list[np.ndarray]:
    """All ports' T x F channel grids for one slot."""
    if slot_index < 0:
        raise ValueError("slot_index must be >= 0")
    grid = drop.grid
    f = grid.subcarrier_offsets()
    t = grid.symbol_times(slot_index)
    return [transfer_matrix(drop, port, f, t) for port in range(grid.num_tx_ports)]


def generate_slots(drop: DropParams, num_slots: int) -> np.ndarray:
    """Stacked slots as a (num_slots, n_ports, T, F) complex array."""
    slots = [generate_slot(drop, k) for k in range(num_slots)]
    return np.stack([np.stack(s) for s in slots])


def conjugate_drop(drop: DropParams) -> DropParams:
    """Drop whose transfer is the conjugate of ``drop``'s at negated f.

    Negates all static phases (with a 4*pi*f_c*tau compensation for the
    carrier-delay term) and both direction vectors, so that
    conj(H(f, t)) == H'(-f, t) pointwise for every port and time.
    """
    fc = drop.grid.carrier_frequency
    new_ports = []
    for port_paths in drop.paths:
        new_paths = []
        for p in port_paths:
            new_paths.append(replace(
                p,
                departure_direction=-p.departure_direction,
                arrival_direction=-p.arrival_direction,
                static_phase=(-p.static_phase + 4.0 * math.pi * fc * p.delay)
                % (2.0 * math.pi),
            ))
        new_ports.append(tuple(new_paths))
    return replace(drop, paths=tuple(new_ports))


def coherence_time(speed: float, carrier_frequency: float) -> float:
    """Coherence time T_c = 9 / (16*pi*f_d) with f_d = speed*f_c/c."""
    if speed < 0 or carrier_frequency <= 0:
        raise ValueError("speed must be >= 0 and carrier_frequency > 0")
    if speed == 0:
        raise UnboundedCoherenceError("static receiver has unbounded coherence time")
    doppler = speed * carrier_frequency / SPEED_OF_LIGHT
    return 9.0 / (16.0 * math.pi * doppler)


def temporal_autocorr(slots, max_lag: int) -> np.ndarray:
    """Normalized autocorrelation magnitude of a slot sequence per lag.

    ``slots`` is a sequence of same-shaped complex grids (any trailing
    dims; pixels are pooled).  Entry l is |R(l)|/R(0) with
    R(l) = mean over slot pairs and pixels of h_{k+l} * conj(h_k), so a
    constant sequence gives exactly 1 at every lag.
    """
    arr = np.asarray(slots)
    if arr.size == 0:
        raise ValueError("empty slot sequence")
    if max_lag < 0:
        raise ValueError("max_lag must be >= 0")
    n = arr.shape[0]
    if n <= max_lag:
        raise ValueError(f"need more than {max_lag} slots, got {n}")
    flat = arr.reshape(n, -1)
    r0 = float(np.mean(np.abs(flat) ** 2))
    if r0 == 0.0:
        raise ValueError("all-zero slot sequence has no autocorrelation")
    out = np.empty(max_lag + 1)
    out[0] = 1.0
    for lag in range(1, max_lag + 1):
        r = np.mean(flat[lag:] * np.conj(flat[:n - lag]))
        out[lag] = abs(r) / r0
    return out
