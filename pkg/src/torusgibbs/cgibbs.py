"""Classical side: Gaussian free field on the mode window, interaction
energies, importance-sampling estimators, mass density, sharp interpolation
inequality.

The free measure factorizes over modes: Re and Im of each coefficient are
independent centered Gaussians with variance 1/(2*lambda_k).  All estimators
sample it exactly and reweight, so error bars are honest and reproducibility
is bit-exact for a fixed (seed, n_samples, params).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .errors import (
    DegenerateInputError,
    InvalidConfigError,
    QuadratureFailureError,
)
from .model import CutoffProfile, KernelSpec, ModelParams, eigenvalues, mode_numbers

__all__ = [
    "FieldSample",
    "MCEstimate",
    "sample_free_field",
    "sample_free_fields",
    "local_energy",
    "hartree_energy",
    "classical_partition",
    "classical_moment_matrix",
    "mass_density_charfn",
    "gns_check",
    "capped_partition",
    "subcritical_moment",
]


@dataclass(frozen=True)
class FieldSample:
    """A classical field as complex coefficients on modes |k| <= k_max."""

    coeffs: np.ndarray
    rng_tag: str = ""

    @property
    def k_max(self) -> int:
        return (len(self.coeffs) - 1) // 2

    @property
    def mass(self) -> float:
        return float(np.sum(np.abs(self.coeffs) ** 2))


@dataclass(frozen=True)
class MCEstimate:
    """Monte-Carlo value with standard error; the return type of every
    stochastic estimator here."""

    value: float
    stderr: float
    n_samples: int
    seed: int

    def within(self, other: float, k_sigma: float = 3.0) -> bool:
        return abs(self.value - other) <= k_sigma * self.stderr


def sample_free_fields(k_max: int, n_samples: int, rng: np.random.Generator) -> np.ndarray:
    """Draw (n_samples, J) coefficient rows from the free Gaussian measure."""
    lam = eigenvalues(k_max)
    sd = 1.0 / np.sqrt(2.0 * lam)
    re = rng.standard_normal((n_samples, len(lam)))
    im = rng.standard_normal((n_samples, len(lam)))
    return (re + 1j * im) * sd


def sample_free_field(k_max: int, rng: np.random.Generator) -> FieldSample:
    """One draw from the free measure, with provenance tag."""
    coeffs = sample_free_fields(k_max, 1, rng)[0]
    return FieldSample(coeffs=coeffs, rng_tag=f"free:k_max={k_max}")


# ------------------------------------------------------------------
# interaction energies (exact quadrature for trigonometric polynomials)
# ------------------------------------------------------------------

def default_grid(k_max: int) -> int:
    return max(64, 8 * k_max)


def _fields_on_grid(coeffs: np.ndarray, grid_size: int) -> np.ndarray:
    """Evaluate batched fields on the uniform torus grid."""
    coeffs = np.atleast_2d(coeffs)
    k_max = (coeffs.shape[1] - 1) // 2
    x = np.arange(grid_size) / grid_size
    phases = np.exp(2j * np.pi * np.outer(mode_numbers(k_max), x))
    return coeffs @ phases


def local_energy_batch(coeffs: np.ndarray, grid_size: int | None = None) -> np.ndarray:
    """(1/6) * integral of |u|^6, exact once the grid clears the Nyquist bound."""
    coeffs = np.atleast_2d(coeffs)
    k_max = (coeffs.shape[1] - 1) // 2
    M = grid_size or default_grid(k_max)
    if M <= 6 * k_max:
        raise InvalidConfigError(f"grid {M} aliases degree-{6 * k_max} integrands")
    u = _fields_on_grid(coeffs, M)
    return np.mean(np.abs(u) ** 6, axis=1) / 6.0


def hartree_energy_batch(coeffs: np.ndarray, eps: float,
                         kernel: KernelSpec | None = None,
                         grid_size: int | None = None) -> np.ndarray:
    """(1/6) * integral of (w_eps * |u|^2)^2 |u|^2 via exact Fourier convolution.

    |u|^2 has finitely many modes, so convolving with the periodized kernel
    is a per-mode multiplication by w_hat(eps*m).
    """
    if kernel is None:
        kernel = KernelSpec.box()
    coeffs = np.atleast_2d(coeffs)
    k_max = (coeffs.shape[1] - 1) // 2
    M = grid_size or default_grid(k_max)
    if M <= 6 * k_max:
        raise InvalidConfigError(f"grid {M} aliases degree-{6 * k_max} integrands")
    u = _fields_on_grid(coeffs, M)
    rho = np.abs(u) ** 2
    rho_hat = np.fft.fft(rho, axis=1) / M
    freqs = np.rint(np.fft.fftfreq(M, d=1.0 / M)).astype(int)
    mult = np.where(np.abs(freqs) <= 2 * k_max, kernel.line_fourier(eps * freqs), 0.0)
    conv = np.fft.ifft(rho_hat * mult * M, axis=1).real
    return np.mean(conv**2 * rho, axis=1) / 6.0


def local_energy(u: FieldSample, grid_size: int | None = None) -> float:
    return float(local_energy_batch(u.coeffs[None, :], grid_size)[0])


def hartree_energy(u: FieldSample, eps: float, kernel: KernelSpec | None = None,
                   grid_size: int | None = None) -> float:
    return float(hartree_energy_batch(u.coeffs[None, :], eps, kernel, grid_size)[0])


# ------------------------------------------------------------------
# importance-sampling machinery
# ------------------------------------------------------------------

_SHARD = 1 << 16


def _shard_sizes(n_samples: int) -> list[int]:
    full, rem = divmod(n_samples, _SHARD)
    return [_SHARD] * full + ([rem] if rem else [])


def _mc_from_sums(total, total_sq, n, seed) -> MCEstimate:
    mean = total / n
    var = max(total_sq / n - mean**2, 0.0)
    return MCEstimate(value=float(mean), stderr=float(math.sqrt(var / n)),
                      n_samples=n, seed=seed)


def _iter_shard_rngs(seed: int, n_samples: int):
    sizes = _shard_sizes(n_samples)
    seqs = np.random.SeedSequence(seed).spawn(len(sizes))
    for size, sq in zip(sizes, seqs):
        yield size, np.random.default_rng(sq)


def _map_shards(seed: int, n_samples: int, fn, threads: int = 1) -> list:
    """Run fn(size, rng) over the derived-seed shards.

    Results come back in shard order whatever the execution order, so the
    merged estimate is identical for any thread count.
    """
    jobs = list(_iter_shard_rngs(seed, n_samples))
    if threads <= 1 or len(jobs) <= 1:
        return [fn(size, rng) for size, rng in jobs]
    from concurrent.futures import ThreadPoolExecutor

    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(lambda job: fn(*job), jobs))


def _check_focusing_config(interaction: str, cutoff: CutoffProfile):
    if interaction not in ("none", "hartree", "local"):
        raise InvalidConfigError(f"unknown interaction {interaction!r}")
    if interaction != "none" and cutoff.support_bound is None:
        raise InvalidConfigError(
            "focusing weight with an unbounded mass cutoff is not integrable"
        )


def _weights_for(coeffs: np.ndarray, interaction: str, params: ModelParams,
                 cutoff: CutoffProfile, kernel: KernelSpec | None,
                 cap: float | None = None) -> np.ndarray:
    mass = np.sum(np.abs(coeffs) ** 2, axis=1)
    f = cutoff(mass)
    if interaction == "none":
        return f
    # exponentiate only inside the cutoff support; outside it the energy can
    # overflow exp while the weight is exactly zero anyway
    live = f > 0.0
    w = np.zeros_like(f)
    if np.any(live):
        sub = coeffs[live]
        if interaction == "hartree":
            en = hartree_energy_batch(sub, params.eps, kernel)
        else:
            en = local_energy_batch(sub)
        if cap is not None:
            en = np.minimum(en, cap)
        w[live] = np.exp(en) * f[live]
    return w


def classical_partition(params: ModelParams, interaction: str, cutoff: CutoffProfile,
                        n_samples: int, seed: int,
                        kernel: KernelSpec | None = None,
                        threads: int = 1) -> MCEstimate:
    """Importance-sampling estimate of E_mu0[ e^{energy} * cutoff(mass) ].

    interaction: "none" (weight e^0), "hartree" (range-eps energy), or
    "local" (sextic energy).  The focusing weights require a bounded
    cutoff support; otherwise the integral diverges and the configuration
    is rejected.
    """
    _check_focusing_config(interaction, cutoff)

    def shard(size, rng):
        coeffs = sample_free_fields(params.k_max, size, rng)
        w = _weights_for(coeffs, interaction, params, cutoff, kernel)
        return float(np.sum(w)), float(np.sum(w * w))

    parts = _map_shards(seed, n_samples, shard, threads)
    tot = sum(p[0] for p in parts)
    tot_sq = sum(p[1] for p in parts)
    return _mc_from_sums(tot, tot_sq, n_samples, seed)


def partition_ratio(params: ModelParams, interaction: str, cutoff: CutoffProfile,
                    n_samples: int, seed: int,
                    kernel: KernelSpec | None = None,
                    threads: int = 1) -> MCEstimate:
    """Normalized partition value E[e^W f] / E[f] on shared samples.

    This is the classical quantity matched by the quantum ratio of
    cutoff partition functions; the standard error comes from the delta
    method for a ratio of correlated means.
    """
    _check_focusing_config(interaction, cutoff)
    n = n_samples

    def shard(size, rng):
        coeffs = sample_free_fields(params.k_max, size, rng)
        mass = np.sum(np.abs(coeffs) ** 2, axis=1)
        f = cutoff(mass)
        a = _weights_for(coeffs, interaction, params, cutoff, kernel)
        return (float(np.sum(a)), float(np.sum(f)), float(np.sum(a * a)),
                float(np.sum(f * f)), float(np.sum(a * f)))

    parts = _map_shards(seed, n_samples, shard, threads)
    sa, sb, saa, sbb, sab = (sum(p[i] for p in parts) for i in range(5))
    ma, mb = sa / n, sb / n
    va = saa / n - ma**2
    vb = sbb / n - mb**2
    cab = sab / n - ma * mb
    r = ma / mb
    var_r = max(va - 2.0 * r * cab + r * r * vb, 0.0) / (mb * mb)
    return MCEstimate(value=float(r), stderr=float(math.sqrt(var_r / n)),
                      n_samples=n, seed=seed)


def classical_moment_matrix(params: ModelParams, interaction: str,
                            cutoff: CutoffProfile, k: int, n_samples: int,
                            seed: int, kernel: KernelSpec | None = None,
                            threads: int = 1):
    """First moment matrix M[i,j] = E_mu[ alpha_i * conj(alpha_j) ] of the
    reweighted measure.

    Returns (M, M_stderr, shard_nums, shard_dens).  M is the ratio of the
    weighted outer-product mean to the weight mean; M_stderr holds the
    entrywise delta-method error of that ratio.  The per-shard sums are
    kept so callers can jackknife nonlinear functionals (trace norms) of M.
    Only k = 1 is supported.
    """
    if k != 1:
        raise InvalidConfigError("moment matrices are implemented for k = 1")
    _check_focusing_config(interaction, cutoff)
    J = params.J

    def shard(size, rng):
        coeffs = sample_free_fields(params.k_max, size, rng)
        w = _weights_for(coeffs, interaction, params, cutoff, kernel)
        outer = coeffs[:, :, None] * np.conj(coeffs[:, None, :])
        a = w[:, None, None] * outer
        return (a.sum(axis=0), np.sum(np.abs(a) ** 2, axis=0),
                np.tensordot(w, a, axes=(0, 0)), float(np.sum(w)),
                float(np.sum(w * w)))

    parts = _map_shards(seed, n_samples, shard, threads)
    num = np.sum([p[0] for p in parts], axis=0)
    saa = np.sum([p[1] for p in parts], axis=0)
    sab = np.sum([p[2] for p in parts], axis=0)
    den = sum(p[3] for p in parts)
    sbb = sum(p[4] for p in parts)
    shard_num = [p[0] for p in parts]
    shard_den = [p[3] for p in parts]
    n = n_samples
    ma, mb = num / n, den / n
    M = ma / mb
    var_a = np.maximum(saa / n - np.abs(ma) ** 2, 0.0)
    cov_ab = sab / n - ma * mb
    var_b = max(sbb / n - mb * mb, 0.0)
    var_r = np.maximum(
        var_a - 2.0 * (np.conj(M) * cov_ab).real + np.abs(M) ** 2 * var_b, 0.0
    )
    M_err = np.sqrt(var_r / n) / mb
    return M, M_err, np.array(shard_num), np.array(shard_den)


# ------------------------------------------------------------------
# mass density by characteristic-function inversion
# ------------------------------------------------------------------

def mass_charfn(k_max: int, t: np.ndarray) -> np.ndarray:
    """Characteristic function of ||u||^2 under the free measure:
    prod over modes of lambda_k/(lambda_k - i t)."""
    lam = eigenvalues(k_max)
    t = np.asarray(t, dtype=float)
    return np.prod(lam / (lam - 1j * t[..., None]), axis=-1)


def mass_density_charfn(k_max: int, x_grid: np.ndarray,
                        check_tol: float = 1e-4) -> np.ndarray:
    """Density of the field mass on the mode window, by Fourier inversion.

    The integrand decays like |t|^{-J}; the t-integral is truncated where
    the product's modulus falls below 1e-12 and evaluated with oscillatory
    Clenshaw-Curtis panels.  A single retained mode is the edge case where
    the product is not absolutely integrable; that marginal is a plain
    exponential law and is evaluated in closed form instead.

    Raises QuadratureFailureError when the result integrates away from 1
    by more than check_tol on a grid wide enough to judge.
    """
    x_grid = np.asarray(x_grid, dtype=float)
    lam = eigenvalues(k_max)
    J = len(lam)
    if J == 1:
        return lam[0] * np.exp(-lam[0] * np.clip(x_grid, 0.0, None)) * (x_grid >= 0)

    # |phi(t)| ~ prod(lam)/|t|^J for large |t|
    T = float((np.prod(lam) / 1e-12) ** (1.0 / J))
    # oscillatory panels: one huge interval makes the QAWO rule fail silently,
    # so split on a fixed geometric ladder
    edges = [e for e in (0.0, 50.0, 500.0, 5000.0) if e < T] + [T]
    dens = np.empty_like(x_grid)
    for i, x in enumerate(x_grid):
        total = err = 0.0
        for a, b in zip(edges[:-1], edges[1:]):
            re = integrate.quad(lambda t: mass_charfn(k_max, np.array([t]))[0].real,
                                a, b, weight="cos", wvar=x, limit=1000, epsabs=1e-11)
            im = integrate.quad(lambda t: mass_charfn(k_max, np.array([t]))[0].imag,
                                a, b, weight="sin", wvar=x, limit=1000, epsabs=1e-11)
            total += re[0] + im[0]
            err += re[1] + im[1]
        if err > 1e-7:
            raise QuadratureFailureError(
                f"density inversion error estimate {err:.2e} at x={x}"
            )
        dens[i] = total / np.pi
    dens = np.clip(dens, 0.0, None)

    span = x_grid.max() - x_grid.min()
    if len(x_grid) >= 32 and x_grid.min() <= 1e-9 and span >= 12.0 / lam.min():
        total = integrate.simpson(dens, x=x_grid)
        if abs(total - 1.0) > check_tol:
            raise QuadratureFailureError(
                f"inverted mass density integrates to {total!r}, expected 1"
            )
    return dens


# ------------------------------------------------------------------
# sharp sextic interpolation inequality on the line
# ------------------------------------------------------------------

def gns_check(v: np.ndarray, dx: float) -> tuple[float, float]:
    """Ratio ||v||_L6^6 / (||v'||_L2^2 * ||v||_L2^4) and its slack below
    the sharp constant 4/pi^2.

    `v` must be real, effectively supported inside its grid (treated as one
    period, so the spectral derivative is exact for band-limited data).
    """
    v = np.asarray(v, dtype=float)
    if v.ndim != 1 or len(v) < 8:
        raise DegenerateInputError("need a 1-d grid function with >= 8 points")
    n = len(v)
    freqs = np.fft.fftfreq(n, d=dx)
    dv = np.fft.ifft(2j * np.pi * freqs * np.fft.fft(v)).real
    l2 = np.sum(v * v) * dx
    h1 = np.sum(dv * dv) * dx
    l6 = np.sum(v**6) * dx
    if h1 <= 0.0 or l2 <= 0.0:
        raise DegenerateInputError("vanishing norm or derivative; ratio undefined")
    ratio = l6 / (h1 * l2 * l2)
    from .model import soliton

    return float(ratio), float(soliton().gns_constant - ratio)


# ------------------------------------------------------------------
# capped and subcritical estimators
# ------------------------------------------------------------------

def capped_partition(params: ModelParams, R_cap: float, cutoff: CutoffProfile,
                     n_samples: int, seed: int,
                     kernel: KernelSpec | None = None,
                     threads: int = 1) -> MCEstimate:
    """E_mu0[ e^{min(hartree energy, R_cap)} * cutoff(mass) ].

    A monotone-in-R_cap lower bound for the uncapped partition value; the
    cap keeps the importance weights bounded by e^{R_cap} even above the
    mass threshold.
    """
    if R_cap < 0:
        raise InvalidConfigError(f"R_cap must be >= 0, got {R_cap}")

    def shard(size, rng):
        coeffs = sample_free_fields(params.k_max, size, rng)
        w = _weights_for(coeffs, "hartree", params, cutoff, kernel, cap=R_cap)
        return float(np.sum(w)), float(np.sum(w * w))

    parts = _map_shards(seed, n_samples, shard, threads)
    tot = sum(p[0] for p in parts)
    tot_sq = sum(p[1] for p in parts)
    return _mc_from_sums(tot, tot_sq, n_samples, seed)


def subcritical_moment(params: ModelParams, K_s: float, varsigma: float,
                       n_samples: int, seed: int, threads: int = 1) -> MCEstimate:
    """E_mu0[ exp((1+varsigma)/6 * ||u||_L6^6) * 1_{mass <= K_s^2} ] on the
    mode window; finite uniformly in the window size when K_s is below the
    mass threshold."""
    from .model import critical_mass

    if not K_s < critical_mass():
        raise InvalidConfigError(
            f"K_s = {K_s} is not below the threshold {critical_mass():.6f}"
        )

    def shard(size, rng):
        coeffs = sample_free_fields(params.k_max, size, rng)
        mass = np.sum(np.abs(coeffs) ** 2, axis=1)
        live = mass <= K_s**2
        w = np.zeros(size)
        if np.any(live):
            en = 6.0 * local_energy_batch(coeffs[live])  # ||u||_L6^6
            w[live] = np.exp((1.0 + varsigma) / 6.0 * en)
        return float(np.sum(w)), float(np.sum(w * w))

    parts = _map_shards(seed, n_samples, shard, threads)
    tot = sum(p[0] for p in parts)
    tot_sq = sum(p[1] for p in parts)
    return _mc_from_sums(tot, tot_sq, n_samples, seed)
