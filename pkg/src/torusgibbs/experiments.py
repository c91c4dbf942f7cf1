"""Desk-scale experiment drivers with seeded determinism and CSV output.

Each driver sweeps parameters, runs the quantum and classical engines, and
returns a list of ordered-dict rows; `write_csv` serializes them with one
header row, '.' decimals, and a sibling stderr column for every stochastic
quantity.  Determinism contract: identical config + seed => byte-identical
CSV.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields

import numpy as np

from . import cgibbs, qgibbs, semiclassics
from .errors import InvalidConfigError
from .model import CutoffProfile, KernelSpec, ModelParams, soliton

__all__ = [
    "ExperimentConfig",
    "parse_config",
    "write_csv",
    "write_manifest",
    "exp_partition_convergence",
    "exp_density_convergence",
    "exp_blowup",
    "exp_tail_decay",
    "exp_free_state_rate",
    "exp_threshold_suite",
    "run_selftest",
]

EXPERIMENT_IDS = ("partition", "density", "blowup", "tail", "freerate",
                  "threshold", "selftest")


@dataclass
class ExperimentConfig:
    """Typed mirror of the flat key-value run configuration."""

    experiment: str = ""
    tau_values: list = field(default_factory=lambda: [20.0, 40.0, 80.0])
    eps_values: list = field(default_factory=lambda: [0.5])
    eta_values: list = field(default_factory=lambda: [0.1])
    K: float = 0.6
    k_max: int = 1
    k_max_values: list = field(default_factory=lambda: [1, 2, 3])
    n_samples: int = 100000
    seed: int = 20260810
    out_dir: str = "out"
    threads: int = 1
    K_blowup: float = 1.8
    K_control: float = 0.6
    R_cap: float = 6.0
    R_offset: float = 0.5
    K_sub: float = 0.6
    varsigma: float = 0.0
    rate_eta: float = 0.2
    rate_K: float = 0.8

    def __post_init__(self):
        if self.experiment and self.experiment not in EXPERIMENT_IDS:
            raise InvalidConfigError(f"unknown experiment id {self.experiment!r}")
        for name in ("tau_values", "eps_values", "eta_values", "k_max_values"):
            if not getattr(self, name):
                raise InvalidConfigError(f"{name} must be a nonempty list")
        if self.n_samples < 2:
            raise InvalidConfigError("n_samples must be >= 2")
        if self.threads < 1:
            raise InvalidConfigError("threads must be >= 1")


_LIST_FIELDS = {"tau_values": float, "eps_values": float, "eta_values": float,
                "k_max_values": int}
_SCALAR_FIELDS = {
    "experiment": str, "K": float, "k_max": int, "n_samples": int, "seed": int,
    "out_dir": str, "threads": int, "K_blowup": float, "K_control": float,
    "R_cap": float, "R_offset": float, "K_sub": float, "varsigma": float,
    "rate_eta": float, "rate_K": float,
}


def parse_config(path: str) -> ExperimentConfig:
    """Parse the flat `key = value` run file.  Unknown keys are errors."""
    values = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise InvalidConfigError(f"{path}:{lineno}: expected 'key = value'")
            key, _, val = line.partition("=")
            key, val = key.strip(), val.strip()
            if key in _LIST_FIELDS:
                caster = _LIST_FIELDS[key]
                try:
                    values[key] = [caster(tok.strip()) for tok in val.split(",") if tok.strip()]
                except ValueError as exc:
                    raise InvalidConfigError(f"{path}:{lineno}: bad list for {key}: {exc}")
            elif key in _SCALAR_FIELDS:
                caster = _SCALAR_FIELDS[key]
                try:
                    values[key] = caster(val)
                except ValueError as exc:
                    raise InvalidConfigError(f"{path}:{lineno}: bad value for {key}: {exc}")
            else:
                raise InvalidConfigError(f"{path}:{lineno}: unknown key {key!r}")
    return ExperimentConfig(**values)


def config_items(cfg: ExperimentConfig):
    for f in fields(cfg):
        val = getattr(cfg, f.name)
        if isinstance(val, list):
            val = ", ".join(str(v) for v in val)
        yield f.name, val


def write_csv(path: str, rows: list) -> None:
    """RFC-4180-style CSV: header from the first row's keys, repr floats."""
    if not rows:
        raise InvalidConfigError("no rows to write")
    cols = list(rows[0].keys())
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(cols) + "\n")
        for row in rows:
            cells = []
            for c in cols:
                v = row[c]
                cells.append(repr(v) if isinstance(v, float) else str(v))
            fh.write(",".join(cells) + "\n")


def write_manifest(path: str, cfg: ExperimentConfig, wall_time: float,
                   extra: dict | None = None) -> None:
    import scipy

    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("# run manifest\n")
        for key, val in config_items(cfg):
            fh.write(f"{key} = {val}\n")
        fh.write(f"numpy_version = {np.__version__}\n")
        fh.write(f"scipy_version = {scipy.__version__}\n")
        fh.write(f"wall_time_s = {wall_time:.3f}\n")
        for key, val in (extra or {}).items():
            fh.write(f"{key} = {val}\n")


def _params_for(cfg: ExperimentConfig, tau: float, eps: float, eta: float,
                K: float | None = None, k_max: int | None = None) -> ModelParams:
    K = cfg.K if K is None else K
    k_max = cfg.k_max if k_max is None else k_max
    return ModelParams(tau=tau, eps=eps, eta=eta, K=K, k_max=k_max,
                       n_max=max(1, math.floor(K**2 * tau)))


# ------------------------------------------------------------------
# the experiment drivers
# ------------------------------------------------------------------

def exp_partition_convergence(cfg: ExperimentConfig) -> list:
    """Quantum cutoff-partition ratio against the classical reweighted
    normalization, per tau.  Columns: tau, q_ratio, c_value, c_stderr,
    abs_diff."""
    eps, eta = cfg.eps_values[0], cfg.eta_values[0]
    rows = []
    for tau in cfg.tau_values:
        params = _params_for(cfg, tau, eps, eta)
        cutoff = CutoffProfile.smooth(cfg.K, eta)
        z_int = qgibbs.build_gibbs(params, True, cutoff).Z
        z_free = qgibbs.build_gibbs(params, False, cutoff).Z
        q_ratio = z_int / z_free
        c = cgibbs.partition_ratio(params, "hartree", cutoff, cfg.n_samples, cfg.seed,
                                   threads=cfg.threads)
        rows.append({
            "tau": tau,
            "q_ratio": q_ratio,
            "c_value": c.value,
            "c_stderr": c.stderr,
            "abs_diff": abs(q_ratio - c.value),
        })
    return rows


def _trace_norm(M: np.ndarray) -> float:
    H = 0.5 * (M + M.conj().T)
    return float(np.sum(np.abs(np.linalg.eigvalsh(H))))


def exp_density_convergence(cfg: ExperimentConfig) -> list:
    """Trace-norm distance between the scaled one-body matrix of the Gibbs
    state and the classical moment matrix, with jackknife error bars."""
    eps, eta = cfg.eps_values[0], cfg.eta_values[0]
    rows = []
    for tau in cfg.tau_values:
        params = _params_for(cfg, tau, eps, eta)
        cutoff = CutoffProfile.smooth(cfg.K, eta)
        blocks = qgibbs.build_gibbs(params, True, cutoff)
        Q1 = qgibbs.reduced_density_matrix(blocks, 1, scaled=True)
        M, M_err, shard_num, shard_den = cgibbs.classical_moment_matrix(
            params, "hartree", cutoff, 1, cfg.n_samples, cfg.seed,
            threads=cfg.threads)
        dist = _trace_norm(Q1 - M)
        # jackknife over shards for the stderr of the nonlinear trace norm
        S = len(shard_den)
        if S > 1:
            tots = shard_num.sum(axis=0)
            totd = shard_den.sum()
            loo = [
                _trace_norm(Q1 - (tots - shard_num[i]) / (totd - shard_den[i]))
                for i in range(S)
            ]
            loo = np.asarray(loo)
            dist_err = math.sqrt((S - 1) / S * float(np.sum((loo - loo.mean()) ** 2)))
        else:
            dist_err = float("nan")
        herm_q = float(np.abs(Q1 - Q1.conj().T).max())
        min_eig_q = float(np.linalg.eigvalsh(0.5 * (Q1 + Q1.conj().T)).min())
        herm_c = float(np.abs(M - M.conj().T).max())
        min_eig_c = float(np.linalg.eigvalsh(0.5 * (M + M.conj().T)).min())
        rows.append({
            "tau": tau,
            "trace_dist": dist,
            "trace_dist_stderr": dist_err,
            "herm_defect_quantum": herm_q,
            "herm_defect_classical": herm_c,
            "min_eig_quantum": min_eig_q,
            "min_eig_classical": min_eig_c,
        })
    return rows


def exp_blowup(cfg: ExperimentConfig) -> list:
    """Capped partition values along shrinking interaction range, in the
    supercritical window and at a subcritical control mass."""
    rows = []
    eta_frac = 0.2
    for label, K in (("super", cfg.K_blowup), ("control", cfg.K_control)):
        cutoff = CutoffProfile.sharp(K)
        for eps in cfg.eps_values:
            params = ModelParams(tau=max(cfg.tau_values), eps=eps,
                                 eta=eta_frac * K**2, K=K, k_max=cfg.k_max,
                                 n_max=max(1, math.floor(K**2 * max(cfg.tau_values))))
            est = cgibbs.capped_partition(params, cfg.R_cap, cutoff,
                                          cfg.n_samples, cfg.seed,
                                          threads=cfg.threads)
            rows.append({
                "regime": label,
                "K": K,
                "eps": eps,
                "value": est.value,
                "value_stderr": est.stderr,
            })
    return rows


def exp_tail_decay(cfg: ExperimentConfig) -> list:
    """Deterministic lower-symbol tail moments of the interacting state and
    the affine fit of their logs against tau."""
    eps, eta = cfg.eps_values[0], cfg.eta_values[0]
    rows = []
    for tau in cfg.tau_values:
        params = _params_for(cfg, tau, eps, eta)
        cutoff = CutoffProfile.smooth(cfg.K, eta)
        blocks = qgibbs.build_gibbs(params, True, cutoff)
        R = cfg.K**2 + cfg.R_offset
        tail = semiclassics.tail_moment(blocks, R)
        rows.append({"tau": tau, "R": R, "tail_moment": tail,
                     "log_tail": math.log(tail) if tail > 0 else float("-inf")})
    return rows


def affine_fit(x: np.ndarray, y: np.ndarray) -> tuple[float, float, float]:
    """Least-squares slope, intercept, and R^2."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_res = float(np.sum(resid**2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return float(slope), float(intercept), r2


def exp_free_state_rate(cfg: ExperimentConfig) -> list:
    """Quantum mass-cutoff expectation of the free state against its exact
    classical counterpart, per tau.  Both sides are deterministic: the
    quantum side sums geometric sector weights, the classical side
    integrates the cutoff against the inverted mass density."""
    from scipy import integrate as _int

    eta = cfg.rate_eta
    K = cfg.rate_K
    cutoff = CutoffProfile.smooth(K, eta)
    # the mass law does not depend on tau: invert once, reuse across the sweep
    grid = np.linspace(0.0, K**2, 1025)
    dens = cgibbs.mass_density_charfn(cfg.k_max, grid, check_tol=1.0)
    cside = float(_int.simpson(dens * cutoff(grid), x=grid))
    rows = []
    for tau in cfg.tau_values:
        free = qgibbs.FreeProductState.build(cfg.k_max, tau, cutoff)
        qside = free.partition / qgibbs.FreeProductState.build(
            cfg.k_max, tau, CutoffProfile.one()).partition
        rows.append({"tau": tau, "quantum": qside, "classical": cside,
                     "error": abs(qside - cside)})
    return rows


def exp_threshold_suite(cfg: ExperimentConfig) -> list:
    """Ground-state norms, interpolation-inequality sweep, and the
    uniformity of the subcritical exponential moment across windows."""
    prof = soliton()
    rows = []
    rows.append({"check": "l2_norm_sq", "value": prof.l2_sq,
                 "value_stderr": 0.0,
                 "target": math.sqrt(3.0) * math.pi / 2.0})
    rows.append({"check": "deriv_norm_sq", "value": prof.deriv_l2_sq,
                 "value_stderr": 0.0,
                 "target": math.sqrt(3.0) * math.pi / 4.0})
    rows.append({"check": "l6_over_3deriv", "value": prof.l6_pow6 / (3.0 * prof.deriv_l2_sq),
                 "value_stderr": 0.0, "target": 1.0})
    rows.append({"check": "gns_constant", "value": prof.gns_constant,
                 "value_stderr": 0.0, "target": 4.0 / math.pi**2})

    rng = np.random.default_rng(cfg.seed)
    violations = 0
    trials = 1000
    x = np.linspace(-12.0, 12.0, 1 << 12, endpoint=False)
    dx = x[1] - x[0]
    window = np.exp(-((x / 8.0) ** 8))
    for _ in range(trials):
        n_bumps = rng.integers(1, 5)
        v = np.zeros_like(x)
        for _ in range(n_bumps):
            c = rng.uniform(-5, 5)
            s = rng.uniform(0.3, 2.0)
            v += rng.normal() * np.exp(-((x - c) / s) ** 2)
        v *= window
        try:
            ratio, _ = cgibbs.gns_check(v, dx)
        except Exception:
            continue
        if ratio > prof.gns_constant + 1e-3:
            violations += 1
    rows.append({"check": "gns_violations_of_1000", "value": float(violations),
                 "value_stderr": 0.0, "target": 0.0})

    for k_max in cfg.k_max_values:
        params = ModelParams(tau=20.0, eps=0.5, eta=0.1, K=cfg.K_sub, k_max=k_max,
                             n_max=max(1, math.floor(cfg.K_sub**2 * 20.0)))
        est = cgibbs.subcritical_moment(params, cfg.K_sub, cfg.varsigma,
                                        cfg.n_samples, cfg.seed,
                                        threads=cfg.threads)
        rows.append({"check": f"subcritical_moment_kmax{k_max}",
                     "value": est.value, "value_stderr": est.stderr,
                     "target": float("nan")})
    return rows


# ------------------------------------------------------------------
# selftest: the spot checks behind every inequality and identity
# ------------------------------------------------------------------

def run_selftest(seed: int = 20260810, verbose: bool = True) -> list:
    """Quick structural checks with one pass/fail line each.

    Covers the ladder algebra, interaction positivity, the variational
    identity, the trace inequalities, the coherent-state decomposition,
    the radial anti-Wick scalar, the moment-matrix bound, the entropy
    comparison, the smoothing limits of the classical energies, and the
    interpolation inequality.
    """
    from . import fock
    from .model import eigenvalues

    rng = np.random.default_rng(seed)
    results = []

    def check(name, ok):
        results.append((name, bool(ok)))
        if verbose:
            print(f"[{'PASS' if ok else 'FAIL'}] {name}")

    params = ModelParams(tau=10.0, eps=0.5, eta=0.05, K=0.6, k_max=1, n_max=6)
    cutoff = CutoffProfile.smooth(0.6, 0.05)

    # canonical commutators on an embedded sector pair
    basis2 = fock.enumerate_sector(1, 2)
    basis1 = fock.enumerate_sector(1, 1)
    basis3 = fock.enumerate_sector(1, 3)
    worst = 0.0
    for i in range(3):
        for j in range(3):
            comm = np.zeros((basis2.dim, basis2.dim))
            for col in range(basis2.dim):
                e = np.zeros(basis2.dim)
                e[col] = 1.0
                up = fock.apply_creation(e, basis2, basis3, j)
                a_adag = fock.apply_annihilation(up, basis3, basis2, i)
                down = fock.apply_annihilation(e, basis2, basis1, i)
                adag_a = fock.apply_creation(down, basis1, basis2, j)
                comm[:, col] = a_adag - adag_a
            target = np.eye(basis2.dim) if i == j else np.zeros((basis2.dim, basis2.dim))
            worst = max(worst, float(np.abs(comm - target).max()))
    check("ccr_commutators", worst <= 1e-10)

    W3 = fock.assemble_interaction(fock.enumerate_sector(1, 3), KernelSpec.box(), 0.5)
    evals = np.linalg.eigvalsh(W3.matrix)
    check("interaction_positive", evals.min() >= -1e-8 * max(1.0, np.abs(W3.matrix).max()))

    blocks_int = qgibbs.build_gibbs(params, True, cutoff)
    blocks_free = qgibbs.build_gibbs(params, False, cutoff)
    tau = params.tau
    w_expect = 0.0
    for b, fb in zip(blocks_int.blocks, blocks_free.blocks):
        if b.weight == 0.0 or b.n < 3:
            continue
        Wm = fock.assemble_interaction(b.basis, KernelSpec.box(), params.eps).matrix
        p = b.boltzmann / blocks_int.Z
        Vr = b.vectors if b.vectors is not None else np.eye(b.basis.dim)
        w_expect += float(np.sum(p * np.einsum("ij,jk,ki->i", Vr.T, Wm, Vr))) / tau**3
    functional = qgibbs.relative_entropy(blocks_int, blocks_free) - w_expect
    target = -math.log(blocks_int.Z / blocks_free.Z)
    check("variational_identity", abs(functional - target) <= 1e-8 * max(1.0, abs(target)))

    ok = True
    for _ in range(100):
        d = rng.integers(2, 12)
        A = rng.standard_normal((d, d))
        A = 0.5 * (A + A.T)
        x = rng.standard_normal(d)
        x /= np.linalg.norm(x)
        from scipy.linalg import expm
        lhs = float(x @ expm(A) @ x)
        if lhs < math.exp(float(x @ A @ x)) - 1e-10 * abs(lhs):
            ok = False
    check("peierls_bogoliubov", ok)

    ok = True
    from scipy.linalg import expm
    for _ in range(100):
        # Z >= 0 scalar per block commutes with block-diagonal X and Y
        sizes = rng.integers(1, 5, size=rng.integers(1, 4))
        Xb, Yb, Zb = [], [], []
        for d in sizes:
            X = rng.standard_normal((d, d)); Xb.append(0.5 * (X + X.T))
            Y = rng.standard_normal((d, d)); Yb.append(0.5 * (Y + Y.T))
            Zb.append(abs(rng.normal()) * np.eye(d))
        from scipy.linalg import block_diag
        X, Y, Z = block_diag(*Xb), block_diag(*Yb), block_diag(*Zb)
        lhs = float(np.trace(Z @ expm(X + Y)))
        rhs = float(np.trace(Z @ expm(X) @ expm(Y)))
        if lhs > rhs + 1e-8 * max(1.0, abs(rhs)):
            ok = False
    check("golden_thompson", ok)

    lam = eigenvalues(1)
    ok = True
    for tau_b in (4.0 * lam.max(), 8.0 * lam.max(), 100.0):
        prod = float(np.prod(tau_b / lam * (1.0 - np.exp(-lam / tau_b))))
        if prod < 1.0 - float(np.sum(lam)) / (2.0 * tau_b) - 1e-12:
            ok = False
    check("bernoulli_product_bound", ok)

    u = np.array([0.3 + 0.1j, 0.25, -0.2j])
    lhs, rhs = semiclassics.poisson_decomposition_check(params, cutoff, u, blocks=blocks_int)
    check("poisson_decomposition", abs(lhs - rhs) <= 1e-9 * abs(lhs))

    det = semiclassics.antiwick_radial_scalar(lambda x: x, 2, 3, 10.0)
    mc = semiclassics.antiwick_radial_scalar_mc(lambda x: x, 2, 3, 10.0, 200000, seed)
    check("antiwick_gamma_identity",
          abs(det - 0.5) <= 1e-12 and abs(mc.value - det) <= 3.0 * mc.stderr)

    lhs1, rhs1 = semiclassics.definetti_gap(blocks_int, 1.0 / tau, 1)
    lhs2, rhs2 = semiclassics.definetti_gap(blocks_int, 1.0 / tau, 2)
    check("definetti_bound", lhs1 <= rhs1 + 1e-10 and lhs2 <= rhs2 + 1e-10)

    small = ModelParams(tau=10.0, eps=0.5, eta=0.05, K=0.6, k_max=0, n_max=8)
    g1 = qgibbs.build_gibbs(small, False, CutoffProfile.smooth(0.6, 0.05))
    g2 = qgibbs.build_gibbs(small, False, CutoffProfile.smooth(0.6, 0.1))
    est, hq = semiclassics.berezin_lieb_check(g1, g2, 1.0 / small.tau, 4000, seed)
    check("berezin_lieb", est.value <= hq + 3.0 * est.stderr and hq >= -1e-12)

    coeffs = cgibbs.sample_free_fields(1, 8, rng)
    ok = True
    for row in coeffs:
        en_loc = cgibbs.local_energy_batch(row[None, :])[0]
        last = None
        for eps_v in (0.4, 0.2, 0.1, 0.05):
            gap = abs(cgibbs.hartree_energy_batch(row[None, :], eps_v)[0] - en_loc)
            if last is not None and gap > last + 1e-12:
                ok = False
            last = gap
        if last > 0.05 * max(1.0, en_loc):
            ok = False
    check("hartree_to_local_pathwise", ok)

    sharp = CutoffProfile.sharp(0.6)
    vals = []
    for eta_v in (0.16, 0.08, 0.04):
        c = cgibbs.classical_partition(params, "local", CutoffProfile.smooth(0.6, eta_v),
                                       40000, seed)
        vals.append(c.value)
    ref = cgibbs.classical_partition(params, "local", sharp, 40000, seed).value
    gaps = [abs(v - ref) for v in vals]
    check("sharp_cutoff_continuity",
          all(b <= a + 3e-3 for a, b in zip(gaps, gaps[1:])) and gaps[-1] < gaps[0])

    prof = soliton()
    xs = np.linspace(-12, 12, 1 << 12, endpoint=False)
    ratio, slack = cgibbs.gns_check(prof(xs), xs[1] - xs[0])
    check("gns_equality_case", abs(ratio - prof.gns_constant) <= 1e-3 and slack >= -1e-3)

    return results
