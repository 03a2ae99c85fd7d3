"""Finite-sample Monte Carlo engine for preconditioned interpolation.

Designs are drawn as X = Z diag(sqrt(eigs)) with i.i.d. unit-variance
entries Z, where the d eigenvalues realize a discrete spectrum by
largest-remainder apportionment of its weights.  All population
matrices (Sigma_X, Sigma_theta, population preconditioners) are
diagonal in this fixed basis; rotation invariance of the Gaussian
entries makes that choice distribution-identical to any rotated one,
and a test confirms basis independence by explicit conjugation.

Bias and variance given X are never estimated by sampling theta* or the
noise; they are computed from the exact conditional trace formulas

    B(X) = (1/d) Tr[Sigma_theta (I - P X^T S^-1 X)^T Sigma_X (...)],
    V(X) = sigma^2 Tr[P X^T S^-2 X P Sigma_X],      S = X P X^T,

so the only Monte Carlo fluctuation left is in X itself.  The
gradient-flow trajectory theta_P(t) = P X^T [I - exp(-(t/n) S)] S^-1 y
admits the same treatment: one symmetric eigendecomposition of the
n x n Gram S is reused for every t in the grid.

Randomness comes from numpy's Philox counter-based generator, which is
seed-stable across platforms; the generator name and numpy version are
recorded in run metadata by the experiment harness.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import DomainError, NumericalError, OutOfRegimeError
from .spectra import PreconditionerSpec, SpectralMeasure

__all__ = [
    "Design",
    "TrajectoryPoint",
    "LabelModel",
    "UnobservedBlock",
    "EarlyStopping",
    "SimulationSummary",
    "sample_design",
    "apportion_counts",
    "build_preconditioner",
    "stationary_solution",
    "conditional_bias",
    "conditional_variance",
    "trajectory",
    "default_time_grid",
    "optimal_early_stopping",
    "simulate_risk",
    "min_norm_check",
    "yky_diagnostic",
    "GENERATOR_NAME",
]

GENERATOR_NAME = f"numpy.random.Philox (Philox4x64-10), numpy {np.__version__}"

# Gram invertibility floor relative to the largest eigenvalue.
_GRAM_RTOL = 1e-12


def _rng(seed: int, stream: int = 0) -> np.random.Generator:
    """Counter-based generator; distinct streams decouple X from labels."""
    return np.random.Generator(np.random.Philox([int(stream), int(seed)]))


def apportion_counts(weights: np.ndarray, d: int) -> np.ndarray:
    """Largest-remainder apportionment of probability weights to d slots."""
    weights = np.asarray(weights, dtype=float)
    quotas = weights * d
    counts = np.floor(quotas).astype(int)
    rest = d - int(counts.sum())
    if rest > 0:
        # ties broken by atom index for determinism
        order = np.lexsort((np.arange(weights.size), -(quotas - counts)))
        counts[order[:rest]] += 1
    return counts


@dataclass(frozen=True, eq=False)
class Design:
    """A realized random design X with its diagonal covariance."""

    X: np.ndarray
    n: int
    d: int
    sigma_x_eigs: np.ndarray
    seed: int
    entry_dist: str = "gaussian"

    def __post_init__(self):
        if self.d <= self.n:
            raise OutOfRegimeError(
                f"need d > n (overparameterized); got n={self.n}, d={self.d}")
        X = np.asarray(self.X, dtype=float)
        eigs = np.asarray(self.sigma_x_eigs, dtype=float)
        if X.shape != (self.n, self.d):
            raise DomainError("X must have shape (n, d)")
        if eigs.shape != (self.d,):
            raise DomainError("sigma_x_eigs must have length d")
        X.setflags(write=False)
        eigs.setflags(write=False)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "sigma_x_eigs", eigs)

    @property
    def gamma(self) -> float:
        return self.d / self.n


@dataclass(frozen=True)
class TrajectoryPoint:
    """Conditional risk decomposition at one gradient-flow time."""

    t: float
    bias: float
    variance: float
    risk: float


@dataclass(frozen=True)
class EarlyStopping:
    """Grid minima of a trajectory.

    (t_risk, risk, bias, variance) describe the risk-minimizing grid
    point; (t_bias, bias_opt) the separately minimized bias.
    """

    t_risk: float
    risk: float
    bias: float
    variance: float
    t_bias: float
    bias_opt: float


@dataclass(frozen=True)
class UnobservedBlock:
    """Spectra of the unobserved feature block (paired atom by atom)."""

    d_c: int
    xc: SpectralMeasure
    thetac: SpectralMeasure

    def __post_init__(self):
        if self.d_c < 1:
            raise DomainError("d_c must be >= 1")
        if self.xc.n_atoms != self.thetac.n_atoms or not np.allclose(
                self.xc.weights, self.thetac.weights, rtol=0, atol=1e-12):
            raise DomainError(
                "unobserved spectra must pair atom-by-atom with equal "
                "weights (co-diagonal blocks)")

    @classmethod
    def isotropic(cls, d_c: int, trace_term: float) -> "UnobservedBlock":
        """Point-mass block realizing an exact trace term."""
        if trace_term <= 0:
            raise DomainError("trace_term must be > 0 for a block")
        root = math.sqrt(trace_term)
        one = SpectralMeasure(np.array([root]), np.array([1.0]))
        return cls(d_c, one, one)

    def realized_eigs(self) -> tuple[np.ndarray, np.ndarray]:
        counts = apportion_counts(self.xc.weights, self.d_c)
        return (np.repeat(self.xc.values, counts),
                np.repeat(self.thetac.values, counts))

    def realized_trace_term(self) -> float:
        """(1/d_c) Tr(Sigma_X^c Sigma_theta^c) over the realized slots."""
        vx, vt = self.realized_eigs()
        return float(np.mean(vx * vt))


@dataclass(frozen=True)
class LabelModel:
    """How labels are generated on top of a design.

    kind:
      - "well_specified": y = X theta* + eps
      - "quadratic": adds f_c(x) = alpha_q * (<x, x> - Tr Sigma_X)
      - "unobserved": adds x_c^T theta_c from an unobserved block
    theta* is drawn with covariance (1/d) Sigma_theta, where the
    Sigma_theta eigenvalues are prior_map(sigma_x_eigs).
    """

    kind: str
    sigma: float
    prior_map: Callable[[np.ndarray], np.ndarray] = field(
        default=lambda x: np.ones_like(x), compare=False)
    alpha_q: float = 0.0
    unobserved: UnobservedBlock | None = None

    def __post_init__(self):
        if self.kind not in ("well_specified", "quadratic", "unobserved"):
            raise DomainError(f"unknown label model kind {self.kind!r}")
        if self.sigma < 0:
            raise DomainError("sigma must be >= 0")
        if self.kind == "unobserved" and self.unobserved is None:
            raise DomainError("unobserved kind needs an UnobservedBlock")

    @property
    def label(self) -> str:
        if self.kind == "quadratic":
            return f"quadratic(alpha_q={self.alpha_q:g})"
        if self.kind == "unobserved":
            tau = self.unobserved.realized_trace_term()
            return f"unobserved(trace_term={tau:g})"
        return "well_specified"

    def sample_theta_star(self, design: Design,
                          rng: np.random.Generator) -> np.ndarray:
        eigs_theta = np.asarray(self.prior_map(design.sigma_x_eigs), float)
        if np.any(eigs_theta < 0):
            raise DomainError("prior_map must be >= 0 on the realized eigs")
        return rng.standard_normal(design.d) * np.sqrt(eigs_theta / design.d)


@dataclass(frozen=True)
class SimulationSummary:
    """Seed means and standard deviations plus the per-seed table."""

    mean_bias: float
    std_bias: float
    mean_variance: float
    std_variance: float
    mean_risk: float
    std_risk: float
    per_seed: tuple  # rows of (seed, bias, variance, risk)


def sample_design(n: int, d: int, spectrum: SpectralMeasure,
                  entry_dist: str = "gaussian", seed: int = 0) -> Design:
    """Draw X = Z diag(sqrt(eigs)) with the spectrum realized over d slots.

    ``entry_dist`` is "gaussian" or "rademacher" (both zero mean, unit
    variance).  Deterministic for a fixed seed.
    """
    if d <= n:
        raise OutOfRegimeError(
            f"need d > n (overparameterized); got n={n}, d={d}")
    counts = apportion_counts(spectrum.weights, d)
    eigs = np.repeat(spectrum.values, counts).astype(float)
    rng = _rng(seed, stream=0)
    if entry_dist == "gaussian":
        Z = rng.standard_normal((n, d))
    elif entry_dist == "rademacher":
        Z = rng.integers(0, 2, size=(n, d)).astype(float) * 2.0 - 1.0
    else:
        raise DomainError(f"unknown entry_dist {entry_dist!r}")
    X = Z * np.sqrt(eigs)
    return Design(X=X, n=n, d=d, sigma_x_eigs=eigs, seed=seed,
                  entry_dist=entry_dist)


def build_preconditioner(spec: PreconditionerSpec, design: Design
                         ) -> np.ndarray:
    """Realize the preconditioner as a dense d x d symmetric PSD matrix.

    Population kinds are diagonal in the design's eigenbasis; sample
    kinds are built from X^T X.
    """
    if spec.is_population:
        return np.diag(spec.eig_map(design.sigma_x_eigs))
    gram_d = design.X.T @ design.X
    if spec.kind == "sample_pseudo_inverse":
        return np.linalg.pinv(gram_d, hermitian=True)
    # sample_damped
    P = np.linalg.inv(gram_d + spec.lam * np.eye(design.d))
    return 0.5 * (P + P.T)


def _precond_parts(design: Design, P) -> tuple[np.ndarray, np.ndarray | None]:
    """Split P into (diagonal vector, None) or (None, dense matrix).

    Accepts a PreconditionerSpec, a length-d vector of eigenvalues, or a
    d x d matrix.  Diagonal structure is used for the fast paths.
    """
    if isinstance(P, PreconditionerSpec):
        if P.is_population:
            return P.eig_map(design.sigma_x_eigs), None
        return None, build_preconditioner(P, design)
    P = np.asarray(P, dtype=float)
    if P.ndim == 1:
        if P.shape != (design.d,):
            raise DomainError("diagonal preconditioner must have length d")
        return P, None
    if P.shape != (design.d, design.d):
        raise DomainError("preconditioner matrix must be d x d")
    return None, P


def _xp(design: Design, P) -> np.ndarray:
    """X P as an n x d array, using the diagonal fast path when possible."""
    diag, dense = _precond_parts(design, P)
    if diag is not None:
        return design.X * diag
    return design.X @ dense


def _gram(design: Design, XP: np.ndarray) -> np.ndarray:
    S = XP @ design.X.T
    return 0.5 * (S + S.T)


def _solve_gram(S: np.ndarray, B: np.ndarray, what: str) -> np.ndarray:
    try:
        return np.linalg.solve(S, B)
    except np.linalg.LinAlgError as exc:
        raise NumericalError("finite_sim", what,
                             f"singular Gram matrix: {exc}") from exc


def _check_gram(S: np.ndarray, what: str) -> None:
    eigs = np.linalg.eigvalsh(S)
    if eigs[0] <= _GRAM_RTOL * eigs[-1]:
        raise NumericalError(
            "finite_sim", what,
            f"Gram matrix numerically singular (min/max eig = "
            f"{eigs[0]:.3e}/{eigs[-1]:.3e})")


def _theta_eigs(design: Design, theta) -> np.ndarray:
    """Sigma_theta eigenvalues co-indexed with sigma_x_eigs.

    ``theta`` can be a prior map (callable on the realized covariance
    eigenvalues), an explicit length-d vector, or a scalar.
    """
    if callable(theta):
        out = np.asarray(theta(design.sigma_x_eigs), dtype=float)
        out = np.broadcast_to(out, (design.d,)).astype(float)
    elif np.isscalar(theta):
        out = np.full(design.d, float(theta))
    else:
        out = np.asarray(theta, dtype=float)
        if out.shape != (design.d,):
            raise DomainError("Sigma_theta eigenvalues must have length d")
    if np.any(out < 0):
        raise DomainError("Sigma_theta eigenvalues must be >= 0")
    return out


def stationary_solution(design: Design, P, y: np.ndarray) -> np.ndarray:
    """theta_hat = P X^T (X P X^T)^-1 y, the min-||.||_{P^-1} interpolant."""
    y = np.asarray(y, dtype=float)
    XP = _xp(design, P)
    S = _gram(design, XP)
    return XP.T @ _solve_gram(S, y, "stationary_solution")


def conditional_bias(design: Design, P, theta) -> float:
    """Exact prior-averaged bias given X (no theta* sampling noise)."""
    st = _theta_eigs(design, theta)
    sx = design.sigma_x_eigs
    X = design.X
    XP = _xp(design, P)
    S = _gram(design, XP)
    _check_gram(S, "conditional_bias")
    A = (XP * sx) @ XP.T
    Bm = (X * st) @ X.T
    Cm = (X * (st * sx)) @ XP.T
    GA = _solve_gram(S, A, "conditional_bias")
    GB = _solve_gram(S, Bm, "conditional_bias")
    GC = _solve_gram(S, Cm, "conditional_bias")
    c0 = float(np.sum(st * sx))
    return (c0 - 2.0 * float(np.trace(GC)) + float(np.sum(GA * GB.T))
            ) / design.d


def conditional_variance(design: Design, P, sigma2: float) -> float:
    """Exact noise-averaged variance given X."""
    if sigma2 < 0:
        raise DomainError("sigma2 must be >= 0")
    sx = design.sigma_x_eigs
    XP = _xp(design, P)
    S = _gram(design, XP)
    _check_gram(S, "conditional_variance")
    A = (XP * sx) @ XP.T
    GA = _solve_gram(S, A, "conditional_variance")
    return sigma2 * float(np.trace(_solve_gram(S, GA,
                                               "conditional_variance")))


def default_time_grid(design: Design, P, n_points: int = 60,
                      lo: float = 1e-2, hi: float = 1e2) -> np.ndarray:
    """Geometric grid spanning [lo, hi] * n / lambda_max(X P X^T)."""
    S = _gram(design, _xp(design, P))
    lam_max = float(np.linalg.eigvalsh(S)[-1])
    scale = design.n / lam_max
    return np.geomspace(lo * scale, hi * scale, n_points)


def trajectory(design: Design, P, theta, sigma2: float,
               t_grid: Sequence[float] | None = None
               ) -> list[TrajectoryPoint]:
    """Exact conditional bias/variance along the gradient flow.

    theta_P(t) = P X^T [I - exp(-(t/n) S)] S^-1 y with S = X P X^T.  One
    symmetric eigendecomposition of S is reused for every grid time; at
    t -> infinity the points converge to the stationary conditional
    values.
    """
    st = _theta_eigs(design, theta)
    sx = design.sigma_x_eigs
    X = design.X
    XP = _xp(design, P)
    S = _gram(design, XP)
    lam, Q = np.linalg.eigh(S)
    if lam[0] <= _GRAM_RTOL * lam[-1]:
        raise NumericalError(
            "finite_sim", "trajectory",
            f"Gram matrix numerically singular (min/max eig = "
            f"{lam[0]:.3e}/{lam[-1]:.3e})")
    if t_grid is None:
        scale = design.n / float(lam[-1])
        t_grid = np.geomspace(1e-2 * scale, 1e2 * scale, 60)
    t_grid = np.asarray(t_grid, dtype=float)
    if t_grid.size == 0:
        raise DomainError("t_grid must be nonempty")
    if np.any(t_grid < 0) or np.any(np.diff(t_grid) < 0):
        raise DomainError("t_grid must be sorted and nonnegative")

    A = (XP * sx) @ XP.T
    Bm = (X * st) @ X.T
    Cm = (X * (st * sx)) @ XP.T
    Ah = Q.T @ A @ Q
    Bh = Q.T @ Bm @ Q
    ch = np.einsum("ij,ij->j", Q, Cm @ Q)
    AB = Ah * Bh
    dA = np.diag(Ah).copy()
    c0 = float(np.sum(st * sx))

    points = []
    for t in t_grid:
        # spectral filter of W(t) S^-1 = (1 - exp(-t lam / n)) / lam
        g = -np.expm1(-t * lam / design.n) / lam
        bias = (c0 - 2.0 * float(ch @ g) + float(g @ (AB @ g))) / design.d
        variance = sigma2 * float(np.sum(g * g * dA))
        bias = max(bias, 0.0)
        points.append(TrajectoryPoint(t=float(t), bias=bias,
                                      variance=variance,
                                      risk=bias + variance))
    return points


def optimal_early_stopping(points: Sequence[TrajectoryPoint]
                           ) -> EarlyStopping:
    """Grid minima of risk and, separately, of bias."""
    if len(points) == 0:
        raise DomainError("trajectory must be nonempty")
    risks = np.array([p.risk for p in points])
    biases = np.array([p.bias for p in points])
    i = int(np.argmin(risks))
    j = int(np.argmin(biases))
    return EarlyStopping(t_risk=points[i].t, risk=points[i].risk,
                         bias=points[i].bias, variance=points[i].variance,
                         t_bias=points[j].t, bias_opt=points[j].bias)


def min_norm_check(design: Design, P, y: np.ndarray,
                   theta_hat: np.ndarray) -> float:
    """First-order certificate that theta_hat minimizes ||.||_{P^-1}.

    Over interpolants of X theta = y the minimizer satisfies
    P^-1 theta_hat orthogonal to ker(X); the defect is the largest
    normalized violation over an orthonormal kernel basis.
    """
    diag, dense = _precond_parts(design, P)
    if diag is not None:
        if np.any(diag <= 0):
            raise NumericalError("finite_sim", "min_norm_check",
                                 "singular preconditioner")
        pinv_theta = theta_hat / diag
    else:
        try:
            pinv_theta = np.linalg.solve(dense, theta_hat)
        except np.linalg.LinAlgError as exc:
            raise NumericalError("finite_sim", "min_norm_check",
                                 f"singular preconditioner: {exc}") from exc
    norm = math.sqrt(float(theta_hat @ pinv_theta))
    if norm == 0:
        return 0.0
    _, _, vt = np.linalg.svd(design.X, full_matrices=True)
    kernel_basis = vt[design.n:]
    return float(np.max(np.abs(kernel_basis @ pinv_theta))) / norm


def yky_diagnostic(design: Design, y: np.ndarray) -> float:
    """sqrt(y^T (X X^T)^-1 y / n), the label-noise diagnostic."""
    y = np.asarray(y, dtype=float)
    G = design.X @ design.X.T
    G = 0.5 * (G + G.T)
    _check_gram(G, "yky_diagnostic")
    return math.sqrt(float(y @ _solve_gram(G, y, "yky_diagnostic")) /
                     design.n)


def _quadratic_risk(design: Design, P, model: LabelModel, seed: int,
                    test_points: int, chunk: int = 20_000) -> float:
    """Out-of-sample excess risk under the quadratic misspecification.

    The teacher is f*(x) = x^T theta* + alpha_q (<x,x> - Tr Sigma_X);
    training noise is augmented to match the second moment of the
    quadratic part, estimated on a held-out draw.
    """
    sx = design.sigma_x_eigs
    trace_sx = float(np.sum(sx))
    rng = _rng(seed, stream=1)
    theta_star = model.sample_theta_star(design, rng)

    def f_c(Xs):
        return model.alpha_q * (np.sum(Xs * Xs, axis=1) - trace_sx)

    # held-out draw to estimate Var[f_c]
    calib = rng.standard_normal((4096, design.d)) * np.sqrt(sx)
    var_fc = float(np.var(f_c(calib)))
    sigma_eff = math.sqrt(model.sigma**2 + var_fc)

    y = (design.X @ theta_star + f_c(design.X)
         + sigma_eff * rng.standard_normal(design.n))
    theta_hat = stationary_solution(design, P, y)

    total = 0.0
    seen = 0
    while seen < test_points:
        m = min(chunk, test_points - seen)
        Xs = rng.standard_normal((m, design.d)) * np.sqrt(sx)
        resid = Xs @ (theta_star - theta_hat) + f_c(Xs)
        total += float(np.sum(resid**2))
        seen += m
    return total / test_points


def simulate_risk(designs: Sequence[Design], P, model: LabelModel,
                  test_points: int = 100_000) -> SimulationSummary:
    """Risk estimates over design replicates under a label model.

    Well-specified and unobserved-feature models use the exact
    conditional formulas (only X fluctuates across seeds); the
    quadratic model has no closed conditional form and is estimated
    out-of-sample against the true teacher on fresh test draws.
    """
    if len(designs) == 0:
        raise DomainError("need at least one design replicate")
    rows = []
    for design in designs:
        if model.kind == "quadratic":
            risk = _quadratic_risk(design, P, model, design.seed,
                                   test_points)
            rows.append((design.seed, math.nan, math.nan, risk))
            continue
        bias = conditional_bias(design, P, model.prior_map)
        v0 = conditional_variance(design, P, 1.0)
        variance = model.sigma**2 * v0
        if model.kind == "unobserved":
            tau = model.unobserved.realized_trace_term()
            bias = bias + tau * (1.0 + v0)
        rows.append((design.seed, bias, variance, bias + variance))

    def _stats(col):
        vals = np.array([r[col] for r in rows], dtype=float)
        vals = vals[~np.isnan(vals)]
        if vals.size == 0:
            return math.nan, math.nan
        return float(vals.mean()), float(vals.std())

    mb, sb = _stats(1)
    mv, sv = _stats(2)
    mr, sr = _stats(3)
    return SimulationSummary(
        mean_bias=mb, std_bias=sb, mean_variance=mv, std_variance=sv,
        mean_risk=mr, std_risk=sr, per_seed=tuple(rows))
