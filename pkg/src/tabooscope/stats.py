"""Self-contained statistical kernel.

Rank-sum and chi-squared tests, rank correlation, ordinary least squares, and
logistic regression, with the tail probabilities they need implemented here
(normal and chi-squared via erfc, Student's t via the regularized incomplete
beta function). Nothing in this module calls an external stats library, so
every reported number is reproducible from this file alone.
"""

import math
from dataclasses import dataclass
from itertools import combinations

import numpy as np

# Exact Mann-Whitney enumeration is used at or below this product of sample
# sizes; above it the tie-corrected normal approximation takes over.
EXACT_ENUMERATION_LIMIT = 64

NORMAL_95 = 1.96  # normal quantile used for all 95% confidence intervals


class StatsError(ValueError):
    """Raised when a test's preconditions make its result undefined."""


class SeparationError(RuntimeError):
    """Logistic regression detected complete separation: the likelihood has
    no finite maximizer and coefficients diverge."""


@dataclass(frozen=True)
class TestResult:
    test_name: str
    statistic: float
    p_value: float
    sample_sizes: tuple[int, ...]
    direction: int  # sign of the effect: +1, 0, -1
    notes: str = ""


@dataclass(frozen=True)
class RegressionFit:
    kind: str  # "ols" or "logistic"
    names: tuple[str, ...]
    estimates: tuple[float, ...]
    standard_errors: tuple[float, ...]
    ci_lower: tuple[float, ...]
    ci_upper: tuple[float, ...]
    statistics: tuple[float, ...]  # t (ols) or Wald z (logistic) per coefficient
    n_obs: int
    r_squared: float | None = None
    adj_r_squared: float | None = None
    log_likelihood: float | None = None
    converged: bool = True
    notes: str = ""


# ------------------------------------------------------------ distributions

def _norm_sf(z: float) -> float:
    """P(Z > z) for standard normal Z."""
    return 0.5 * math.erfc(z / math.sqrt(2.0))


def _chi2_sf_1df(x: float) -> float:
    """P(X > x) for chi-squared with one degree of freedom."""
    if x <= 0.0:
        return 1.0
    return math.erfc(math.sqrt(x / 2.0))


def _betacf(a: float, b: float, x: float) -> float:
    """Continued fraction for the incomplete beta function (modified Lentz)."""
    tiny = 1e-300
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < tiny:
        d = tiny
    d = 1.0 / d
    h = d
    for m in range(1, 300):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + aa / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + aa / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < 1e-14:
            return h
    raise RuntimeError("incomplete beta continued fraction did not converge")


def _betainc(a: float, b: float, x: float) -> float:
    """Regularized incomplete beta function I_x(a, b)."""
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    ln_front = (
        math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
        + a * math.log(x) + b * math.log1p(-x)
    )
    front = math.exp(ln_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, 1.0 - x) / b


def _student_t_sf(t: float, df: float) -> float:
    """P(T > t) for Student's t with df degrees of freedom."""
    if math.isinf(t):
        return 0.0 if t > 0 else 1.0
    x = df / (df + t * t)
    p = 0.5 * _betainc(df / 2.0, 0.5, x)
    return p if t >= 0 else 1.0 - p


def _average_ranks(values) -> list[float]:
    """Ranks 1..n with ties sharing the average of the ranks they span."""
    order = sorted(range(len(values)), key=lambda i: values[i])
    ranks = [0.0] * len(values)
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and values[order[j + 1]] == values[order[i]]:
            j += 1
        avg = (i + j) / 2.0 + 1.0
        for k in range(i, j + 1):
            ranks[order[k]] = avg
        i = j + 1
    return ranks


# ------------------------------------------------------------------- tests

def mann_whitney_u(a, b, method: str = "auto") -> TestResult:
    """Two-sided Mann-Whitney U test.

    The statistic is U for the first sample, computed from average ranks so
    ties contribute half counts. The p-value is an exact enumeration over all
    assignments of the pooled values when n1*n2 <= 64, and otherwise a normal
    approximation with tie-corrected variance and a 0.5 continuity correction.
    Extremeness is measured symmetrically: p = P(|U' - n1*n2/2| >= |U - n1*n2/2|).
    """
    a = [float(v) for v in a]
    b = [float(v) for v in b]
    n1, n2 = len(a), len(b)
    if n1 == 0 or n2 == 0:
        raise StatsError("mann_whitney_u requires two non-empty samples")
    if method not in ("auto", "exact", "approx"):
        raise StatsError(f"unknown method {method!r}")
    pooled = a + b
    ranks = _average_ranks(pooled)
    r1 = sum(ranks[:n1])
    u1 = r1 - n1 * (n1 + 1) / 2.0
    mean_u = n1 * n2 / 2.0
    observed_excess = abs(u1 - mean_u)
    direction = 0 if u1 == mean_u else (1 if u1 > mean_u else -1)

    if len(set(pooled)) == 1:
        return TestResult(
            "mann_whitney_u", u1, 1.0, (n1, n2), 0,
            notes="constant pooled data; distribution degenerate",
        )

    if method == "exact" or (method == "auto" and n1 * n2 <= EXACT_ENUMERATION_LIMIT):
        total = 0
        extreme = 0
        base = n1 * (n1 + 1) / 2.0
        indices = range(n1 + n2)
        for subset in combinations(indices, n1):
            total += 1
            u = sum(ranks[i] for i in subset) - base
            if abs(u - mean_u) >= observed_excess - 1e-9:
                extreme += 1
        return TestResult(
            "mann_whitney_u", u1, extreme / total, (n1, n2), direction,
            notes="exact enumeration",
        )

    n = n1 + n2
    tie_term = 0.0
    seen: dict[float, int] = {}
    for v in pooled:
        seen[v] = seen.get(v, 0) + 1
    for count in seen.values():
        tie_term += count ** 3 - count
    variance = (n1 * n2 / 12.0) * ((n + 1) - tie_term / (n * (n - 1)))
    if variance <= 0.0:
        return TestResult(
            "mann_whitney_u", u1, 1.0, (n1, n2), 0,
            notes="zero variance after tie correction",
        )
    z = max(observed_excess - 0.5, 0.0) / math.sqrt(variance)
    p = min(1.0, 2.0 * _norm_sf(z))
    return TestResult(
        "mann_whitney_u", u1, p, (n1, n2), direction,
        notes="normal approximation, tie-corrected, continuity-corrected",
    )


def chi_squared_2x2(table, correction: bool = True) -> TestResult:
    """Chi-squared test of independence on a 2x2 contingency table.

    ``correction`` applies Yates' continuity correction (the default). A zero
    row or column marginal leaves expected counts at zero and is an error.
    """
    t = [[float(table[0][0]), float(table[0][1])],
         [float(table[1][0]), float(table[1][1])]]
    if any(v < 0 for row in t for v in row):
        raise StatsError("counts must be non-negative")
    row_sums = [t[0][0] + t[0][1], t[1][0] + t[1][1]]
    col_sums = [t[0][0] + t[1][0], t[0][1] + t[1][1]]
    total = row_sums[0] + row_sums[1]
    if min(row_sums) == 0 or min(col_sums) == 0:
        raise StatsError("zero marginal: expected counts are undefined")
    statistic = 0.0
    for i in range(2):
        for j in range(2):
            expected = row_sums[i] * col_sums[j] / total
            deviation = abs(t[i][j] - expected)
            if correction:
                deviation = max(deviation - 0.5, 0.0)
            statistic += deviation * deviation / expected
    # sign of the association: positive when the diagonal dominates
    cross = t[0][0] * t[1][1] - t[0][1] * t[1][0]
    direction = 0 if cross == 0 else (1 if cross > 0 else -1)
    return TestResult(
        "chi_squared_2x2",
        statistic,
        _chi2_sf_1df(statistic),
        (int(row_sums[0]), int(row_sums[1])),
        direction,
        notes="yates continuity correction" if correction else "uncorrected",
    )


def spearman_rho(x, y) -> TestResult:
    """Spearman rank correlation: Pearson correlation of average ranks, with
    the p-value from the Student-t approximation on n-2 degrees of freedom."""
    x = [float(v) for v in x]
    y = [float(v) for v in y]
    if len(x) != len(y):
        raise StatsError("samples differ in length")
    n = len(x)
    if n < 3:
        raise StatsError("need at least 3 paired observations")
    if len(set(x)) == 1 or len(set(y)) == 1:
        raise StatsError("constant vector: rank correlation is undefined")
    rx = np.array(_average_ranks(x))
    ry = np.array(_average_ranks(y))
    rx -= rx.mean()
    ry -= ry.mean()
    rho = float((rx @ ry) / math.sqrt((rx @ rx) * (ry @ ry)))
    rho = max(-1.0, min(1.0, rho))
    if abs(rho) == 1.0:
        p = 0.0
    else:
        t = rho * math.sqrt((n - 2) / (1.0 - rho * rho))
        p = min(1.0, 2.0 * _student_t_sf(abs(t), n - 2))
    direction = 0 if rho == 0 else (1 if rho > 0 else -1)
    return TestResult("spearman_rho", rho, p, (n,), direction)


# -------------------------------------------------------------- regressions

def _check_design(X, y, names):
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if X.ndim != 2:
        raise StatsError("design matrix must be 2-dimensional")
    if X.shape[0] != y.shape[0]:
        raise StatsError("X and y differ in length")
    if names is None:
        names = tuple(f"x{j}" for j in range(X.shape[1]))
    else:
        names = tuple(names)
        if len(names) != X.shape[1]:
            raise StatsError("one name per design column required")
    return X, y, names


def _collinear_columns(X, names):
    """Names of columns linearly dependent on the columns before them.

    Greedy scan: a column whose projection residual onto the already accepted
    columns is numerically zero is flagged. Later columns take the blame for a
    dependency, matching how the design matrix was assembled.
    """
    scale = max(1.0, float(np.max(np.abs(X))))
    accepted: list[int] = []
    dependent = []
    for j in range(X.shape[1]):
        col = X[:, j]
        if accepted:
            basis = X[:, accepted]
            coef, *_ = np.linalg.lstsq(basis, col, rcond=None)
            residual = col - basis @ coef
        else:
            residual = col
        if np.linalg.norm(residual) <= 1e-8 * scale:
            dependent.append(names[j])
        else:
            accepted.append(j)
    return dependent


def ols_fit(X, y, names=None) -> RegressionFit:
    """Ordinary least squares with classical standard errors.

    ``X`` is the full design matrix; include the intercept column yourself.
    95% intervals use the normal quantile 1.96. A rank-deficient design is an
    error that names the offending columns.
    """
    X, y, names = _check_design(X, y, names)
    n, p = X.shape
    if n <= p:
        raise StatsError(f"need more observations ({n}) than columns ({p})")
    rank = np.linalg.matrix_rank(X)
    if rank < p:
        dependent = _collinear_columns(X, names)
        raise StatsError(
            "rank-deficient design: collinear columns "
            + ", ".join(dependent or ["<undetermined>"])
        )
    q, r = np.linalg.qr(X)
    beta = np.linalg.solve(r, q.T @ y)
    residuals = y - X @ beta
    rss = float(residuals @ residuals)
    sigma2 = rss / (n - p)
    r_inv = np.linalg.solve(r, np.eye(p))
    cov = sigma2 * (r_inv @ r_inv.T)
    se = np.sqrt(np.diag(cov))
    tss = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - rss / tss if tss > 0 else float("nan")
    adj = 1.0 - (1.0 - r2) * (n - 1) / (n - p) if tss > 0 else float("nan")
    with np.errstate(divide="ignore", invalid="ignore"):
        t_stats = np.where(se > 0, beta / se, np.inf * np.sign(beta))
    return RegressionFit(
        kind="ols",
        names=names,
        estimates=tuple(float(v) for v in beta),
        standard_errors=tuple(float(v) for v in se),
        ci_lower=tuple(float(b - NORMAL_95 * s) for b, s in zip(beta, se)),
        ci_upper=tuple(float(b + NORMAL_95 * s) for b, s in zip(beta, se)),
        statistics=tuple(float(v) for v in t_stats),
        n_obs=n,
        r_squared=r2,
        adj_r_squared=adj,
    )


def _sigmoid(eta):
    out = np.empty_like(eta)
    pos = eta >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-eta[pos]))
    exp_eta = np.exp(eta[~pos])
    out[~pos] = exp_eta / (1.0 + exp_eta)
    return out


def logistic_fit(X, y, names=None, tol=1e-8, max_iter=100) -> RegressionFit:
    """Logistic regression by iteratively reweighted least squares.

    ``X`` is the full design matrix; include the intercept column yourself.
    Convergence is max absolute coefficient change below ``tol`` within
    ``max_iter`` iterations. Complete separation (fitted probabilities pinned
    to 0/1 on a perfectly classified sample while coefficients diverge)
    raises SeparationError rather than returning a diverged fit.
    """
    X, y, names = _check_design(X, y, names)
    if set(np.unique(y)) - {0.0, 1.0}:
        raise StatsError("outcome must be binary 0/1")
    n, p = X.shape
    if np.linalg.matrix_rank(X) < p:
        dependent = _collinear_columns(X, names)
        raise StatsError(
            "rank-deficient design: collinear columns "
            + ", ".join(dependent or ["<undetermined>"])
        )
    beta = np.zeros(p)
    converged = False
    for _ in range(max_iter):
        eta = X @ beta
        mu = _sigmoid(eta)
        weights = mu * (1.0 - mu)
        _check_separation(eta, mu, y, beta)
        weights = np.maximum(weights, 1e-12)
        z = eta + (y - mu) / weights
        xtw = X.T * weights
        beta_next = np.linalg.solve(xtw @ X, xtw @ z)
        change = float(np.max(np.abs(beta_next - beta)))
        beta = beta_next
        if change < tol:
            converged = True
            break
    eta = X @ beta
    mu = _sigmoid(eta)
    _check_separation(eta, mu, y, beta)
    weights = np.maximum(mu * (1.0 - mu), 1e-12)
    cov = np.linalg.inv((X.T * weights) @ X)
    se = np.sqrt(np.diag(cov))
    eps = 1e-15
    log_lik = float(
        np.sum(y * np.log(np.maximum(mu, eps))
               + (1.0 - y) * np.log(np.maximum(1.0 - mu, eps)))
    )
    with np.errstate(divide="ignore", invalid="ignore"):
        z_stats = np.where(se > 0, beta / se, np.inf * np.sign(beta))
    return RegressionFit(
        kind="logistic",
        names=names,
        estimates=tuple(float(v) for v in beta),
        standard_errors=tuple(float(v) for v in se),
        ci_lower=tuple(float(b - NORMAL_95 * s) for b, s in zip(beta, se)),
        ci_upper=tuple(float(b + NORMAL_95 * s) for b, s in zip(beta, se)),
        statistics=tuple(float(v) for v in z_stats),
        n_obs=n,
        log_likelihood=log_lik,
        converged=converged,
        notes="" if converged else f"stopped at max_iter={max_iter}",
    )


def _check_separation(eta, mu, y, beta):
    """Complete separation: every fitted probability is pinned to 0/1 (all
    IRLS weights numerically vanish) while the sample is perfectly
    classified, so the likelihood has no finite maximizer and further
    iterations only push coefficients toward infinity."""
    if len(eta) == 0:
        return
    if not bool(np.all(np.abs(eta) > 20.0)):
        return
    predicted = (mu >= 0.5).astype(float)
    if bool(np.all(predicted == y)):
        raise SeparationError(
            "complete separation: likelihood is unbounded and coefficients diverge"
        )
