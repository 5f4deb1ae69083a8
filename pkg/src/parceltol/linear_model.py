"""Fixed-effects general linear model over categorical factors.

Factors are encoded with sum-to-zero (effects) contrasts, interactions as
products of main-effect columns. Per-term tests are marginal by default:
each term's sum of squares is the increase in residual SS when its columns
are dropped from the full model, which matches the effect tests of common
GLM software on these designs; a sequential mode is available.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import product
from typing import Mapping, Sequence, Union

import numpy as np
from scipy import stats

from .errors import DegenerateFitError, ModelSpecError

Term = Union[str, tuple[str, ...]]

INTERCEPT = "(intercept)"


def _term_factors(term: Term) -> tuple[str, ...]:
    return (term,) if isinstance(term, str) else tuple(term)


def _term_label(term: Term) -> str:
    return term if isinstance(term, str) else "*".join(term)


@dataclass(frozen=True)
class ModelSpec:
    """Response name plus the factor and interaction terms to fit."""

    terms: tuple[Term, ...]
    response: str = "buffer"

    def __post_init__(self):
        seen: set[frozenset] = set()
        mains = {t for t in self.terms if isinstance(t, str)}
        for term in self.terms:
            factors = _term_factors(term)
            if not 1 <= len(factors) <= 3:
                raise ModelSpecError(f"term {term!r}: interactions are limited to order 3")
            if len(set(factors)) != len(factors):
                raise ModelSpecError(f"term {term!r}: repeated factor inside an interaction")
            key = frozenset(factors)
            if key in seen:
                raise ModelSpecError(f"duplicate term {_term_label(term)!r}")
            seen.add(key)
            for f in factors:
                if f not in mains:
                    raise ModelSpecError(
                        f"interaction {_term_label(term)!r} uses factor {f!r} with no main effect"
                    )

    @classmethod
    def main_effects(cls, *factors: str, response: str = "buffer") -> "ModelSpec":
        return cls(terms=tuple(factors), response=response)


@dataclass(frozen=True)
class DesignMatrix:
    """Encoded design: intercept first, then one column block per term."""

    matrix: np.ndarray
    column_names: tuple[str, ...]
    term_columns: Mapping[Term, tuple[int, ...]]
    levels: Mapping[str, tuple[str, ...]]
    spec: ModelSpec


def _effect_codes(labels: np.ndarray, levels: Sequence[str]) -> np.ndarray:
    """Sum-to-zero contrast columns: one per level except the last.

    Rows at level j get 1 in column j, rows at the last level get −1
    everywhere, so each column sums to zero over the level set.
    """
    k = len(levels) - 1
    codes = np.zeros((labels.size, k))
    for j, level in enumerate(levels[:-1]):
        codes[labels == level, j] = 1.0
    codes[labels == levels[-1], :] = -1.0
    return codes


def encode_design(data: Mapping[str, Sequence], spec: ModelSpec) -> DesignMatrix:
    """Build the design matrix and column map for a model spec.

    ``data`` maps factor names to equal-length label sequences (labels are
    compared by ``str()``). Every factor must show at least two observed
    levels; otherwise a ModelSpecError names the offender.
    """
    factors = sorted({f for t in spec.terms for f in _term_factors(t)})
    if not factors:
        raise ModelSpecError("model spec has no terms")
    missing = [f for f in factors if f not in data]
    if missing:
        raise ModelSpecError(f"factors missing from data: {missing}")
    n_rows = len(next(iter(data.values())))
    columns: dict[str, np.ndarray] = {}
    levels: dict[str, tuple[str, ...]] = {}
    for f in factors:
        labels = np.array([str(v) for v in data[f]])
        if labels.size != n_rows:
            raise ModelSpecError(f"factor {f!r}: {labels.size} labels for {n_rows} rows")
        observed = tuple(sorted(set(labels.tolist())))
        if len(observed) < 2:
            raise ModelSpecError(f"factor {f!r} has a single observed level {observed[0]!r}")
        levels[f] = observed
        columns[f] = _effect_codes(labels, observed)

    blocks = [np.ones((n_rows, 1))]
    names = [INTERCEPT]
    term_cols: dict[Term, tuple[int, ...]] = {}
    next_col = 1
    for term in spec.terms:
        fs = _term_factors(term)
        # interaction columns are products of one contrast column per factor
        contrast_sets = [
            [(f"{f}[{lvl}]", columns[f][:, j]) for j, lvl in enumerate(levels[f][:-1])] for f in fs
        ]
        block_cols = []
        for combo in product(*contrast_sets):
            name = "*".join(label for label, _ in combo)
            col = np.ones(n_rows)
            for _, c in combo:
                col = col * c
            block_cols.append(col)
            names.append(name)
        blocks.append(np.column_stack(block_cols))
        term_cols[term] = tuple(range(next_col, next_col + len(block_cols)))
        next_col += len(block_cols)
    return DesignMatrix(
        matrix=np.hstack(blocks),
        column_names=tuple(names),
        term_columns=term_cols,
        levels=levels,
        spec=spec,
    )


@dataclass(frozen=True)
class LstsqFit:
    """Least-squares solution with the data it came from."""

    matrix: np.ndarray
    response: np.ndarray
    coefficients: np.ndarray
    fitted: np.ndarray
    residuals: np.ndarray
    rss: float
    rank: int
    df_residual: int


def fit_least_squares(matrix: np.ndarray, response: Sequence[float]) -> LstsqFit:
    """Minimize ‖y − Xβ‖² by SVD; minimum-norm solution when X is rank-deficient.

    Requires at least as many rows as columns (DegenerateFitError otherwise);
    the reported rank can still fall below the column count.
    """
    X = np.asarray(matrix, dtype=float)
    y = np.asarray(response, dtype=float)
    if X.ndim != 2:
        raise DegenerateFitError("design matrix must be 2-D")
    if X.shape[0] != y.size:
        raise DegenerateFitError(f"{X.shape[0]} rows in X but {y.size} responses")
    if X.shape[0] < X.shape[1]:
        raise DegenerateFitError(f"fewer rows ({X.shape[0]}) than columns ({X.shape[1]})")
    beta, _, rank, _ = np.linalg.lstsq(X, y, rcond=None)
    fitted = X @ beta
    resid = y - fitted
    return LstsqFit(
        matrix=X,
        response=y,
        coefficients=beta,
        fitted=fitted,
        residuals=resid,
        rss=float(resid @ resid),
        rank=int(rank),
        df_residual=int(y.size - rank),
    )


@dataclass(frozen=True)
class TermTest:
    term: Term
    df: int
    sum_sq: float
    f_stat: float
    p_value: float
    testable: bool

    @property
    def label(self) -> str:
        return _term_label(self.term)


@dataclass(frozen=True)
class AnovaTable:
    rows: tuple[TermTest, ...]
    rss: float
    df_residual: int
    method: str

    def by_label(self) -> dict[str, TermTest]:
        return {r.label: r for r in self.rows}


def _f_test(ss: float, df: int, ms_res: float, df_res: int) -> tuple[float, float]:
    # ss == 0 covers the constant-response case without a 0/0
    if df <= 0 or ss <= 0.0:
        return 0.0, 1.0
    if ms_res == 0.0:
        return float("inf"), 0.0
    f = (ss / df) / ms_res
    return f, float(stats.f.sf(f, df, df_res))


def anova_table(fit: LstsqFit, design: DesignMatrix, method: str = "marginal") -> AnovaTable:
    """Per-term F tests from residual-SS differences of refitted submodels.

    ``marginal`` drops one term at a time from the full model; ``sequential``
    adds terms in spec order. A term whose columns are aliased (zero marginal
    df) is reported with ``testable=False`` rather than dropped.
    """
    if method not in ("marginal", "sequential"):
        raise ModelSpecError(f"unknown anova method {method!r}")
    if fit.df_residual <= 0:
        raise DegenerateFitError("no residual degrees of freedom; F tests undefined")
    ms_res = fit.rss / fit.df_residual
    X, y = fit.matrix, fit.response
    rows = []
    if method == "marginal":
        for term in design.spec.terms:
            drop = set(design.term_columns[term])
            keep = [j for j in range(X.shape[1]) if j not in drop]
            reduced = fit_least_squares(X[:, keep], y)
            df = fit.rank - reduced.rank
            ss = max(0.0, reduced.rss - fit.rss)
            f, p = _f_test(ss, df, ms_res, fit.df_residual)
            rows.append(TermTest(term, df, ss, f, p, testable=df > 0))
    else:
        cols: list[int] = [0]
        prev = fit_least_squares(X[:, cols], y)
        for term in design.spec.terms:
            cols = cols + list(design.term_columns[term])
            cur = fit_least_squares(X[:, cols], y)
            df = cur.rank - prev.rank
            ss = max(0.0, prev.rss - cur.rss)
            f, p = _f_test(ss, df, ms_res, fit.df_residual)
            rows.append(TermTest(term, df, ss, f, p, testable=df > 0))
            prev = cur
    return AnovaTable(rows=tuple(rows), rss=fit.rss, df_residual=fit.df_residual, method=method)


@dataclass(frozen=True)
class LsMean:
    level: str
    mean: float
    observed_sd: float
    n: int


def ls_means(fit: LstsqFit, design: DesignMatrix, factor: str) -> list[LsMean]:
    """Model-predicted mean per level of ``factor``, other factors balanced.

    With sum-to-zero coding the balanced value of every other contrast is
    zero, so the prediction is the intercept plus the factor's own contrast
    contribution; interaction columns vanish. The observed per-level SD of
    the raw response is attached (NaN for singleton levels).
    """
    if factor not in design.levels:
        raise ModelSpecError(f"factor {factor!r} is not part of the model")
    levels = design.levels[factor]
    main_cols = design.term_columns.get(factor)
    if main_cols is None:
        raise ModelSpecError(f"factor {factor!r} has no main-effect term")
    codes = np.vstack([np.eye(len(levels) - 1), -np.ones(len(levels) - 1)])
    beta0 = fit.coefficients[0]
    beta_f = fit.coefficients[list(main_cols)]
    # recover observed rows per level from the factor's contrast columns
    block = fit.matrix[:, list(main_cols)]
    out = []
    for j, level in enumerate(levels):
        mean = float(beta0 + codes[j] @ beta_f)
        mask = np.all(block == codes[j], axis=1)
        y_level = fit.response[mask]
        sd = float(y_level.std(ddof=1)) if y_level.size > 1 else float("nan")
        out.append(LsMean(level=level, mean=mean, observed_sd=sd, n=int(y_level.size)))
    return out


@dataclass(frozen=True)
class FitResult:
    """Full model fit: coefficients, ANOVA, goodness of fit, LS means."""

    design: DesignMatrix
    fit: LstsqFit
    anova: AnovaTable
    overall_f: float
    overall_p: float
    r_squared: float

    @property
    def coefficients(self) -> dict[str, float]:
        return dict(zip(self.design.column_names, self.fit.coefficients.tolist()))

    def ls_means(self, factor: str) -> list[LsMean]:
        return ls_means(self.fit, self.design, factor)


def fit_model(
    data: Mapping[str, Sequence],
    response: Sequence[float],
    spec: ModelSpec,
    anova_method: str = "marginal",
) -> FitResult:
    """Encode, fit, and test a model in one call."""
    design = encode_design(data, spec)
    fit = fit_least_squares(design.matrix, np.asarray(response, dtype=float))
    table = anova_table(fit, design, method=anova_method)
    y = fit.response
    tss = float(((y - y.mean()) ** 2).sum())
    df_model = fit.rank - 1
    if tss <= 0.0 or df_model <= 0 or fit.df_residual <= 0:
        overall_f, overall_p, r2 = 0.0, 1.0, 0.0
    else:
        ss_model = max(0.0, tss - fit.rss)
        ms_res = fit.rss / fit.df_residual
        if ms_res == 0.0:
            overall_f, overall_p = float("inf"), 0.0
        else:
            overall_f = (ss_model / df_model) / ms_res
            overall_p = float(stats.f.sf(overall_f, df_model, fit.df_residual))
        r2 = 1.0 - fit.rss / tss
    return FitResult(
        design=design,
        fit=fit,
        anova=table,
        overall_f=overall_f,
        overall_p=overall_p,
        r_squared=r2,
    )
