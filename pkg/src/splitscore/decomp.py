"""Four-part decomposition of a strategy's mean log score.

mean score = best achievable score
           + selection cost   (chosen form vs best form, both fit on a
                               large-sample surrogate)
           + estimation cost  (chosen form fit on an independent fresh
                               sample of the strategy's own size vs the
                               large-sample fit)
           + data reuse cost  (the realized fit vs the fresh-sample fit)

Two estimators are produced. The pooled one refits *every* observed form on
*every* replication's fresh sample and weights per-form means by selection
frequency; the matched one pairs each replication with its own selected
form. Both telescope exactly to the observed mean by construction; the
matched per-replication contributions also give Monte Carlo standard
errors.

Everything is scored on the same capped log-score scale as the strategy
runs, on the same per-replication evaluation sets.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.special import expit

from . import boxcox
from .glm import FittedLogit, logit_fit
from .linmod import (
    SCALE_FLOOR,
    FittedLinearModel,
    UnidentifiableFitError,
    ols_fit,
)
from .randgen import (
    Dataset,
    Purpose,
    ResponseKind,
    Scenario,
    ScenarioParams,
    StreamKey,
    generate,
    make_stream,
)
from .scoring import (
    bernoulli_neg_log_prob,
    cap_scores,
    t_neg_log_density,
    transformed_t_neg_log_density,
)
from .selection import SelectedModel, outlier_prune
from .strategy import (
    DEFAULT_OPTIONS,
    PredictiveModel,
    SplitPlan,
    Strategy,
    StrategyOptions,
    apply_strategy,
    model_scores,
    select_model,
    split_data,
    split_size,
)

# single pruning-scenario "form": the linear model itself
_CASES_FORM = "model"


@dataclass(frozen=True)
class DecompConfig:
    """Replication counts for one decomposition estimate."""

    n_rep: int = 4000
    n_eval: int = 4000
    n_inf: int = 10000
    options: StrategyOptions = DEFAULT_OPTIONS

    def __post_init__(self) -> None:
        if self.n_rep < 2 or self.n_eval < 1 or self.n_inf < 10:
            raise ValueError("replication counts too small")


@dataclass
class DecompositionEstimate:
    """Estimated components for one (cell, strategy) pair.

    best/selection/estimation/reuse are the pooled estimates; the *_matched
    fields are the paired per-replication variant. Standard errors come from
    the matched per-replication contributions.
    """

    strategy: Strategy
    scenario: Scenario
    n_rep: int
    n_eval: int
    n_inf: int
    mean_observed: float
    best_score: float
    selection_cost: float
    estimation_cost: float
    reuse_cost: float
    selection_matched: float
    estimation_matched: float
    reuse_matched: float
    best_se: float
    selection_se: float
    estimation_se: float
    reuse_se: float
    n_forms: int
    best_form: str
    prob_best_form: float
    selection_probs: dict = field(default_factory=dict)
    n_fallback_fits: int = 0
    n_capped: int = 0
    n_capped_aux: int = 0
    flags: tuple[str, ...] = ()

    def telescope_gap(self) -> float:
        total = (
            self.best_score
            + self.selection_cost
            + self.estimation_cost
            + self.reuse_cost
        )
        return total - self.mean_observed

    def telescope_gap_matched(self) -> float:
        total = (
            self.best_score
            + self.selection_matched
            + self.estimation_matched
            + self.reuse_matched
        )
        return total - self.mean_observed

    def shares(self) -> dict:
        """Each cost as a fraction of the total excess over the best score."""
        excess = self.mean_observed - self.best_score
        if abs(excess) < 1e-300:
            return {"selection": math.nan, "estimation": math.nan, "reuse": math.nan}
        return {
            "selection": self.selection_cost / excess,
            "estimation": self.estimation_cost / excess,
            "reuse": self.reuse_cost / excess,
        }


def form_key(selected: SelectedModel, scenario: Scenario):
    """Hashable identity of the selected model form."""
    if scenario is Scenario.BOXCOX:
        return float(selected.lam)
    if scenario in (Scenario.VARSEL, Scenario.BINARY):
        return tuple(selected.columns)
    return _CASES_FORM


def form_label(key, scenario: Scenario) -> str:
    if scenario is Scenario.BOXCOX:
        return f"lam={key:g}"
    if scenario in (Scenario.VARSEL, Scenario.BINARY):
        return "cols=" + (",".join(str(c) for c in key) if key else "none")
    return str(key)


def _fresh_size(strategy: Strategy, n: int, fraction: float) -> int:
    """Fresh-sample size mirroring the strategy's estimation sample."""
    if strategy is Strategy.SD:
        return n - split_size(n, fraction)
    return n


# ---------------------------------------------------------------------------
# batched least-squares kernels (pooled estimates refit every form on every
# replication's fresh sample; per-case Python is far too slow for that)


def _batched_ols(x: np.ndarray, y: np.ndarray):
    """OLS over a stack of designs. x: (R, m, q) with intercept, y: (R, m).

    Returns (beta (R,q), sigma2 (R,), gram_inv (R,q,q), bad mask (R,)).
    Rows flagged bad (singular normal equations) carry unusable values and
    must be refit by the caller.
    """
    r, m, q = x.shape
    if m < q + 1:
        raise UnidentifiableFitError("batched fit needs m >= q + 1")
    xt = x.transpose(0, 2, 1)
    gram = xt @ x
    bad = np.zeros(r, dtype=bool)
    try:
        beta = np.linalg.solve(gram, xt @ y[:, :, None])[:, :, 0]
        gram_inv = np.linalg.inv(gram)
    except np.linalg.LinAlgError:
        beta = np.zeros((r, q))
        gram_inv = np.zeros((r, q, q))
        for j in range(r):
            try:
                beta[j] = np.linalg.solve(gram[j], xt[j] @ y[j])
                gram_inv[j] = np.linalg.inv(gram[j])
            except np.linalg.LinAlgError:
                bad[j] = True
    resid = y - (x @ beta[:, :, None])[:, :, 0]
    sse = (resid * resid).sum(axis=1)
    sigma2 = sse / (m - q)
    return beta, sigma2, gram_inv, bad


def _neutralize_bad_rows(beta, sigma2, gram_inv, bad) -> None:
    """Make singular-fit rows numerically harmless; caller refits them."""
    if not bad.any():
        return
    q = gram_inv.shape[1]
    beta[bad] = 0.0
    gram_inv[bad] = np.eye(q)
    if sigma2 is not None:
        sigma2[bad] = 1.0


def _batched_logit(x: np.ndarray, y: np.ndarray, max_iter: int = 50):
    """IRLS over a stack of designs; mirrors the scalar fit's update rule.

    Returns (beta (R,q), bad mask). Frozen (non-finite) updates keep their
    previous iterate, like the scalar path.
    """
    from .glm import PROB_CLIP, _WEIGHT_FLOOR

    r, m, q = x.shape
    beta = np.zeros((r, q))
    active = np.ones(r, dtype=bool)

    def dev(b):
        p = np.clip(expit((x @ b[:, :, None])[:, :, 0]), PROB_CLIP, 1 - PROB_CLIP)
        return -2.0 * (y * np.log(p) + (1 - y) * np.log1p(-p)).sum(axis=1)

    d = dev(beta)
    bad = np.zeros(r, dtype=bool)
    for _ in range(max_iter):
        if not active.any():
            break
        eta = (x @ beta[:, :, None])[:, :, 0]
        p = expit(eta)
        w = np.maximum(p * (1.0 - p), _WEIGHT_FLOOR)
        z = eta + (y - p) / w
        xw = x * w[:, :, None]
        gram = x.transpose(0, 2, 1) @ xw
        rhs = (xw.transpose(0, 2, 1) @ z[:, :, None])[:, :, 0]
        new_beta = np.empty_like(beta)
        solved = np.ones(r, dtype=bool)
        try:
            new_beta = np.linalg.solve(gram, rhs[:, :, None])[:, :, 0]
        except np.linalg.LinAlgError:
            for j in range(r):
                try:
                    new_beta[j] = np.linalg.solve(gram[j], rhs[j])
                except np.linalg.LinAlgError:
                    solved[j] = False
        finite = np.isfinite(new_beta).all(axis=1) & solved
        step = active & finite
        frozen = active & ~finite
        active = active & finite  # frozen rows keep their previous iterate
        beta = np.where(step[:, None], new_beta, beta)
        new_d = dev(beta)
        converged = np.abs(new_d - d) < 1e-9 * (np.abs(d) + 1e-300)
        active = active & ~converged
        d = new_d
        bad |= frozen & (np.abs(beta).max(axis=1) == 0.0)
    return beta, bad


def _t_scores_2d(y, mu, scale, df, lam, jacobian):
    scale = np.maximum(scale, SCALE_FLOOR)
    if lam is None:
        raw = t_neg_log_density(y, mu, scale, df)
    else:
        raw = transformed_t_neg_log_density(y, mu, scale, df, lam, jacobian)
    return cap_scores(raw)


def _score_linear_stack(eval_x, eval_y, beta, sigma2, gram_inv, df, lam, jacobian):
    """Score per-replication linear fits on per-replication eval sets.

    eval_x: (R, e, q) with intercept; eval_y: (R, e); beta: (R, q);
    sigma2: (R,); gram_inv: (R, q, q); df scalar. Returns ((R,) means, ncap).
    """
    mu = (eval_x @ beta[:, :, None])[:, :, 0]
    chol = np.linalg.cholesky(gram_inv)
    t = eval_x @ chol
    h = (t * t).sum(axis=2)
    scale = np.sqrt(sigma2[:, None] * (1.0 + h))
    scores, ncap = _t_scores_2d(eval_y, mu, scale, df, lam, jacobian)
    return scores.mean(axis=1), ncap


def _score_fixed_linear(fit: FittedLinearModel, eval_flat, eval_y, n_rep, jacobian):
    """Score one fixed linear fit on all stacked eval rows. eval_flat: (R*e, p)."""
    x = fit.model_matrix(eval_flat)
    mu = x @ fit.coefficients
    chol = np.linalg.cholesky(fit.gram_inverse)
    t = x @ chol
    h = (t * t).sum(axis=1)
    scale = np.sqrt(fit.sigma2_hat * (1.0 + h))
    scores, ncap = _t_scores_2d(
        eval_y.reshape(-1), mu, scale, float(fit.df_resid), fit.lam, jacobian
    )
    return scores.reshape(n_rep, -1).mean(axis=1), ncap


def _score_fixed_logit(fit: FittedLogit, eval_flat, eval_y, n_rep):
    prob = expit(fit.predict_linear(eval_flat))
    scores, ncap = cap_scores(bernoulli_neg_log_prob(eval_y.reshape(-1), prob))
    return scores.reshape(n_rep, -1).mean(axis=1), ncap


def _score_logit_stack(eval_x, eval_y, beta):
    eta = (eval_x @ beta[:, :, None])[:, :, 0]
    scores, ncap = cap_scores(bernoulli_neg_log_prob(eval_y, expit(eta)))
    return scores.mean(axis=1), ncap


def _with_intercept_flat(design_flat: np.ndarray, cols) -> np.ndarray:
    return np.column_stack(
        [np.ones(design_flat.shape[0]), design_flat[:, list(cols)]]
    )


# ---------------------------------------------------------------------------
# fitting a model form on new data with the strategy's estimation operator


def _fit_form_once(
    params: ScenarioParams,
    strategy: Strategy,
    form,
    data: Dataset,
    fraction: float,
    options: StrategyOptions,
) -> tuple[FittedLinearModel | FittedLogit, bool]:
    """Fit one form on one dataset, mirroring the strategy's estimator.

    Returns (fit, fallback flag). Used for the large-sample fits and for the
    slow per-replication paths (pruning and the two-part variance scheme).
    """
    scenario = params.scenario
    n = data.n
    if strategy is Strategy.VALID:
        m1 = split_size(n, fraction)
        head = list(range(m1))
        tail = list(range(m1, n))
        if scenario is Scenario.OUTLIER:
            pruned = outlier_prune(data.subset(head))
            coef_rows = [head[i] for i in pruned.retained]
        else:
            coef_rows = head
        fit, flags = _linear_form_fit(params, form, data, coef_rows)
        z2 = data.subset(tail)
        mu = fit.predict_mean(z2.design)
        y2 = z2.response if fit.lam is None else boxcox.transform(z2.response, fit.lam)
        resid = y2 - mu
        fit = fit.with_variance(float(resid @ resid) / (z2.n - 1), z2.n - 1)
        return fit, bool(flags)
    if scenario is Scenario.OUTLIER and _prunes_fresh(strategy, options):
        pruned = outlier_prune(data)
        fit, flags = _linear_form_fit(params, form, data, list(pruned.retained))
        return fit, bool(flags)
    if scenario is Scenario.BINARY:
        cols = tuple(form)
        if n < len(cols) + 2:
            return logit_fit(data, ()), True
        return logit_fit(data, cols), False
    fit, flags = _linear_form_fit(params, form, data, list(range(n)))
    return fit, bool(flags)


def _prunes_fresh(strategy: Strategy, options: StrategyOptions) -> bool:
    """Whether the strategy's estimation operator re-applies the pruning rule."""
    if strategy is Strategy.SAFE:
        return True
    if strategy is Strategy.SD and options.outlier_transfer == "rule":
        return True
    return False  # FD and default SD treat the form as the bare linear model


def _linear_form_fit(params, form, data: Dataset, rows):
    scenario = params.scenario
    sub = data.subset(rows)
    flags = []
    if scenario is Scenario.BOXCOX:
        cols: tuple[int, ...] = (0,)
        lam = float(form)
    elif scenario is Scenario.VARSEL:
        cols = tuple(form)
        lam = None
    else:  # outlier
        cols = tuple(range(data.p))
        lam = None
    if sub.n < len(cols) + 2:
        cols = ()
        flags.append("fallback-intercept")
    resp = boxcox.transform(sub.response, lam) if lam is not None else None
    fit = ols_fit(sub, cols, response=resp)
    if lam is not None:
        fit = replace(fit, lam=lam)
    return fit, flags


# ---------------------------------------------------------------------------


def estimate_decomposition(
    params: ScenarioParams,
    fraction: float,
    master_seed: int,
    strategy: Strategy,
    config: DecompConfig,
) -> DecompositionEstimate:
    """Estimate the four components for one cell and strategy.

    Streams are keyed exactly like the plain strategy runs, so the observed
    mean here matches the corresponding experiment cell bit for bit.
    """
    options = config.options
    scenario = params.scenario
    n_rep, n_eval, n_inf = config.n_rep, config.n_eval, config.n_inf
    n = params.n
    m_fresh = _fresh_size(strategy, n, fraction)

    # ---- realized pass: run the strategy, remember forms and samples
    d = np.zeros(n_rep)
    forms: list = []
    form_index: dict = {}
    form_of_rep = np.zeros(n_rep, dtype=int)
    eval_design = np.empty((n_rep * n_eval, params.p))
    eval_y = np.empty((n_rep, n_eval))
    fresh_design = np.empty((n_rep, m_fresh, params.p))
    fresh_y = np.empty((n_rep, m_fresh))
    n_capped = 0
    n_fallback = 0
    flag_counts: dict[str, int] = {}
    fresh_datasets: list[Dataset] | None = None
    needs_loop = _needs_per_rep_fresh(scenario, strategy, options)
    if needs_loop:
        fresh_datasets = []

    for j in range(n_rep):
        train = generate(params, make_stream(StreamKey(master_seed, j, Purpose.TRAIN_DATA)))
        ev = generate(
            params,
            make_stream(StreamKey(master_seed, j, Purpose.EVAL_DATA)),
            n_override=n_eval,
        )
        plan = split_data(n, fraction, make_stream(StreamKey(master_seed, j, Purpose.SPLIT_PERMUTATION)))
        fresh = generate(
            params,
            make_stream(StreamKey(master_seed, j, Purpose.FRESH_DATA)),
            n_override=m_fresh,
        )
        sel_rows = tuple(range(n)) if strategy is Strategy.FD else plan.selection_indices
        selected = select_model(params, train.subset(sel_rows), options)
        model = apply_strategy(strategy, params, train, plan, options, selected=selected)
        scores, ncap, sflags = model_scores(model, ev, options)
        d[j] = scores.mean()
        n_capped += ncap
        for f in list(model.flags) + sflags:
            flag_counts[f] = flag_counts.get(f, 0) + 1
        key = form_key(selected, scenario)
        if key not in form_index:
            form_index[key] = len(forms)
            forms.append(key)
        form_of_rep[j] = form_index[key]
        eval_design[j * n_eval : (j + 1) * n_eval] = ev.design
        eval_y[j] = ev.response
        fresh_design[j] = fresh.design
        fresh_y[j] = fresh.response
        if fresh_datasets is not None:
            fresh_datasets.append(fresh)

    counts = np.bincount(form_of_rep, minlength=len(forms))
    probs = counts / n_rep

    # ---- large-sample surrogate: best form and per-form limiting fits
    zinf = generate(
        params,
        make_stream(StreamKey(master_seed, 0, Purpose.BIG_SAMPLE)),
        n_override=n_inf,
    )
    best_selected = select_model(params, zinf, options)
    best_key = form_key(best_selected, scenario)
    if best_key not in form_index:
        form_index[best_key] = len(forms)
        forms.append(best_key)
        counts = np.append(counts, 0)
        probs = np.append(probs, 0.0)
    n_forms = len(forms)

    zinf_fits = []
    n_capped_aux = 0
    for key in forms:
        fit, fb = _fit_form_once(params, strategy, key, zinf, fraction, options)
        zinf_fits.append(fit)
        n_fallback += int(fb)

    # ---- score the limiting fits on every evaluation set
    b = np.zeros((n_forms, n_rep))
    for i, fit in enumerate(zinf_fits):
        if isinstance(fit, FittedLogit):
            b[i], ncap = _score_fixed_logit(fit, eval_design, eval_y, n_rep)
        else:
            b[i], ncap = _score_fixed_linear(
                fit, eval_design, eval_y, n_rep, options.jacobian
            )
        n_capped_aux += ncap
    a = b[form_index[best_key]]

    # ---- fresh refits of every form, scored on the same evaluation sets
    c = np.zeros((n_forms, n_rep))
    for i, key in enumerate(forms):
        c[i], ncap, nfb = _fresh_scores_for_form(
            params,
            strategy,
            key,
            fraction,
            options,
            fresh_design,
            fresh_y,
            fresh_datasets,
            eval_design,
            eval_y,
        )
        n_capped_aux += ncap
        n_fallback += nfb

    # ---- assemble both estimators
    d_bar = float(d.mean())
    a_bar = float(a.mean())
    b_bar = b.mean(axis=1)
    c_bar = c.mean(axis=1)
    selection_cost = float(probs @ (b_bar - a_bar))
    estimation_cost = float(probs @ (c_bar - b_bar))
    reuse_cost = d_bar - float(probs @ c_bar)

    own_b = b[form_of_rep, np.arange(n_rep)]
    own_c = c[form_of_rep, np.arange(n_rep)]
    sel_j = own_b - a
    est_j = own_c - own_b
    reuse_j = d - own_c

    def _se(v):
        return float(v.std(ddof=1) / math.sqrt(n_rep))

    label_probs = {
        form_label(k, scenario): float(probs[form_index[k]]) for k in forms
    }
    flags = tuple(sorted(flag_counts))
    return DecompositionEstimate(
        strategy=strategy,
        scenario=scenario,
        n_rep=n_rep,
        n_eval=n_eval,
        n_inf=n_inf,
        mean_observed=d_bar,
        best_score=a_bar,
        selection_cost=selection_cost,
        estimation_cost=estimation_cost,
        reuse_cost=reuse_cost,
        selection_matched=float(sel_j.mean()),
        estimation_matched=float(est_j.mean()),
        reuse_matched=float(reuse_j.mean()),
        best_se=_se(a),
        selection_se=_se(sel_j),
        estimation_se=_se(est_j),
        reuse_se=_se(reuse_j),
        n_forms=n_forms,
        best_form=form_label(best_key, scenario),
        prob_best_form=float(probs[form_index[best_key]]),
        selection_probs=label_probs,
        n_fallback_fits=n_fallback,
        n_capped=n_capped,
        n_capped_aux=n_capped_aux,
        flags=flags,
    )


def _needs_per_rep_fresh(
    scenario: Scenario, strategy: Strategy, options: StrategyOptions
) -> bool:
    """True when fresh refits cannot be batched (iterative pruning paths)."""
    if scenario is Scenario.OUTLIER:
        return strategy is Strategy.VALID or _prunes_fresh(strategy, options)
    return False


def _fresh_scores_for_form(
    params: ScenarioParams,
    strategy: Strategy,
    key,
    fraction: float,
    options: StrategyOptions,
    fresh_design: np.ndarray,
    fresh_y: np.ndarray,
    fresh_datasets: list[Dataset] | None,
    eval_design: np.ndarray,
    eval_y: np.ndarray,
):
    """Per-replication mean scores of one form refit on every fresh sample."""
    scenario = params.scenario
    n_rep, m, p = fresh_design.shape
    n_eval = eval_y.shape[1]

    if _needs_per_rep_fresh(scenario, strategy, options):
        return _fresh_scores_loop(
            params, strategy, key, fraction, options, fresh_datasets, eval_design, eval_y
        )

    if scenario is Scenario.BINARY:
        cols = tuple(key)
        fallback = m < len(cols) + 2
        use_cols = () if fallback else cols
        x = _stack_with_intercept(fresh_design, use_cols)
        beta, bad = _batched_logit(x, fresh_y)
        nfb = n_rep if fallback else 0
        ex = _with_intercept_flat(eval_design, use_cols).reshape(n_rep, n_eval, -1)
        means, ncap = _score_logit_stack(ex, eval_y, beta)
        if bad.any():
            # refit collapsed rows through the scalar path
            for j in np.flatnonzero(bad):
                ds = Dataset(fresh_design[j], fresh_y[j], ResponseKind.BINARY)
                fit = logit_fit(ds, use_cols)
                prob = expit(fit.predict_linear(eval_design[j * n_eval : (j + 1) * n_eval]))
                sc, nc = cap_scores(bernoulli_neg_log_prob(eval_y[j], prob))
                means[j] = sc.mean()
                ncap += nc
        return means, ncap, nfb

    # linear scenarios, batchable
    if scenario is Scenario.BOXCOX:
        cols: tuple[int, ...] = (0,)
        lam = float(key)
    elif scenario is Scenario.VARSEL:
        cols = tuple(key)
        lam = None
    else:  # outlier without re-pruning: the bare linear model
        cols = tuple(range(p))
        lam = None

    if strategy is Strategy.VALID:
        m1 = split_size(m, fraction)
        coef_x, coef_y = fresh_design[:, :m1], fresh_y[:, :m1]
        tail_x, tail_y = fresh_design[:, m1:], fresh_y[:, m1:]
        fallback = m1 < len(cols) + 2
        use_cols = () if fallback else cols
        x = _stack_with_intercept(coef_x, use_cols)
        yw = boxcox.transform(coef_y.reshape(-1), lam).reshape(coef_y.shape) if lam is not None else coef_y
        beta, _, gram_inv, bad = _batched_ols(x, yw)
        _neutralize_bad_rows(beta, None, gram_inv, bad)
        ex_tail = _stack_with_intercept(tail_x, use_cols)
        mu_tail = (ex_tail @ beta[:, :, None])[:, :, 0]
        yt = boxcox.transform(tail_y.reshape(-1), lam).reshape(tail_y.shape) if lam is not None else tail_y
        resid = yt - mu_tail
        df = tail_y.shape[1] - 1
        sigma2 = (resid * resid).sum(axis=1) / df
        nfb = n_rep if fallback else 0
    else:
        fallback = m < len(cols) + 2
        use_cols = () if fallback else cols
        x = _stack_with_intercept(fresh_design, use_cols)
        yw = boxcox.transform(fresh_y.reshape(-1), lam).reshape(fresh_y.shape) if lam is not None else fresh_y
        beta, sigma2, gram_inv, bad = _batched_ols(x, yw)
        _neutralize_bad_rows(beta, sigma2, gram_inv, bad)
        df = m - x.shape[2]
        nfb = n_rep if fallback else 0

    ex = _with_intercept_flat(eval_design, use_cols).reshape(n_rep, n_eval, -1)
    means, ncap = _score_linear_stack(
        ex, eval_y, beta, sigma2, gram_inv, float(df), lam, options.jacobian
    )
    if bad.any():
        for j in np.flatnonzero(bad):
            ds = Dataset(fresh_design[j], fresh_y[j])
            fit, fb = _fit_form_once(params, strategy, key, ds, fraction, options)
            nfb += int(fb)
            means[j], nc = _score_one_rep(
                fit, eval_design[j * n_eval : (j + 1) * n_eval], eval_y[j], options
            )
            ncap += nc
    return means, ncap, nfb


def _stack_with_intercept(design3: np.ndarray, cols) -> np.ndarray:
    r, m, _ = design3.shape
    if not cols:
        return np.ones((r, m, 1))
    return np.concatenate(
        [np.ones((r, m, 1)), design3[:, :, list(cols)]], axis=2
    )


def _score_one_rep(fit, eval_design_rows, eval_y_row, options):
    model = PredictiveModel(
        strategy=Strategy.FD, selected=SelectedModel(kind=None), fitted=fit,
        estimation_rows=(),
    )
    ds = Dataset(
        eval_design_rows,
        eval_y_row,
        ResponseKind.BINARY if isinstance(fit, FittedLogit) else ResponseKind.CONTINUOUS,
    )
    scores, ncap, _ = model_scores(model, ds, options)
    return float(scores.mean()), ncap


def _fresh_scores_loop(
    params, strategy, key, fraction, options, fresh_datasets, eval_design, eval_y
):
    """Slow path: per-replication refits (pruning / two-part schemes)."""
    n_rep, n_eval = eval_y.shape
    means = np.zeros(n_rep)
    ncap = 0
    nfb = 0
    for j, ds in enumerate(fresh_datasets):
        fit, fb = _fit_form_once(params, strategy, key, ds, fraction, options)
        nfb += int(fb)
        means[j], nc = _score_one_rep(
            fit, eval_design[j * n_eval : (j + 1) * n_eval], eval_y[j], options
        )
        ncap += nc
    return means, ncap, nfb
