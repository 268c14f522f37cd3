"""Experiment kinds and the replica runner.

Replicas are processed in fixed-size blocks; block ``b`` draws from the
stream ``(seed, kind, "block", b)``, so the raw output depends only on the
config and never on how blocks are scheduled.  Each kind provides

* ``prepare(config)``: analytic context shared by all blocks,
* ``block(config, ctx, stream, lo, hi)``: raw rows for replicas ``lo..hi-1``,
* ``summarize(config, ctx, rows)``: report rows.

Report rows follow :data:`REPORT_COLUMNS`.  The ``bound`` column only holds
analytic or configured values, never anything estimated from replicas.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import stats as st

from ..coupling import (
    CouplingParams,
    CouplingSample,
    compute_D,
    coupling_cdf,
    laplace_prediction,
    region_boxes,
    sample_coupling,
)
from ..errors import ConfigurationError, SigffError, StatisticalError
from ..extremal import extremal_process, m_centering, pairing
from ..fields.cluster import ClusterDraws, pinned_covariance, sample_cluster_law
from ..fields.inhomogeneous import inhomogeneous_operator, sample_inhomogeneous
from ..fields.perturb import smoothing_transform
from ..fields.threefield import calibrate_three_field, sample_three_field
from ..gausscmp import ComparisonInstance, check_vector_slepian, random_instance
from ..lattice import Region, l1_offsets
from ..sampler import RngStream
from ..stats import (
    cluster_profile,
    distance,
    f_t_transform,
    localization_outcomes,
    separation_hits,
    tail_rate_fit,
    test_function,
    wilson,
)
from .config import ExperimentConfig
from .io import REPORT_COLUMNS, write_csv, write_manifest

__all__ = ["RunResult", "run_experiment", "KIND_TABLE", "COUPLING_REGIONS"]

Z95 = 1.959963984540054
COUPLING_REGIONS = (Region("left", rect=(0.0, 0.5, 0.0, 1.0)), Region("lower-right", rect=(0.5, 1.0, 0.0, 0.5)))


def _ci(value, se):
    return value - Z95 * se, value + Z95 * se


def _verdict(ok):
    return "PASS" if ok else "FAIL"


# -- covariance-check ---------------------------------------------------------


def _cov_prepare(cfg):
    op = inhomogeneous_operator(cfg.spec, cfg.profile)
    N = cfg.spec.N
    side = min(cfg.params["probe_side"], N)
    coords = np.unique(np.round(np.linspace(0, N - 1, side)).astype(int))
    probes = [(a, b) for a in coords for b in coords]
    idx = [a * N + b for a, b in probes]
    return {"op": op, "probes": probes, "cov": op.covariance[np.ix_(idx, idx)]}


def _cov_header(cfg, ctx):
    return ["replica"] + [f"v{a}_{b}" for a, b in ctx["probes"]]


def _cov_block(cfg, ctx, stream, lo, hi):
    fs = sample_inhomogeneous(cfg.spec, cfg.profile, stream, size=hi - lo, operator=ctx["op"])
    vals = np.stack([fs.heights[:, a, b] for a, b in ctx["probes"]], axis=1)
    return [[lo + k, *vals[k]] for k in range(hi - lo)]


def _cov_summary(cfg, ctx, rows):
    X = np.array([r[1:] for r in rows], dtype=float)
    R = len(X)
    prod = X[:, :, None] * X[:, None, :]
    emp = prod.mean(axis=0)
    se = prod.std(axis=0, ddof=1) / math.sqrt(R) if R > 1 else np.full_like(emp, np.inf)
    z = np.abs(emp - ctx["cov"]) / np.where(se > 0, se, np.inf)
    zmax = float(z.max())
    tol = cfg.params["tolerance_se"]
    return [["max_abs_z", zmax, None, None, None, tol, _verdict(zmax <= tol)],
            ["max_variance", None, None, None, None, float(np.diag(ctx["cov"]).max()), "INFO"]]


# -- tail ---------------------------------------------------------------------


def _field_prepare(cfg):
    return {"op": inhomogeneous_operator(cfg.spec, cfg.profile)}


def _sep_prepare(cfg):
    N = cfg.spec.N
    for r in cfg.params["radii"]:
        if r < 2 or N / r < r:
            raise ConfigurationError(f"separation radius {r} needs 2 <= r <= N/r with N={N}")
    return _field_prepare(cfg)


def _loc_prepare(cfg):
    p = cfg.params
    if 2 * p["M"] + 1 > cfg.spec.N or not 0 < p["gamma"] < 0.5:
        raise ConfigurationError(f"localization needs 2M+1 <= N and gamma in (0, 1/2), got M={p['M']}, gamma={p['gamma']}")
    return _field_prepare(cfg)


def _tail_block(cfg, ctx, stream, lo, hi):
    fs = sample_inhomogeneous(cfg.spec, cfg.profile, stream, size=hi - lo, operator=ctx["op"])
    mx = fs.heights.reshape(hi - lo, -1).max(axis=1) - m_centering(cfg.spec.N)
    return [[lo + k, mx[k]] for k in range(hi - lo)]


def _tail_summary(cfg, ctx, rows):
    x = np.array([r[1] for r in rows])
    fit = tail_rate_fit(x, cfg.params["window"], cfg.params["mode"])
    lo, hi = _ci(fit.rate, fit.se)
    return [["tail_rate", fit.rate, fit.se, lo, hi, 2.0, _verdict(1.2 <= fit.rate <= 2.8)]]


# -- separation ---------------------------------------------------------------


def _sep_header(cfg, ctx):
    return ["replica"] + [f"hit_r{r}" for r in cfg.params["radii"]]


def _sep_block(cfg, ctx, stream, lo, hi):
    fs = sample_inhomogeneous(cfg.spec, cfg.profile, stream, size=hi - lo, operator=ctx["op"])
    hits = [separation_hits(fs.heights, r, cfg.params["c"]) for r in cfg.params["radii"]]
    return [[lo + k, *(bool(h[k]) for h in hits)] for k in range(hi - lo)]


def _sep_summary(cfg, ctx, rows):
    radii = cfg.params["radii"]
    out = []
    props = []
    for i, r in enumerate(radii):
        h = [row[1 + i] for row in rows]
        p = wilson(int(sum(h)), len(h))
        props.append(p)
        out.append([f"separation_r{r}", p.value, p.se, p.lo, p.hi, None, "INFO"])
    if len(radii) >= 2:
        small, large = props[0], props[-1]
        out.append([f"trend_r{radii[0]}_r{radii[-1]}", small.value - large.value, None, None, None, None,
                    _verdict(large.hi < small.lo)])
    return out


# -- localization -------------------------------------------------------------


def _loc_block(cfg, ctx, stream, lo, hi):
    fs = sample_inhomogeneous(cfg.spec, cfg.profile, stream, size=hi - lo, operator=ctx["op"])
    p = cfg.params
    res = localization_outcomes(fs, ctx["op"], p["M"], p["gamma"], p["t"])
    return [[lo + k, int(res[k])] for k in range(hi - lo)]


def _loc_summary(cfg, ctx, rows):
    res = np.array([r[1] for r in rows])
    p = wilson(int((res == 1).sum()), int((res >= 0).sum()))
    return [["localization_bad", p.value, p.se, p.lo, p.hi, 0.2, _verdict(p.value <= 0.2)]]


# -- cluster ------------------------------------------------------------------


def _cluster_prepare(cfg):
    offs = l1_offsets(cfg.params["r"])
    k = int(np.flatnonzero((offs == (1, 0)).all(axis=1))[0])
    _, C = pinned_covariance(offs[1:])
    return {"offsets": offs, "unit": k, "var_unit": float(C[k - 1, k - 1])}


def _cluster_header(cfg, ctx):
    return ["sample"] + [f"w{a}_{b}" for a, b in ctx["offsets"].tolist()]


def _cluster_block(cfg, ctx, stream, lo, hi):
    p = cfg.params
    sigma1 = math.sqrt(cfg.profile.sigma2_end)
    d = sample_cluster_law(p["r"], sigma1, stream, count=hi - lo, mode=p["mode"], budget=p["budget"])
    return [[lo + k, *d.theta[k]] for k in range(hi - lo)]


def _cluster_summary(cfg, ctx, rows):
    theta = np.array([r[1:] for r in rows], dtype=float)
    draws = ClusterDraws(ctx["offsets"], theta, len(theta), len(theta), cfg.params["mode"])
    prof = cluster_profile(draws)
    ref = 2.0 * math.sqrt(cfg.profile.sigma2_end)
    lo, hi = _ci(prof.slope, prof.slope_se)
    out = [["cluster_slope", prof.slope, prof.slope_se, lo, hi, ref, _verdict(abs(prof.slope - ref) <= 0.35 * ref)],
           ["theta_origin_max", float(np.abs(theta[:, 0]).max()), None, None, None, 0.0,
            _verdict(np.all(theta[:, 0] == 0.0))]]
    if cfg.params["mode"] == "pinned-limit":
        # the unconditioned pinned variance is analytic; report it as the bound
        out.append(["pinned_var_unit", None, None, None, None, ctx["var_unit"], "INFO"])
    return out


# -- invariance ---------------------------------------------------------------


def _alt_drift(drift):
    # the comparison drift: 1 (exact invariance of a rate-2 exponential
    # intensity) unless that is the configured one, then the default 1/2
    return 0.5 if drift == 1.0 else 1.0


def _inv_prepare(cfg):
    p = cfg.params
    return {
        "op": inhomogeneous_operator(cfg.spec, cfg.profile),
        "ft": f_t_transform(test_function, p["t"], nodes=p["nodes"], drift=p["drift"]),
        "ft_alt": f_t_transform(test_function, p["t"], nodes=p["nodes"], drift=_alt_drift(p["drift"])),
    }


def _inv_header(cfg, ctx):
    return ["replica", "max_psi", "max_smoothed", "laplace_f", "laplace_ft", "laplace_ft_alt_drift"]


def _inv_block(cfg, ctx, stream, lo, hi):
    k = hi - lo
    op = ctx["op"]
    m = m_centering(cfg.spec.N)
    a = sample_inhomogeneous(cfg.spec, cfg.profile, stream.child("a"), size=k, operator=op)
    b = sample_inhomogeneous(cfg.spec, cfg.profile, stream.child("b"), size=k, operator=op)
    c = sample_inhomogeneous(cfg.spec, cfg.profile, stream.child("c"), size=k, operator=op)
    sm = smoothing_transform(b, c, cfg.params["t"])
    r = cfg.params["r"]
    rows = []
    for i in range(k):
        ea = extremal_process(a.heights[i], r)
        eb = extremal_process(b.heights[i], r)
        rows.append([
            lo + i,
            a.heights[i].max() - m,
            sm.heights[i].max() - m,
            math.exp(-pairing(ea, test_function)),
            math.exp(-pairing(eb, ctx["ft"])),
            math.exp(-pairing(eb, ctx["ft_alt"])),
        ])
    return rows


def _inv_summary(cfg, ctx, rows):
    A = np.array(rows, dtype=float)
    ks = st.ks_2samp(A[:, 1], A[:, 2])
    out = [["smoothing_ks_pvalue", ks.pvalue, None, None, None, 0.05, _verdict(ks.pvalue >= 0.05)],
           ["smoothing_ks_statistic", ks.statistic, None, None, None, None, "INFO"]]
    slack = cfg.params["slack"]
    R = len(A)
    alt = f"laplace_diff_drift_{_alt_drift(cfg.params['drift']):g}"
    for name, col in (("laplace_diff", 4), (alt, 5)):
        d = A[:, 3].mean() - A[:, col].mean()
        se = math.sqrt(A[:, 3].var(ddof=1) / R + A[:, col].var(ddof=1) / R) if R > 1 else 0.0
        lo, hi = _ci(d, se)
        verdict = _verdict(abs(d) <= slack + Z95 * se) if col == 4 else "INFO"
        out.append([name, d, se, lo, hi, slack, verdict])
    return out


# -- three-field --------------------------------------------------------------


def _tf_prepare(cfg):
    p = cfg.params
    op = inhomogeneous_operator(cfg.spec, cfg.profile)
    return {"op": op, "calib": calibrate_three_field(cfg.spec, p["K"], p["L"], p["Kp"], p["Lp"], cfg.profile, op)}


def _tf_header(cfg, ctx):
    return ["replica", "max_psi", "max_three_field"]


def _tf_block(cfg, ctx, stream, lo, hi):
    k = hi - lo
    m = m_centering(cfg.spec.N)
    calib = ctx["calib"]
    psi = sample_inhomogeneous(cfg.spec, cfg.profile, stream.child("psi"), size=k, operator=ctx["op"])
    S = sample_three_field(calib, stream.child("S"), size=k)
    mp = psi.heights.reshape(k, -1).max(axis=1) - m
    ms = S.heights.reshape(k, -1).max(axis=1) - m - 4.0 * calib.alpha
    return [[lo + i, mp[i], ms[i]] for i in range(k)]


def _tf_summary(cfg, ctx, rows):
    A = np.array(rows, dtype=float)
    res = float(np.abs(ctx["calib"].residual()).max())
    ks = distance(A[:, 1], A[:, 2], "kolmogorov")
    med = distance(A[:, 1] - np.median(A[:, 1]), A[:, 2] - np.median(A[:, 2]), "kolmogorov")
    return [["variance_residual", res, None, None, None, 1e-6, _verdict(res <= 1e-6)],
            ["alpha", ctx["calib"].alpha, None, None, None, None, "INFO"],
            ["max_kolmogorov", ks, None, None, None, 0.2, _verdict(ks <= 0.2)],
            ["max_kolmogorov_median_centred", med, None, None, None, 0.2, "INFO"]]


# -- coupling -----------------------------------------------------------------


def _coupling_params(cfg, exponent=None):
    p = cfg.params
    return CouplingParams(p["K"], p["L"], p["Kp"], p["Lp"], p["gamma"], p["beta_star"], cfg.profile,
                          exponent or p["exponent"])


def _coupling_prepare(cfg):
    return {"params": _coupling_params(cfg)}


def _coupling_header(cfg, ctx):
    names = [r.label for r in COUPLING_REGIONS]
    return ["replica"] + [f"G_{n}" for n in names] + [f"empty_{n}" for n in names] + [f"Z_{n}_max" for n in names]


def _coupling_block(cfg, ctx, stream, lo, hi):
    P = ctx["params"]
    s = sample_coupling(P, COUPLING_REGIONS, stream, size=hi - lo)
    zmax = np.stack([s.Z[:, region_boxes(r, P.KL)].max(axis=1) for r in COUPLING_REGIONS], axis=1)
    # Z itself is needed for the prediction; keep it in memory via the row tail
    return [[lo + k, *s.values[k], *s.empty[k], *zmax[k], s.Z[k]] for k in range(hi - lo)]


def _coupling_summary(cfg, ctx, rows):
    P = ctx["params"]
    p = len(COUPLING_REGIONS)
    vals = np.array([r[1 : 1 + p] for r in rows], dtype=float)
    empty = np.array([r[1 + p : 1 + 2 * p] for r in rows], dtype=bool)
    Z = np.stack([r[-1] for r in rows])
    sample = CouplingSample(vals, empty, Z, None, None)
    filled = np.where(empty, -np.inf, vals)
    x = np.median(filled, axis=0)
    emp = coupling_cdf(sample, x)
    pe = wilson(int(round(emp * len(rows))), len(rows))
    pred = laplace_prediction(compute_D(Z, COUPLING_REGIONS, P), P.beta_star, x)
    other = _coupling_params(cfg, "double" if P.exponent == "single" else "single")
    pred_other = laplace_prediction(compute_D(Z, COUPLING_REGIONS, other), P.beta_star, x)
    return [["coupling_cdf_empirical", pe.value, pe.se, pe.lo, pe.hi, None, "INFO"],
            ["coupling_prediction", pred, None, None, None, None, "INFO"],
            ["coupling_abs_diff", abs(pred - pe.value), pe.se, None, None, 0.1, _verdict(abs(pred - pe.value) <= 0.1)],
            [f"coupling_prediction_{other.exponent}_exponent", pred_other, None, None, None, None, "INFO"]]


def _coupling_raw(rows):
    return [r[:-1] for r in rows]


# -- slepian-sweep ------------------------------------------------------------


def _slep_header(cfg, ctx):
    return ["instance", "dim", "groups", "lhs", "rhs", "combined_se", "passed"]


def _slep_block(cfg, ctx, stream, lo, hi):
    rows = []
    for i in range(lo, hi):
        inst = random_instance(stream.child("instance", i), cfg.params["max_dim"])
        rep = check_vector_slepian(inst, stream.child("qmc", i), budget=cfg.params["budget"])
        rows.append([i, inst.dim, len(inst.sets), rep.lhs[0], rep.rhs[0], rep.combined_se[0], rep.passed])
    return rows


def _slep_summary(cfg, ctx, rows):
    bad = sum(not r[-1] for r in rows)
    x = 0.3
    inst = ComparisonInstance(np.eye(2), np.ones((2, 2)), [(0, 1)], [x])
    rep = check_vector_slepian(inst, RngStream(cfg.seed, ("slepian-sweep", "analytic")), budget=cfg.params["budget"])
    ok2 = abs(rep.lhs[0] - st.norm.cdf(x) ** 2) <= 3 * rep.se_lhs[0] + 1e-12 and abs(
        rep.rhs[0] - st.norm.cdf(x)) <= 3 * rep.se_rhs[0] + 1e-12
    return [["slepian_violations", bad, None, None, None, 0, _verdict(bad == 0)],
            ["slepian_analytic_2d", rep.rhs[0] - rep.lhs[0], float(rep.combined_se[0]), None, None,
             float(st.norm.cdf(x) - st.norm.cdf(x) ** 2), _verdict(ok2)]]


@dataclass(frozen=True)
class _Kind:
    prepare: object
    header: object
    block: object
    summarize: object
    raw: object = None


def _fixed_header(*names):
    return lambda cfg, ctx: list(names)


KIND_TABLE = {
    "covariance-check": _Kind(_cov_prepare, _cov_header, _cov_block, _cov_summary),
    "tail": _Kind(_field_prepare, _fixed_header("replica", "centred_max"), _tail_block, _tail_summary),
    "separation": _Kind(_sep_prepare, _sep_header, _sep_block, _sep_summary),
    "localization": _Kind(_loc_prepare, _fixed_header("replica", "outcome"), _loc_block, _loc_summary),
    "cluster": _Kind(_cluster_prepare, _cluster_header, _cluster_block, _cluster_summary),
    "invariance": _Kind(_inv_prepare, _inv_header, _inv_block, _inv_summary),
    "three-field": _Kind(_tf_prepare, _tf_header, _tf_block, _tf_summary),
    "coupling": _Kind(_coupling_prepare, _coupling_header, _coupling_block, _coupling_summary, _coupling_raw),
    "slepian-sweep": _Kind(lambda cfg: {}, _slep_header, _slep_block, _slep_summary),
}


_CONTEXTS: dict = {}


def _context(cfg: ExperimentConfig):
    # one analytic context per config, reused by every block in this process
    key = cfg.digest()
    if key not in _CONTEXTS:
        if len(_CONTEXTS) >= 4:
            _CONTEXTS.clear()
        _CONTEXTS[key] = KIND_TABLE[cfg.kind].prepare(cfg)
    return _CONTEXTS[key]


def _run_block(cfg: ExperimentConfig, b: int, lo: int, hi: int):
    kind = KIND_TABLE[cfg.kind]
    ctx = _context(cfg)
    stream = RngStream(cfg.seed, (cfg.kind, "block", b))
    return kind.block(cfg, ctx, stream, lo, hi)


@dataclass(frozen=True)
class RunResult:
    raw: Path
    report: Path
    manifest: Path
    rows: list
    failed: list

    @property
    def passed(self) -> bool:
        return not self.failed and all(r[-1] != "FAIL" for r in self.rows)


def run_experiment(cfg: ExperimentConfig) -> RunResult:
    """Run every replica block, then write raw.csv, report.csv and manifest.json."""
    kind = KIND_TABLE[cfg.kind]
    try:
        ctx = _context(cfg)
    except SigffError:
        raise
    except Exception as exc:  # analytic set-up failing means the config is unusable
        raise ConfigurationError(f"cannot prepare {cfg.kind}: {exc}") from exc
    blocks = [(b, lo, min(lo + cfg.block, cfg.replicas)) for b, lo in enumerate(range(0, cfg.replicas, cfg.block))]
    results: dict = {}
    failed: list = []
    if cfg.workers > 1 and len(blocks) > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            futures = {b: (pool.submit(_run_block, cfg, b, lo, hi), lo, hi) for b, lo, hi in blocks}
            for b, (fut, lo, hi) in futures.items():
                try:
                    results[b] = fut.result()
                except Exception:
                    failed.extend(range(lo, hi))
    else:
        for b, lo, hi in blocks:
            try:
                results[b] = _run_block(cfg, b, lo, hi)
            except (ArithmeticError, RuntimeError, ValueError):
                failed.extend(range(lo, hi))
    rows = [row for b in sorted(results) for row in results[b]]
    out = Path(cfg.output)
    out.mkdir(parents=True, exist_ok=True)
    raw_rows = kind.raw(rows) if kind.raw else rows
    raw_path, report_path, manifest_path = out / "raw.csv", out / "report.csv", out / "manifest.json"
    write_csv(raw_path, kind.header(cfg, ctx), raw_rows)
    try:
        report = kind.summarize(cfg, ctx, rows) if rows else []
    except StatisticalError:
        # too few replicas for the estimator: keep the raw data, fail the check
        report = [["insufficient_data", len(rows), None, None, None, None, "FAIL"]]
    write_csv(report_path, REPORT_COLUMNS, report)
    write_manifest(manifest_path, cfg, {"raw.csv": raw_path, "report.csv": report_path}, failed)
    return RunResult(raw_path, report_path, manifest_path, report, failed)
