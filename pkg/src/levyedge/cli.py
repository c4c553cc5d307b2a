"""Experiment harness: named rate experiments behind one command.

Subcommands reproduce the headline convergence rates (central-limit
distance decay, plain and perturbed; small-jump Gaussian substitution;
SDE strong error) and expose the symbolic pipeline (expansion build,
smoothness probe).  Configs are flat ``key = value`` text; outputs are
RFC-4180 CSV (or plain text for the symbolic dumps) stamped with a hash
of the effective configuration, and a re-run with the same config and
seed is byte-identical apart from the optional timestamp line.

Exit codes: 0 success, 2 configuration error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import datetime
import hashlib
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from typing import Dict, List, Optional

import numpy as np
from scipy import stats

from .edgeworth import (
    CumulantSet,
    EdgeworthError,
    build_P,
    build_Q,
    cumulants_to_moments,
    edgeworth_signed_moments,
    scaled_sum_moments,
)
from .laws import LawError, make_law
from .levy import (
    AnnulusDecomposition,
    LevyError,
    cramer_amplify,
    cramer_probe,
    measure_from_config,
)
from .perturbation import PerturbationError, apply_L, compute_S_tilde, invert_S_map
from .polycore import Polynomial
from .sampling import RngStream, SamplingError, sample_gaussian, sample_perturbed_normal, sample_small_jumps
from .sde import SchemeConfig, SdeError, SdeSpec, coupled_paths
from .wasserstein import (
    MAX_ASSIGNMENT_SIZE,
    WassersteinError,
    rate_fit,
    wp_1d_exact,
    wp_empirical,
)


class ConfigError(ValueError):
    pass


class NumericalFailure(RuntimeError):
    pass


_NUMERIC_ERRORS = (
    EdgeworthError,
    PerturbationError,
    LevyError,
    SamplingError,
    WassersteinError,
    SdeError,
    FloatingPointError,
    np.linalg.LinAlgError,
)


# ---------------------------------------------------------------- config

def parse_config_text(text: str) -> Dict[str, str]:
    """Flat key = value lines; '#' comments and [section] markers ignored."""
    out: Dict[str, str] = {}
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line or (line.startswith("[") and line.endswith("]")):
            continue
        if "=" not in line:
            raise ConfigError(f"bad config line: {raw!r}")
        key, val = line.split("=", 1)
        out[key.strip()] = val.strip()
    return out


def load_config(path: Optional[str]) -> Dict[str, str]:
    if path is None:
        return {}
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return parse_config_text(fh.read())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc


def config_hash(experiment: str, cfg: Dict[str, str], seed: int) -> str:
    canon = "\n".join(
        [f"experiment={experiment}", f"seed={seed}"]
        + [f"{k}={cfg[k]}" for k in sorted(cfg)]
    )
    return hashlib.sha256(canon.encode("utf-8")).hexdigest()[:16]


def _get_float_list(cfg, key, default):
    raw = cfg.get(key, default)
    try:
        vals = [float(x) for x in str(raw).replace(" ", "").split(",") if x != ""]
    except ValueError as exc:
        raise ConfigError(f"{key} must be a comma list of numbers") from exc
    if not vals:
        raise ConfigError(f"{key} must be non-empty")
    return vals


def _get_int(cfg, key, default):
    try:
        return int(cfg.get(key, default))
    except ValueError as exc:
        raise ConfigError(f"{key} must be an integer") from exc


def _get_float(cfg, key, default):
    try:
        return float(cfg.get(key, default))
    except ValueError as exc:
        raise ConfigError(f"{key} must be a number") from exc


def _check_even_p(p: float) -> int:
    if p != int(p) or int(p) <= 0 or int(p) % 2:
        raise ConfigError("p must be a positive even integer")
    return int(p)


# ---------------------------------------------------------------- output

def _existing_hash(path: str) -> Optional[str]:
    try:
        with open(path, "r", encoding="utf-8", newline="") as fh:
            row = next(csv.reader(fh), None)
    except OSError:
        return None
    if row and len(row) >= 2 and row[0] == "config_hash":
        return row[1]
    return None


def _open_out(path: Optional[str], chash: str, force: bool):
    if path is None:
        return sys.stdout, False
    prev = _existing_hash(path)
    if prev is not None and prev != chash and not force:
        raise ConfigError(
            f"output {path} carries config hash {prev}, current run is {chash}; "
            "pass --force to overwrite"
        )
    return open(path, "w", encoding="utf-8", newline=""), True


def _emit(rows: List[list], chash: str, no_timestamp: bool,
          out_path: Optional[str], force: bool) -> None:
    fh, close = _open_out(out_path, chash, force)
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["config_hash", chash])
        if not no_timestamp:
            w.writerow(["timestamp", datetime.datetime.now(datetime.timezone.utc).isoformat()])
        for row in rows:
            w.writerow(row)
    finally:
        if close:
            fh.close()


def _emit_text(lines: List[str], chash: str, no_timestamp: bool,
               out_path: Optional[str], force: bool) -> None:
    fh, close = _open_out(out_path, chash, force)
    try:
        fh.write(f"config_hash,{chash}\n")
        if not no_timestamp:
            fh.write(f"timestamp,{datetime.datetime.now(datetime.timezone.utc).isoformat()}\n")
        for line in lines:
            fh.write(line + "\n")
    finally:
        if close:
            fh.close()


def _parallel(fn, jobs, threads: int):
    if threads <= 1:
        return [fn(j) for j in jobs]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, jobs))


# ------------------------------------------------------------ clt-rate

def run_clt_rate(cfg: Dict[str, str], seed: int, threads: int) -> List[list]:
    law_name = cfg.get("law", "centered-exponential")
    mode = cfg.get("mode", "gaussian")
    if mode not in ("gaussian", "perturbed"):
        raise ConfigError("mode must be gaussian or perturbed")
    try:
        law = make_law(law_name)
    except LawError as exc:
        raise ConfigError(str(exc)) from exc
    m_list = [int(v) for v in _get_float_list(cfg, "m_list", "16,64,256,1024")]
    if any(m < 1 for m in m_list):
        raise ConfigError("m_list entries must be positive")
    p = _check_even_p(_get_float(cfg, "p", 2))
    n = _get_int(cfg, "n_samples", 100_000)
    reps = _get_int(cfg, "replicates", 20)
    target = _get_int(cfg, "n", 4)  # moment-match order of the perturbed reference
    if reps < 1 or n < 2:
        raise ConfigError("replicates and n_samples must be positive")
    if law.dimension > 1 and n > MAX_ASSIGNMENT_SIZE:
        raise ConfigError(
            f"n_samples {n} exceeds the assignment cap {MAX_ASSIGNMENT_SIZE} "
            f"for {law.dimension}-dimensional laws"
        )

    root = RngStream(seed, 0)
    sigma = np.array([[float(v) for v in row] for row in law.cumulants.covariance])
    pmap = None
    r_order = target - 3
    if mode == "perturbed":
        if r_order < 1:
            raise ConfigError("perturbed mode needs n >= 4")
        Q = build_Q(law.cumulants, r_order)
        pmap = invert_S_map(Q, law.cumulants.covariance)

    rows: List[list] = [["m", "p", "mode", "distance", "replicate"]]
    exact_quantile = (
        mode == "perturbed" and law.dimension == 1 and law.has_sum_quantile and p == 2
    )
    per_m_reps = []
    for mi, m in enumerate(m_list):
        eps = 1.0 / math.sqrt(m)
        if exact_quantile:
            # both sides have exact quantile functions: no sampling floor
            qs = law.sum_quantile(m)
            disp = pmap.displacement(eps)

            def qref(t, disp=disp):
                x = stats.norm.ppf(t) * math.sqrt(sigma[0, 0])
                return x + float(disp[0](np.array([x])))

            vals = [wp_1d_exact(qs, qref, p)]
            rows.append([m, p, mode, repr(vals[0]), 0])
        else:
            def one(rep, m=m, mi=mi, eps=eps):
                g = root.child(rep, mi, "clt").generator
                ym = law.sample_sum(m, n, g)
                if mode == "gaussian":
                    ref = sample_gaussian(sigma, g, n)
                else:
                    ref = sample_perturbed_normal(pmap, eps, r_order, g, n)
                if law.dimension == 1:
                    return wp_1d_exact(ym[:, 0], ref[:, 0], p)
                return wp_empirical(ym, ref, p)

            vals = _parallel(one, range(reps), threads)
            for rep, v in enumerate(vals):
                rows.append([m, p, mode, repr(float(v)), rep])
        per_m_reps.append(vals)
    width = max(len(v) for v in per_m_reps)
    mat = np.array([v * (width // len(v)) + v[: width % len(v)] for v in per_m_reps])
    means = mat.mean(axis=1)
    slope, ci = rate_fit(m_list, means, bootstrap_reps=200 if width > 1 else 0,
                         replicates=mat if width > 1 else None, seed=seed)
    null_case = law_name == "gaussian" and mode == "gaussian"
    rows.append(["slope", repr(slope), "ci_lo", repr(ci[0]), "ci_hi", repr(ci[1]),
                 "null_case" if null_case else "rate"])
    return rows


# -------------------------------------------------------- jump-coupling

def run_jump_coupling(cfg: Dict[str, str], seed: int, threads: int) -> List[list]:
    try:
        meas = measure_from_config(cfg)
    except (LevyError, KeyError, ValueError) as exc:
        raise ConfigError(f"bad measure config: {exc}") from exc
    eps_list = _get_float_list(cfg, "eps_list", "0.125,0.0625,0.03125,0.015625")
    p = _check_even_p(_get_float(cfg, "p", 2))
    n = _get_int(cfg, "n_samples", 2000)
    reps = _get_int(cfg, "replicates", 20)
    t_factor = _get_float(cfg, "t_factor", 1.0)  # t = t_factor * eps; theorem needs t >= eps
    if t_factor < 1.0:
        raise ConfigError("t_factor must be >= 1 (coupling bound needs t >= eps)")
    if n > MAX_ASSIGNMENT_SIZE:
        raise ConfigError(f"n_samples exceeds the assignment cap {MAX_ASSIGNMENT_SIZE}")
    if any(not 0 < e <= meas.tau for e in eps_list):
        raise ConfigError("eps_list must lie in (0, tau]")

    root = RngStream(seed, 1)
    rows: List[list] = [["eps", "t", "p", "distance", "replicate"]]
    per_eps = []
    for ei, eps in enumerate(eps_list):
        dec = AnnulusDecomposition(meas, eps)
        sig = meas.small_jump_covariance(eps)
        t = t_factor * eps

        def one(rep, eps=eps, ei=ei, dec=dec, sig=sig, t=t):
            g = root.child(rep, ei, "jump").generator
            z = sample_small_jumps(meas, dec, t, g, n)
            ref = math.sqrt(t) * sample_gaussian(sig, g, n)
            if meas.dimension == 1:
                return wp_1d_exact(z[:, 0], ref[:, 0], p)
            return wp_empirical(z, ref, p)

        vals = _parallel(one, range(reps), threads)
        for rep, v in enumerate(vals):
            rows.append([eps, t, p, repr(float(v)), rep])
        per_eps.append(vals)
    mat = np.array(per_eps)
    means = mat.mean(axis=1)
    if np.all(means > 0):
        slope, ci = rate_fit(eps_list, means, bootstrap_reps=200, replicates=mat, seed=seed)
        rows.append(["slope", repr(slope), "ci_lo", repr(ci[0]), "ci_hi", repr(ci[1]), "rate"])
    else:
        rows.append(["slope", "nan", "ci_lo", "nan", "ci_hi", "nan", "degenerate"])
    return rows


# ------------------------------------------------------ sde-convergence

def _sigma_builtin(name: str, d: int, q: int):
    if name == "contractive":
        def fn(x):
            m = x.shape[0]
            n2 = (x ** 2).sum(axis=1)
            base = 0.6 + 0.4 / (1.0 + n2)
            s = np.zeros((m, d, q))
            for j in range(min(d, q)):
                s[:, j, j] = base
            if d >= 2 and q >= 2:
                s[:, 0, 1] = 0.1 / (1.0 + n2)
                s[:, 1, 0] = 0.1 / (1.0 + n2)
            return s
        return fn
    if name == "zero":
        return lambda x: np.zeros((x.shape[0], d, q))
    if name == "constant":
        eye = np.eye(d, q)
        return lambda x: np.tile(eye, (x.shape[0], 1, 1))
    raise ConfigError(f"unknown sigma builtin {name!r}")


def run_sde_convergence(cfg: Dict[str, str], seed: int, threads: int) -> List[list]:
    try:
        meas = measure_from_config(cfg)
    except (LevyError, KeyError, ValueError) as exc:
        raise ConfigError(f"bad measure config: {exc}") from exc
    q = meas.dimension
    d = _get_int(cfg, "d", q)
    h_list = _get_float_list(cfg, "h_list", "0.0625,0.03125,0.015625,0.0078125")
    M = _get_int(cfg, "replicates", 256)
    sub = _get_int(cfg, "fine_substeps", 16)
    style = cfg.get("coupling_style", "radial")
    sigma_name = cfg.get("sigma", "contractive")
    T = _get_float(cfg, "T", 1.0)
    drift = _get_float(cfg, "drift", 0.1)
    bscale = _get_float(cfg, "b_scale", 0.3)
    a = drift * np.array([1.0, -1.0] * (q // 2) + [1.0] * (q % 2))[:q]
    spec = SdeSpec(
        d=d, q=q, a=a, B=bscale * np.eye(q), sigma_fn=_sigma_builtin(sigma_name, d, q),
        x0=np.zeros(d), T=T, measure=meas,
    )
    rows: List[list] = [["h", "eps", "replicates", "rms_sup_error"]]
    rms = []
    for hi, h in enumerate(h_list):
        scfg = SchemeConfig(h=h, eps=h, fine_substeps=sub, coupling_style=style)
        rng = RngStream(seed, 100 + hi)
        res = coupled_paths(spec, scfg, M, rng)
        r = float(np.sqrt(np.mean(res.sup_distance ** 2)))
        rms.append(r)
        rows.append([h, h, M, repr(r)])
    if all(r > 0 for r in rms):
        slope, _ = rate_fit(h_list, rms)
        rows.append(["slope", repr(slope), "", "rate"])
    else:
        rows.append(["slope", "0", "", "exact-coincidence"])
    return rows


# ------------------------------------------------------ edgeworth-build

def run_edgeworth_build(cfg: Dict[str, str], seed: int, threads: int) -> List[str]:
    if "cumulants" in cfg:
        try:
            with open(cfg["cumulants"], "r", encoding="utf-8") as fh:
                cset = CumulantSet.from_text(fh.read())
        except OSError as exc:
            raise ConfigError(f"cannot read cumulant file: {exc}") from exc
        except EdgeworthError as exc:
            raise ConfigError(f"bad cumulant file: {exc}") from exc
    elif "law" in cfg:
        try:
            cset = make_law(cfg["law"]).cumulants
        except LawError as exc:
            raise ConfigError(str(exc)) from exc
    else:
        raise ConfigError("edgeworth-build needs cumulants=PATH or law=NAME")
    r = _get_int(cfg, "r", 1)
    if r < 1:
        raise ConfigError("r must be >= 1")
    if cset.order < r + 2:
        raise ConfigError(f"cumulant set of order {cset.order} cannot support r={r}")

    lines = [f"dimension {cset.dimension}  order {cset.order}  r {r}", ""]
    P = build_P(cset, r)
    Q = build_Q(cset, r)
    for k in range(1, r + 1):
        lines.append(f"P_{k}(y) = {P[k - 1].to_text()}")
    lines.append("")
    for k in range(1, r + 1):
        lines.append(f"Q_{k}(x) = {Q[k - 1].to_text()}")
    lines.append("")
    pmap = invert_S_map(Q, cset.covariance)
    all_zero = True
    zero_poly = Polynomial(cset.dimension)
    for k in range(1, r + 1):
        u = pmap.potentials[k - 1]
        lines.append(f"u_{k}(x) = {u.to_text()}")
        for j, g in enumerate(pmap.gradients[k - 1]):
            lines.append(f"p_{k},{j + 1}(x) = {g.to_text()}")
        if k == 1:
            stilde_k = zero_poly
        else:
            stilde_k = compute_S_tilde(
                pmap.potentials[: k - 1], Q[: k - 1], cset.covariance
            )
        resid = apply_L(u, cset.covariance) + (Q[k - 1] - stilde_k)
        zero = not resid.terms
        all_zero = all_zero and zero
        lines.append(f"residual_{k}: {'0 (exact)' if zero else resid.to_text()}")
    lines.append("")
    lines.append(f"residual check: {'all zero (exact)' if all_zero else 'FAILED'}")
    if not all_zero:
        raise NumericalFailure("nonzero residual in the eigenfunction solve")

    # moment-match report: signed expansion density vs normalized sum,
    # both exact rationals at a perfect-square m
    from fractions import Fraction

    m_probe = _get_int(cfg, "m_probe", 100)
    eps = Fraction(1, int(math.isqrt(m_probe)))
    if eps ** -2 != m_probe:
        raise ConfigError("m_probe must be a perfect square")
    order = min(cset.order, r + 2)
    left = edgeworth_signed_moments(cset, r, eps, order)
    right = scaled_sum_moments(cset, m_probe, order)
    lines.append(f"moment match at m = {m_probe} up to order {order}:")
    ok = True
    for alpha in sorted(left):
        l, rgt = left[alpha], right.get(alpha, 0)
        match = l == rgt
        ok = ok and match
        lines.append(f"  alpha={alpha}  expansion={l}  sum={rgt}  {'ok' if match else 'MISMATCH'}")
    lines.append(f"moment check: {'all equal (exact)' if ok else 'FAILED'}")
    if not ok:
        raise NumericalFailure("moment matching failed")
    return lines


# -------------------------------------------------------- probe-cramer

def run_probe_cramer(cfg: Dict[str, str], seed: int, threads: int) -> List[str]:
    try:
        meas = measure_from_config(cfg)
    except (LevyError, KeyError, ValueError) as exc:
        raise ConfigError(f"bad measure config: {exc}") from exc
    r = _get_int(cfg, "r", 4)
    rho = _get_float(cfg, "rho", 8.0)
    lo = _get_float(cfg, "grid_lo", rho)
    hi = _get_float(cfg, "grid_hi", 60.0)
    npts = _get_int(cfg, "grid_n", 200)
    if lo < rho or hi <= lo or npts < 2:
        raise ConfigError("grid must satisfy rho <= grid_lo < grid_hi, grid_n >= 2")
    grid = np.linspace(lo, hi, npts)
    gamma = cramer_probe(meas, r, rho, grid)
    lines = [
        f"annulus index r = {r}",
        f"grid [{lo}, {hi}] with {npts} points, rho = {rho}",
        f"sup |char| over grid = {gamma!r}",
    ]
    if gamma >= 1.0:
        raise NumericalFailure("characteristic probe did not certify decay (sup >= 1)")
    if "delta" in cfg:
        delta = _get_float(cfg, "delta", 0.1)
        gbar = cramer_amplify(rho, gamma, delta)
        lines.append(f"amplified bound on |s| >= {delta}: gamma_bar = {gbar!r}")
    return lines


# ----------------------------------------------------------------- main

_EXPERIMENTS = {
    "clt-rate": (run_clt_rate, "csv"),
    "jump-coupling": (run_jump_coupling, "csv"),
    "sde-convergence": (run_sde_convergence, "csv"),
    "edgeworth-build": (run_edgeworth_build, "text"),
    "probe-cramer": (run_probe_cramer, "text"),
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="levyedge", description=__doc__)
    sub = ap.add_subparsers(dest="experiment", required=True)
    for name in _EXPERIMENTS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", default=None, help="flat key = value config file")
        sp.add_argument("--seed", type=int, default=0, help="master seed (u64)")
        sp.add_argument("--out", default=None, help="output path (default stdout)")
        sp.add_argument("--threads", type=int, default=1, help="replicate worker threads")
        sp.add_argument("--no-timestamp", action="store_true",
                        help="suppress the timestamp line for byte-identical re-runs")
        sp.add_argument("--force", action="store_true",
                        help="overwrite outputs whose config hash differs")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    runner, kind = _EXPERIMENTS[args.experiment]
    try:
        cfg = load_config(args.config)
        seed = args.seed & ((1 << 64) - 1)
        chash = config_hash(args.experiment, cfg, seed)
        if args.out is not None:
            # surface hash conflicts before doing any work
            prev = _existing_hash(args.out)
            if prev is not None and prev != chash and not args.force:
                raise ConfigError(
                    f"output {args.out} carries config hash {prev}, current run "
                    f"is {chash}; pass --force to overwrite"
                )
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    try:
        result = runner(cfg, seed, max(1, args.threads))
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except NumericalFailure as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    except _NUMERIC_ERRORS as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    if kind == "csv":
        _emit(result, chash, args.no_timestamp, args.out, args.force)
    else:
        _emit_text(result, chash, args.no_timestamp, args.out, args.force)
    return 0


if __name__ == "__main__":
    sys.exit(main())
