"""Command-line front end: build and validate resonant sets, certify transversality, run experiments."""

from __future__ import annotations

import os

# cap BLAS pools before numpy is imported
_THREADS = os.environ.get("RESLAB_THREADS")
if _THREADS:
    for _v in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        os.environ.setdefault(_v, _THREADS)

import csv
import json
import math
import sys
from dataclasses import dataclass, fields
from pathlib import Path

import click
import numpy as np
import tomli

from . import diagnostics as dg
from . import melnikov as mk
from . import pde_galerkin as pg
from . import toy_dynamics as td
from .errors import GiveUp, ReslabError
from .model_coeffs import (EquationKind, ReducedCoeffs, default_equation, hartree_zero,
                           nondegeneracy_report, reduced_coeffs)
from .plots import plot_csv
from .resonant_set import Kind, LambdaSet, build_lambda, make_lambda, validate_lambda

EXIT_OK = 0
EXIT_BUILD = 2
EXIT_CERT = 3
EXIT_RUNTIME = 4

LAMBDA_FILE = "lambda.json"
CERT_FILE = "transversality_certificate.json"


def workers() -> int:
    cpu = os.cpu_count() or 1
    env = os.environ.get("RESLAB_THREADS")
    if env:
        try:
            return max(1, min(int(env), cpu))
        except ValueError:
            raise click.UsageError("RESLAB_THREADS must be a positive integer")
    return cpu


# ---------------------------------------------------------------------------
# JSON at 17 significant digits


def _enc(x, ind: int, level: int) -> str:
    pad = " " * (ind * (level + 1))
    end = " " * (ind * level)
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if x is None:
        return "null"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        v = float(x)
        return format(v, ".17g") if math.isfinite(v) else "null"
    if isinstance(x, str):
        return json.dumps(x)
    if isinstance(x, complex):
        return _enc([x.real, x.imag], ind, level)
    if isinstance(x, np.ndarray):
        return _enc(x.tolist(), ind, level)
    if isinstance(x, dict):
        if not x:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {_enc(v, ind, level + 1)}" for k, v in x.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(x, (list, tuple)):
        if not x:
            return "[]"
        if all(isinstance(v, (int, float, np.integer, np.floating, bool, type(None))) for v in x):
            return "[" + ", ".join(_enc(v, ind, level + 1) for v in x) + "]"
        return "[\n" + ",\n".join(pad + _enc(v, ind, level + 1) for v in x) + "\n" + end + "]"
    if hasattr(x, "to_dict"):
        return _enc(x.to_dict(), ind, level)
    raise TypeError(f"cannot serialize {type(x).__name__}")


def dumps17(obj, indent: int = 2) -> str:
    """Deterministic JSON with floats written at 17 significant digits (non-finite as null)."""
    return _enc(obj, indent, 0) + "\n"


def write_json(path: Path, obj) -> Path:
    path.write_text(dumps17(obj))
    return path


# ---------------------------------------------------------------------------
# configuration


@dataclass
class RunConfig:
    kind: str | None = None
    n: int | None = None
    eps: float | None = None
    seed: int | None = None
    delta: float | None = None
    deltas: list | None = None
    h: float | None = None
    epsilon: float | None = None
    t0: float | None = None
    t_max: float | None = None
    out: str | None = None
    lambda_path: str | None = None
    certificate: str | None = None
    symbols: list | None = None
    sequence: list | None = None
    radii: list | None = None
    psi0: float | None = None
    k0: float | None = None
    rho: float | None = None
    tol: float | None = None
    eq_eps: float | None = None
    eq_seed: int | None = None
    integrable: bool | None = None
    plots: bool | None = None
    n_probe: int | None = None


DEFAULTS = {
    "kind": "beam", "n": 2, "eps": 0.2, "seed": 0, "delta": 0.05, "deltas": [0.1, 0.07, 0.05],
    "epsilon": 0.01, "t0": 5.0, "t_max": 100.0, "out": ".", "psi0": 0.0, "k0": 0.3, "rho": 0.1,
    "tol": 1e-11, "eq_eps": 0.1, "eq_seed": 0, "integrable": False, "plots": True, "n_probe": 48,
    "symbols": [1, 2, 1], "sequence": [1, 2, 1], "radii": [0.05],
}
# command-specific defaults where the general ones do not fit
COMMAND_DEFAULTS = {"horseshoe": {"h": 0.5}, "pde-approx": {"eq_seed": 3}}
TOML_ALIASES = {"lambda": "lambda_path"}
_NAMES = {f.name for f in fields(RunConfig)}


def _parse_list(v, typ):
    if v is None or isinstance(v, list):
        return v
    if isinstance(v, (int, float)):
        return [typ(v)]
    return [typ(x) for x in str(v).replace(" ", "").split(",") if x]


def load_config(path: str | None) -> dict:
    if not path:
        return {}
    try:
        with open(path, "rb") as fh:
            data = tomli.load(fh)
    except (OSError, tomli.TOMLDecodeError) as exc:
        raise click.BadParameter(f"cannot read config {path}: {exc}")
    out = {}
    for k, v in data.items():
        key = TOML_ALIASES.get(k, k).replace("-", "_")
        if key not in _NAMES or isinstance(v, dict):
            raise click.BadParameter(f"unknown config key {k!r}")
        out[key] = v
    return out


def resolve(command: str, flags: dict, config_path: str | None) -> RunConfig:
    """Precedence: flags > config file > command defaults > general defaults."""
    merged = dict(DEFAULTS)
    merged.update(COMMAND_DEFAULTS.get(command, {}))
    merged.update(load_config(config_path))
    merged.update({k: v for k, v in flags.items() if v is not None})
    cfg = RunConfig(**{k: v for k, v in merged.items() if k in _NAMES})
    cfg.deltas = _parse_list(cfg.deltas, float)
    cfg.symbols = _parse_list(cfg.symbols, int)
    cfg.sequence = _parse_list(cfg.sequence, int)
    cfg.radii = _parse_list(cfg.radii, float)
    _validate(cfg)
    return cfg


def _validate(cfg: RunConfig) -> None:
    def bad(msg):
        raise click.BadParameter(msg)

    try:
        Kind(cfg.kind)
    except ValueError:
        bad(f"kind must be one of wave, beam, hartree (got {cfg.kind!r})")
    if not 1 <= int(cfg.n) <= 8:
        bad("n must lie in 1..8")
    if not 0 < cfg.eps <= 0.5:
        bad("eps must lie in (0, 0.5]")
    if cfg.delta is not None and not 0 < cfg.delta <= 0.2:
        bad("delta must lie in (0, 0.2]")
    if any(not 0 < d <= 0.2 for d in cfg.deltas):
        bad("deltas must lie in (0, 0.2]")
    if not 0 < cfg.epsilon <= 0.1:
        bad("epsilon must lie in (0, 0.1]")
    if cfg.h is not None and cfg.h <= 0:
        bad("h must be positive")
    if not 0 < cfg.t0 <= 20:
        bad("t0 must lie in (0, 20]")
    if cfg.t_max <= 0:
        bad("t_max must be positive")
    if not 0 < cfg.k0 < 1:
        bad("k0 must lie in (0, 1)")
    if not 1e-13 <= cfg.tol <= 1e-6:
        bad("tol must lie in [1e-13, 1e-6]")
    if any(s < 1 for s in cfg.symbols):
        bad("symbols must be >= 1")
    if any(r <= 0 for r in cfg.radii):
        bad("radii must be positive")


def _outdir(cfg: RunConfig) -> Path:
    p = Path(cfg.out)
    p.mkdir(parents=True, exist_ok=True)
    return p


def _fail(code: int, out: Path | None, name: str, exc: Exception, extra: dict | None = None):
    rep = {"ok": False, "error": type(exc).__name__, "message": str(exc)}
    for attr in ("leg", "t", "residuals"):
        if hasattr(exc, attr):
            rep[attr] = getattr(exc, attr)
    rep.update(extra or {})
    if out is not None:
        write_json(out / name, rep)
    click.echo(f"error: {type(exc).__name__}: {exc}", err=True)
    sys.exit(code)


def _load_lambda(path: Path) -> LambdaSet:
    return LambdaSet.from_json(path.read_text())


def _equation(cfg: RunConfig, kind: Kind) -> EquationKind:
    if cfg.integrable:
        if kind is not Kind.HARTREE:
            raise click.BadParameter("--integrable applies to Hartree only")
        return hartree_zero(cfg.eq_eps)
    return default_equation(kind, cfg.eq_eps, cfg.eq_seed)


def _load_certificate(cfg: RunConfig, out: Path) -> dict:
    path = Path(cfg.certificate) if cfg.certificate else out / CERT_FILE
    if not path.exists():
        raise click.UsageError(f"certificate {path} not found; run `reslab certify` first")
    return json.loads(path.read_text())


# ---------------------------------------------------------------------------
# commands


def common(f):
    f = click.option("--config", "config_path", type=click.Path(dir_okay=False), default=None,
                     help="TOML file; flags override its values.")(f)
    f = click.option("--out", default=None, help="Output directory.")(f)
    return f


@click.group()
@click.version_option(package_name="reslab")
def main():
    """Resonant energy-transfer laboratory."""


@main.group("lambda")
def lambda_group():
    """Construct or validate resonant sets."""


@lambda_group.command("build")
@click.option("--kind", default=None, help="wave, beam or hartree.")
@click.option("--n", type=int, default=None, help="Number of tuples.")
@click.option("--eps", type=float, default=None, help="Target smallness of the rescaled set.")
@click.option("--seed", type=int, default=None)
@common
def lambda_build(kind, n, eps, seed, out, config_path):
    """Build a resonant set and validate it independently."""
    cfg = resolve("lambda", dict(kind=kind, n=n, eps=eps, seed=seed, out=out), config_path)
    od = _outdir(cfg)
    try:
        L = build_lambda(cfg.kind, cfg.n, cfg.eps, cfg.seed)
    except GiveUp as exc:
        _fail(EXIT_BUILD, od, "validation_report.json", exc)
    (od / LAMBDA_FILE).write_text(L.to_json())
    rep = validate_lambda(L)
    write_json(od / "validation_report.json", rep.to_dict())
    click.echo(f"wrote {od / LAMBDA_FILE} ({L.N} tuples, valid={rep.ok})")
    sys.exit(EXIT_OK if rep.ok else EXIT_BUILD)


@lambda_group.command("validate")
@click.argument("path", type=click.Path(exists=True, dir_okay=False))
@common
def lambda_validate(path, out, config_path):
    """Validate a lambda.json file; exit 2 with a witness on failure."""
    cfg = resolve("lambda", dict(out=out), config_path)
    od = _outdir(cfg)
    try:
        L = _load_lambda(Path(path))
    except (ValueError, KeyError, TypeError) as exc:
        _fail(EXIT_BUILD, od, "validation_report.json", exc)
    rep = validate_lambda(L)
    write_json(od / "validation_report.json", rep.to_dict())
    if not rep.ok:
        for name, c in rep.checks.items():
            if not c.ok:
                click.echo(f"failed {name}: witness {c.to_dict()['witness']}", err=True)
        sys.exit(EXIT_BUILD)
    click.echo("valid")


@main.command("certify")
@click.option("--lambda", "lambda_path", default=None, help="Path to lambda.json (default: OUT/lambda.json).")
@click.option("--delta", type=float, default=None, help="delta of the modified homoclinic family.")
@click.option("--eq-eps", type=float, default=None, help="Hartree potential scale.")
@click.option("--eq-seed", type=int, default=None, help="Seed of the Hartree potential.")
@click.option("--integrable", is_flag=True, default=None, help="Hartree with gamma identically zero.")
@common
def certify(lambda_path, delta, eq_eps, eq_seed, integrable, out, config_path):
    """Coefficients, nondegeneracy conditions and Melnikov critical points."""
    cfg = resolve("certify", dict(lambda_path=lambda_path, delta=delta, eq_eps=eq_eps, eq_seed=eq_seed,
                                  integrable=integrable, out=out), config_path)
    od = _outdir(cfg)
    lp = Path(cfg.lambda_path) if cfg.lambda_path else od / LAMBDA_FILE
    if not lp.exists():
        raise click.UsageError(f"{lp} not found")
    L = _load_lambda(lp)
    try:
        co = reduced_coeffs(L, _equation(cfg, L.kind))
    except ReslabError as exc:
        _fail(EXIT_CERT, od, CERT_FILE, exc)
    cert = {"lambda": str(lp), "kind": L.kind.value, "N": L.N, "coefficients": co.to_dict()}
    failures = []
    if L.N >= 2:
        nd = nondegeneracy_report(co, L)
        cert["nondegeneracy"] = nd
        if not nd["d12_nonzero"]:
            failures.append("d12 vanishes")
        if L.N >= 3 and not nd["det_D_nonzero"]:
            failures.append("det D vanishes")
        if nd["det_D_factored"] is not None and nd["det_D"] != 0:
            cert["det_D_relative_agreement"] = abs(nd["det_D"] - nd["det_D_factored"]) / abs(nd["det_D"])
        crit = {}
        # the shape of the potentials is scale free in d; normalize for the root finders
        dmax = float(np.max(np.abs(co.d)))
        norm = ReducedCoeffs.synthetic(co.epsilon, co.a, co.b, co.c, co.d / dmax) if dmax > 0 else co
        fams = [("delta_homoclinic", dict(delta=cfg.delta))] if L.N == 2 else []
        fams.append(("chain_vector", {}))
        for fam, kw in fams:
            try:
                crit[fam] = mk.find_critical_point(fam, norm, **kw).to_dict()
            except ReslabError as exc:
                crit[fam] = {"error": type(exc).__name__, "message": str(exc)}
                failures.append(f"{fam}: {exc}")
        cert["critical_points"] = crit
        cert["d_scale"] = dmax
        _melnikov_csv(od, norm, cfg.delta, cfg.plots)
    else:
        failures.append("N = 1: no coupling between tuples")
    cert["failures"] = failures
    cert["ok"] = not failures
    write_json(od / CERT_FILE, cert)
    click.echo(f"certificate ok={cert['ok']}" + ("" if cert["ok"] else f" ({'; '.join(failures)})"))
    sys.exit(EXIT_OK if cert["ok"] else EXIT_CERT)


def _melnikov_csv(od: Path, co: ReducedCoeffs, delta: float, plots: bool) -> None:
    taus = np.linspace(-5, 5, 101)
    d12 = float(co.d[0, 1])
    path = od / "melnikov.csv"
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["tau0", "leading_order", "kernel"])
        for t in taus:
            wr.writerow([format(t, ".17g"), format(mk.delta_leading_order(t, co), ".17g"),
                         format(d12 * mk.kernel_integral(t), ".17g")])
    if plots:
        plot_csv(path, od / "melnikov.svg", "tau0", ["leading_order", "kernel"],
                 title="Melnikov potential (normalized couplings)", ylabel="value")


@main.group("run")
def run_group():
    """Run toy-model, approximation, horseshoe or chain experiments."""


def _coeffs_from_certificate(cert: dict) -> ReducedCoeffs:
    if not cert.get("ok", False):
        raise click.UsageError("certificate reports failure; dynamic runs need a passing certificate")
    return ReducedCoeffs.from_dict(cert["coefficients"])


def _delta_model_from(co: ReducedCoeffs, epsilon: float, planes=None) -> ReducedCoeffs:
    d = np.asarray(co.d, dtype=float)
    if planes is not None:
        d = d[np.ix_(planes, planes)]
    m = float(np.max(np.abs(d)))
    N = d.shape[0]
    return ReducedCoeffs.synthetic(epsilon, np.zeros(N), -np.ones(N), np.zeros(N), d / m)


@run_group.command("toy")
@click.option("--t-max", type=float, default=None)
@click.option("--psi0", type=float, default=None)
@click.option("--k0", type=float, default=None)
@click.option("--tol", type=float, default=None)
@click.option("--certificate", default=None)
@common
def run_toy(t_max, psi0, k0, tol, certificate, out, config_path):
    """Integrate the reduced model from the certified coefficients."""
    cfg = resolve("toy", dict(t_max=t_max, psi0=psi0, k0=k0, tol=tol, certificate=certificate, out=out),
                  config_path)
    od = _outdir(cfg)
    co = _coeffs_from_certificate(_load_certificate(cfg, od))
    st = td.ReducedState.angular([cfg.psi0] * co.N, [cfg.k0] * co.N)
    try:
        tr = td.integrate(st, co, (0.0, cfg.t_max), cfg.tol)
    except ReslabError as exc:
        _fail(EXIT_RUNTIME, od, "toy_report.json", exc)
    tr.to_csv(od / "toy.csv")
    E = tr.energies()
    fin = tr.final.to_angular()
    rep = {"ok": True, "N": co.N, "t_max": cfg.t_max, "tol": cfg.tol, "energy0": E[0],
           "energy_drift": float(np.max(np.abs(E - E[0]))), "final_psi": fin.psi, "final_K": fin.K,
           "pde_time_scale": co.time_scale}
    write_json(od / "toy_report.json", rep)
    if cfg.plots:
        plot_csv(od / "toy.csv", od / "toy_K.svg", "t", ["K_*"], title="actions K_j(t)", ylabel="K")
    click.echo(f"energy drift {rep['energy_drift']:.3e}")


DEFAULT_SQUARE = [[(1, 0), (2, 0), (2, 1), (1, 1)]]


@run_group.command("pde-approx")
@click.option("--deltas", default=None, help="Comma separated, e.g. 0.1,0.07,0.05.")
@click.option("--t0", type=float, default=None)
@click.option("--rho", type=float, default=None)
@click.option("--lambda", "lambda_path", default=None, help="lambda.json; default is a Hartree square.")
@click.option("--psi0", type=float, default=None)
@click.option("--k0", type=float, default=None)
@click.option("--eq-eps", type=float, default=None)
@click.option("--eq-seed", type=int, default=None)
@common
def run_pde_approx(deltas, t0, rho, lambda_path, psi0, k0, eq_eps, eq_seed, out, config_path):
    """Error between the rescaled resonant model and the truncated full system."""
    cfg = resolve("pde-approx", dict(deltas=deltas, t0=t0, rho=rho, lambda_path=lambda_path, psi0=psi0,
                                     k0=k0, eq_eps=eq_eps, eq_seed=eq_seed, out=out), config_path)
    od = _outdir(cfg)
    if cfg.lambda_path:
        L = _load_lambda(Path(cfg.lambda_path))
        eq = _equation(cfg, L.kind)
    else:
        L = make_lambda(DEFAULT_SQUARE, "hartree")
        eq = EquationKind.hartree(cfg.eq_eps, seed=cfg.eq_seed)
    st = td.ReducedState.angular([cfg.psi0] * L.N, [cfg.k0] * L.N)
    r0 = pg.FourierState(td.lift_state(st, L, [0.0] * len(L.modes)), cfg.rho)
    try:
        rep = pg.approximation_experiment(r0, cfg.deltas, cfg.t0, L, eq, rho=cfg.rho)
    except ReslabError as exc:
        _fail(EXIT_RUNTIME, od, "approximation_report.json", exc)
    d = rep.to_dict()
    d["ok"] = bool(rep.fitted_exponent >= 2)
    write_json(od / "approximation_report.json", d)
    with open(od / "approximation.csv", "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["delta", "sup_error"])
        for a, b in zip(rep.deltas, rep.sup_errors):
            wr.writerow([format(a, ".17g"), format(b, ".17g")])
    if cfg.plots:
        plot_csv(od / "approximation.csv", od / "approximation.svg", "delta", ["sup_error"],
                 title=f"approximation error, fitted exponent {rep.fitted_exponent:.3f}", logy=True,
                 scatter=True)
    click.echo(f"fitted exponent {rep.fitted_exponent:.4f}")
    sys.exit(EXIT_OK if d["ok"] else EXIT_RUNTIME)


@run_group.command("horseshoe")
@click.option("--symbols", default=None, help="Requested symbols, e.g. 3,5,4.")
@click.option("--h", type=float, default=None, help="Energy of the periodic orbit in the first plane.")
@click.option("--epsilon", type=float, default=None, help="Coupling size (equal to delta).")
@click.option("--n-probe", type=int, default=None)
@click.option("--certificate", default=None)
@common
def run_horseshoe(symbols, h, epsilon, n_probe, certificate, out, config_path):
    """Shoot an orbit with prescribed hitting-time symbols near the transverse homoclinic."""
    cfg = resolve("horseshoe", dict(symbols=symbols, h=h, epsilon=epsilon, n_probe=n_probe,
                                    certificate=certificate, out=out), config_path)
    od = _outdir(cfg)
    co = _delta_model_from(_coeffs_from_certificate(_load_certificate(cfg, od)), cfg.epsilon, planes=[0, 1])
    try:
        sh = dg.HorseshoeShooter(co, cfg.h)
        sh.calibrate(cfg.n_probe, workers=workers())
        res = sh.certify(sh.shoot(cfg.symbols))
    except ReslabError as exc:
        _fail(EXIT_RUNTIME, od, "horseshoe_report.json", exc)
    res.trajectory.to_csv(od / "horseshoe.csv")
    rep = res.to_dict()
    rep["ok"] = res.achieved == res.requested
    rep["d12_sign"] = float(np.sign(co.d[0, 1]))
    write_json(od / "horseshoe_report.json", rep)
    with open(od / "section.csv", "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["t", "psi_1", "K_1"])
        for t in res.crossing_times:
            s = res.trajectory.state(t)
            wr.writerow([format(t, ".17g"), format(s.psi[0], ".17g"), format(s.K[0], ".17g")])
    if cfg.plots:
        plot_csv(od / "horseshoe.csv", od / "horseshoe_K.svg", "t", ["K_*"], title="horseshoe orbit", ylabel="K")
        plot_csv(od / "section.csv", od / "section.svg", "psi_1", ["K_1"], title="section crossings",
                 ylabel="K_1", scatter=True)
    click.echo(f"requested {res.requested} achieved {res.achieved}")
    sys.exit(EXIT_OK if rep["ok"] else EXIT_RUNTIME)


@run_group.command("chain")
@click.option("--sequence", default=None, help="1-based plane indices, e.g. 1,2,1.")
@click.option("--radii", default=None, help="One radius or one per visit.")
@click.option("--h", type=float, default=None, help="Energy level (default 1e-3 * epsilon).")
@click.option("--epsilon", type=float, default=None)
@click.option("--certificate", default=None)
@common
def run_chain(sequence, radii, h, epsilon, certificate, out, config_path):
    """Shadow a transition chain of periodic orbits."""
    cfg = resolve("chain", dict(sequence=sequence, radii=radii, h=h, epsilon=epsilon, certificate=certificate,
                                out=out), config_path)
    od = _outdir(cfg)
    base = _coeffs_from_certificate(_load_certificate(cfg, od))
    if max(cfg.sequence) > base.N or min(cfg.sequence) < 1:
        raise click.BadParameter(f"sequence entries must lie in 1..{base.N}")
    co = _delta_model_from(base, cfg.epsilon)
    hh = cfg.h if cfg.h is not None else 1e-3 * cfg.epsilon
    spec = dg.ChainSpec([s - 1 for s in cfg.sequence], list(cfg.radii), hh, cfg.epsilon)
    try:
        res = dg.chain_shadow(spec, co, tol=cfg.tol)
    except ReslabError as exc:
        _fail(EXIT_RUNTIME, od, "chain_report.json", exc, {"sequence": cfg.sequence})
    res.trajectory.to_csv(od / "chain.csv")
    rep = res.to_dict()
    rep["sequence"] = cfg.sequence
    rep["ok"] = res.success
    write_json(od / "chain_report.json", rep)
    if cfg.plots:
        plot_csv(od / "chain.csv", od / "chain_K.svg", "t", ["K_*"], title="transition chain", ylabel="K")
    click.echo("visits at " + ", ".join(f"{v.t:.3f}" for v in res.visits))


if __name__ == "__main__":
    main()
