"""Command line entry point ``logdecay-lab <task> --config <path> [--out DIR] [--seed N]``.

Exit codes: 0 when every check of the run passed, 2 when a property check
failed (or the task could not certify its result), 1 on usage or
configuration errors.
"""
from __future__ import annotations

import argparse
import sys
import time

import numpy as np
import scipy.sparse as sps

from ._random import stream, stream_seed
from .config import CARLEMAN_ACTIONS, TASKS, ExperimentConfig, load_config
from .errors import (
    ArtifactNotFoundError,
    BandViolationError,
    ConfigurationError,
    DimensionError,
    EllipticityError,
    EstimateViolationError,
    InconsistencyError,
    InvalidDomainError,
    LabError,
    ProfileError,
    SymmetryError,
    UndefinedFitError,
    WeightInvalidError,
)
from .operator import ResolventSolver, StateVector, assemble_generator
from .report import RunReport, content_hash, emit_plotdata, write_csv, write_triplets
from .resolvent import probe_band, sweep_imaginary_axis
from .semigroup import decay_fit, evolve, remove_equilibrium
from .spectrum import band_fit, eigen_full

__all__ = ["run", "run_config", "main"]

USAGE_ERRORS = (ConfigurationError, InvalidDomainError, SymmetryError, EllipticityError, DimensionError,
                ArtifactNotFoundError)
PROPERTY_ERRORS = (BandViolationError, EstimateViolationError, InconsistencyError, ProfileError, WeightInvalidError)

PROFILE_NOTE = (
    "time profile: b = sqrt(2 + ln(2 + e^mu)/mu) uses the sup of the normalized base weight; "
    "reading 'sup' takes b0 = sqrt(b^2 - 1 - ln(1 + e^mu)/mu), reading 'min' replaces the 1 "
    "by the normalized minimum of the base weight"
)
VK_NOTE = "flux component V_k omits the term -2 a ell_j ell_t, whose symbols are undefined in the space-time setting"


def _setup(cfg):
    domain = cfg.build_domain()
    coeffs = cfg.build_coefficients(domain)
    damping = cfg.build_damping(domain)
    return assemble_generator(domain, coeffs, damping)


def _method(p):
    return None if p["method"] == "auto" else p["method"]


def _task_spectrum(cfg, gen, rep):
    p = cfg.params
    spec = eigen_full(gen, dense_limit=p["dense_limit"], seed=stream_seed(cfg.seed, "spectrum.inverse-iteration"))
    ev = spec.eigenvalues
    write_csv(rep.out_dir / "spectrum.csv", ["re", "im", "residual"],
              [(float(l.real), float(l.imag), float(r)) for l, r in zip(ev, spec.residuals)])
    rep.artifacts["spectrum_csv"] = "spectrum.csv"
    rep.notes.extend(spec.notes)
    rep.summary.update(n_eigenvalues=len(ev), max_residual=spec.max_residual, n_unconverged=spec.n_unconverged)
    rep.checks["converged"] = bool(spec.converged)
    try:
        fit = band_fit(spec, zero_radius=p["zero_radius"])
    except BandViolationError as exc:
        rep.checks["band"] = False
        rep.summary.update(C_band=None, margin=None, excluded_count=None,
                           offending=[complex(z) for z in exc.offending])
        rep.notes.append(str(exc))
    else:
        rep.checks["band"] = True
        rep.summary.update(C_band=fit.C_band, margin=fit.margin, excluded_count=fit.excluded_count,
                           binding=complex(fit.binding))
    emit_plotdata(rep, "spectrum-scatter")


def _task_resolvent(cfg, gen, rep):
    p = cfg.params
    growth = sweep_imaginary_axis(gen, p["tau_min"], p["tau_max"], p["steps"], _method(p), p["dense_limit"])
    write_csv(rep.out_dir / "resolvent.csv", ["tau", "re_lambda", "im_lambda", "norm", "method"],
              [(float(s.tau), float(s.lambda_spec.real), float(s.lambda_spec.imag), float(s.norm), s.method)
               for s in growth.samples])
    rep.artifacts["resolvent_csv"] = "resolvent.csv"
    rep.summary.update(C_res=growth.C_res, max_ratio=growth.max_ratio, n_samples=len(growth.samples),
                       n_perturbed=sum(s.perturbed for s in growth.samples),
                       max_certificate=max(s.certificate for s in growth.samples))
    rep.checks["solvable"] = True
    rep.checks["envelope"] = bool(growth.verify())
    if p["probe_taus"]:
        C = p["probe_C"]
        if not C > 0:
            spec = eigen_full(gen, seed=stream_seed(cfg.seed, "spectrum.inverse-iteration"))
            try:
                C = band_fit(spec).C_band
            except BandViolationError as exc:
                rep.checks["probe_band"] = False
                rep.summary["probe"] = {"C": None, "offending": [complex(z) for z in exc.offending]}
                rep.notes.append(f"band probe skipped: {exc}")
                C = None
        if C is not None:
            try:
                samples = probe_band(gen, C, p["probe_taus"], _method(p), p["dense_limit"])
                rep.checks["probe_band"] = True
                rep.summary["probe"] = {"C": C, "offending": [], "norms": [s.norm for s in samples]}
            except BandViolationError as exc:
                rep.checks["probe_band"] = False
                rep.summary["probe"] = {"C": C, "offending": exc.offending}
                rep.notes.append(str(exc))
    emit_plotdata(rep, "resolvent-curve")


def _initial_state(cfg, gen):
    from .estimators import default_initial_state

    if cfg.params["initial"] == "zero":
        return StateVector.zeros(gen.N)
    return remove_equilibrium(gen, default_initial_state(gen), method=cfg.params["equilibrium"])


def _task_evolve(cfg, gen, rep):
    p = cfg.params
    x0 = _initial_state(cfg, gen)
    trace = evolve(gen, x0, p["T"], p["dt"])
    write_csv(rep.out_dir / "evolve.csv", ["t", "h_norm", "energy", "dissipated"],
              zip(trace.times.tolist(), trace.h_norm.tolist(), trace.energy.tolist(), trace.dissipated.tolist()))
    rep.artifacts["evolve_csv"] = "evolve.csv"
    e0 = float(trace.energy[0])
    defect = float(trace.energy_defect().max())
    rep.checks["energy_identity"] = bool(defect <= 1e-10)
    rep.summary.update(energy0=e0, max_energy_defect=defect, n_records=len(trace.times))
    try:
        fit = decay_fit(trace, p["t_max"] or None)
    except UndefinedFitError as exc:
        rep.summary.update(C_dec=None, argmax_t=None, graph_norm0=trace.graph_norm0)
        rep.notes.append(str(exc))
    else:
        vals = np.log(2.0 + trace.times) * trace.h_norm
        rep.checks["decay_bound"] = bool(np.all(vals <= fit.C_dec * fit.graph_norm0 * (1 + 1e-12)))
        rep.summary.update(C_dec=fit.C_dec, argmax_t=fit.argmax_t, graph_norm0=fit.graph_norm0)
    emit_plotdata(rep, "decay-curve")


def _require_square(gen, action):
    if gen.domain.dim != 2:
        raise ConfigurationError(f"config key 'domain.dim': carleman action '{action}' needs dim = 2")


def _task_carleman(cfg, gen, rep):
    from . import carleman as cm

    p = cfg.params
    action = p["action"]
    rep.summary["action"] = action
    dom = gen.domain
    direction = p["direction"][: dom.dim]
    try:
        w = cm.build_weight(dom, direction, p["offset"], gen.coeffs)
    except WeightInvalidError as exc:
        rep.checks["weight"] = False
        rep.summary["weight"] = {"condition": exc.condition, "node": exc.node}
        rep.notes.append(str(exc))
        return
    rep.checks["weight"] = True
    rep.summary["weight"] = {"direction": w.direction.tolist(), "offset": w.offset, "sup": w.sup,
                             "conditions": {"positivity": True, "gradient": True, "conormal": True}}
    if action == "verify-weight":
        return
    if action == "profile":
        rep.notes.append(PROFILE_NOTE)
        rows = []
        for mu in np.linspace(p["mu_min"], p["mu_max"], p["mu_count"]):
            pr = cm.weight_profile(float(mu), w, reading=p["reading"], raise_on_failure=False)
            rows.append({"mu": pr.mu, "b": pr.b, "b0": pr.b0, "b0_formula": pr.b0_formula,
                         "ordered": pr.ordered, "inner_bound": pr.inner_bound, "outer_bound": pr.outer_bound})
        rep.summary["profiles"] = rows
        rep.summary["reading"] = p["reading"]
        rep.checks["profile"] = all(r["ordered"] and r["inner_bound"] and r["outer_bound"] for r in rows)
        return
    _require_square(gen, action)
    coeffs = cfg.coefficients_section.get("matrix") if cfg.coefficients_section["kind"] == "constant" else None
    if cfg.coefficients_section["kind"] == "samples":
        raise ConfigurationError("config key 'coefficients.kind': carleman checks need closed-form coefficients")
    grid = cm.SpaceTimeGrid.uniform(p["ns"], dom)
    if action == "pointwise":
        rep.notes.append(VK_NOTE)
        weight = cm.CarlemanWeight(w, p["mu"], p["lambda_c"], reading=p["reading"])
        results, rows = {}, []
        for z in cm.pointwise_family():
            r = cm.check_pointwise_estimate(z, weight, grid, coeffs, raise_on_violation=False,
                                            return_field=p["gap_csv"])
            results[z.name] = {"relative_gap": r.relative_gap, "min_gap": r.min_gap, "scale": r.scale,
                               "relative_gap_printed": r.min_gap_printed / r.scale,
                               "identity_defect": r.identity_defect, "psi_dual_error": r.psi_dual_error,
                               "worst_point": list(r.worst_point)}
            if p["gap_csv"]:
                rows.extend((z.name, *map(float, pt), float(g)) for pt, g in zip(r.points, r.gap_field))
        rep.summary["family"] = results
        worst = min(v["relative_gap"] for v in results.values())
        rep.summary["min_relative_gap"] = worst
        rep.checks["pointwise"] = worst >= -1e-6
        rep.checks["psi_dual"] = max(v["psi_dual_error"] for v in results.values()) <= 1e-9
        if p["gap_csv"]:
            write_csv(rep.out_dir / "gap.csv", ["z", "s", "x1", "x2", "relative_gap"], rows)
            rep.artifacts["gap_csv"] = "gap.csv"
            emit_plotdata(rep, "gap-field")
        return
    if action == "identity":
        res = {}
        for i, (wf, g, a) in enumerate(cm.identity_family()):
            r = cm.check_multiplier_identity(wf, g, grid, a)
            res[f"{wf.name}"] = {"max_residual": r.max_residual, "worst_point": list(r.worst_point)}
        rep.summary["family"] = res
        rep.summary["max_residual"] = max(v["max_residual"] for v in res.values())
        rep.checks["identity"] = rep.summary["max_residual"] <= 1e-10
        return
    # global
    weight = cm.CarlemanWeight(w, p["mu"], p["lambda_c"], reading=p["reading"])
    triples = [cm.ManufacturedTriple(z, dom, coeffs, nq=p["nq"]) for z in cm.global_family()]
    rng = stream(cfg.seed, "carleman.extension")
    ext_res = []
    for k in range(p["n_random"]):
        lam = complex(rng.uniform(-1.0, 0.0), rng.uniform(-3.0, 3.0))
        f = rng.standard_normal(2 * gen.N)
        solver = ResolventSolver(gen, lam)
        u = solver.solve(f)
        ext = cm.elliptic_extension(u.u0, lam, grid, gen, f[: gen.N], f[gen.N:], solver.last_residual)
        ext_res.append(ext.residual)
        triples.append(cm.ExtensionTriple(ext, name=f"extension{k + 1}"))
    g = cm.check_global_estimate(triples, weight, p["eps"])
    rep.summary.update(table=g.table(), per_triple=g.per_triple, flagged=g.flagged,
                       extension_residuals=ext_res)
    rep.notes.extend(g.notes)
    rep.checks["global"] = not g.flagged


_TASKS = {"spectrum": _task_spectrum, "resolvent": _task_resolvent, "evolve": _task_evolve,
          "carleman": _task_carleman}


def run_config(cfg: ExperimentConfig, export_matrices=False):
    """Execute the configured task, write its artifacts and ``report.json``.

    Property failures are recorded in the report (``checks``) rather than
    raised; configuration errors propagate.
    """
    t0 = time.perf_counter()
    gen = _setup(cfg)
    out = cfg.output_dir
    out.mkdir(parents=True, exist_ok=True)
    echo = cfg.echo()
    rep = RunReport(cfg.task, echo, content_hash(echo, cfg.inputs[1:]), {}, {}, out)
    if export_matrices:
        for name, mat in (("A_h", gen.A), ("mass", gen.mass), ("K", gen.K), ("B", gen.b_diag)):
            m = sps.diags(mat) if getattr(mat, "ndim", 2) == 1 else mat
            write_triplets(out / f"{name}.triplets", m)
            rep.artifacts[f"{name}_triplets"] = f"{name}.triplets"
    try:
        _TASKS[cfg.task](cfg, gen, rep)
    except PROPERTY_ERRORS as exc:
        rep.checks[type(exc).__name__] = False
        rep.notes.append(f"{type(exc).__name__}: {exc}")
    except USAGE_ERRORS:
        raise
    except LabError as exc:
        rep.checks["task"] = False
        rep.notes.append(f"{type(exc).__name__} during task '{cfg.task}': {exc}")
    rep.save()
    rep.wall_time = time.perf_counter() - t0
    return rep


def run(config_path, task=None, seed=None, out=None, export_matrices=False):
    """Load ``config_path`` and run it; see :func:`run_config`."""
    return run_config(load_config(config_path, task, seed, out), export_matrices)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _parser():
    ap = _Parser(prog="logdecay-lab", description="Discrete damped-wave experiments.")
    ap.add_argument("task", choices=TASKS)
    ap.add_argument("action", nargs="?", choices=CARLEMAN_ACTIONS, help="carleman sub-action")
    ap.add_argument("--config", required=True, help="TOML experiment file")
    ap.add_argument("--out", default=None, help="output directory (overrides [output] dir)")
    ap.add_argument("--seed", type=int, default=None, help="seed (overrides the config value)")
    ap.add_argument("--export-matrices", action="store_true", help="also write sparse triplet files")
    return ap


def main(argv=None):
    args = _parser().parse_args(argv)
    if args.action is not None and args.task != "carleman":
        print(f"logdecay-lab: error: sub-action '{args.action}' is only valid for carleman", file=sys.stderr)
        return 1
    try:
        cfg = load_config(args.config, args.task, args.seed, args.out)
        if args.action is not None:
            cfg.params["action"] = args.action
        rep = run_config(cfg, args.export_matrices)
    except USAGE_ERRORS as exc:
        print(f"logdecay-lab: error: {exc}", file=sys.stderr)
        return 1
    status = "passed" if rep.passed else "FAILED"
    failed = [k for k, v in rep.checks.items() if not v]
    print(f"{cfg.task}: {status} ({rep.wall_time:.2f} s) -> {rep.out_dir / 'report.json'}")
    if failed:
        print("failed checks: " + ", ".join(failed))
    return 0 if rep.passed else 2


if __name__ == "__main__":
    sys.exit(main())
