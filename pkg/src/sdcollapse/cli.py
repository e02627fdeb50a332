"""Command-line driver for the four canonical experiments.

    sdcollapse run experiment.yaml [--seed S] [--samples M] [--out DIR]
    sdcollapse --list-experiments

The experiment file is a flat YAML mapping.  Times are dimensionless
(kappa * t) and the Hamiltonian is given in units of kappa, so a file
describes the same physics for any kappa.  Complex numbers are [re, im]
pairs.

Every run writes ``manifest.json`` (resolved configuration, versions,
timestamp), ``summary.json`` (histograms, checks, verdicts) and a CSV table
with 17 significant digits per float.  Exit codes: 0 ok, 2 parse error,
3 validation error, 4 numerical failure.  Errors are also emitted as a JSON
record on stderr.
"""

from __future__ import annotations

import argparse
import datetime as _dt
import json
import platform
import sys
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import numpy as np
import yaml

from . import __version__
from .dynamics import (
    DEFAULT_STEP_KAPPA,
    DEFAULT_T_END_KAPPA,
    IntegrationError,
    TrajectoryConfig,
    asymptotic_outcome,
    integrate,
)
from .ensemble import (
    CASCADE_ONLY,
    FULL_INTEGRATION,
    N_SIGMA,
    DiskSampler,
    EnsembleConfig,
    EnsembleError,
    binomial_band,
    block_rng,
    no_signalling_check,
    parse_sampler,
    run_ensemble,
)
from .linalg import NotHermitianError, basis_state, projector, trace_distance
from .model import HiddenVariables, MeasurementContext, sample_disk
from .oracle import SINGLET_LABEL_ORDER, singlet_state

EXPERIMENTS = {
    "born-test": "outcome histogram vs Born probabilities for given amplitudes",
    "collapse-trajectory": "one deterministic trajectory for a fixed hidden-variable draw",
    "singlet-nosignal": "hidden-variable-averaged singlet and its reduced states",
    "skewed-born": "two-level outcome statistics under a non-uniform hidden-variable sampler",
}

EXIT_OK, EXIT_PARSE, EXIT_VALIDATION, EXIT_NUMERICAL = 0, 2, 3, 4
NORM_EXACT = 1e-12
NORM_ACCEPT = 1e-9


class SpecError(Exception):
    exit_code = EXIT_PARSE
    kind = "parse"

    def __init__(self, message: str, field: str | None = None, line: int | None = None):
        super().__init__(message)
        self.field = field
        self.line = line

    def record(self) -> dict:
        return {"error": self.kind, "exit_code": self.exit_code, "message": str(self),
                "field": self.field, "line": self.line}


class SpecValidationError(SpecError):
    exit_code = EXIT_VALIDATION
    kind = "validation"


@dataclass
class ExperimentSpec:
    kind: str
    dimension: int | None = None
    amplitudes: list | None = None  # [[re, im], ...]
    hamiltonian_over_kappa: list | None = None  # N x N of [re, im]
    kappa_t_detect: float = 0.0
    q: float | None = None
    kappa: float = 1.0
    kappa_t_end: float = DEFAULT_T_END_KAPPA
    kappa_step: float = DEFAULT_STEP_KAPPA
    record_every: int = 100
    include_hamiltonian: bool = False
    samples: int | None = None
    seed: int = 0
    sampler: str = "uniform-disk"
    mode: str | None = None
    lambdas: list | None = None  # collapse-trajectory only
    output: str = "out"
    warnings: list = field(default_factory=list)

    def resolved(self) -> dict:
        d = {f.name: getattr(self, f.name) for f in fields(self) if f.name != "warnings"}
        return d


_TYPES = {
    "kind": str, "dimension": int, "amplitudes": list, "hamiltonian_over_kappa": list,
    "kappa_t_detect": float, "q": float, "kappa": float, "kappa_t_end": float,
    "kappa_step": float, "record_every": int, "include_hamiltonian": bool, "samples": int,
    "seed": int, "sampler": str, "mode": str, "lambdas": list, "output": str,
}


def _check_type(key, value, line):
    want = _TYPES[key]
    if want is float and isinstance(value, int) and not isinstance(value, bool):
        return float(value)
    if want is int and isinstance(value, bool):
        raise SpecError(f"{key}: expected integer, got boolean", key, line)
    if not isinstance(value, want):
        raise SpecError(f"{key}: expected {want.__name__}, got {type(value).__name__}", key, line)
    return value


def _is_number(x) -> bool:
    if isinstance(x, list):
        return all(_is_number(y) for y in x)
    return isinstance(x, (int, float)) and not isinstance(x, bool)


def _complex_list(key, value, line) -> np.ndarray:
    try:
        if not _is_number(value):
            raise TypeError
        arr = np.asarray(value, dtype=float)
    except (TypeError, ValueError):
        raise SpecError(f"{key}: entries must be [re, im] number pairs", key, line) from None
    if arr.ndim < 1 or arr.shape[-1] != 2:
        raise SpecError(f"{key}: entries must be [re, im] number pairs", key, line)
    return arr[..., 0] + 1j * arr[..., 1]


def parse_spec(text: str) -> ExperimentSpec:
    """Strictly parse an experiment document; unknown keys are errors."""
    try:
        root = yaml.compose(text, Loader=yaml.SafeLoader)
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        raise SpecError(f"YAML syntax error: {exc}", None, mark.line + 1 if mark else None) from None
    if not isinstance(root, yaml.MappingNode) or not isinstance(data, dict):
        raise SpecError("experiment document must be a key-value mapping", None, 1)

    lines = {}
    for key_node, _ in root.value:
        key = key_node.value
        line = key_node.start_mark.line + 1
        if key in lines:
            raise SpecError(f"duplicate key {key!r}", key, line)
        if key not in _TYPES:
            raise SpecError(f"unknown key {key!r}", key, line)
        lines[key] = line

    if "kind" not in data:
        raise SpecError("missing required key 'kind'", "kind", None)
    values = {k: _check_type(k, v, lines[k]) for k, v in data.items() if v is not None}
    spec = ExperimentSpec(**values)
    _validate(spec, lines)
    return spec


def _validate(spec: ExperimentSpec, lines: dict) -> None:
    def fail(msg, key):
        raise SpecValidationError(msg, key, lines.get(key))

    if spec.kind not in EXPERIMENTS:
        fail(f"unknown experiment kind {spec.kind!r}; expected one of {sorted(EXPERIMENTS)}", "kind")

    if spec.kind == "singlet-nosignal":
        if spec.q is None:
            fail("singlet-nosignal needs q", "q")
        if not 0.0 <= spec.q <= 1.0:
            fail("q must lie in [0, 1]", "q")
        if spec.amplitudes is not None:
            fail("singlet-nosignal takes q, not amplitudes", "amplitudes")
        if spec.dimension not in (None, 4):
            fail("singlet-nosignal is four-dimensional", "dimension")
        spec.dimension = 4
    else:
        if spec.amplitudes is None:
            fail(f"{spec.kind} needs amplitudes", "amplitudes")
        amps = _complex_list("amplitudes", spec.amplitudes, lines.get("amplitudes"))
        if amps.ndim != 1 or amps.size < 2:
            fail("amplitudes must list at least two [re, im] pairs", "amplitudes")
        if spec.dimension is None:
            spec.dimension = amps.size
        elif spec.dimension != amps.size:
            fail(f"dimension {spec.dimension} but {amps.size} amplitudes", "dimension")
        defect = abs(float(np.sum(np.abs(amps) ** 2)) - 1.0)
        if defect > NORM_ACCEPT:
            fail(f"amplitudes have norm defect {defect:.3e} (limit {NORM_ACCEPT:g})", "amplitudes")
        if defect > NORM_EXACT:
            amps = amps / np.sqrt(np.sum(np.abs(amps) ** 2))
            spec.amplitudes = [[float(a.real), float(a.imag)] for a in amps]
            spec.warnings.append(f"amplitudes renormalized (norm defect {defect:.3e})")

    if spec.kind == "skewed-born" and spec.dimension != 2:
        fail("skewed-born is defined for two-level systems", "dimension")

    if spec.hamiltonian_over_kappa is not None:
        h = _complex_list("hamiltonian_over_kappa", spec.hamiltonian_over_kappa, lines.get("hamiltonian_over_kappa"))
        if h.shape != (spec.dimension, spec.dimension):
            fail(f"hamiltonian must be {spec.dimension}x{spec.dimension}", "hamiltonian_over_kappa")
    if not spec.kappa > 0:
        fail("kappa must be positive", "kappa")
    if spec.kappa_t_detect < 0:
        fail("kappa_t_detect must be non-negative", "kappa_t_detect")
    if not 0 < spec.kappa_step <= 0.1:
        fail("kappa_step must lie in (0, 0.1]", "kappa_step")
    if not spec.kappa_t_end > 0:
        fail("kappa_t_end must be positive", "kappa_t_end")
    n_steps = spec.kappa_t_end / spec.kappa_step
    if abs(n_steps - round(n_steps)) > 1e-9 * n_steps:
        fail("kappa_t_end must be a whole number of steps", "kappa_t_end")
    if spec.record_every < 1:
        fail("record_every must be positive", "record_every")
    if spec.seed < 0 or spec.seed >= 2 ** 64:
        fail("seed must be a 64-bit non-negative integer", "seed")
    if spec.samples is None:
        spec.samples = 10_000 if spec.kind == "singlet-nosignal" else 100_000
    if spec.samples < 1:
        fail("samples must be at least 1", "samples")
    try:
        parse_sampler(spec.sampler)
    except ValueError as exc:
        fail(str(exc), "sampler")
    if spec.mode is None:
        spec.mode = FULL_INTEGRATION if spec.kind == "singlet-nosignal" else CASCADE_ONLY
    if spec.mode not in (CASCADE_ONLY, FULL_INTEGRATION):
        fail(f"unknown mode {spec.mode!r}", "mode")
    if spec.kind == "singlet-nosignal" and spec.mode != FULL_INTEGRATION:
        fail("singlet-nosignal needs full-integration mode", "mode")
    if spec.lambdas is not None:
        if spec.kind != "collapse-trajectory":
            fail("lambdas are only used by collapse-trajectory", "lambdas")
        lam = _complex_list("lambdas", spec.lambdas, lines.get("lambdas"))
        if lam.shape != (spec.dimension - 1,):
            fail(f"need {spec.dimension - 1} lambdas", "lambdas")
        if np.any(np.abs(lam) > 1.0):
            fail("lambdas must lie in the closed unit disk", "lambdas")


# -- building blocks ----------------------------------------------------------

def _context(spec: ExperimentSpec) -> MeasurementContext:
    n = spec.dimension
    h = np.zeros((n, n), complex)
    if spec.hamiltonian_over_kappa is not None:
        h = spec.kappa * _complex_list("hamiltonian_over_kappa", spec.hamiltonian_over_kappa, None)
    try:
        return MeasurementContext(n, hamiltonian=h, t_p=0.0, t_d=spec.kappa_t_detect / spec.kappa,
                                  kappa=spec.kappa)
    except (ValueError, NotHermitianError) as exc:
        raise SpecValidationError(str(exc), "hamiltonian_over_kappa") from None


def _initial_state(spec: ExperimentSpec) -> np.ndarray:
    if spec.kind == "singlet-nosignal":
        return singlet_state(spec.q)
    return _complex_list("amplitudes", spec.amplitudes, None)


def _trajectory_config(spec: ExperimentSpec) -> TrajectoryConfig:
    return TrajectoryConfig.in_kappa_units(spec.kappa, t_end=spec.kappa_t_end, step=spec.kappa_step,
                                           record_every=spec.record_every,
                                           include_hamiltonian=spec.include_hamiltonian)


def _fmt(x: float) -> str:
    return f"{x:.16e}"


def _matrix_columns(prefix: str, n: int) -> list[str]:
    return [f"{prefix}{part}_{i}_{j}" for i in range(1, n + 1) for j in range(1, n + 1) for part in ("re", "im")]


def write_table(path: Path, times, blocks: list[tuple[str, np.ndarray]]) -> None:
    """One row per time: t, then row-major re/im of each (T, n, n) block."""
    header = ["t"]
    for prefix, arr in blocks:
        header += _matrix_columns(prefix, arr.shape[-1])
    rows = [",".join(header)]
    for k, t in enumerate(times):
        cells = [_fmt(float(t))]
        for _, arr in blocks:
            for z in arr[k].reshape(-1):
                cells += [_fmt(float(z.real)), _fmt(float(z.imag))]
        rows.append(",".join(cells))
    path.write_text("\n".join(rows) + "\n", encoding="utf-8")


def read_table(path: Path):
    """Inverse of :func:`write_table`: returns (header, float array)."""
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    header = lines[0].split(",")
    data = np.array([[float(c) for c in ln.split(",")] for ln in lines[1:]])
    return header, data


def _dump(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _c(z) -> list[float]:
    return [float(np.real(z)), float(np.imag(z))]


# -- experiments --------------------------------------------------------------

def _born_test(spec, ctx, out: Path) -> dict:
    psi = _initial_state(spec)
    sampler = parse_sampler(spec.sampler)
    dyn = _trajectory_config(spec) if spec.mode == FULL_INTEGRATION else None
    res = run_ensemble(psi, ctx, EnsembleConfig(spec.samples, spec.seed, sampler, dyn, spec.mode))
    band = binomial_band(res.born_reference, res.samples)
    ok = res.within_band()
    _write_counts(out / "counts.csv", res)
    if res.averaged_states is not None:
        write_table(out / "trajectory.csv", res.times, [("", res.averaged_states)])
    return {
        "counts": res.counts.tolist(),
        "frequencies": res.frequencies.tolist(),
        "born_reference": res.born_reference.tolist(),
        "band": band.tolist(),
        "n_sigma": N_SIGMA,
        "within_band": ok.tolist(),
        "chi_square": res.chi_square,
        "chi_square_dof": res.chi.dof,
        "p_value": res.p_value,
        "verdict": "PASS" if ok.all() else "FAIL",
    }


def _write_counts(path: Path, res) -> None:
    rows = ["outcome,count,frequency,born_reference,sampler_reference"]
    for k in range(len(res.counts)):
        rows.append(f"{k + 1},{int(res.counts[k])},{_fmt(res.frequencies[k])},"
                    f"{_fmt(res.born_reference[k])},{_fmt(res.sampler_reference[k])}")
    path.write_text("\n".join(rows) + "\n", encoding="utf-8")


def _collapse_trajectory(spec, ctx, out: Path) -> dict:
    psi = _initial_state(spec)
    if spec.lambdas is not None:
        hv = HiddenVariables(_complex_list("lambdas", spec.lambdas, None))
    else:
        sampler = parse_sampler(spec.sampler)
        radius = sampler.radius if isinstance(sampler, DiskSampler) else 1.0
        hv = HiddenVariables(sample_disk(block_rng(spec.seed, 0), spec.dimension - 1, radius))
    traj = integrate(projector(psi), ctx, hv, _trajectory_config(spec))
    write_table(out / "trajectory.csv", traj.times, [("", traj.states)])
    n = spec.dimension
    k = traj.outcome_predicted
    dist = trace_distance(traj.final, projector(basis_state(n, k)))
    found = asymptotic_outcome(traj)
    if found is None:
        verdict = "NOT-COLLAPSED"
    else:
        verdict = "COLLAPSED-AS-PREDICTED" if found == k else "MISMATCH"
    return {
        "lambdas": [_c(z) for z in hv.lambdas],
        "sigmas": traj.sigma.sigmas.tolist(),
        "predicted_outcome": k,
        "asymptotic_outcome": found,
        "final_trace_distance": dist,
        "collapse_tolerance": 1e-6,
        "verdict": verdict,
    }


def _singlet_nosignal(spec, ctx, out: Path) -> dict:
    q = spec.q
    psi = singlet_state(q)
    cfg = EnsembleConfig(spec.samples, spec.seed, parse_sampler(spec.sampler), _trajectory_config(spec),
                         FULL_INTEGRATION)
    res = run_ensemble(psi, ctx, cfg, bipartition=(2, 2), label_order=SINGLET_LABEL_ORDER)
    report = no_signalling_check(res, (2, 2), label_order=SINGLET_LABEL_ORDER)
    write_table(out / "trajectory.csv", res.times, [("", res.averaged_states)])
    write_table(out / "reduced.csv", res.times, [("A_", res.reduced[0][0]), ("B_", res.reduced[1][0])])
    write_table(out / "standard_error.csv", res.times, [("", res.state_se.astype(complex))])

    rho11 = res.averaged_states[:, 0, 0].real
    se11 = res.state_se[:, 0, 0]
    rho11_ok = bool(np.all(np.abs(rho11 - q * q) <= N_SIGMA * se11 + 1e-12))
    coh = np.abs(res.averaged_states[:, 0, 1])
    coh_ref = q * np.sqrt(1 - q * q) * np.exp(-0.5 * spec.kappa * res.times)
    coh_err = float(np.max(np.abs(coh - coh_ref)))
    coh_ok = coh_err <= 1e-7
    verdict = "PASS" if (rho11_ok and coh_ok and report.ok) else "FAIL"
    return {
        "q": q,
        "outcome_counts": res.counts.tolist(),
        "born_reference": res.born_reference.tolist(),
        "chi_square": res.chi_square,
        "p_value": res.p_value,
        "rho11_target": q * q,
        "rho11_max_deviation": float(np.max(np.abs(rho11 - q * q))),
        "rho11_within_band": rho11_ok,
        "coherence_max_error": coh_err,
        "coherence_max_se": float(np.max(res.state_se[:, 0, 1])),
        "coherence_ok": coh_ok,
        "reduced_reference": {"A": [[_c(z) for z in row] for row in report.reference[0]],
                              "B": [[_c(z) for z in row] for row in report.reference[1]]},
        "reduced_max_deviation": {"A": report.max_deviation[0], "B": report.max_deviation[1]},
        "no_signalling": {"A": report.passed[0], "B": report.passed[1]},
        "n_sigma": N_SIGMA,
        "verdict": verdict,
    }


def _skewed_born(spec, ctx, out: Path) -> dict:
    psi = _initial_state(spec)
    sampler = parse_sampler(spec.sampler)
    res = run_ensemble(psi, ctx, EnsembleConfig(spec.samples, spec.seed, sampler, None, CASCADE_ONLY))
    _write_counts(out / "counts.csv", res)
    measured = float(res.frequencies[1])
    predicted = float(res.sampler_reference[1])
    born = float(res.born_reference[1])
    band_pred = float(binomial_band(predicted, res.samples))
    band_born = float(binomial_band(born, res.samples))
    near_pred = abs(measured - predicted) <= band_pred
    near_born = abs(measured - born) <= band_born
    if near_born:
        verdict = "CONSISTENT-WITH-BORN"
    elif near_pred:
        verdict = "DEVIATES-AS-PREDICTED"
    else:
        verdict = "UNEXPECTED"
    sigma_born = float(np.sqrt(born * (1 - born) / res.samples))
    return {
        "counts": res.counts.tolist(),
        "measured_p2": measured,
        "predicted_p2": predicted,
        "born_p2": born,
        "band_predicted": band_pred,
        "band_born": band_born,
        "departure_from_born_sigmas": abs(measured - born) / sigma_born if sigma_born > 0 else None,
        "sampler_note": "non-uniform sampler family is an implementation choice",
        "verdict": verdict,
    }


_RUNNERS = {
    "born-test": _born_test,
    "collapse-trajectory": _collapse_trajectory,
    "singlet-nosignal": _singlet_nosignal,
    "skewed-born": _skewed_born,
}


def run(spec: ExperimentSpec, out: Path | None = None) -> dict:
    """Run one experiment, writing manifest, summary and tables under `out`."""
    out = Path(spec.output if out is None else out)
    out.mkdir(parents=True, exist_ok=True)
    ctx = _context(spec)
    manifest = {
        "config": spec.resolved(),
        "warnings": list(spec.warnings),
        "code_version": __version__,
        "numpy_version": np.__version__,
        "python_version": platform.python_version(),
        "timestamp": _dt.datetime.now(_dt.timezone.utc).isoformat(),
    }
    _dump(out / "manifest.json", manifest)
    try:
        results = _RUNNERS[spec.kind](spec, ctx, out)
    except EnsembleError as exc:
        raise NumericalFailure(str(exc), sample_index=exc.sample_index) from exc
    except IntegrationError as exc:
        raise NumericalFailure(str(exc), time=exc.time) from exc
    summary = {
        "kind": spec.kind,
        "provenance": {"seed": spec.seed, "sampler": spec.sampler, "mode": spec.mode,
                       "samples": spec.samples, "code_version": __version__},
        "warnings": list(spec.warnings),
        "results": results,
    }
    _dump(out / "summary.json", summary)
    return summary


class NumericalFailure(RuntimeError):
    exit_code = EXIT_NUMERICAL

    def __init__(self, message, **detail):
        super().__init__(message)
        self.detail = detail

    def record(self) -> dict:
        return {"error": "numerical", "exit_code": self.exit_code, "message": str(self), **self.detail}


def _fail(record: dict, out: Path | None) -> int:
    text = json.dumps(record, sort_keys=True)
    print(text, file=sys.stderr)
    if out is not None:
        try:
            out.mkdir(parents=True, exist_ok=True)
            (out / "error.json").write_text(text + "\n", encoding="utf-8")
        except OSError:
            pass
    return record["exit_code"]


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="sdcollapse", description=__doc__.split("\n\n")[0])
    parser.add_argument("--list-experiments", action="store_true", help="print the experiment kinds")
    sub = parser.add_subparsers(dest="command")
    p_run = sub.add_parser("run", help="run an experiment file")
    p_run.add_argument("spec_file")
    p_run.add_argument("--seed", type=int)
    p_run.add_argument("--samples", type=int)
    p_run.add_argument("--out")
    args = parser.parse_args(argv)

    if args.list_experiments:
        for name, text in EXPERIMENTS.items():
            print(f"{name}\t{text}")
        return EXIT_OK
    if args.command != "run":
        parser.print_usage(sys.stderr)
        return EXIT_PARSE

    out = Path(args.out) if args.out else None
    try:
        text = Path(args.spec_file).read_text(encoding="utf-8")
    except OSError as exc:
        return _fail(SpecError(f"cannot read {args.spec_file}: {exc}").record(), out)
    try:
        spec = parse_spec(text)
        overrides = {k: v for k, v in (("seed", args.seed), ("samples", args.samples), ("output", args.out))
                     if v is not None}
        if overrides:
            spec = replace(spec, **overrides)
            if spec.samples < 1:
                raise SpecValidationError("samples must be at least 1", "samples")
            if not 0 <= spec.seed < 2 ** 64:
                raise SpecValidationError("seed must be a 64-bit non-negative integer", "seed")
        out = Path(spec.output)
        summary = run(spec, out)
    except SpecError as exc:
        return _fail(exc.record(), out)
    except NumericalFailure as exc:
        return _fail(exc.record(), out)
    print(json.dumps({"kind": summary["kind"], "verdict": summary["results"]["verdict"],
                      "output": str(out)}, sort_keys=True))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
