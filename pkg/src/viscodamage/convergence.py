"""Convergence studies against a fine reference solution."""
from __future__ import annotations

import csv
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

from .assembly import error_norms
from .config import SimConfig, parse_fraction
from .mesh import ConfigurationError
from .spaces import transfer_to_fine


def compute_orders(errors, factor=2.0) -> list[float]:
    """``log_factor(e[i-1] / e[i])`` for successive refinements."""
    errs = [float(e) for e in errors]
    if any(not e > 0 for e in errs):
        raise ValueError(f"errors must be positive, got {errs}")
    return [math.log(a / b) / math.log(factor) for a, b in zip(errs, errs[1:])]


def _orders_or_nan(errors):
    # a zero error (self-comparison) has no order
    return [compute_orders([a, b])[0] if a > 0 and b > 0 else math.nan
            for a, b in zip(errors, errors[1:])]


def _fmt(x: float) -> str:
    return f"{x:.5e}" if math.isfinite(x) else ""


def _parse(text: str) -> float:
    return float(text) if text else math.nan


def _sig6(x: float) -> float:
    return float(f"{x:.5e}") if math.isfinite(x) else x


@dataclass
class ConvergenceRow:
    value: Fraction
    rel_err_w: float
    order_w: float
    rel_err_zeta: float
    order_zeta: float


@dataclass
class ConvergenceReport:
    sweep: str
    fixed: Fraction
    ref: Fraction
    ref_w_V: float
    ref_zeta_Z0: float
    rows: list[ConvergenceRow] = field(default_factory=list)

    COLUMNS = ("sweep", "value", "fixed", "ref", "rel_err_w_V", "order_w",
               "rel_err_zeta_Z0", "order_zeta", "ref_w_V", "ref_zeta_Z0")

    @classmethod
    def from_errors(cls, sweep, values, fixed, ref, err_w, err_z, ref_w, ref_z):
        """Build a report rounded to the precision it is written with."""
        if len(values) < 2:
            raise ValueError("a convergence report needs at least two rows")
        ow = [math.nan] + _orders_or_nan(err_w)
        oz = [math.nan] + _orders_or_nan(err_z)
        rows = [ConvergenceRow(Fraction(v), _sig6(a), _sig6(b), _sig6(c), _sig6(d))
                for v, a, b, c, d in zip(values, err_w, ow, err_z, oz)]
        return cls(sweep, Fraction(fixed), Fraction(ref), _sig6(ref_w), _sig6(ref_z), rows)

    @property
    def orders_w(self) -> list[float]:
        return [r.order_w for r in self.rows[1:]]

    @property
    def orders_zeta(self) -> list[float]:
        return [r.order_zeta for r in self.rows[1:]]

    def write_csv(self, path) -> Path:
        path = Path(path)
        with path.open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(self.COLUMNS)
            for r in self.rows:
                writer.writerow([
                    self.sweep, str(r.value), str(self.fixed), str(self.ref),
                    _fmt(r.rel_err_w), _fmt(r.order_w),
                    _fmt(r.rel_err_zeta), _fmt(r.order_zeta),
                    _fmt(self.ref_w_V), _fmt(self.ref_zeta_Z0),
                ])
        return path

    @classmethod
    def read_csv(cls, path) -> "ConvergenceReport":
        with Path(path).open(newline="") as fh:
            records = list(csv.DictReader(fh))
        if not records:
            raise ValueError(f"{path}: empty report")
        first = records[0]
        rows = [ConvergenceRow(Fraction(r["value"]), _parse(r["rel_err_w_V"]), _parse(r["order_w"]),
                               _parse(r["rel_err_zeta_Z0"]), _parse(r["order_zeta"]))
                for r in records]
        return cls(first["sweep"], Fraction(first["fixed"]), Fraction(first["ref"]),
                   _parse(first["ref_w_V"]), _parse(first["ref_zeta_Z0"]), rows)

    def format(self) -> str:
        lines = [f"{self.sweep}-sweep, fixed {'k' if self.sweep == 'h' else 'h'} = {self.fixed}, "
                 f"reference {self.ref}: |w|_V = {self.ref_w_V:.5g}, |zeta|_Z0 = {self.ref_zeta_Z0:.5g}",
                 f"{self.sweep:>8} {'err_w':>12} {'order':>8} {'err_zeta':>12} {'order':>8}"]
        for r in self.rows:
            lines.append(f"{str(r.value):>8} {r.rel_err_w:12.4e} {r.order_w:8.4f} "
                         f"{r.rel_err_zeta:12.4e} {r.order_zeta:8.4f}")
        return "\n".join(lines)


def solve_run(config: SimConfig, stride: int):
    """Run ``config`` and keep ``(n, w, zeta)`` every ``stride`` steps (and at ``T``)."""
    problem = config.build_problem()
    states = problem.run(snapshots=f"every:{stride}")
    return problem.mesh, [(s.n, s.w, s.zeta) for s in states[1:]]


def run_convergence(sweep: str, values, fixed, ref, base: SimConfig | None = None,
                    error_time: str = "final", workers: int = 1, outdir=None,
                    reference=None) -> ConvergenceReport:
    """Relative errors ``|w - w_hk|_V / |w|_V`` and ``|zeta - zeta_hk|_Z0 / |zeta|_Z0``.

    ``error_time`` is ``"final"`` (errors at ``t = T``) or ``"max"`` (maximum
    over the time nodes shared by every run). ``reference`` may hold a
    precomputed :func:`solve_run` result for the reference configuration,
    saved at the stride this study needs; it is then not recomputed.
    """
    if sweep not in ("h", "k"):
        raise ConfigurationError(f"sweep must be 'h' or 'k', got {sweep!r}")
    if error_time not in ("final", "max"):
        raise ConfigurationError(f"error_time must be 'final' or 'max', got {error_time!r}")
    values = [parse_fraction(v) for v in values]
    fixed, ref = parse_fraction(fixed), parse_fraction(ref)
    if any(b >= a for a, b in zip(values, values[1:])):
        raise ConfigurationError("sweep values must be strictly refining")
    for v in values:
        ratio = v / ref
        if ratio.denominator != 1:
            raise ConfigurationError(f"sweep value {v} is not nested with reference {ref}")
    base = base or SimConfig(preset="benchmark")

    def cfg(v):
        return base.replace(h=v, k=fixed) if sweep == "h" else base.replace(h=fixed, k=v)

    T = Fraction(base.T).limit_denominator(1 << 20)
    k_of = (lambda v: fixed) if sweep == "h" else (lambda v: v)
    k_common = max(k_of(v) for v in values + [ref]) if error_time == "max" else T

    def stride(v):
        return int(k_common / k_of(v))

    jobs = [(cfg(v), stride(v)) for v in values]
    if reference is None:
        jobs.insert(0, (cfg(ref), stride(ref)))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(solve_run, *zip(*jobs)))
    else:
        results = [solve_run(c, s) for c, s in jobs]
    if reference is not None:
        results.insert(0, reference)

    ref_mesh, ref_states = results[0]
    ref_w = error_norms(ref_mesh, ref_states[-1][1], None)[0]
    ref_z = error_norms(ref_mesh, None, ref_states[-1][2])[1]
    err_w, err_z = [], []
    for mesh, states in results[1:]:
        ew, ez = [], []
        for (_, w, z), (_, wr, zr) in zip(states, ref_states):
            wf = transfer_to_fine(mesh, w, ref_mesh)
            zf = transfer_to_fine(mesh, z, ref_mesh)
            ew.append(error_norms(ref_mesh, wr - wf, None)[0])
            ez.append(error_norms(ref_mesh, None, zr - zf)[1])
        err_w.append(max(ew) / ref_w)
        err_z.append(max(ez) / ref_z)

    report = ConvergenceReport.from_errors(sweep, values, fixed, ref, err_w, err_z, ref_w, ref_z)
    if outdir is not None:
        out = Path(outdir)
        out.mkdir(parents=True, exist_ok=True)
        report.write_csv(out / "report.csv")
    return report

