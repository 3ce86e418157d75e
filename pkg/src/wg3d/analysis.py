"""Error measures of a discrete solution and convergence rates."""
from __future__ import annotations

import csv
import io
import math
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from . import element
from .mesh import TensorMesh
from .problems import Problem
from .quadrature import DEFAULT_ORDER, element_moments, face_averages, p1_from_moments

__all__ = ["ErrorNorms", "NORM_NAMES", "error_norms", "rates", "StudyRow", "StudyReport", "Rates", "compare", "Comparison"]

NORM_NAMES = ("inf_star", "l2_e0", "h1_db", "w11_star", "w11_semi")
CSV_COLUMNS = ("level", "mesh", "h", "dofs") + NORM_NAMES + ("iters", "solve_s")


@dataclass(frozen=True)
class ErrorNorms:
    inf_star: float
    l2_e0: float
    h1_db: float
    w11_star: float
    w11_semi: float

    def as_tuple(self) -> tuple[float, ...]:
        return tuple(getattr(self, k) for k in NORM_NAMES)


def error_norms(mesh: TensorMesh, problem: Problem, u_b: np.ndarray, order: int = DEFAULT_ORDER) -> ErrorNorms:
    """The five error measures for a face field ``u_b`` holding all face values.

    ``inf_star``  max over cells of ``|u - S(u_b)|`` at the centre
    ``l2_e0``     L2 norm of ``Q0 u - S(u_b)``
    ``h1_db``     L2 norm of ``grad_d (Q_b u - u_b)``
    ``w11_star``  L2 norm of ``grad_d u_b - grad u(centre)``
    ``w11_semi``  L2 norm of ``grad (Q0 u - S(u_b))``
    """
    u_b = np.asarray(u_b, dtype=float)
    if u_b.shape != (mesh.face_count,):
        raise ValueError(f"u_b must hold one value per face ({mesh.face_count}), got shape {u_b.shape}")
    e = mesh.element_e
    vol = mesh.element_volume
    centers = mesh.element_center
    local = u_b[mesh.element_faces]  # (E, 6)
    C = element.extension_map(e)
    S = np.einsum("eki,ei->ek", C, local)  # centred P1 coefficients of S(u_b)
    q0 = p1_from_moments(element_moments(problem.u, mesh.element_lo, e, order), e)
    qb = face_averages(problem.u, mesh, order)[mesh.element_faces]
    G = C[:, 1:, :]

    u_c = problem.u(*centers.T)
    inf_star = float(np.max(np.abs(u_c - S[:, 0]))) if len(u_c) else 0.0

    d = q0 - S
    l2_e0 = math.sqrt(float(np.sum(d * d * element.p1_mass_diag(e))))
    w11_semi = math.sqrt(float(np.sum(vol * np.sum(d[:, 1:] ** 2, axis=1))))

    gd = np.einsum("eki,ei->ek", G, qb - local)
    h1_db = math.sqrt(float(np.sum(vol * np.sum(gd * gd, axis=1))))

    gu = problem.grad_u(*centers.T)
    ws = S[:, 1:] - gu
    w11_star = math.sqrt(float(np.sum(vol * np.sum(ws * ws, axis=1))))
    return ErrorNorms(inf_star, l2_e0, h1_db, w11_star, w11_semi)


@dataclass(frozen=True)
class Rates:
    pairwise: tuple[float, ...]
    lsq_slope: float


def rates(h: list[float] | np.ndarray, errors: list[float] | np.ndarray) -> Rates:
    """Pairwise ``log(E_i/E_{i+1}) / log(h_i/h_{i+1})`` and the least-squares
    slope of ``log E`` against ``log h``."""
    h = np.asarray(h, dtype=float)
    E = np.asarray(errors, dtype=float)
    if h.size < 2 or h.size != E.size:
        raise ValueError("need at least two levels with matching h and error counts")
    if np.any(np.diff(h) >= 0):
        raise ValueError("mesh sizes must strictly decrease from level to level")
    if np.any(E <= 0):
        return Rates(tuple(float("nan") for _ in range(h.size - 1)), float("nan"))
    lh, lE = np.log(h), np.log(E)
    pair = tuple(float(v) for v in np.diff(lE) / np.diff(lh))
    slope = float(np.polyfit(lh, lE, 1)[0])
    return Rates(pair, slope)


@dataclass
class StudyRow:
    level: int
    mesh: str
    h: float
    dofs: int
    norms: ErrorNorms
    iters: int = 0
    solve_s: float = 0.0

    def as_record(self) -> dict:
        rec = {"level": self.level, "mesh": self.mesh, "h": self.h, "dofs": self.dofs}
        rec.update(asdict(self.norms))
        rec.update(iters=self.iters, solve_s=self.solve_s)
        return rec


def _fmt(v: float) -> str:
    return f"{v:.4e}"


@dataclass
class StudyReport:
    rows: list[StudyRow] = field(default_factory=list)
    title: str = ""

    def column(self, name: str) -> np.ndarray:
        if name in NORM_NAMES:
            return np.array([getattr(r.norms, name) for r in self.rows])
        return np.array([getattr(r, name) for r in self.rows])

    def rates(self) -> dict[str, Rates]:
        if len(self.rows) < 2:
            return {}
        h = self.column("h")
        return {k: rates(h, self.column(k)) for k in NORM_NAMES}

    # -- CSV --------------------------------------------------------------

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for r in self.rows:
            rec = r.as_record()
            w.writerow([
                rec["level"], rec["mesh"], repr(rec["h"]), rec["dofs"],
                *(repr(rec[k]) for k in NORM_NAMES), rec["iters"], repr(rec["solve_s"]),
            ])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str, title: str = "") -> "StudyReport":
        reader = csv.DictReader(io.StringIO(text))
        missing = set(CSV_COLUMNS) - set(reader.fieldnames or ())
        if missing:
            raise ValueError(f"CSV is missing columns {sorted(missing)}")
        rows = []
        for rec in reader:
            norms = ErrorNorms(*(float(rec[k]) for k in NORM_NAMES))
            rows.append(StudyRow(int(rec["level"]), rec["mesh"], float(rec["h"]), int(rec["dofs"]), norms,
                                 int(rec["iters"]), float(rec["solve_s"])))
        return cls(rows, title)

    # -- table ------------------------------------------------------------

    def to_table(self) -> str:
        headers = ("mesh", "h", "dofs") + NORM_NAMES
        body = [[r.mesh, _fmt(r.h), str(r.dofs), *(_fmt(v) for v in r.norms.as_tuple())] for r in self.rows]
        footer = []
        rts = self.rates()
        if rts:
            footer.append(["Rate (lsq)", "", ""] + [f"{rts[k].lsq_slope:.2f}" for k in NORM_NAMES])
            footer.append(["Rate (last)", "", ""] + [f"{rts[k].pairwise[-1]:.2f}" for k in NORM_NAMES])
        widths = [max(len(str(c)) for c in col) for col in zip(headers, *body, *footer)]

        def line(cells):
            return "  ".join(str(c).ljust(w) for c, w in zip(cells, widths)).rstrip()

        out = []
        if self.title:
            out.append(self.title)
        out.append(line(headers))
        out.append("-" * len(out[-1]))
        out.extend(line(r) for r in body)
        if footer:
            out.append("-" * len(out[1 if self.title else 0]))
            out.extend(line(r) for r in footer)
        return "\n".join(out) + "\n"


# keep dataclass field order in sync with NORM_NAMES
assert tuple(f.name for f in fields(ErrorNorms)) == NORM_NAMES


@dataclass
class Comparison:
    passed: bool
    # column -> (worst relative deviation, row index of the worst cell)
    worst: dict[str, tuple[float, int]]
    failures: list[str]

    def summary(self) -> str:
        lines = [f"{'PASS' if self.passed else 'FAIL'}: compared columns {', '.join(self.worst)}"]
        for col, (dev, row) in self.worst.items():
            lines.append(f"  {col:9s} worst relative deviation {dev:.3e} (row {row})")
        lines.extend(f"  ! {msg}" for msg in self.failures)
        return "\n".join(lines)


def _read_rows(text: str) -> list[dict[str, str]]:
    return list(csv.DictReader(io.StringIO(text)))


def compare(report: "StudyReport | str", reference: str, tolerance: float | dict[str, float] = 0.02) -> Comparison:
    """Cell-by-cell relative comparison of a study against a reference CSV.

    The reference may carry any subset of the norm columns and must list
    the same meshes in the same order when it has a ``mesh`` column.
    ``tolerance`` is one relative tolerance or a per-column mapping.
    """
    ours = _read_rows(report.to_csv() if isinstance(report, StudyReport) else report)
    ref = _read_rows(reference)
    if not ref:
        raise ValueError("reference CSV has no rows")
    cols = [c for c in NORM_NAMES if c in ref[0]]
    if not cols:
        raise ValueError(f"reference CSV shares no norm columns with {NORM_NAMES}")
    missing = [c for c in cols if not ours or c not in ours[0]]
    if missing:
        raise ValueError(f"report is missing columns {missing}")
    if len(ours) != len(ref):
        raise ValueError(f"row count mismatch: report has {len(ours)}, reference has {len(ref)}")
    if "mesh" in ref[0]:
        for i, (a, b) in enumerate(zip(ours, ref)):
            if a.get("mesh") != b["mesh"]:
                raise ValueError(f"row {i}: mesh {a.get('mesh')!r} does not match reference {b['mesh']!r}")
    tol = tolerance if isinstance(tolerance, dict) else {c: float(tolerance) for c in cols}
    worst, failures = {}, []
    for c in cols:
        limit = tol.get(c, max(tol.values()) if tol else 0.0)
        devs = []
        for i, (a, b) in enumerate(zip(ours, ref)):
            va, vb = float(a[c]), float(b[c])
            dev = abs(va - vb) / abs(vb) if vb != 0 else abs(va - vb)
            devs.append(dev)
            if dev > limit:
                failures.append(f"row {i} {c}: {va:.4e} vs reference {vb:.4e} (rel. dev. {dev:.2e} > {limit:g})")
        k = int(np.argmax(devs))
        worst[c] = (devs[k], k)
    return Comparison(not failures, worst, failures)
