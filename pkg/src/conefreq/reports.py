"""Report emission: delimited tables, key-value summaries, figure files.

Floats are written with repr (shortest round-trip), so identical runs
produce byte-identical delimited output.  Figures are rendered with the
Agg backend and stripped of date metadata.
"""

from __future__ import annotations

import csv
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
matplotlib.rcParams["svg.hashsalt"] = "conefreq"  # reproducible figure ids
import matplotlib.pyplot as plt  # noqa: E402

import numpy as np  # noqa: E402

from .blowup import BlowupResult  # noqa: E402
from .frequency import FrequencyTrace  # noqa: E402
from .inequalities import SuiteReport  # noqa: E402
from .spectral import SpectralBasis  # noqa: E402


def _fmt(x) -> str:
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def write_csv(path: str | Path, header: list[str], rows) -> None:
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def write_kv(path: str | Path, items: dict[str, str]) -> None:
    lines = [f"{k}={v}" for k, v in items.items()]
    Path(path).write_text("\n".join(lines) + "\n")


def trace_rows(trace: FrequencyTrace):
    for i in range(len(trace.r)):
        yield (trace.r[i], trace.H[i], trace.D[i], trace.E[i], trace.N[i],
               trace.Hprime[i], trace.dnuova_residual[i], trace.flux_residual[i])


TRACE_HEADER = ["r", "H", "D", "E", "N", "Hprime", "dnuova_residual", "flux_residual"]


def export_trace(trace: FrequencyTrace, path: str | Path) -> None:
    write_csv(path, TRACE_HEADER, trace_rows(trace))


def export_doubling(trace: FrequencyTrace, path: str | Path) -> None:
    write_csv(path, ["r", "R", "ratio"], (tuple(row) for row in trace.doubling))


def export_blowup(result: BlowupResult, path: str | Path) -> None:
    rows = []
    for i, lam in enumerate(result.lambdas):
        for k in range(result.coefficients.shape[1]):
            rows.append((lam, k + 1, result.coefficients[i, k]))
    write_csv(path, ["lambda", "k", "coefficient"], rows)


def blowup_summary(result: BlowupResult) -> dict[str, str]:
    return {
        "dominant_mode": str(result.dominant_mode),
        "dominant_power": repr(result.dominant_power),
        "gamma_hat": repr(result.gamma_hat),
        "gamma_dominant": repr(result.gamma_dominant),
        "gamma_check": repr(result.gamma_check),
        "normalization_error": repr(float(result.normalization_errors.max())),
        "harmonic_residual": repr(result.harmonic_residual),
    }


def export_suite(report: SuiteReport, path: str | Path) -> None:
    rows = []
    for m in report.margins:
        params = ";".join(f"{k}={_fmt(v)}" for k, v in sorted(m.params.items()))
        rows.append((m.params.get("field_index", 0), m.name, params, m.lhs, m.rhs,
                     m.margin, "" if m.fitted_C is None else m.fitted_C))
    write_csv(path, ["field_index", "inequality", "params", "lhs", "rhs", "margin", "fitted_C"],
              rows)


def _savefig(fig, path: str | Path) -> None:
    fig.savefig(path, metadata={"Date": None})
    plt.close(fig)


def plot_boundary_mass(trace: FrequencyTrace, path: str | Path) -> None:
    fig, ax = plt.subplots(figsize=(5, 4))
    ax.loglog(trace.r, trace.H, "o-", ms=4)
    ax.set_xlabel("r")
    ax.set_ylabel("H(r)")
    ax.grid(True, which="both", alpha=0.3)
    fig.tight_layout()
    _savefig(fig, path)


def plot_frequency(trace: FrequencyTrace, path: str | Path) -> None:
    fig, ax = plt.subplots(figsize=(5, 4))
    ax.plot(trace.r, trace.N, "o-", ms=4)
    if trace.gamma_hat is not None:
        ax.axhline(trace.gamma_hat, color="gray", ls="--", lw=1,
                   label=f"limit estimate {trace.gamma_hat:.4f}")
        ax.legend()
    ax.set_xlabel("r")
    ax.set_ylabel("N(r)")
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    _savefig(fig, path)


def plot_spectrum(basis: SpectralBasis, path: str | Path) -> None:
    fig, ax = plt.subplots(figsize=(5, 4))
    ks = np.arange(1, len(basis.eigenvalues) + 1)
    ax.plot(ks, basis.eigenvalues, "s", label="eigenvalue")
    ax.plot(ks, basis.gammas, "o", label="exponent")
    ax.set_xlabel("k")
    ax.legend()
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    _savefig(fig, path)


def plot_blowup(result: BlowupResult, path: str | Path) -> None:
    fig, ax = plt.subplots(figsize=(5, 4))
    ks = np.arange(1, result.coefficients.shape[1] + 1)
    width = 0.8 / len(result.lambdas)
    for i, lam in enumerate(result.lambdas):
        ax.bar(ks + (i - 0.5 * (len(result.lambdas) - 1)) * width,
               result.coefficients[i] ** 2, width=width, label=f"scale {lam:g}")
    ax.set_xlabel("mode k")
    ax.set_ylabel("squared projection")
    ax.legend()
    fig.tight_layout()
    _savefig(fig, path)
