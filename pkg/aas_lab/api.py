"""
api.py

This module provides the command façade of the lab: each method runs one
subcommand (sweep, collapse, fit, fidelity map, QFI, wavefunction, drift,
history), writes its CSV/JSON artifacts and records the run in the ledger.
"""

import json
import logging
import math
import os
import sys
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence

import numpy as np
import pandas as pd

from . import __version__
from .checks import run_all_checks
from .config import config_to_dict, resolve_out_dir, resolve_threads
from .database import DB_FILENAME, RunDatabase
from .eigensolver import lowest_k
from .ensemble import (
    DeltaRule,
    SweepGrid,
    log_spaced,
    run_fidelity_map,
    run_sweep,
)
from .errors import AASLabError, ConfigError, OutputError
from .lattice import ModelParams, build_hamiltonian, site_indices
from .observables import GAP, IPR, QFI, ZETA, ipr, localization_center, localization_length, probability_density
from .scaling import (
    AnsatzKind,
    ExponentGrid,
    ScalingAnsatz,
    ScalingData,
    collapse_search,
    exponent_drift,
    fit_power_law,
    kappa_collapse,
    qfi_scaling,
    size_independent_window,
    two_param_collapse,
)

LOG_FILENAME = "aas_lab.log"
HIGH_FIDELITY = 0.9

logger = logging.getLogger("aas_lab")

_LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"
_STDERR_HANDLER = "aas_lab.stderr"


def configure_logging(log_dir: str, level: int = logging.INFO) -> str:
    """Send package logs to <log_dir>/aas_lab.log and warnings to stderr.

    Safe to call repeatedly; a handler is only attached once per file.

    Returns:
        str: Path of the log file.
    """
    log_path = os.path.abspath(os.path.join(log_dir, LOG_FILENAME))
    logger.setLevel(level)
    if not any(isinstance(handler, logging.FileHandler) and handler.baseFilename == log_path
               for handler in logger.handlers):
        try:
            file_handler = logging.FileHandler(log_path, encoding="utf-8")
        except OSError as error:
            raise OutputError(f"Cannot open log file {log_path}: {error}") from None
        file_handler.setFormatter(logging.Formatter(_LOG_FORMAT))
        logger.addHandler(file_handler)
    for handler in logger.handlers:
        if handler.get_name() == _STDERR_HANDLER:
            handler.setStream(sys.stderr)
            break
    else:
        stream_handler = logging.StreamHandler(sys.stderr)
        stream_handler.set_name(_STDERR_HANDLER)
        stream_handler.setLevel(logging.WARNING)
        stream_handler.setFormatter(logging.Formatter("%(levelname)s: %(message)s"))
        logger.addHandler(stream_handler)
    return log_path


def log_message(message: str, level: int = logging.INFO):
    """Log a message to the configured log file.

    Args:
        message (str): The message to log.
        level (int): logging level, INFO by default.
    """
    logger.log(level, message)


def _json_ready(value):
    if isinstance(value, float) and not math.isfinite(value):
        return None
    if isinstance(value, (np.floating, np.integer)):
        return _json_ready(value.item())
    if isinstance(value, dict):
        return {key: _json_ready(item) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [_json_ready(item) for item in value]
    return value


@dataclass
class CommandResult:
    """What a command produced.

    Attributes:
        command (str): Subcommand name.
        paths (List[str]): Artifacts written, primary first.
        table (pd.DataFrame, optional): The CSV content, if any.
        report (Dict[str, Any]): The JSON report or sidecar content.
        failed_points (List[Dict[str, Any]]): Points whose evaluation failed.
    """

    command: str
    paths: List[str] = field(default_factory=list)
    table: Optional[pd.DataFrame] = None
    report: Dict[str, Any] = field(default_factory=dict)
    failed_points: List[Dict[str, Any]] = field(default_factory=list)

    @property
    def primary(self) -> str:
        return self.paths[0] if self.paths else ""


class AASLabAPI:
    """A class to run lab commands and write their artifacts.

    Attributes:
        out_dir (str): Directory receiving CSV, JSON, log and ledger files.
        n_jobs (int): Worker count for sweeps and exponent grids.
        database (RunDatabase): Run ledger.
    """

    def __init__(self, out_dir: Optional[str] = None, threads: Optional[int] = None,
                 database: Optional[RunDatabase] = None):
        """Initialize the AASLabAPI class.

        Args:
            out_dir (str, optional): Output directory; $AAS_LAB_OUT_DIR or the
                working directory when omitted.
            threads (int, optional): Worker count; $AAS_LAB_THREADS or 1.
            database (RunDatabase, optional): Ledger to use instead of the
                one in out_dir.

        Raises:
            OutputError: If the output directory cannot be created.
        """
        self.out_dir = resolve_out_dir(out_dir)
        try:
            os.makedirs(self.out_dir, exist_ok=True)
        except OSError as error:
            raise OutputError(f"Cannot create output directory {self.out_dir}: {error}") from None
        configure_logging(self.out_dir)
        self.n_jobs = resolve_threads(threads)
        self.database = database if database is not None else RunDatabase(os.path.join(self.out_dir, DB_FILENAME))
        self._handlers = {
            "sweep": self.sweep,
            "collapse": self.collapse,
            "fit": self.fit,
            "fidelity-map": self.fidelity_map,
            "qfi": self.qfi,
            "wavefunction": self.wavefunction,
            "drift": self.drift,
        }

    def run(self, command: str, config) -> CommandResult:
        """Run one subcommand and record it in the ledger.

        Raises:
            AASLabError: Whatever the command raises; the failure is logged
                in the ledger first.
        """
        try:
            handler = self._handlers[command]
        except KeyError:
            raise ConfigError(f"Unknown command {command!r}") from None
        seed = getattr(config, "master_seed", None)
        log_message(f"Running {command} with config {json.dumps(config_to_dict(config), sort_keys=True)}")
        try:
            result = handler(config)
        except AASLabError as error:
            log_message(f"{command} failed: {error}", logging.ERROR)
            self.database.log_run(command, config_to_dict(config), seed, "", type(error).__name__)
            raise
        status = "failed_points" if result.failed_points else "ok"
        self.database.log_run(command, config_to_dict(config), seed, result.primary, status)
        log_message(f"{command} finished ({status}): {', '.join(result.paths)}")
        return result

    def history(self) -> List[Dict[str, Any]]:
        """Get the run ledger, oldest first."""
        return self.database.get_runs_with_dates()

    # artifact helpers

    def _path(self, command: str, suffix: str) -> str:
        return os.path.join(self.out_dir, command.replace("-", "_") + suffix)

    @staticmethod
    def write_csv(table: pd.DataFrame, path: str):
        """Write a table with 17 significant digits, '.' decimals and LF line endings.

        Raises:
            OutputError: If the file cannot be written.
        """
        try:
            table.to_csv(path, index=False, float_format="%.17g", na_rep="nan",
                         lineterminator="\n", encoding="utf-8")
        except OSError as error:
            raise OutputError(f"Cannot write {path}: {error}") from None

    @staticmethod
    def write_json(document: Dict[str, Any], path: str):
        try:
            with open(path, "w", encoding="utf-8", newline="\n") as f:
                json.dump(_json_ready(document), f, indent=2, sort_keys=True, allow_nan=False)
                f.write("\n")
        except OSError as error:
            raise OutputError(f"Cannot write {path}: {error}") from None

    @staticmethod
    def read_table(path: str, columns: Sequence[str]) -> pd.DataFrame:
        """Read a CSV produced by a previous command.

        Raises:
            OutputError: If the file cannot be read.
            ConfigError: If a required column is missing.
        """
        try:
            table = pd.read_csv(path, float_precision="round_trip")
        except (OSError, pd.errors.EmptyDataError) as error:
            raise OutputError(f"Cannot read {path}: {error}") from None
        missing = [column for column in columns if column not in table.columns]
        if missing:
            raise ConfigError(f"{path} lacks columns {missing}")
        return table

    def _sidecar(self, command: str, config, failed_points=(), **extra) -> Dict[str, Any]:
        document = {
            "command": command,
            "config": config_to_dict(config),
            "master_seed": getattr(config, "master_seed", None),
            "version": __version__,
            "failed_points": list(failed_points),
        }
        document.update(extra)
        return document

    @staticmethod
    def _h_values(config):
        if config.h_values is not None:
            return tuple(config.h_values)
        grid = config.h_grid
        return log_spaced(grid.min_decade, grid.max_decade, grid.points_per_decade)

    @staticmethod
    def _failed(records) -> List[Dict[str, Any]]:
        return [
            {"L": record.point.L, "delta": record.point.delta, "h": record.point.h, "error": record.error}
            for record in records if record.failed
        ]

    @staticmethod
    def _exponent_grid(spec) -> Optional[ExponentGrid]:
        if spec is None:
            return None
        try:
            return ExponentGrid(spec.start, spec.stop, spec.step)
        except ValueError as error:
            raise ConfigError(str(error)) from None

    # commands

    def sweep(self, config) -> CommandResult:
        """Phase-averaged zeta, IPR and gap (optionally QFI) over an (L, delta, h) grid."""
        observables = (ZETA, IPR, GAP, QFI) if config.qfi else (ZETA, IPR, GAP)
        try:
            grid = SweepGrid(
                sizes=tuple(config.sizes),
                h_values=self._h_values(config),
                deltas=tuple(config.deltas),
                delta_rule=None if config.delta_rule is None else DeltaRule(**config.delta_rule),
                n_samples=config.n_samples,
                master_seed=config.master_seed,
                J=config.J,
                omega=config.omega,
            )
        except ValueError as error:
            raise ConfigError(str(error)) from None
        records = run_sweep(grid, observables, n_jobs=self.n_jobs, chunk_size=config.chunk_size)
        rows = []
        for record in records:
            row = {"L": record.point.L, "delta": record.point.delta, "h": record.point.h,
                   "phi_samples": record.n_samples}
            for name in observables:
                stat = record.stats[name]
                row[f"{name}_mean"] = stat.mean
                row[f"{name}_stderr"] = stat.stderr
            rows.append(row)
        columns = ["L", "delta", "h", "phi_samples"] + [f"{name}_{part}" for name in observables
                                                         for part in ("mean", "stderr")]
        table = pd.DataFrame(rows, columns=columns)
        failed = self._failed(records)
        csv_path, json_path = self._path("sweep", ".csv"), self._path("sweep", ".json")
        self.write_csv(table, csv_path)
        report = self._sidecar("sweep", config, failed)
        self.write_json(report, json_path)
        return CommandResult("sweep", [csv_path, json_path], table, report, failed)

    def collapse(self, config) -> CommandResult:
        """Cost-function collapse of one observable column of a sweep CSV."""
        try:
            ansatz = ScalingAnsatz(AnsatzKind(config.ansatz), config.fixed_exponents)
        except ValueError as error:
            raise ConfigError(str(error)) from None
        column = f"{ansatz.observable}_mean"
        table = self.read_table(config.input, ["L", "delta", "h", column])
        if config.sizes is not None:
            table = table[table["L"].isin(config.sizes)]
        if config.delta is not None and ansatz.kind is not AnsatzKind.KAPPA:
            table = table[np.isclose(table["delta"], config.delta, rtol=0.0, atol=1e-12)]
        data = ScalingData.from_frame(table, column)
        one_parameter = ansatz.kind is not AnsatzKind.KAPPA and not ansatz.kind.value.endswith("_2param")
        if one_parameter and len(data.deltas) > 1:
            raise ConfigError(f"{config.input} holds several delta values {data.deltas}; set 'delta'")
        grid = self._exponent_grid(config.grid)
        if ansatz.kind is AnsatzKind.KAPPA:
            fixed = ansatz.fixed_exponents
            result = kappa_collapse(data, fixed["nu_c"], fixed["nu_delta"], grid, config.flat_tol, self.n_jobs)
        elif ansatz.kind.value.endswith("_2param"):
            try:
                result = two_param_collapse(data, ansatz, grid, config.flat_tol, self.n_jobs)
            except ValueError as error:
                raise ConfigError(str(error)) from None
        else:
            result = collapse_search(data, ansatz, grid, config.flat_tol, self.n_jobs)
        exponents = [exponent for exponent, _ in result.curve]
        step = exponents[1] - exponents[0] if len(exponents) > 1 else None
        report = self._sidecar(
            "collapse", config,
            ansatz=ansatz.kind.value,
            fixed_exponents=dict(ansatz.fixed_exponents),
            exponent=result.exponent_name,
            grid={"start": exponents[0], "stop": exponents[-1], "step": step},
            curve=[list(point) for point in result.curve],
            best_exponent=result.best_exponent,
            flat_window=list(result.flat_window),
            reported=result.reported,
            uncertainty=result.uncertainty,
            min_cost=result.min_cost,
        )
        path = self._path("collapse", ".json")
        self.write_json(report, path)
        return CommandResult("collapse", [path], None, report)

    def fit(self, config) -> CommandResult:
        """Log-log power-law fit of one column against h at fixed (L, delta)."""
        table = self.read_table(config.input, ["L", "delta", "h", config.column])
        if config.delta is not None:
            table = table[np.isclose(table["delta"], config.delta, rtol=0.0, atol=1e-12)]
        data = ScalingData.from_frame(table, config.column).finite()
        if len(data) == 0:
            raise ConfigError(f"No finite '{config.column}' values in {config.input} for the selection")
        if len(data.deltas) > 1:
            raise ConfigError(f"{config.input} holds several delta values {data.deltas}; set 'delta'")
        L = config.L if config.L is not None else data.sizes[-1]
        if config.window is not None:
            window, rule = tuple(config.window), "explicit"
        else:
            window, rule = size_independent_window(data), "size_independent"
        curve = data.curve(L)
        mask = (curve.h >= window[0]) & (curve.h <= window[1])
        fit = fit_power_law(curve.h[mask], curve.value[mask])
        derived = {}
        observable = config.column.split("_")[0]
        if observable == ZETA:
            derived["nu"] = -fit.exponent
        elif observable == IPR:
            derived["s"] = fit.exponent
        elif observable == GAP:
            derived["nu_z"] = fit.exponent
            if config.nu is not None:
                derived["z"] = fit.exponent / config.nu
        report = self._sidecar(
            "fit", config,
            column=config.column, L=int(L), delta=data.deltas[0],
            exponent=fit.exponent, stderr=fit.stderr, r_squared=fit.r_squared,
            window=list(fit.window), window_rule=rule, n_points=fit.n_points, derived=derived,
        )
        path = self._path("fit", ".json")
        self.write_json(report, path)
        log_message(f"Fit {config.column} at L={L}: slope {fit.exponent:.4f} +/- {fit.stderr:.4f}")
        return CommandResult("fit", [path], None, report)

    def fidelity_map(self, config) -> CommandResult:
        """Phase-averaged fidelity to the reference ground state on a (delta, h) grid."""
        try:
            records = run_fidelity_map(
                config.L, config.deltas, self._h_values(config), config.n_samples, config.master_seed,
                delta_ref=config.delta_ref, J=config.J, omega=config.omega, n_jobs=self.n_jobs,
                chunk_size=config.chunk_size,
            )
        except ValueError as error:
            raise ConfigError(str(error)) from None
        table = pd.DataFrame(
            [
                {
                    "delta": record.point.delta,
                    "h": record.point.h,
                    "fidelity_mean": record.fidelity.mean,
                    "fidelity_stderr": record.fidelity.stderr,
                    "high_fidelity": int(record.fidelity.mean >= HIGH_FIDELITY),
                }
                for record in records
            ],
            columns=["delta", "h", "fidelity_mean", "fidelity_stderr", "high_fidelity"],
        )
        failed = self._failed(records)
        csv_path, json_path = self._path("fidelity-map", ".csv"), self._path("fidelity-map", ".json")
        self.write_csv(table, csv_path)
        report = self._sidecar("fidelity-map", config, failed, L=config.L,
                               high_fidelity_threshold=HIGH_FIDELITY,
                               high_fidelity_points=int(table["high_fidelity"].sum()))
        self.write_json(report, json_path)
        return CommandResult("fidelity-map", [csv_path, json_path], table, report, failed)

    def qfi(self, config) -> CommandResult:
        """Phase-averaged QFI per size and the fitted exponent beta."""
        try:
            grid = SweepGrid(sizes=tuple(config.sizes), h_values=(config.h,), deltas=(config.delta,),
                             n_samples=config.n_samples, master_seed=config.master_seed, J=config.J,
                             omega=config.omega)
        except ValueError as error:
            raise ConfigError(str(error)) from None
        records = run_sweep(grid, (QFI,), n_jobs=self.n_jobs, chunk_size=config.chunk_size)
        table = pd.DataFrame(
            [{"L": record.point.L, "qfi_mean": record.qfi.mean, "qfi_stderr": record.qfi.stderr}
             for record in records],
            columns=["L", "qfi_mean", "qfi_stderr"],
        )
        failed = self._failed(records)
        csv_path, json_path = self._path("qfi", ".csv"), self._path("qfi", ".json")
        self.write_csv(table, csv_path)
        usable = table[np.isfinite(table["qfi_mean"])]
        scaling = qfi_scaling(usable["L"].to_numpy(), usable["qfi_mean"].to_numpy(), nu=config.nu)
        report = self._sidecar(
            "qfi", config, failed,
            fit={
                "beta": scaling.beta,
                "stderr": scaling.fit.stderr,
                "r_squared": scaling.fit.r_squared,
                "window": list(scaling.fit.window),
                "n_points": scaling.fit.n_points,
                "predicted_beta": scaling.predicted_beta,
            },
        )
        self.write_json(report, json_path)
        log_message(f"QFI scaling at h={config.h}: beta = {scaling.beta:.3f} +/- {scaling.fit.stderr:.3f}")
        return CommandResult("qfi", [csv_path, json_path], table, report, failed)

    def wavefunction(self, config) -> CommandResult:
        """Ground-state amplitudes of one (L, delta, h, phi) instance."""
        try:
            params = ModelParams(L=config.L, J=config.J, delta=config.delta, h=config.h,
                                 omega=config.omega, phi=config.phi)
        except ValueError as error:
            raise ConfigError(str(error)) from None
        matrix = build_hamiltonian(params)
        spectrum = lowest_k(matrix, min(2, params.L))
        checks = run_all_checks(spectrum, matrix)
        failed_checks = [name for name, passed in checks.items() if not passed]
        if failed_checks:
            log_message(f"Spectrum checks failed for {params}: {failed_checks}", logging.WARNING)
        state = spectrum.ground_state
        p = probability_density(state)
        table = pd.DataFrame({"site": site_indices(params.L).astype(np.int64), "amplitude": state,
                              "probability": p})
        csv_path, json_path = self._path("wavefunction", ".csv"), self._path("wavefunction", ".json")
        self.write_csv(table, csv_path)
        report = self._sidecar(
            "wavefunction", config,
            ground_energy=float(spectrum.energies[0]),
            localization_center=localization_center(p),
            localization_length=localization_length(p),
            ipr=ipr(p),
            checks=checks,
        )
        self.write_json(report, json_path)
        return CommandResult("wavefunction", [csv_path, json_path], table, report)

    def drift(self, config) -> CommandResult:
        """nu, s, s/nu and z per negative delta from a multi-delta sweep CSV."""
        columns = [f"{name}_mean" for name in (ZETA, IPR, GAP)]
        table = self.read_table(config.input, ["L", "delta", "h"] + columns)
        tables = {name: ScalingData.from_frame(table, f"{name}_mean") for name in (ZETA, IPR, GAP)}
        grids = {name: self._exponent_grid(spec) for name, spec in config.grids.items()}
        rows = exponent_drift(tables, config.deltas, grids, config.flat_tol, self.n_jobs)
        drift_table = pd.DataFrame(
            [
                {
                    "delta": row.delta,
                    "nu": row.nu, "nu_uncertainty": row.nu_uncertainty,
                    "s": row.s, "s_uncertainty": row.s_uncertainty,
                    "s_over_nu": row.s_over_nu,
                    "z": row.z, "z_uncertainty": row.z_uncertainty,
                }
                for row in rows
            ],
            columns=["delta", "nu", "nu_uncertainty", "s", "s_uncertainty", "s_over_nu", "z", "z_uncertainty"],
        )
        failed = [{"delta": row.delta, "error": row.error} for row in rows if row.error]
        csv_path, json_path = self._path("drift", ".csv"), self._path("drift", ".json")
        self.write_csv(drift_table, csv_path)
        report = self._sidecar("drift", config, failed)
        self.write_json(report, json_path)
        return CommandResult("drift", [csv_path, json_path], drift_table, report, failed)
