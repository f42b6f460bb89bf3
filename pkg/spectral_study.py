"""
Spectral study runner - one config in, one report out.

SpectralStudy dispatches a RunConfig to the pipeline for its task
(spectrum, classify, reality, sweep, doublewell-fit), collects verdicts,
tables and diagnostics into a ReportDocument and writes the output files.
"""

import json
import logging
import os
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np
import pandas as pd

from spectra import __version__
from spectra.cache import EigenCache
from spectra.config import RunConfig
from spectra.criteria import (classify_degenerate, classify_near_degenerate,
                              growth_fit, reality_radius, trusted_prefix, verify_reality)
from spectra.errors import BracketError, HypothesisViolation, OperationalError
from spectra.grushin import (degenerate_block, eigenvalues_near, grushin_operators,
                             near_degenerate_block, symmetry_check)
from spectra.linalg import eig_complex
from spectra.operators import OperatorFamily, assemble, evaluate_at
from spectra.sweep import SweepTrace, fit_splitting_law, locate_exceptional_point, sweep

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_OPERATIONAL = 1
EXIT_HYPOTHESIS = 2


def _pairs(values) -> List[List[float]]:
    return [[float(np.real(z)), float(np.imag(z))] for z in values]


@dataclass
class ReportDocument:
    """
    Everything a run produced. Re-running the echoed config on the same build
    reproduces every number; only `timestamp` differs between runs.
    """
    task: str
    config_echo: str
    config_hash: str
    tool_version: str = __version__
    verdicts: List[Dict] = field(default_factory=list)
    tables: Dict[str, List] = field(default_factory=dict)
    diagnostics: Dict[str, object] = field(default_factory=dict)
    error: Optional[Dict[str, object]] = None
    exit_code: int = EXIT_OK
    timestamp: str = field(default_factory=lambda: datetime.now(timezone.utc).isoformat())

    def to_dict(self) -> Dict:
        return {
            'tool_version': self.tool_version,
            'task': self.task,
            'config': {'echo': self.config_echo, 'sha256': self.config_hash},
            'verdicts': self.verdicts,
            'tables': self.tables,
            'diagnostics': self.diagnostics,
            'error': self.error,
            'exit_code': self.exit_code,
            'timestamp': self.timestamp,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True, default=_json_default)


def _json_default(value):
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, complex):
        return [value.real, value.imag]
    raise TypeError(f"Cannot serialize {type(value).__name__}")


class SpectralStudy:
    """
    Runs one configured task.

    Args:
        config: Parsed run configuration
        cache: Optional eigen-decomposition cache for H0
        progress_callback: Called with (message, percent) as the run advances
    """

    def __init__(self, config: RunConfig, cache: Optional[EigenCache] = None,
                 progress_callback: Optional[Callable[[str, float], None]] = None):
        self.config = config
        self.cache = cache
        self.progress_callback = progress_callback
        self.report = ReportDocument(task=config.task.name, config_echo=config.source_text,
                                     config_hash=config.content_hash)
        self.sweep_trace: Optional[SweepTrace] = None
        self.eigenvalue_frame: Optional[pd.DataFrame] = None
        self._family: Optional[OperatorFamily] = None

    def _send_progress(self, message: str, percent: float):
        logger.info(message)
        if self.progress_callback:
            self.progress_callback(message, percent)

    @property
    def family(self) -> OperatorFamily:
        if self._family is None:
            self._send_progress("Assembling H0, H1 and J", 10)
            self._family = assemble(self.config.problem)
            self.report.diagnostics['symmetry_residuals'] = {
                'H0': self._family.h0_residual, 'H1': self._family.h1_residual,
                'valid': self._family.valid,
            }
        return self._family

    def _epsilons(self, default: List[float]) -> List[float]:
        return list(self.config.task.epsilons) or default

    # ------------------------------------------------------------------
    # Tasks
    # ------------------------------------------------------------------

    def run_spectrum(self):
        family = self.family
        rows = []
        for epsilon in self._epsilons([0.0]):
            if epsilon == 0:
                decomposition = family.h0_spectrum(self.cache)
            else:
                family.require_valid()
                decomposition = eig_complex(evaluate_at(family, epsilon))
            self.report.tables[f"eigenvalues_eps={epsilon:.17g}"] = _pairs(decomposition.eigenvalues)
            self.report.diagnostics.setdefault('max_residual', {})[f"{epsilon:.17g}"] = decomposition.max_residual
            for index, value in enumerate(decomposition.eigenvalues):
                rows.append({'epsilon': epsilon, 'index': index, 're': value.real, 'im': value.imag,
                             'near_defective': bool(decomposition.near_defective[index])})
        self.eigenvalue_frame = pd.DataFrame(rows)

    def run_classify(self):
        family = self.family
        family.require_valid()
        decomposition = family.h0_spectrum(self.cache)
        task = self.config.task

        if task.pair is not None:
            for epsilon in self._epsilons([1e-3]):
                verdict = classify_near_degenerate(family, task.pair, epsilon, decomposition)
                self.report.verdicts.append(verdict.to_dict())
            block = near_degenerate_block(family, task.pair, decomposition)
        else:
            block = degenerate_block(family, task.lambda0, decomposition=decomposition)
            verdict = classify_degenerate(block)
            self.report.verdicts.append(verdict.to_dict())

        self.report.diagnostics['block'] = {
            'lambda0': block.lambda0,
            'levels': [float(x) for x in block.levels],
            'tau': [int(t) for t in block.tau],
            'gap_norm_R': block.gap_norm,
            'constraint_residual': block.constraint_residual,
        }

        g = grushin_operators(family, block, decomposition)
        roots = []
        for epsilon in self._epsilons([1e-3]):
            self._send_progress(f"Solving det E-+(z) = 0 at eps = {epsilon:g}", 50)
            result = eigenvalues_near(block, g, family, epsilon)
            entry = result.to_dict()
            entry['epsilon'] = epsilon
            if epsilon != 0:
                entry['contraction_K'] = g.contraction(epsilon, block.lambda0)
                entry['symmetry_residual'] = symmetry_check(g, family, epsilon, complex(block.lambda0))
            roots.append(entry)
        self.report.tables['pair_roots'] = roots

    def run_reality(self):
        family = self.family
        family.require_valid()
        task = self.config.task
        count = task.trusted_count or trusted_prefix(self.config.problem)
        self._send_progress(f"Trusted prefix: {count} eigenvalues", 30)
        decomposition = family.h0_spectrum(self.cache)
        certificate = reality_radius(family, count, decomposition)
        self.report.verdicts.append({'reality_certificate': certificate.to_dict()})

        limit = certificate.radius if np.isfinite(certificate.radius) else 1.0
        epsilons = self._epsilons(list(np.linspace(0.0, 0.9 * limit, 11)[1:]))
        checks, outside = [], []
        for epsilon in epsilons:
            if abs(epsilon) >= certificate.radius:
                outside.append(epsilon)
                continue
            report = verify_reality(family, epsilon, certificate)
            checks.append(report.to_dict())
        if outside:
            logger.warning(f"Skipped {len(outside)} eps value(s) at or beyond r0 = {certificate.radius:.6g}")
            self.report.diagnostics['outside_radius'] = outside
        self.report.tables['reality_checks'] = checks

        if count >= 6:
            fit = growth_fit(certificate.eigenvalues)
            self.report.diagnostics['growth_fit'] = fit.to_dict()

    def run_sweep(self):
        family = self.family
        family.require_valid()
        task = self.config.task
        self._send_progress(f"Sweeping {len(task.epsilons)} values of eps", 30)
        trace = sweep(family, task.epsilons, task.window)
        self.sweep_trace = trace
        self.report.diagnostics['sweep'] = trace.to_dict()

        located = []
        for record in trace.exceptional_points:
            row = int(np.flatnonzero(trace.epsilons == record.epsilon_low)[0])
            reference = complex(np.mean(trace.values[row, list(record.trajectories)]))
            bracket = task.bracket or (record.epsilon_low, record.epsilon_high)
            try:
                estimate = locate_exceptional_point(family, reference, bracket)
            except BracketError as e:
                logger.warning(f"Could not refine exceptional point {record.trajectories}: {e}")
                self.report.diagnostics.setdefault('unrefined_exceptional_points', []).append(record.to_dict())
                continue
            entry = estimate.to_dict()
            entry['trajectories'] = list(record.trajectories)
            located.append(entry)
        if task.pair is not None:
            verdict = classify_near_degenerate(family, task.pair, float(task.epsilons[-1]),
                                               family.h0_spectrum(self.cache))
            self.report.verdicts.append(verdict.to_dict())
            if located:
                entry = located[0]
                entry['predicted_epsilon_c'] = verdict.predicted_epsilon_c
        self.report.tables['exceptional_points'] = located

    def run_doublewell_fit(self):
        task = self.config.task
        modes = self.config.problem.basis.modes
        W = self.config.problem.W.source if self.config.problem.W is not None else None
        self._send_progress(f"Fitting splitting law over {len(task.values)} values of {task.family}", 30)
        fit = fit_splitting_law(task.family, task.values, modes=modes,
                                W=W if W and W != "0" else None)
        self.report.verdicts.append({'splitting_fit': fit.to_dict()})

    # ------------------------------------------------------------------

    def run(self) -> ReportDocument:
        """Run the configured task; errors are recorded and mapped to exit codes."""
        handlers = {
            'spectrum': self.run_spectrum,
            'classify': self.run_classify,
            'reality': self.run_reality,
            'sweep': self.run_sweep,
            'doublewell-fit': self.run_doublewell_fit,
        }
        try:
            handlers[self.config.task.name]()
            self.report.exit_code = EXIT_OK
        except HypothesisViolation as e:
            logger.warning(f"Hypothesis violated: {e}")
            self.report.error = {'type': type(e).__name__, 'message': str(e), 'kind': 'hypothesis'}
            self.report.exit_code = EXIT_HYPOTHESIS
        except (OperationalError, ValueError) as e:
            logger.error(f"Run failed: {e}")
            self.report.error = {'type': type(e).__name__, 'message': str(e), 'kind': 'operational'}
            self.report.exit_code = EXIT_OPERATIONAL

        if self.cache is not None:
            logger.info(f"Cache: {self.cache.hits} hit(s), {self.cache.misses} miss(es)")
        self._send_progress("Done", 100)
        return self.report

    def write_outputs(self, directory: Optional[str] = None) -> List[str]:
        """Write report.json, eigenvalues.csv, sweep.csv and plotdata/*.dat as configured."""
        directory = directory or self.config.output.directory
        formats = self.config.output.formats
        os.makedirs(directory, exist_ok=True)
        written = []
        if 'json' in formats:
            path = os.path.join(directory, 'report.json')
            with open(path, 'w') as handle:
                handle.write(self.report.to_json())
            written.append(path)
        if 'csv' in formats:
            if self.eigenvalue_frame is not None:
                path = os.path.join(directory, 'eigenvalues.csv')
                self.eigenvalue_frame.to_csv(path, index=False, float_format='%.17g')
                written.append(path)
            if self.sweep_trace is not None:
                path = os.path.join(directory, 'sweep.csv')
                self.sweep_trace.write_csv(path)
                written.append(path)
        if 'dat' in formats and self.sweep_trace is not None:
            written.extend(self.sweep_trace.write_plot_data(os.path.join(directory, 'plotdata')))
        return written


def run_task(config: RunConfig, cache: Optional[EigenCache] = None) -> Tuple[ReportDocument, int]:
    """Run a config and return (report, exit code: 0 ok, 1 operational, 2 hypothesis)."""
    study = SpectralStudy(config, cache)
    report = study.run()
    return report, report.exit_code
