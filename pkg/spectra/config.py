"""
Run configuration - strict INI files with [problem], [task], [output].

Example (bundled configs/oscillator2d.cfg):

    [problem]
    dimension = 2
    V = (x1^2 + 4*x2^2)/2
    W = x1^2*x2/(1+x1^2+x2^2)
    reflection = 0, 1
    kinetic = 0.5

    [task]
    task = classify
    lambda0 = 3.5

Unknown keys, duplicate keys and duplicate sections are errors carrying the
offending line number.
"""

import configparser
import hashlib
import logging
import os
import re
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Tuple, Union

import numpy as np

from .basis import HermiteBasis
from .errors import ConfigError, FormatError, SpectraError
from .expr_parser import compile_expression
from .matrix_io import read_matrix
from .operators import PerturbationForm, ProblemSpec

logger = logging.getLogger(__name__)

TASKS = ('spectrum', 'classify', 'reality', 'sweep', 'doublewell-fit')
OUTPUT_FORMATS = ('json', 'csv', 'dat')

_SECTION_LINE = re.compile(r'^\s*\[([^\]]+)\]\s*$')
_KEY_LINE = re.compile(r'^\s*([A-Za-z_][A-Za-z0-9_]*)\s*=')


def _floats(text: str) -> List[float]:
    return [float(part) for part in text.split(',') if part.strip()]


def _ints(text: str) -> List[int]:
    return [int(part) for part in text.split(',') if part.strip()]


def _boolean(text: str) -> bool:
    lowered = text.strip().lower()
    if lowered in ('1', 'true', 'yes', 'on'):
        return True
    if lowered in ('0', 'false', 'no', 'off'):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _window(text: str) -> Union[int, Tuple[float, float]]:
    parts = [p.strip() for p in text.split(',') if p.strip()]
    if len(parts) == 1:
        return int(parts[0])
    if len(parts) == 2:
        return float(parts[0]), float(parts[1])
    raise ValueError(f"window is a count or 'low, high', got {text!r}")


def _words(text: str) -> List[str]:
    return [part.strip() for part in text.split(',') if part.strip()]


KNOWN_KEYS: Dict[str, Dict[str, Callable]] = {
    'problem': {
        'dimension': int, 'V': str, 'W': str, 'reflection': _ints, 'center': _floats,
        'kinetic': float, 'hbar': float, 'modes': int, 'length_scales': str,
        'quadrature_order': int, 'perturbation': str, 'h1_matrix': str, 'j_matrix': str,
        'symmetry_tolerance': float,
    },
    'task': {
        'task': str, 'epsilon': float, 'epsilons': _floats, 'epsilon_min': float,
        'epsilon_max': float, 'epsilon_steps': int, 'window': _window, 'lambda0': float,
        'pair': _ints, 'bracket': _floats, 'trusted_count': int, 'family': str,
        'values': _floats,
    },
    'output': {
        'directory': str, 'formats': _words, 'cache': _boolean,
    },
}


@dataclass
class TaskConfig:
    name: str
    epsilons: List[float] = field(default_factory=list)
    window: Optional[Union[int, Tuple[float, float]]] = None
    lambda0: Optional[float] = None
    pair: Optional[Tuple[int, int]] = None
    bracket: Optional[Tuple[float, float]] = None
    trusted_count: Optional[int] = None
    family: Optional[str] = None
    values: List[float] = field(default_factory=list)


@dataclass
class OutputConfig:
    directory: str = "results"
    formats: List[str] = field(default_factory=lambda: ['json', 'csv'])
    cache: bool = True


@dataclass
class RunConfig:
    """A parsed run: problem, task, output, plus the echoed source text."""
    problem: ProblemSpec
    task: TaskConfig
    output: OutputConfig
    source_text: str
    path: str = ""

    @property
    def content_hash(self) -> str:
        return hashlib.sha256(self.source_text.encode('utf-8')).hexdigest()


def _scan_lines(text: str) -> Dict[Tuple[str, str], int]:
    """Line numbers of every (section, key); duplicates and junk are errors."""
    sections: Dict[str, int] = {}
    keys: Dict[Tuple[str, str], int] = {}
    current = None
    for number, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped[0] in '#;':
            continue
        section = _SECTION_LINE.match(line)
        if section:
            current = section.group(1).strip()
            if current in sections:
                raise ConfigError(number, f"duplicate section [{current}] (first at line {sections[current]})")
            if current not in KNOWN_KEYS:
                raise ConfigError(number, f"unknown section [{current}]")
            sections[current] = number
            continue
        key = _KEY_LINE.match(line)
        if not key:
            raise ConfigError(number, f"expected 'key = value', got {stripped!r}")
        if current is None:
            raise ConfigError(number, "key outside of any section")
        name = key.group(1)
        if name not in KNOWN_KEYS[current]:
            raise ConfigError(number, f"unknown key '{name}' in [{current}]")
        if (current, name) in keys:
            first = keys[(current, name)]
            raise ConfigError(number, f"duplicate key '{name}' in [{current}] at lines {first} and {number}")
        keys[(current, name)] = number
    return keys


def parse_config(text: str, path: str = "", base_directory: str = ".") -> RunConfig:
    """Parse config text (see load_config)."""
    lines = _scan_lines(text)
    parser = configparser.ConfigParser(strict=True, interpolation=None, delimiters=('=',),
                                       comment_prefixes=('#', ';'), inline_comment_prefixes=('#',))
    parser.optionxform = str
    try:
        parser.read_string(text, source=path or '<config>')
    except configparser.Error as e:
        raise ConfigError(getattr(e, 'lineno', None), str(e))

    values: Dict[str, Dict[str, object]] = {name: {} for name in KNOWN_KEYS}
    for section in parser.sections():
        for key, raw in parser.items(section):
            try:
                values[section][key] = KNOWN_KEYS[section][key](raw)
            except ValueError as e:
                raise ConfigError(lines.get((section, key)), f"bad value for '{key}': {e}")

    if 'problem' not in parser.sections():
        raise ConfigError(None, "missing [problem] section")
    if 'task' not in parser.sections():
        raise ConfigError(None, "missing [task] section")

    task = _build_task(values['task'], lines)
    problem = _build_problem(values['problem'], task, lines, base_directory)
    output = _build_output(values['output'], lines)
    return RunConfig(problem=problem, task=task, output=output, source_text=text, path=path)


def load_config(path: str) -> RunConfig:
    """
    Read and validate a run configuration.

    Raises:
        ConfigError: with the offending line (None when not line-specific)
    """
    if not os.path.exists(path):
        raise ConfigError(None, f"config file not found: {path}")
    with open(path) as handle:
        text = handle.read()
    config = parse_config(text, path, os.path.dirname(os.path.abspath(path)))
    logger.info(f"Loaded {path}: task {config.task.name}, hash {config.content_hash[:12]}")
    return config


def _build_task(values: Dict, lines: Dict) -> TaskConfig:
    name = values.get('task')
    if name not in TASKS:
        raise ConfigError(lines.get(('task', 'task')), f"task must be one of {', '.join(TASKS)}, got {name!r}")

    if 'epsilons' in values and 'epsilon' in values:
        raise ConfigError(lines.get(('task', 'epsilon')), "give either 'epsilon' or 'epsilons', not both")
    epsilons = list(values.get('epsilons', []))
    if 'epsilon' in values:
        epsilons = [values['epsilon']]
    if 'epsilon_steps' in values:
        steps = values['epsilon_steps']
        if steps < 1:
            raise ConfigError(lines.get(('task', 'epsilon_steps')), "epsilon_steps must be positive")
        if 'epsilon_max' not in values:
            raise ConfigError(lines.get(('task', 'epsilon_steps')), "epsilon_steps needs epsilon_max")
        epsilons = list(np.linspace(values.get('epsilon_min', 0.0), values['epsilon_max'], steps))

    pair = values.get('pair')
    if pair is not None and len(pair) != 2:
        raise ConfigError(lines.get(('task', 'pair')), "pair needs two level indices")
    bracket = values.get('bracket')
    if bracket is not None and len(bracket) != 2:
        raise ConfigError(lines.get(('task', 'bracket')), "bracket needs two values")

    task = TaskConfig(name=name, epsilons=epsilons, window=values.get('window'),
                      lambda0=values.get('lambda0'),
                      pair=tuple(pair) if pair is not None else None,
                      bracket=tuple(bracket) if bracket is not None else None,
                      trusted_count=values.get('trusted_count'), family=values.get('family'),
                      values=list(values.get('values', [])))

    header = lines.get(('task', 'task'))
    if name == 'classify' and task.lambda0 is None and task.pair is None:
        raise ConfigError(header, "classify needs lambda0 (double eigenvalue) or pair (near-degenerate)")
    if name == 'sweep':
        if not task.epsilons:
            raise ConfigError(header, "sweep needs epsilons or epsilon_max/epsilon_steps")
        if task.window is None:
            raise ConfigError(header, "sweep needs a window")
    if name == 'doublewell-fit':
        if task.family not in ('hbar', 'g'):
            raise ConfigError(lines.get(('task', 'family'), header), "doublewell-fit needs family = hbar | g")
        if len(task.values) < 5:
            raise ConfigError(lines.get(('task', 'values'), header), "doublewell-fit needs at least 5 values")
    return task


def _build_problem(values: Dict, task: TaskConfig, lines: Dict, base_directory: str) -> ProblemSpec:
    def line(key):
        return lines.get(('problem', key))

    for required in ('dimension', 'V'):
        if required not in values:
            raise ConfigError(None, f"[problem] needs '{required}'")
    dimension = values['dimension']
    if dimension not in (1, 2):
        raise ConfigError(line('dimension'), f"dimension must be 1 or 2, got {dimension}")

    try:
        perturbation = PerturbationForm(values.get('perturbation', 'pt'))
    except ValueError:
        raise ConfigError(line('perturbation'), "perturbation must be 'pt' or 'matrix'")

    if 'kinetic' in values and 'hbar' in values:
        raise ConfigError(line('hbar'), "give either 'kinetic' or 'hbar', not both")
    hbar = values.get('hbar')
    kinetic = values.get('kinetic', hbar ** 2 if hbar is not None else 1.0)

    scales_text = values.get('length_scales', '1.0' if dimension == 1 else '1.0, 1.0')
    if scales_text.strip().lower() == 'auto':
        scale = float(np.sqrt(hbar)) if hbar is not None else 1.0
        length_scales = (scale,) * dimension
    else:
        try:
            length_scales = tuple(_floats(scales_text))
        except ValueError as e:
            raise ConfigError(line('length_scales'), f"bad length_scales: {e}")

    centers = tuple(values.get('center', [0.0] * dimension))
    reflection = tuple(values.get('reflection', [1] * dimension))

    try:
        basis = HermiteBasis(dimension=dimension, modes=values.get('modes', 40),
                             length_scales=length_scales, kinetic=kinetic, centers=centers)
    except ValueError as e:
        raise ConfigError(line('modes'), str(e))

    expressions = {}
    for key in ('V', 'W'):
        if key in values:
            try:
                expressions[key] = compile_expression(values[key], dimension)
            except SpectraError as e:
                raise ConfigError(line(key), f"{key}: {e}")
    V = expressions['V']
    W = expressions.get('W')

    h1_matrix = j_matrix = None
    if perturbation == PerturbationForm.PT:
        if W is None and task.name != 'doublewell-fit':
            raise ConfigError(None, f"task {task.name} in PT form needs W")
    else:
        for key in ('h1_matrix', 'j_matrix'):
            if key not in values:
                raise ConfigError(line('perturbation'), f"matrix perturbation needs '{key}'")
        try:
            h1_matrix = read_matrix(os.path.join(base_directory, values['h1_matrix']))
            j_matrix = read_matrix(os.path.join(base_directory, values['j_matrix']))
        except FormatError as e:
            raise ConfigError(line('h1_matrix'), str(e))
        except OSError as e:
            raise ConfigError(line('h1_matrix'), f"cannot read matrix: {e}")

    epsilons = task.epsilons or [0.0]
    try:
        return ProblemSpec(basis=basis, V=V, W=W if W is not None else compile_expression("0", dimension),
                           reflection=reflection, perturbation=perturbation,
                           h1_matrix=h1_matrix, j_matrix=j_matrix,
                           quadrature_order=values.get('quadrature_order'),
                           symmetry_tolerance=values.get('symmetry_tolerance', 1e-10),
                           epsilon_range=(min(epsilons), max(epsilons)))
    except ValueError as e:
        raise ConfigError(None, str(e))


def _build_output(values: Dict, lines: Dict) -> OutputConfig:
    output = OutputConfig()
    if 'directory' in values:
        output.directory = values['directory']
    if 'formats' in values:
        unknown = [f for f in values['formats'] if f not in OUTPUT_FORMATS]
        if unknown:
            raise ConfigError(lines.get(('output', 'formats')), f"unknown formats {unknown}")
        output.formats = values['formats']
    if 'cache' in values:
        output.cache = values['cache']
    return output
