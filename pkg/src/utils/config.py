"""
Configuration module for loading and validating run settings.
"""
import copy
import json
import logging
import os
from typing import Any, Dict, Optional

from dotenv import load_dotenv

from src.initdata import InitialDataSpec
from src.model import Nonlinearity

ENV_PREFIX = 'SAVNLS_'


class SchemeName:
    SAV1 = 'sav1'
    SAV2 = 'sav2'
    LIE = 'lie'
    STRANG = 'strang'
    ALL = (SAV1, SAV2, LIE, STRANG)


DEFAULT_CONFIG: Dict[str, Any] = {
    'scheme': SchemeName.SAV2,
    'n': 256,
    'domain_half_length': 32.0,
    'tau': 0.01,
    't_end': 1.0,
    'nonlinearity': 'cubic:-1',
    'potential': 'none',
    'ic': 'soliton:1:-1:1',
    'ec': 1.0,
    'adapt_shift': True,
    'bootstrap': 'predictor',
    'solver': 'fourier_diagonal',
    'gs_r_mode': 'reset',
    'gs_beta': 400.0,
    'gs_tol': 1e-8,
    'gs_max_steps': 100000,
    'gs_ec': 1.54,
    'h_mod_tolerance': 1e-9,
    'max_step_time': 5.0,
    'reference': 'exact',
    'full_length': False,
    'workers': 4,
    'seed': 0,
    'out': '-',
}

_TRUE = ('1', 'true', 'yes', 'on')
_FALSE = ('0', 'false', 'no', 'off')


def coerce_value(key: str, value: Any) -> Any:
    """
    Convert `value` to the type of the default for `key`.

    Raises:
        KeyError: For an unknown key
        ValueError: If the value cannot be converted
    """
    if key not in DEFAULT_CONFIG:
        raise KeyError(f"Unknown configuration key '{key}'")
    default = DEFAULT_CONFIG[key]
    if not isinstance(value, str):
        if isinstance(default, float) and isinstance(value, int) and not isinstance(value, bool):
            return float(value)
        return value
    text = value.strip()
    try:
        if isinstance(default, bool):
            if text.lower() in _TRUE:
                return True
            if text.lower() in _FALSE:
                return False
            raise ValueError(f"expected a boolean, got '{text}'")
        if isinstance(default, int):
            return int(text)
        if isinstance(default, float):
            return float(text)
    except ValueError as e:
        raise ValueError(f"Invalid value for '{key}': {str(e)}") from e
    return text


def read_config_file(config_path: str) -> Dict[str, Any]:
    """
    Read `key = value` lines (UTF-8, `#` comments, blank lines ignored) or a JSON object.

    Args:
        config_path: Path of the file

    Returns:
        Dict: Raw values keyed by configuration key
    """
    with open(config_path, 'r', encoding='utf-8') as f:
        text = f.read()
    if config_path.endswith('.json'):
        return json.loads(text)

    values = {}
    for number, line in enumerate(text.splitlines(), start=1):
        line = line.split('#', 1)[0].strip()
        if not line:
            continue
        key, separator, value = line.partition('=')
        if not separator:
            raise ValueError(f"{config_path}:{number}: expected 'key = value'")
        values[key.strip().replace('-', '_')] = value.strip()
    return values


def load_config(config_path: Optional[str] = None,
                overrides: Optional[Dict[str, Any]] = None) -> Dict[str, Any]:
    """
    Load configuration: defaults, then the config file, then SAVNLS_* environment
    variables (a .env file is honoured), then explicit overrides.

    Args:
        config_path: Optional config file
        overrides: Values that win over every other source, e.g. CLI flags

    Returns:
        Dict: Validated configuration
    """
    logger = logging.getLogger(__name__)
    config = copy.deepcopy(DEFAULT_CONFIG)

    if config_path:
        file_config = read_config_file(config_path)
        deep_merge(config, {key: coerce_value(key, value) for key, value in file_config.items()})
        logger.info(f"Loaded configuration from {config_path}")

    load_dotenv()
    for key in DEFAULT_CONFIG:
        value = os.environ.get(f"{ENV_PREFIX}{key.upper()}")
        if value is not None:
            config[key] = coerce_value(key, value)
            logger.debug(f"Configuration '{key}' taken from the environment")

    if overrides:
        deep_merge(config, {key: coerce_value(key, value)
                            for key, value in overrides.items() if value is not None})

    validate_config(config)
    return config


def validate_config(config: Dict[str, Any]) -> None:
    """
    Validate the configuration.

    Args:
        config: Configuration to validate

    Raises:
        ValueError: If configuration is invalid
    """
    if config.get('scheme') not in SchemeName.ALL:
        raise ValueError(f"Unknown scheme '{config.get('scheme')}' (--scheme); "
                         f"expected one of {', '.join(SchemeName.ALL)}")
    n = config.get('n')
    if not isinstance(n, int) or n < 4 or n % 2:
        raise ValueError(f"n must be an even integer >= 4 (--n), got {n}")
    if not config.get('domain_half_length', 0) > 0:
        raise ValueError(f"domain_half_length must be positive (--domain-half-length), got {config.get('domain_half_length')}")
    if not config.get('tau', 0) > 0:
        raise ValueError(f"tau must be positive (--tau), got {config.get('tau')}")
    if config.get('t_end', -1) < 0:
        raise ValueError(f"t_end must be non-negative (--t-end), got {config.get('t_end')}")
    if not config.get('ec', 0) > 0:
        raise ValueError(f"ec must be positive (--ec), got {config.get('ec')}")
    if not config.get('gs_ec', 0) > 0:
        raise ValueError(f"gs_ec must be positive (--gs-ec), got {config.get('gs_ec')}")
    if config.get('bootstrap') not in ('predictor', 'frozen'):
        raise ValueError(f"Unknown bootstrap '{config.get('bootstrap')}' (--bootstrap)")
    if config.get('solver') not in ('fourier_diagonal', 'dense_reference'):
        raise ValueError(f"Unknown solver '{config.get('solver')}'")
    if config.get('gs_r_mode') not in ('reset', 'carry'):
        raise ValueError(f"Unknown r mode '{config.get('gs_r_mode')}' (--gs-r-mode)")
    if config.get('reference') not in ('exact', 'self'):
        raise ValueError(f"Unknown reference '{config.get('reference')}'; expected exact or self")
    if not config.get('workers', 0) >= 1:
        raise ValueError(f"workers must be at least 1, got {config.get('workers')}")

    Nonlinearity.parse(config['nonlinearity'])
    InitialDataSpec.parse(config['ic'], seed=config.get('seed'))
    potential = config.get('potential', '')
    kind, _, argument = potential.partition(':')
    if not ((kind in ('none', 'harmonic') and not argument) or (kind in ('const', 'file') and argument)):
        raise ValueError(f"Invalid potential '{potential}' (--potential): expected none | harmonic | const:V0 | file:PATH")
    if kind == 'const':
        float(argument)


def deep_merge(dest: Dict[str, Any], src: Dict[str, Any]) -> None:
    """
    Deep merge two dictionaries.

    Args:
        dest: Destination dictionary
        src: Source dictionary
    """
    for key, value in src.items():
        if key in dest and isinstance(dest[key], dict) and isinstance(value, dict):
            deep_merge(dest[key], value)
        else:
            dest[key] = value
