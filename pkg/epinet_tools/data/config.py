"""
Flat key=value configuration files. Keys are the field names of McmcConfig, Priors, the Beta prior of the BRG model
and StudyGrid. Packaged defaults are overridden by a user file, which is overridden by command line values.
"""

from importlib import resources
from typing import Any, Callable, Dict, NamedTuple, Optional, List

from epinet_tools import data
from epinet_tools.data.types import DataException, Priors, BRGParams
from epinet_tools.inference.mcmc import McmcConfig
from epinet_tools.study import StudyGrid


class ConfigException(DataException):
    """Exception raised for unknown or malformed configuration entries."""
    pass


def _to_bool(value: str) -> bool:
    v = value.strip().lower()
    if v in ('true', 'yes', '1'):
        return True
    if v in ('false', 'no', '0'):
        return False
    raise ValueError(f"{value} is not a Boolean.")


def _optional(convert: Callable[[str], Any]) -> Callable[[str], Any]:
    def _convert(value: str):
        return None if value.strip().lower() in ('none', '') else convert(value)
    return _convert


def _list_of(convert: Callable[[str], Any]) -> Callable[[str], List[Any]]:
    def _convert(value: str):
        return [convert(v) for v in value.split(',') if v.strip()]
    return _convert


MCMC_KEYS: Dict[str, Callable[[str], Any]] = {
    'iterations': int,
    'burnin': int,
    'fix_gamma': _optional(float),
    'target_accept': float,
    'init_mu': _optional(float),
    'init_gamma': float,
    'proposal_sd_mu': float,
    'proposal_sd_gamma': float,
    'sigma_moves_per_iter': _optional(int),
    'seed': _optional(int),
    'model': str,
    'thin': int,
    'random_scan': _to_bool,
    'prior_only': _to_bool,
    'network_likelihood': str,
    'record_sigma': _to_bool,
}
PRIOR_KEYS: Dict[str, Callable[[str], Any]] = {k: float for k in Priors._fields}
BRG_KEYS: Dict[str, Callable[[str], Any]] = {'a_p': float, 'b_p': float}
STUDY_KEYS: Dict[str, Callable[[str], Any]] = {
    'm_values': _list_of(int),
    'beta_values': _list_of(float),
    'mu_values': _list_of(float),
    'gamma_values': _list_of(float),
    'known_proportions': _list_of(float),
    'replicates': int,
    'base_seed': int,
}
ALL_KEYS = {**MCMC_KEYS, **PRIOR_KEYS, **BRG_KEYS, **STUDY_KEYS}


class RunConfig(NamedTuple):
    mcmc: McmcConfig
    priors: Priors
    brg_priors: BRGParams
    study: Dict[str, Any]

    def study_grid(self) -> StudyGrid:
        return StudyGrid(**self.study, config=self.mcmc, priors=self.priors)


def parse_config_text(text: str, source: str = '<config>') -> Dict[str, Any]:
    """Parse key=value lines into typed values. Blank lines and # comments are ignored."""
    values = {}
    for line_no, line in enumerate(text.splitlines(), start=1):
        line = line.split('#', 1)[0].strip()
        if not line:
            continue
        if '=' not in line:
            raise ConfigException(f"{source}, line {line_no}: expected key=value (found '{line}').")

        key, value = (s.strip() for s in line.split('=', 1))
        if key not in ALL_KEYS:
            raise ConfigException(f"{source}, line {line_no}: unknown configuration key '{key}'.")
        try:
            values[key] = ALL_KEYS[key](value)
        except ValueError as e:
            raise ConfigException(f"{source}, line {line_no}: invalid value for {key}: {e}") from e
    return values


def default_config_values() -> Dict[str, Any]:
    text = resources.read_text(data, 'default_config.txt')
    return parse_config_text(text, source='default_config.txt')


def load_config(path: Optional[str] = None, overrides: Optional[Dict[str, Any]] = None) -> RunConfig:
    """
    :param path: Optional user configuration file.
    :param overrides: Already-typed values (e.g., from the command line).
    :return: The merged configuration.
    """
    values = default_config_values()
    if path is not None:
        try:
            with open(path, 'r', encoding='utf-8') as f:
                values.update(parse_config_text(f.read(), source=path))
        except OSError as e:
            raise ConfigException(f"Unable to read configuration file {path}: {e}") from e

    for key, value in (overrides or {}).items():
        if key not in ALL_KEYS:
            raise ConfigException(f"Unknown configuration key '{key}'.")
        values[key] = value

    return RunConfig(
        mcmc=McmcConfig(**{k: values[k] for k in MCMC_KEYS}),
        priors=Priors(**{k: values[k] for k in PRIOR_KEYS}),
        brg_priors=BRGParams(p=0.5, **{k: values[k] for k in BRG_KEYS}),
        study={k: values[k] for k in STUDY_KEYS},
    )
