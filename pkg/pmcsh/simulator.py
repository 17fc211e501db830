"""
PMC-SH link simulator class
"""
import logging

from .lib import configuration as configuration_lib
from .lib import link as link_lib
from .lib import scenario as scenario_lib
from .lib.field import Rng

logger = logging.getLogger(__name__)


class SimulationError(Exception):
    def __init__(self, message, stage=None):
        self.stage = stage
        logger.error(message)
        super().__init__(message)


class LinkSimulator():
    """
    PMC-SH link simulator class
    """
    # `DEFAULT_CONF` can be either a dict or a path (`str` or `Path` object).
    DEFAULT_CONF = None
    # `ConfigurationError` is a reference to the error class to avoid importing the lib dir.
    ConfigurationError = configuration_lib.ConfigurationError

    def __init__(self, local_conf=None, preset=None, setup_logging=True):
        # `local_conf` can be either a dict or a path (`str` or `Path` object)
        # Setup logging
        if setup_logging:
            log_format = '%(asctime)s %(name)s %(levelname)s %(message)s'
            logging.basicConfig(level=logging.INFO, format=log_format)
        # Read conf file
        self.load_conf(local_conf, preset)
        # Configure logging
        if setup_logging:
            level = getattr(logging, self.conf['run.log_level']) if self.conf.get('run.log_level') else logging.INFO
            root_logger = logging.getLogger('root')
            root_logger.setLevel(level)
            logging.getLogger('pmcsh').setLevel(level)
            logging.captureWarnings(False)
            logger.debug('Logging conf set.')

    def load_conf(self, local_conf, preset=None):
        self.local_conf = local_conf
        self.preset = preset
        self.conf = configuration_lib.load_conf(self.DEFAULT_CONF, self.local_conf, self.preset)
        self._scenario = None
        return self.conf

    def update_conf(self, key, value):
        if key not in self.conf:
            raise configuration_lib.ConfigurationError(f'Unknown configuration key "{key}".')
        self.conf[key] = value
        self._scenario = None

    def check_conf(self):
        if self._scenario is None:
            self._scenario = configuration_lib.check_conf(self.conf)
        return self._scenario

    @property
    def rng(self):
        return Rng(self.check_conf().seed)

    def simulate(self):
        scenario = self.check_conf()
        try:
            return link_lib.simulate(scenario, self.rng)
        except (ValueError, ArithmeticError) as err:
            raise SimulationError(f'Simulation failed: {err}', stage=type(err).__name__) from err

    def run_scenario(self, *args, **kwargs):
        self.check_conf()
        try:
            return scenario_lib.run_scenario(self, *args, **kwargs)
        except (ValueError, ArithmeticError) as err:
            if isinstance(err, configuration_lib.ConfigurationError):
                raise
            raise SimulationError(f'Simulation failed: {err}', stage=type(err).__name__) from err

    def sweep(self, *args, **kwargs):
        self.check_conf()
        return scenario_lib.sweep(self, *args, **kwargs)
