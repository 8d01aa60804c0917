from .config import ExperimentConfig, load_config, parse_config
from .runner import RunResult, report, run, run_seeds, runs_csv, sweep
