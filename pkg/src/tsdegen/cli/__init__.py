from .config import DEFAULT_INTERVENTIONS, DESK_DATASET, DESK_TRAIN, KINDS, ExperimentConfig
from .experiments import RUNNERS, run_experiment
from .main import EXIT_CONFIG, EXIT_NUMERIC, EXIT_OK, build_parser, main
from .runner import Cell, CellResult, RunDirectory, load_data, run_cells, train_cell
