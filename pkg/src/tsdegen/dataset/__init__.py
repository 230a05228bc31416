from .csvio import load_csv, write_csv
from .toy import (
    CarrierParams,
    LabeledSeries,
    StateMachine,
    ToySeriesConfig,
    extract_event_amplitude,
    generate_toy,
    next_state,
    triangle_template,
    unit_event_area,
)
from .windows import SPLITS, Split, WindowedDataset, count_windows, make_windows, split_window_starts
