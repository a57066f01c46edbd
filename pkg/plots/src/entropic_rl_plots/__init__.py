from .figures import (
    CsvValidationError,
    FigureSpec,
    plot_curves,
    plot_stabilization_histogram,
    plot_value_heatmap,
    read_csv_columns,
)

__all__ = [
    "CsvValidationError",
    "FigureSpec",
    "plot_curves",
    "plot_stabilization_histogram",
    "plot_value_heatmap",
    "read_csv_columns",
]
