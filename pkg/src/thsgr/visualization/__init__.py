from .maps import export_map, read_class_map, prediction_grid
