from .transform import SceneCube, PcaBasis, normalize, fit_pca, pca_reduce
from .patches import extract_patch, lidar_preprocess, PatchExtractor
from .split import SplitSpec, PixelSet, make_split, class_counts
