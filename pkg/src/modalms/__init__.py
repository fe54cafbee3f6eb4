"""Kernel modal regression (conditional mean-shift) with missing responses."""
__version__ = "0.1.0"

from .dataset import Dataset, Sample, load_dataset, observed_fraction, write_dataset
from .kernel_density import (Bandwidths, conditional_density, density_y_gradient, gaussian_kernel,
                             joint_density)
from .meanshift import (MeanShiftConfig, ModalCurve, ModalSet, ascend, mean_shift_step, modal_curve,
                        modal_set, starting_points)
from .missing import (EstimatorKind, PropensityModel, fit_propensity_kernel, fit_propensity_logistic,
                      known_propensity, propensity_eval, weights_for)
from .imputation import (PooledModes, combine_modal_sets, impute_random_draw, impute_single,
                         multiple_imputation_curve)
from .bandwidth import BandwidthGrid, cv_score, select_bandwidths
from .metrics import ase, dist_point_set, hausdorff

__all__ = [
    "Dataset", "Sample", "load_dataset", "observed_fraction", "write_dataset",
    "Bandwidths", "conditional_density", "density_y_gradient", "gaussian_kernel", "joint_density",
    "MeanShiftConfig", "ModalCurve", "ModalSet", "ascend", "mean_shift_step", "modal_curve",
    "modal_set", "starting_points",
    "EstimatorKind", "PropensityModel", "fit_propensity_kernel", "fit_propensity_logistic",
    "known_propensity", "propensity_eval", "weights_for",
    "PooledModes", "combine_modal_sets", "impute_random_draw", "impute_single",
    "multiple_imputation_curve",
    "BandwidthGrid", "cv_score", "select_bandwidths",
    "ase", "dist_point_set", "hausdorff",
]
