"""Frequency-filtering obfuscation with adversarial training.

Importing this package pins the BLAS thread pools to one thread unless
the environment already chose otherwise. Multi-threaded reductions
reorder float additions nondeterministically, and reproducing a run
bit for bit matters more here than raw throughput.
"""
import os as _os

for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS",
             "NUMEXPR_NUM_THREADS"):
    _os.environ.setdefault(_var, "1")
del _os, _var

__version__ = "0.1.0"

from .autodiff import Tape, Tensor, backward, precision  # noqa: E402
from .data import (RawIdxData, SynthConfig, derive_tasks, gen_synthetic,  # noqa: E402
                   load_idx, load_split, export_split)
from .engine import (ArlConfig, TrainedSystem, compute_bounds, radius_sweep,  # noqa: E402
                     train_arl, train_frozen_adversary, train_reconstructor,
                     evaluate_utility)
from .errors import (CheckpointError, ConfigError, IdxFormatError,  # noqa: E402
                     TrainingDivergedError)
from .metrics import (SimilarityReport, accuracy, l1, ms_ssim, mse, psnr,  # noqa: E402
                      similarity_suite, ssim)
from .models import ClassifierModel, EncoderModel, Obfuscator, ReconstructorModel  # noqa: E402
from .spectral import FilterSpec, apply_filter, fft2, filter_array, ifft2, pad_to_pow2  # noqa: E402

__all__ = [
    "Tape", "Tensor", "backward", "precision",
    "RawIdxData", "SynthConfig", "derive_tasks", "gen_synthetic", "load_idx",
    "load_split", "export_split",
    "ArlConfig", "TrainedSystem", "compute_bounds", "radius_sweep", "train_arl",
    "train_frozen_adversary", "train_reconstructor", "evaluate_utility",
    "CheckpointError", "ConfigError", "IdxFormatError", "TrainingDivergedError",
    "SimilarityReport", "accuracy", "l1", "ms_ssim", "mse", "psnr",
    "similarity_suite", "ssim",
    "ClassifierModel", "EncoderModel", "Obfuscator", "ReconstructorModel",
    "FilterSpec", "apply_filter", "fft2", "filter_array", "ifft2", "pad_to_pow2",
    "__version__",
]
