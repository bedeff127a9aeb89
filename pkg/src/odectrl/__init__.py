"""Binary classifiers built from Runge--Kutta discretisations of a controlled ODE.

Forward propagation uses an explicit Runge--Kutta method; gradients come from the
matching symplectic partitioned Runge--Kutta adjoint recursion.
"""

from .adjoint import (
    AdjointState,
    GradientBundle,
    backward,
    classifier_gradients,
    control_gradients,
    full_gradient,
    terminal_costate,
)
from .data import LabeledDataset, generate, generate_split, load_csv, load_idx, save_csv
from .dynamics import ArchitectureKind, LayerControls, vector_field
from .loss import ClassifierHead, accuracy, batch_loss, hypothesis, predict
from .optimizer import (
    BacktrackState,
    TrainOptions,
    TrainRecord,
    backtracking_step,
    gd_step,
    project_simplex,
    train,
)
from .params import Parameters, initialize
from .propagation import NetworkConfig, TrajectoryCache, forward, forward_batch, make_config
from .tableau import ButcherTableau, adjoint_of, make_tableau, verify_order

__version__ = "0.1.0"
