"""Shallow-network solvers (Ritz energies and PINN residuals) with verification tooling."""
from .domain import Hypercube, QuadratureGrid, SampleBatch, quadrature_for, sample
from .losses import LossKind, PinnBatch, empirical_loss, energy_excess, loss_gradient, population_loss
from .nets import ShallowNet, project
from .problems import make_elliptic, make_poisson, make_schrodinger, parse_problem
from .trainer import TrainConfig, TrainReport, init_network, train_erm, width_rule

__version__ = "0.1.0"
