from hyperqma.core.flat_solver import ScalarField, SolverOptions, SolveResult, TorusGrid, solve
from hyperqma.core.hypercomplex_linalg import HermitianForm, HyperhermitianForm, HypercomplexFrame, standard_frame
from hyperqma.core.qma_operators import OperatorSpec, operator_zoo, qma_operator

__version__ = "0.1.0"
