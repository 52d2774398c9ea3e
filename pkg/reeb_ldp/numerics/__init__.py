from .polynomial import Poly2D
from .runge_kutta import DormandPrince, StepResult
