"""Series estimation of panel models with time-varying endogenous random coefficients.

The estimator runs in three steps per period: a conditional-CDF control
variable for the endogenous shock, an index-structured series regression of
the outcome, and averaging of its x-gradient into conditional and
unconditional mean coefficients.
"""

from .basis import IndexBasis, SplineSpec, TensorBasis, eval_dbar, eval_index, eval_tensor, eval_tensor_deriv
from .coefficients import (BetaVWModel, BetaXModel, SecondMomentModel, beta_bar, beta_vw, beta_x, fit_beta_x,
                           fit_second_moments)
from .config import BasisConfig, EstimateConfig
from .control import ControlModel, eval_v, eval_v_cross, fit_control, vhat_all
from .errors import *  # noqa: F401,F403
from .inference import CovarianceReport, compute_mu_terms, omega1_at, omega2_at, omega3
from .outcome import OutcomeModel, eval_g, eval_g_dv, fit_g
from .panel import ColumnSchema, CrossSection, PanelDataset, cross_section, load_csv, write_csv
from .pipeline import EstimateReport, PeriodFit, estimate, estimate_period
from .simulation import McReport, SimConfig, SimTruth, gen_dgp, metrics, run_montecarlo
from .sufficient import WStatistic, build_w

__version__ = "0.1.0"
