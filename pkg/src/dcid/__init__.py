"""Recover the latent signal shared by two targets from side observations."""
from dcid.cca import CcaModel, fit_cca
from dcid.icm import IcmScore, score_icm
from dcid.mtl import MtlModel, select_shared_features, train_mtl
from dcid.nets import MlpSpec, Predictor, TrainConfig
from dcid.pipeline import DcidConfig, SharedEstimate, fit_dcid, predict_shared, surrogate_psi1
from dcid.regression import OlsModel, fit_ols, r_squared
from dcid.scenario import GroundTruthDataset, ScenarioConfig, generate, verify_ratios

__version__ = "0.1.0"
