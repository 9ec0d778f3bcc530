from .mimicry import (
    FAMILIES,
    GaussianMixtureModel,
    MultivariateNormalModel,
    UniformModel,
    UnivariateNormalModel,
    fit_gmm,
    gmm_log_likelihood,
    mimic_fit,
    mimic_sample,
)
from .ppo import (
    PolicyDistribution,
    PolicyDivergence,
    PpoAgent,
    PpoConfig,
    ppo_act,
    ppo_policy,
    ppo_record_reward,
    ppo_update,
)
