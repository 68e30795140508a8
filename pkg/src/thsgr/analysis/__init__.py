from .flops import (
    count_flops_msa,
    count_flops_modulator,
    count_params,
    measure_flops,
    params_msa,
    params_modulator,
)
from .report import ProfileReport, ProfileRow, profile_blocks, scene_profile_configs
from .factorization import (
    FactorizationReport,
    verify_msa_factorization,
    verify_modulator_factorization,
)
from .gradcheck_suite import run_gradcheck_suite
