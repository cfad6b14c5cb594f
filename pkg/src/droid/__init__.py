"""Two-stage dose-optimization engine.

Stage I allocates cohorts adaptively against dual toxicity/activity targets,
stage II randomizes among the recommended doses with safety and futility
monitoring, and the final analysis combines a dose-response index with
posterior selection of the optimal dose.  A Monte Carlo simulator reports
operating characteristics, and a CLI plus HTTP service support live trial
conduct.
"""

from droid.core import (
    ConfigError,
    DesignConfig,
    DoseGrid,
    McmcSettings,
    PatientRecord,
    PosteriorSnapshot,
    Tdr,
    TrialError,
    TrialState,
    config_errors,
    default_design,
    replay_log,
    validate_config,
)
from droid.conduct import (
    RevisionConflict,
    StoreError,
    TrialEnvelope,
    TrialNotFound,
    TrialStore,
)
from droid.engine import (
    advance,
    close_stage1_now,
    posterior_snapshot,
    run_final_analysis,
)
from droid.ocs import OCReport, run_comparator_ocs, run_ocs, run_trial
from droid.scenarios import (
    Scenario,
    builtin_scenario,
    builtin_scenarios,
    load_scenarios,
    save_scenarios,
)
from droid.stage2 import (
    FinalAnalysis,
    MonitorResult,
    RandPolicy,
    final_analysis,
    randomize_next,
    stage2_monitor,
)

__version__ = "0.1.0"

__all__ = [
    "advance",
    "builtin_scenario",
    "builtin_scenarios",
    "close_stage1_now",
    "config_errors",
    "ConfigError",
    "default_design",
    "DesignConfig",
    "DoseGrid",
    "final_analysis",
    "FinalAnalysis",
    "load_scenarios",
    "McmcSettings",
    "MonitorResult",
    "OCReport",
    "PatientRecord",
    "posterior_snapshot",
    "PosteriorSnapshot",
    "randomize_next",
    "RandPolicy",
    "replay_log",
    "RevisionConflict",
    "run_comparator_ocs",
    "run_final_analysis",
    "run_ocs",
    "run_trial",
    "save_scenarios",
    "Scenario",
    "stage2_monitor",
    "StoreError",
    "Tdr",
    "TrialEnvelope",
    "TrialError",
    "TrialNotFound",
    "TrialState",
    "TrialStore",
    "validate_config",
    "__version__",
]
