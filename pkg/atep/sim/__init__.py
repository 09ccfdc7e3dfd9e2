from atep.sim.walker import (
    EVALUATIONS,
    RolloutCounter,
    RolloutJob,
    RolloutResult,
    SimConfig,
    SimState,
    Termination,
    evaluate_population,
    observe,
    rollout,
    run_rollouts,
)

__all__ = [
    "EVALUATIONS",
    "RolloutCounter",
    "RolloutJob",
    "RolloutResult",
    "SimConfig",
    "SimState",
    "Termination",
    "evaluate_population",
    "observe",
    "rollout",
    "run_rollouts",
]
