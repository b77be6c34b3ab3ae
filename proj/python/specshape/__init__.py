"""Factory Markov game, potential-based reward shaping and DQN/VDN/QMIX learners."""

from ._core import (
    ACTIONS,
    ConfigError,
    Env,
    EnvError,
    Layout,
    LayoutError,
    RewardError,
    plot_svg,
    potential,
    run_config,
    scheme_names,
    scheme_weights,
    train,
)

__all__ = [
    "ACTIONS",
    "ConfigError",
    "Env",
    "EnvError",
    "Layout",
    "LayoutError",
    "RewardError",
    "plot_svg",
    "potential",
    "run_config",
    "scheme_names",
    "scheme_weights",
    "train",
]
