"""Actor-critic network, PPO and checkpoints."""
from .checkpoint import MAGIC, from_bytes, load, save, to_bytes
from .network import NetworkSpec, PolicyParams, init_params, network_forward, policy_act
from .ppo import PPOConfig, RolloutBatch, gae_advantages, ppo_update, train_loop

__all__ = [
    "MAGIC", "from_bytes", "load", "save", "to_bytes",
    "NetworkSpec", "PolicyParams", "init_params", "network_forward", "policy_act",
    "PPOConfig", "RolloutBatch", "gae_advantages", "ppo_update", "train_loop",
]
