"""Option-learning agents (PPO, PPOC, PPOEM, SOAP) for POMDP corridor tasks and cart-pole."""
from .agents import PPOAgent, PPOCAgent, PPOEMAgent, SOAPAgent, load_agent, make_agent
from .envs import CartPole, Corridor, CorridorConfig, make_env

__all__ = ["PPOAgent", "PPOCAgent", "PPOEMAgent", "SOAPAgent", "load_agent", "make_agent",
           "CartPole", "Corridor", "CorridorConfig", "make_env"]
