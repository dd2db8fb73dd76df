"""Multi-agent RL workbench: reward randomization, PPO, and matrix-game dynamics."""

__version__ = "0.1.0"
