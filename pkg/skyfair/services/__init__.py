"""Simulation services: world generation, channel, mobility, placement optimizers and the experiment loop."""
