"""Built-in design generators."""

from .aes import aes_stimuli, aes_stimulus, gen_aes_core
from .bus import BusScenario, gen_bus_interface_scenario
from .toy import designated_cell, gen_toy_leaky, toy_stimuli

__all__ = ["gen_aes_core", "aes_stimulus", "aes_stimuli", "gen_bus_interface_scenario", "BusScenario",
           "gen_toy_leaky", "designated_cell", "toy_stimuli"]
