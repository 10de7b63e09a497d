"""Shipped tasks and the name-based factory used by configs."""

from esp_marl.envs.coop_nav import CooperativeNavigation
from esp_marl.envs.formation import FormationChange
from esp_marl.envs.particle import Physics
from esp_marl.envs.predator_prey import PredatorPrey
from esp_marl.errors import InvalidArgument

ENV_NAMES = ("coop_nav", "predator_prey", "formation_change")


def make_cooperative_navigation(n_agents=3, **kw):
    return CooperativeNavigation(n_agents, **kw)


def make_predator_prey(n_predators=3, **kw):
    return PredatorPrey(n_predators, **kw)


def make_formation_change(n_robots=8, **kw):
    return FormationChange(n_robots, **kw)


def make_env(name, n_agents=None):
    if name == "coop_nav":
        return CooperativeNavigation(3 if n_agents is None else n_agents)
    if name == "predator_prey":
        return PredatorPrey(3 if n_agents is None else n_agents)
    if name == "formation_change":
        return FormationChange(8 if n_agents is None else n_agents)
    raise InvalidArgument(f"unknown environment {name!r}; choose from {ENV_NAMES}")


__all__ = [
    "CooperativeNavigation",
    "FormationChange",
    "PredatorPrey",
    "Physics",
    "ENV_NAMES",
    "make_env",
    "make_cooperative_navigation",
    "make_predator_prey",
    "make_formation_change",
]
