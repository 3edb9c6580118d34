"""Named scenarios used by the regression suite, the tests and the CLI examples."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .flow import UnitTangentState, unit_state
from .geometry import ClosedFormField, ConformalMetric, Scenario, TrigPolynomial


@dataclass(frozen=True)
class Case:
    scenario: Scenario
    x: float
    y: float
    angle: float

    @property
    def state(self) -> UnitTangentState:
        return unit_state(self.scenario, self.x, self.y, self.angle)

    @property
    def name(self) -> str:
        return self.scenario.name


def flat(name="flat", c1=0.0, c2=0.0, U=None) -> Scenario:
    return Scenario(ConformalMetric(), ClosedFormField(c1, c2, U or TrigPolynomial.zero()), name)


def product_torus(e: float = 0.5) -> Scenario:
    """Flat torus with the constant field ``gamma = e dx``."""
    return flat(f"product_e{e:g}", c1=e)


def ridge(a: float = 0.03, c1: float = 0.3, U=None) -> Scenario:
    """``f = a sin(2 pi y)``, ``gamma = c1 dx``: the circle ``y = 3/4`` along ``x`` is a closed orbit."""
    f = TrigPolynomial([[0, 1, 0.0, a]])
    return Scenario(ConformalMetric(f), ClosedFormField(c1, 0.0, U or TrigPolynomial.zero()),
                    f"ridge_a{a:g}_c{c1:g}")


def random_scenario(seed: int, f_amp: float = 0.12, u_amp: float = 0.04, c_amp: float = 0.5) -> Scenario:
    rng = np.random.default_rng(seed)
    f = TrigPolynomial.random(rng, nterms=3, amplitude=f_amp, kmax=2)
    U = TrigPolynomial.random(rng, nterms=3, amplitude=u_amp, kmax=2)
    c1, c2 = rng.uniform(-c_amp, c_amp, size=2)
    return Scenario(ConformalMetric(f), ClosedFormField(float(c1), float(c2), U), f"random_{seed}")


def regression_suite() -> list[Case]:
    """Twelve scenarios with a start state each, from flat to randomly curved."""
    rng = np.random.default_rng(20240601)
    cases = [
        Case(flat("flat_geodesic"), 0.1, 0.2, 0.3),
        Case(product_torus(0.5), 0.0, 0.0, 0.0),
        Case(product_torus(1.0), 0.2, 0.4, 2.0),
        Case(flat("flat_tilted", 0.3, 0.2), 0.0, 0.5, 1.0),
        Case(flat("flat_exact", U=TrigPolynomial([[1, 0, 0.03, 0.0], [0, 1, 0.0, 0.04]])), 0.3, 0.1, 0.7),
        Case(ridge(), 0.0, 0.75, 0.0),
        Case(Scenario(ConformalMetric(TrigPolynomial([[1, 1, 0.1, 0.05]])), ClosedFormField(), "curved_geodesic"),
             0.2, 0.3, 0.9),
    ]
    for seed in range(5):
        cases.append(Case(random_scenario(seed), *rng.uniform(0, 1, 2), float(rng.uniform(0, 2 * np.pi))))
    return cases
