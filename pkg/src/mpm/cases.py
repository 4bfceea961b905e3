"""Bundled case studies: model, formula source and default resolutions."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dynamics import AffineSystem, BuildingTemperature, DoubleIntegrator, Spacecraft, SystemModel, Unicycle
from .formula import FormulaSpec
from .geometry import Box

TAN30 = math.tan(math.pi / 6)

TEMPERATURE_FORMULA = "F[0,8] box(20,25) && G[10,15] box(20,25)"

DOUBLE_INTEGRATOR_FORMULA = """
A1 = box(0,2, -inf,inf, 8,10, -inf,inf);
A2 = box(8,10, -inf,inf, 8,10, -inf,inf);
A3 = box(8,10, -inf,inf, 0,2, -inf,inf);
F[10,40] A1 && F[10,40] A2 && F[10,40] A3
"""

UNICYCLE_FORMULA = """
# diamond-shaped corridor and a rectangular obstacle
corridor = x1 <= x0 + 85 & x1 >= -x0 + 15 & x1 <= -x0 + 185 & x1 >= x0 - 85;
obstacle = box(40,50, 42.5,47.5, -inf,inf);
goal_a = box(15,30, 20,35, -1.4,-0.2);
goal_b = box(15,30, 65,80, -1.4,-0.2);
final = box(60,100, 25,75, -inf,inf);
G[0,15] (corridor & !obstacle) && F[0,8] (goal_a | goal_b) && G[10,15] final
"""

SPACECRAFT_FORMULA = f"""
dock = box(-5,0, -5,0, 0,2.5, 0,2.5);
cone = x1 >= {TAN30!r}*x0 & -x1 >= {TAN30!r}*x0;
F[0,60] dock && G[0,60] cone
"""

TOY_FORMULA = "G[0,5] !box(6,10,5,9) && (x0 <= 13) U'[2,5] box(8,12,11,15)"


def toy_model() -> AffineSystem:
    """2-D shift system on [0,16]^2: x0 moves by the input in [-1,1], x1 climbs by one."""
    return AffineSystem(
        A=np.eye(2),
        B=[[1.0], [0.0]],
        c=[0.0, 1.0],
        state_domain=Box([0, 0], [16, 16]),
        input_schedule=Box([-1.0], [1.0]),
    )


@dataclass(frozen=True)
class CaseStudy:
    name: str
    model: SystemModel
    formula: str
    eps: tuple
    coarse_eps: tuple

    def spec(self) -> FormulaSpec:
        return FormulaSpec.from_text(self.formula, dim=self.model.n)


def case_studies() -> dict[str, CaseStudy]:
    half_pi = 0.5 * math.pi
    return {
        "building_temperature": CaseStudy(
            "building_temperature", BuildingTemperature(), TEMPERATURE_FORMULA, (0.02,), (0.05,)
        ),
        "double_integrator": CaseStudy(
            "double_integrator", DoubleIntegrator(), DOUBLE_INTEGRATOR_FORMULA, (0.2, 0.1, 0.2, 0.1), (0.32, 0.19, 0.32, 0.19)
        ),
        "unicycle": CaseStudy(
            "unicycle", Unicycle(), UNICYCLE_FORMULA, (1.0, 1.0, 0.05), (1.6, 1.6, 2 * half_pi / 32)
        ),
        "spacecraft": CaseStudy(
            "spacecraft", Spacecraft(), SPACECRAFT_FORMULA, (1.6, 1.6, 0.11, 0.11), (3.2, 3.2, 0.22, 0.22)
        ),
    }
