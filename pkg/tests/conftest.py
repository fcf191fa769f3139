"""Session-wide fixtures: the reference two-soliton setup and its eigenbases.

The eigenbases are the expensive shared ingredient (a dense eigensolve plus
extended-precision refinement per speed); everything downstream reuses them.
"""

import pytest

from gkdvlab.grid import make_grid
from gkdvlab.linearized import solve_spectrum
from gkdvlab.profiles import SolitonFamily, interaction_constants

BASIS_POINTS = 4096
BASIS_BOX = 100.0


@pytest.fixture(scope="session")
def bases():
    g = make_grid(BASIS_POINTS, BASIS_BOX, -BASIS_BOX / 2.0)
    return (
        solve_spectrum(6, 1.0, g),
        solve_spectrum(6, 2.0, g),
    )


@pytest.fixture(scope="session")
def fam():
    return SolitonFamily.from_lists(6, [1.0, 2.0], [-70.0, -40.0])


@pytest.fixture(scope="session")
def evo_grid():
    return make_grid(4096, 200.0, -100.0)


@pytest.fixture(scope="session")
def consts(fam, bases):
    return interaction_constants(
        fam, basis_e0=bases[0].e_c, basis_eta0=bases[0].eta0
    )
