"""Shared test fixtures."""

from pathlib import Path

import numpy as np
import pytest

from linkcurv.cli.services import parse_scene
from linkcurv.config.settings import get_settings
from linkcurv.geometry.models import DiskPatch, Hyperlink, Surface
from linkcurv.geometry.services import circle_loop
from linkcurv.pathintegral.services import convergence_study

SCENES = Path(__file__).resolve().parent.parent / "scenes"

E1 = np.array([0.0, 1.0, 0.0, 0.0])
E2 = np.array([0.0, 0.0, 1.0, 0.0])
E3 = np.array([0.0, 0.0, 0.0, 1.0])


@pytest.fixture
def settings():
    """Process settings; tests copy before changing them."""
    return get_settings()


@pytest.fixture
def exhausted(settings):
    """Settings whose quadrature cannot meet its tolerance in the refinement budget."""
    quad = settings.QUADRATURE.model_copy(
        update={"rel_tol": 1e-20, "abs_tol": 1e-300, "max_refinements": 1}
    )
    return settings.model_copy(update={"QUADRATURE": quad})


@pytest.fixture
def scenes_dir() -> Path:
    return SCENES


@pytest.fixture
def hopf_pair():
    """Hopf-linked unit circles with small time wobbles that keep them time-like."""
    c1 = circle_loop(np.zeros(4), E1, E2, 1.0, "c1", time_terms=[(1, 0.03, 0.07)])
    c2 = circle_loop(E1, E1, E3, 1.0, "c2", time_terms=[(1, 0.05, 0.04)])
    return c1, c2


@pytest.fixture
def ordered_hopf_pair(hopf_pair):
    """The Hopf pair with c2 moved one unit later, so c1 is entirely earlier."""
    c1, c2 = hopf_pair
    later = circle_loop(
        np.array([1.0, 1.0, 0.0, 0.0]), E1, E3, 1.0, "c2", time_terms=[(1, 0.05, 0.04)]
    )
    return c1, later


@pytest.fixture
def unit_disk():
    """Unit disk in the x1 x2 plane at time 0."""
    return Surface((DiskPatch(np.zeros(4), E1, E2, 1.0),), 1, "disk")


@pytest.fixture
def tilted_ring():
    """Circle at time 0.3 in a generic plane, crossing the unit disk once near s = 3/4."""
    u = np.array([0.0, 1.0, 1.0, 1.0]) / np.sqrt(3.0)
    v = np.array([0.0, 1.0, -1.0, 0.0]) / np.sqrt(2.0)
    center = np.array([0.3, 0.7, -0.7, 0.0])
    return circle_loop(center, u, v, 0.5, "tilted")


@pytest.fixture
def hopf_disk_scene(settings):
    return parse_scene(SCENES / "hopf_disk.scene", settings=settings)


@pytest.fixture
def empty_surface_scene(settings):
    return parse_scene(SCENES / "empty_surface.scene", settings=settings)


@pytest.fixture
def geometric(hopf_disk_scene) -> Hyperlink:
    return hopf_disk_scene.geometric


@pytest.fixture(scope="session")
def hopf_disk_study():
    """The shipped disk scene and its study over the default kappa schedule."""
    settings = get_settings()
    scene = parse_scene(SCENES / "hopf_disk.scene", settings=settings)
    return scene, convergence_study(scene, settings=settings)
