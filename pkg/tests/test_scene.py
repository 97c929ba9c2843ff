import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mflsm.errors import SceneValidationError
from mflsm.scene import (
    EPS0,
    ApertureSelection,
    DoiGrid,
    SceneConfig,
    Scatterer,
    contrast,
    ground_truth_mask,
    scene_from_dict,
    scene_from_json,
    scene_to_json,
    validate,
    wavenumber,
)


def test_grid_geometry():
    g = DoiGrid()
    assert g.n_pixels == 2116
    assert g.delta == pytest.approx(0.75 / 46)
    assert g.axis[0] == pytest.approx(-0.375 + 0.5 * g.delta)
    pc = g.pixel_centers
    assert pc.shape == (2116, 2)
    i, j = 3, 17
    assert tuple(pc[g.flat_index(i, j)]) == pytest.approx((g.axis[i], g.axis[j]))


def test_wavenumber_one_ghz():
    assert wavenumber(1e9) == pytest.approx(20.958, abs=1e-3)


@pytest.mark.parametrize("f", [1e8, 1e9, 7.3e9])
def test_free_space_has_zero_contrast(f):
    assert contrast(Scatterer(eps_r=1.0), f) == 0


def test_lossless_contrast():
    assert contrast(Scatterer(eps_r=2.0), 1e9) == pytest.approx(1 + 0j)


def test_lossy_contrast_hand_value():
    # 0.01 / (8.8541878128e-12 * 2 * pi * 1e9) worked by hand: 0.179751...
    hand = 0.01 / (8.8541878128e-12 * 2 * 3.141592653589793 * 1e9)
    assert hand == pytest.approx(0.17975, abs=5e-6)
    chi = contrast(Scatterer(eps_r=2.0, sigma=0.01), 1e9)
    assert chi.real == pytest.approx(1.0)
    assert chi.imag == pytest.approx(hand, rel=1e-12)
    assert EPS0 == pytest.approx(8.8541878128e-12)


def test_default_mask_count_on_grid():
    # centres at -hw + (i + 1/2) delta give a 4-fold symmetric count
    mask = ground_truth_mask(DoiGrid(), [Scatterer()])
    assert mask.sum() == 268
    assert mask.sum() % 4 == 0


@pytest.mark.xfail(strict=True, reason="a 4-fold symmetric 46x46 grid cannot hold 266 centred pixels; see README")
def test_default_mask_reference_count():
    assert ground_truth_mask(DoiGrid(), [Scatterer()]).sum() == 266


def test_mask_zero_radius():
    assert ground_truth_mask(DoiGrid(), [Scatterer(radius=0.0)]).sum() == 0


def test_mask_covering_everything():
    assert ground_truth_mask(DoiGrid(), [Scatterer(radius=1.0)]).sum() == 2116


def test_mask_orientation():
    # an off-centre disk at +x lands in high i (first index is x)
    mask = ground_truth_mask(DoiGrid(), [Scatterer(center=(0.2, 0.0), radius=0.05)])
    i, j = np.nonzero(mask)
    assert i.mean() > 30 and abs(j.mean() - 22.5) < 1


@settings(max_examples=80, deadline=None)
@given(
    cx=st.floats(-0.2, 0.2),
    cy=st.floats(-0.2, 0.2),
    r=st.floats(0.01, 0.15),
)
def test_pixel_count_discretisation_bound(cx, cy, r):
    g = DoiGrid()
    if abs(cx) + r >= g.half_width or abs(cy) + r >= g.half_width:
        return
    n = ground_truth_mask(g, [Scatterer(center=(cx, cy), radius=r)]).sum()
    assert abs(n * g.delta**2 - math.pi * r**2) <= 2 * math.pi * r * g.delta * 2


def test_aperture_presets():
    for name, n, deg in [("93.6", 13, 93.6), ("144", 20, 144.0), ("180", 25, 180.0), ("360", 50, 360.0)]:
        ap = ApertureSelection.preset(name)
        assert ap.n_rx == n
        assert ap.degrees() == pytest.approx(n * 7.2)
        assert ap.degrees() == pytest.approx(deg)
    assert ApertureSelection.from_degrees(144) == ApertureSelection.preset("144")
    assert ApertureSelection.arc(3, start=49).rx_indices == (49, 0, 1)


def test_default_config_is_valid():
    assert validate(SceneConfig()) == SceneConfig()


def test_empty_frequency_list():
    with pytest.raises(SceneValidationError, match="empty frequency list"):
        validate(SceneConfig(frequencies=()))


def test_scatterer_leaving_domain():
    bad = SceneConfig(scatterers=(Scatterer(center=(0.5, 0.0), radius=0.15),))
    with pytest.raises(SceneValidationError, match="leaves the imaging domain"):
        validate(bad)


def test_all_errors_are_collected():
    bad = SceneConfig(frequencies=(), scatterers=(Scatterer(center=(0.5, 0.0), eps_r=0.5),))
    with pytest.raises(SceneValidationError) as info:
        validate(bad)
    assert len(info.value.errors) == 3


def test_non_contiguous_aperture_rejected():
    with pytest.raises(SceneValidationError, match="contiguous"):
        validate(SceneConfig(aperture=ApertureSelection((0, 2, 3))))


def test_json_round_trip():
    cfg = SceneConfig(
        aperture=ApertureSelection.preset("144", start=7),
        scatterers=(Scatterer(center=(0.05, -0.02), radius=0.1, eps_r=1.5, sigma=0.001),),
        snr_db=12.0,
    )
    assert scene_from_json(scene_to_json(cfg)) == cfg


def test_from_dict_aperture_forms():
    assert scene_from_dict({"aperture": {"preset": "93.6"}}).aperture.n_rx == 13
    assert scene_from_dict({"aperture": {"degrees": 180}}).aperture.n_rx == 25
    assert scene_from_dict({}).aperture.n_rx == 50


def test_from_dict_rejects_unknown_keys():
    with pytest.raises(SceneValidationError, match="unknown scene field"):
        scene_from_dict({"frequncies": [1e9]})


def test_geometry_hash_ignores_aperture():
    a = SceneConfig()
    b = a.with_aperture(ApertureSelection.preset("144"))
    assert a.geometry_hash() == b.geometry_hash()
    assert a.geometry_hash() != SceneConfig(frequencies=(1e9,)).geometry_hash()
