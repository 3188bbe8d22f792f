import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from PIL import Image

from coin.image_plane import (
    ImageError, ImagePlane, full_grid, load_image, psnr, save_image, scaled_dims, subgrid,
)
from coin.siren import ContractError


def write_png(path, arr):
    Image.fromarray(np.asarray(arr, dtype=np.uint8), mode="RGB").save(path)


def test_black_png_loads_as_zeros(tmp_path):
    write_png(tmp_path / "k.png", np.zeros((2, 2, 3)))
    plane = load_image(tmp_path / "k.png")
    assert plane.dims == (2, 2)
    assert not plane.pixels.any()


def test_load_normalizes_by_255(tmp_path):
    write_png(tmp_path / "g.png", np.full((1, 1, 3), 128))
    assert load_image(tmp_path / "g.png").pixels[0, 0, 0] == pytest.approx(0.50196, abs=1e-5)


def test_png_roundtrip_is_lossless(tmp_path, rng):
    arr = rng.integers(0, 256, (13, 21, 3), dtype=np.uint8)
    write_png(tmp_path / "a.png", arr)
    save_image(load_image(tmp_path / "a.png"), tmp_path / "b.png")
    assert np.array_equal(np.asarray(Image.open(tmp_path / "b.png")), arr)


def test_save_clamps_and_rounds(tmp_path):
    plane = ImagePlane(np.array([[[0.0, 0.5, 1.0], [0.001, 0.999, 0.7]]]))
    save_image(plane, tmp_path / "c.png")
    assert np.asarray(Image.open(tmp_path / "c.png")).tolist() == [[[0, 128, 255], [0, 255, 178]]]


def test_grayscale_input_becomes_rgb(tmp_path):
    Image.fromarray(np.full((3, 4), 255, dtype=np.uint8), mode="L").save(tmp_path / "g.png")
    plane = load_image(tmp_path / "g.png")
    assert plane.pixels.shape == (3, 4, 3) and np.all(plane.pixels == 1.0)


def test_load_errors(tmp_path):
    with pytest.raises(ImageError):
        load_image(tmp_path / "missing.png")
    (tmp_path / "junk.png").write_bytes(b"not an image")
    with pytest.raises(ImageError):
        load_image(tmp_path / "junk.png")


def test_plane_rejects_out_of_range_and_empty():
    with pytest.raises(ContractError):
        ImagePlane(np.full((2, 2, 3), 1.5))
    with pytest.raises(ContractError):
        ImagePlane(np.zeros((0, 2, 3)))


def test_full_grid_corners():
    g = full_grid(2, 2)
    assert g.coords.tolist() == [[-1, -1], [1, -1], [-1, 1], [1, 1]]


def test_full_grid_degenerate_dimension():
    g = full_grid(3, 1)
    assert g.coords.tolist() == [[-1, 0], [0, 0], [1, 0]]


def test_full_grid_kodak_size():
    g = full_grid(768, 512)
    assert len(g) == 393216
    assert (g.width, g.height) == (768, 512)


@settings(max_examples=40, deadline=None)
@given(w=st.integers(1, 80), h=st.integers(1, 80))
def test_full_grid_bounded_and_increasing(w, h):
    c = full_grid(w, h).coords.reshape(h, w, 2)
    assert np.all(np.abs(c) <= 1)
    if w > 1:
        assert np.all(np.diff(c[..., 0], axis=1) > 0)
        assert c[0, 0, 0] == -1 and c[0, -1, 0] == 1
    if h > 1:
        assert np.all(np.diff(c[..., 1], axis=0) > 0)


def test_subgrid_whole_image_is_full_grid():
    assert np.array_equal(subgrid(7, 5).coords, full_grid(7, 5).coords)
    assert np.array_equal(subgrid(7, 5, 1.0, (0, 0, 7, 5)).coords, full_grid(7, 5).coords)


def test_subgrid_single_pixel():
    full = full_grid(9, 6).coords.reshape(6, 9, 2)
    g = subgrid(9, 6, 1.0, (4, 2, 1, 1))
    assert g.coords.tolist() == [full[2, 4].tolist()]


@settings(max_examples=60, deadline=None)
@given(data=st.data(), w=st.integers(1, 40), h=st.integers(1, 40))
def test_subgrid_region_is_restriction_of_full_grid(data, w, h):
    x = data.draw(st.integers(0, w - 1))
    y = data.draw(st.integers(0, h - 1))
    rw = data.draw(st.integers(1, w - x))
    rh = data.draw(st.integers(1, h - y))
    full = full_grid(w, h).coords.reshape(h, w, 2)
    g = subgrid(w, h, 1.0, (x, y, rw, rh))
    assert (g.width, g.height) == (rw, rh)
    assert np.array_equal(g.coords.reshape(rh, rw, 2), full[y:y + rh, x:x + rw])


def test_subgrid_upscale_matches_linspace():
    g = subgrid(4, 4, scale=2.0)
    assert (g.width, g.height) == (8, 8)
    ref = np.linspace(-1, 1, 8)
    c = g.coords.reshape(8, 8, 2)
    np.testing.assert_allclose(c[0, :, 0], ref, rtol=0, atol=1e-15)
    np.testing.assert_allclose(c[:, 0, 1], ref, rtol=0, atol=1e-15)


def test_subgrid_downscale_dims():
    assert scaled_dims(768, 512, 0.5) == (384, 256)
    g = subgrid(768, 512, 0.5)
    assert (g.width, g.height) == (384, 256)


def test_subgrid_scaled_region_covers_area():
    g = subgrid(8, 8, 2.0, (2, 2, 4, 4))
    assert (g.width, g.height) == (8, 8)
    full = subgrid(8, 8, 2.0).coords.reshape(16, 16, 2)
    assert np.array_equal(g.coords.reshape(8, 8, 2), full[4:12, 4:12])


@pytest.mark.parametrize("region", [(0, 0, 0, 3), (0, 0, 3, 0), (5, 0, 4, 1), (-1, 0, 1, 1)])
def test_subgrid_bad_region(region):
    with pytest.raises(ContractError):
        subgrid(8, 4, 1.0, region)


def test_subgrid_bad_scale():
    with pytest.raises(ContractError):
        subgrid(8, 4, 0.0)


def test_psnr_identical_is_infinite(crop):
    assert psnr(crop, crop) == math.inf


@pytest.mark.parametrize("err,db", [(0.01, 20.0), (0.001, 30.0)])
def test_psnr_from_known_mse(err, db):
    a = ImagePlane(np.full((4, 4, 3), 0.5))
    b = ImagePlane(np.full((4, 4, 3), 0.5 + math.sqrt(err)))
    assert psnr(a, b) == pytest.approx(db, abs=1e-9)


def test_psnr_dimension_mismatch():
    with pytest.raises(ContractError):
        psnr(ImagePlane(np.zeros((2, 2, 3))), ImagePlane(np.zeros((2, 3, 3))))


def test_psnr_symmetric_and_decreasing_with_noise(crop, rng):
    noise = rng.standard_normal(crop.pixels.shape)
    values = []
    for amp in (0.001, 0.01, 0.03, 0.1):
        noisy = ImagePlane(np.clip(crop.pixels + amp * noise, 0, 1))
        assert psnr(crop, noisy) == psnr(noisy, crop)
        values.append(psnr(crop, noisy))
    assert all(a > b for a, b in zip(values, values[1:]))
