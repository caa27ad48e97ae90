import math

import numpy as np
import pytest

import hdrsplat


def test_metric_anchors():
    assert hdrsplat.delta_psnr(19.25, 21.45) == pytest.approx(-2.20, abs=1e-12)
    k = hdrsplat.intrinsics_from_fov(1920, 1300, 60.0)
    assert abs(k.fx - 1662.77) < 0.01
    assert k.cx == pytest.approx(959.5)


def test_iso_sampling():
    assert hdrsplat.sample_iso(False, 8.0, 0.0, 1, 0, 3, 1) == 8
    a = hdrsplat.sample_iso(True, 8.0, 4.0, 1, 7, 2, 0)
    assert a == hdrsplat.sample_iso(True, 8.0, 4.0, 1, 7, 2, 0)
    assert a >= 1


def test_generate_render_score(tmp_path):
    out = tmp_path / "data"
    code = hdrsplat.run_cli(["generate", "--out", str(out), "--frames", "2", "--width", "40",
                             "--height", "28", "--gaussians", "80"])
    assert code == 0
    scene = hdrsplat.load_dataset(out / "manifest.txt")
    assert scene.gaussian_count == 80
    assert len(scene.views) == 6
    view = scene.views[0]
    hdr = hdrsplat.render_hdr(scene, view.id)
    assert hdr.shape == (28, 40, 3)
    assert np.all(hdr >= 0.0)

    ldr = hdrsplat.form_ldr(hdr, 1.0, 2.2)
    assert ldr.min() >= 0.0 and ldr.max() <= 1.0
    # ISO-Const observations are the same rendering quantized to 8 bits
    assert np.max(np.abs(ldr - view.observation)) <= 0.5 / 255 + 1e-9
    assert hdrsplat.psnr(ldr, view.observation) > 40.0
    assert hdrsplat.psnr(ldr, ldr) == math.inf
    assert hdrsplat.ssim(ldr, ldr) == pytest.approx(1.0)


def test_errors(tmp_path):
    with pytest.raises(hdrsplat.ParseError):
        bad = tmp_path / "bad.txt"
        bad.write_text("not a scene\n")
        hdrsplat.load_scene(bad)
    with pytest.raises(hdrsplat.DataError):
        hdrsplat.load_dataset(tmp_path / "missing" / "manifest.txt")
    assert hdrsplat.run_cli(["train", "--set", "nope.key=1"]) == 2
