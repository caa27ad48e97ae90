"""HDR Gaussian splatting: rasterizer, photometric model, metrics and CLI."""

from ._core import (  # noqa: F401
    CameraIntrinsics,
    CameraView,
    ConfigError,
    DataError,
    NumericalError,
    ParseError,
    Scene,
    delta_psnr,
    form_ldr,
    intrinsics_from_fov,
    load_dataset,
    load_scene,
    psnr,
    render_hdr,
    run_cli,
    sample_iso,
    ssim,
)

__all__ = [name for name in dir() if not name.startswith("_")]
