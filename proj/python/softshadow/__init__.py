"""Python bindings for the softshadow core: shadow bases, AO and metrics."""

from ._core import (
    CameraPose,
    Mesh,
    ShadowBases,
    boost_ao,
    build_bases,
    compose,
    compute_ao,
    dssim,
    invert_shadow,
    load_mesh,
    parse_obj,
    perturb_ao,
    rasterize_elm,
    read_ssbb,
    render_mask,
    render_oracle,
    rmse,
    rmse_s,
    sample_elm,
    to_radiance,
    zncc,
)

__all__ = [
    "CameraPose",
    "Mesh",
    "ShadowBases",
    "boost_ao",
    "build_bases",
    "compose",
    "compute_ao",
    "dssim",
    "invert_shadow",
    "load_mesh",
    "parse_obj",
    "perturb_ao",
    "rasterize_elm",
    "read_ssbb",
    "render_mask",
    "render_oracle",
    "rmse",
    "rmse_s",
    "sample_elm",
    "to_radiance",
    "zncc",
]
