"""Geometry-image tooling for 3D face synthesis pipelines.

Registration of a shared template to raw scans, flattening it into the
unit square, encoding geometry and texture as aligned images, linear
statistical models over the encoded population, texture-to-geometry
estimation, expression transfer, masked-batch assembly for corrupted
data, and sliced-Wasserstein evaluation metrics.
"""
from ._version import __version__
from .mesh import Mesh, MeshError, SimilarityTransform, load_obj, save_obj
from .parametrize import (
    EdgeWeights,
    ParamMap,
    SolveError,
    boundary_embedding,
    design_weights,
    flipped_triangles,
    pick_anchor,
    planar_areas,
    square_perimeter,
    symmetrize,
    uniform_weights,
    weighted_embed,
)
from .align import AlignConfig, fit_energy, nonrigid_fit, rigid_align, transfer_attributes
from .geom_image import (
    GeometryImage,
    MapInvalidError,
    augment_geometry,
    augment_texture,
    infill_pullpush,
    load_gim,
    load_png,
    rasterize,
    sample_back,
    save_gim,
    save_png,
)
from .morphable import (
    JointModel,
    LinearModel,
    build_basis,
    build_joint_basis,
    coefficient_stds,
    load_model,
    project,
    reconstruct,
    sample_coefficients,
    save_model,
)
from .geo_fit import (
    LsParams,
    MlParams,
    estimate_ml_params,
    evaluate_fit,
    fit_ls,
    fit_ml,
    fit_nearest,
    fit_random,
    train_ls,
)
from .expression import (
    ExpressionModel,
    apply_expression,
    build_expression_basis,
    expression_coefficients,
    sample_expression_coefficients,
)
from .masked_batch import (
    MaskedBatch,
    ValidMask,
    assemble_batch,
    export_batch,
    load_mask_png,
    mask_from_regions,
    save_mask_png,
    synth_shapes_dataset,
)
from .eval_metrics import (
    Descriptor,
    PatchSet,
    canonical_correlation,
    histogram_summary,
    laplacian_pyramid,
    laplacian_pyramid_patches,
    load_descriptors,
    nn_distances,
    save_descriptors,
    swd,
)
from .pipeline import PipelineConfig, cmd_prepare, cmd_synth_face, load_estimator

__all__ = [
    "__version__",
    "Mesh", "MeshError", "SimilarityTransform", "load_obj", "save_obj",
    "EdgeWeights", "ParamMap", "SolveError", "boundary_embedding", "design_weights",
    "flipped_triangles", "pick_anchor", "planar_areas", "square_perimeter", "symmetrize",
    "uniform_weights", "weighted_embed",
    "AlignConfig", "fit_energy", "nonrigid_fit", "rigid_align", "transfer_attributes",
    "GeometryImage", "MapInvalidError", "augment_geometry", "augment_texture",
    "infill_pullpush", "load_gim", "load_png", "rasterize", "sample_back",
    "save_gim", "save_png",
    "JointModel", "LinearModel", "build_basis", "build_joint_basis",
    "coefficient_stds", "load_model", "project", "reconstruct",
    "sample_coefficients", "save_model",
    "LsParams", "MlParams", "estimate_ml_params", "evaluate_fit", "fit_ls",
    "fit_ml", "fit_nearest", "fit_random", "train_ls",
    "ExpressionModel", "apply_expression", "build_expression_basis",
    "expression_coefficients", "sample_expression_coefficients",
    "MaskedBatch", "ValidMask", "assemble_batch", "export_batch",
    "mask_from_regions", "synth_shapes_dataset", "save_mask_png", "load_mask_png",
    "Descriptor", "PatchSet", "canonical_correlation", "histogram_summary",
    "laplacian_pyramid", "laplacian_pyramid_patches", "load_descriptors",
    "nn_distances", "save_descriptors", "swd",
    "PipelineConfig", "cmd_prepare", "cmd_synth_face", "load_estimator",
]
