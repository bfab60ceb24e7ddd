class CollapseLabError(Exception):
    pass

class ConfigError(CollapseLabError):
    pass

class DegenerateGeometryError(CollapseLabError):
    pass

class OverlappingNucleiError(CollapseLabError):
    def __init__(self, lattice_constant: float, nucleus_size: float):
        self.lattice_constant = lattice_constant
        self.nucleus_size = nucleus_size
        super().__init__(
            f"nuclei overlap: lattice constant {lattice_constant:g} m <= 2 x nucleus size {nucleus_size:g} m"
        )

class ResolutionUndersampledError(CollapseLabError):
    def __init__(self, voxel_edge: float, sigma: float):
        self.voxel_edge = voxel_edge
        self.sigma = sigma
        super().__init__(f"voxel edge {voxel_edge:g} m exceeds sigma/2 = {sigma / 2:g} m")

class BoxTooSmallError(CollapseLabError):
    def __init__(self, captured_fraction: float):
        self.captured_fraction = captured_fraction
        super().__init__(f"grid box captures only {captured_fraction:.6f} of the total mass")

class RegridRequiredError(CollapseLabError):
    pass

class GridSizeError(CollapseLabError):
    pass

class NumericalFailureError(CollapseLabError):
    pass

class ConfigurationMismatchError(CollapseLabError):
    pass

class SpreadOverlapError(CollapseLabError):
    def __init__(self, overlaps: int, samples: int):
        self.overlaps = overlaps
        self.samples = samples
        super().__init__(f"{overlaps} of {samples} samples contain overlapping nuclei")

class GridFormatError(CollapseLabError):
    pass
