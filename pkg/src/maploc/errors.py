"""Exception hierarchy shared by all maploc modules."""


class MaplocError(Exception):
    """Base class for every error raised by this package."""


# -- binary tensor format -----------------------------------------------------

class BadMagic(MaplocError):
    """File does not start with the MLTF magic bytes."""


class UnsupportedVersion(MaplocError):
    """Header declares a format version this reader does not know."""


class UnknownDtype(MaplocError):
    """Header declares a dtype code outside the defined set."""


class TruncatedPayload(MaplocError):
    """File ends before the declared header or payload is complete."""


class InvalidShape(MaplocError):
    """Declared shape is empty or contains a zero dimension."""


# -- bundle layout ------------------------------------------------------------

class MissingManifest(MaplocError):
    """Bundle root has no manifest.json."""


class MissingFile(MaplocError):
    """One or more mandatory bundle files are absent.

    ``paths`` lists every missing file relative to the bundle root.
    """

    def __init__(self, paths):
        self.paths = tuple(paths)
        super().__init__("missing mandatory files: " + ", ".join(self.paths))


class GroupSizeOutOfRange(MaplocError):
    """A manifest group lists fewer than 2 or more than 4 frames."""


# -- geometry -----------------------------------------------------------------

class ShapeMismatch(MaplocError):
    """Array arguments do not have the shapes the operation requires."""


# Some call sites talk about grids, others about feature tensors; one class.
DimensionMismatch = ShapeMismatch


class NonOrthonormalRotation(MaplocError):
    """A claimed rotation matrix fails the orthonormality check."""


class DegenerateTranslation(MaplocError):
    """Translation direction undefined because a vector is (near) zero."""


# -- alignment ----------------------------------------------------------------

class NoValidPixels(MaplocError):
    """Not enough jointly valid pixels to estimate the requested quantity."""


class DegenerateConfiguration(MaplocError):
    """Point correspondences are too few, coincident or collinear."""


class DisconnectedGraph(MaplocError):
    """View graph is not connected; global alignment is undefined."""


# -- nearest-neighbor index ---------------------------------------------------

class EmptyInput(MaplocError):
    """An index cannot be built over zero points."""


class NonFiniteCoordinate(MaplocError):
    """Point or query coordinates contain NaN or infinity."""


# -- metrics ------------------------------------------------------------------

class EmptyCloud(MaplocError):
    """A labeled cloud holds no scorable points."""


# -- losses -------------------------------------------------------------------

class LengthMismatch(MaplocError):
    """Number of loss terms does not match the number of weights."""


# -- curation -----------------------------------------------------------------

class InsufficientFrames(MaplocError):
    """Scene has fewer frames than the requested group size."""


class NoFeasibleGroup(MaplocError):
    """No frame subset satisfies the overlap constraint."""
