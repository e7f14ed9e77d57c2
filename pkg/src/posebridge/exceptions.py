class PoseBridgeError(ValueError):
    """Base class for all errors raised by posebridge."""


class DegenerateProjectionError(PoseBridgeError):
    """A joint lies on or behind the camera plane."""

    def __init__(self, joint, depth):
        self.joint = joint
        self.depth = depth
        super().__init__(f"joint {joint} has non-positive depth {depth!r}; cannot project")


class DegenerateFrameError(PoseBridgeError):
    """Hip and thorax joints do not span a plane."""


class InfeasibleDepthError(PoseBridgeError):
    """The depth solver was driven to a non-positive joint depth."""


class DegenerateInputError(PoseBridgeError):
    """Input geometry carries no usable constraint (e.g. all bones collapsed)."""


class ShapeMismatchError(PoseBridgeError):
    pass
