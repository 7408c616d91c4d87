"""Exception hierarchy.

Everything deriving from :class:`InputError` is the caller's fault (bad file,
bad shape, bad label) and maps to CLI exit code 2.  :class:`InvariantError`
marks an internal consistency failure and maps to exit code 1.
"""


class GroupAffectError(Exception):
    pass


class InputError(GroupAffectError):
    pass


class InvariantError(GroupAffectError):
    pass


class ShapeError(InputError):
    def __init__(self, message, layer_index=None, expected=None, got=None):
        super().__init__(message)
        self.layer_index = layer_index
        self.expected = expected
        self.got = got


class CacheMismatchError(InputError):
    pass


class NotNormalizedError(InputError):
    pass


class EmptyDatasetError(InputError):
    pass


class ModelFormatError(InputError):
    """Descriptor or weights file is syntactically broken."""


class ModelShapeError(ModelFormatError):
    """Weights disagree with the shapes the descriptor implies."""


class ModelVersionError(ModelFormatError):
    pass


class ManifestError(InputError):
    pass


class ImageReadError(InputError):
    pass


class InvalidBoxError(InputError):
    def __init__(self, message, index):
        super().__init__(message)
        self.index = index


class ZeroLikelihoodError(InputError):
    pass


class VocabularyTooLargeError(InputError):
    pass


class MissingCnnCptError(InputError):
    pass


class BNFormatError(InputError):
    pass
