"""Group emotion recognition from faces and scene descriptors."""

CLASSES = ("positive", "neutral", "negative")
NUM_CLASSES = len(CLASSES)

__version__ = "0.1.0"


def class_index(label: str) -> int:
    try:
        return CLASSES.index(label)
    except ValueError:
        from .errors import ManifestError

        raise ManifestError(f"unknown label {label!r}; expected one of {CLASSES}") from None
