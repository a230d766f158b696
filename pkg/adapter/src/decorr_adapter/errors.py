class AdapterError(Exception):
    """Base for adapter failures; the CLI maps these to exit code 1."""


class ModelLoadError(AdapterError):
    """Unknown model identifier or unloadable checkpoint."""


class DuplicateIdError(AdapterError):
    """The same id appears twice in an embedding job."""


class FormatError(AdapterError):
    """A file does not follow the toolkit's declared layout."""
