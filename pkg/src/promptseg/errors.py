"""Exception hierarchy shared across the toolkit."""


class PromptSegError(Exception):
    """Base class for every error raised by promptseg."""


class DecodeError(PromptSegError):
    pass


class UnsupportedFormat(PromptSegError):
    pass


class DimensionMismatch(PromptSegError, ValueError):
    pass


class ImageTooSmall(PromptSegError, ValueError):
    pass


class PatchLargerThanImage(PromptSegError, ValueError):
    pass


class KTooLarge(PromptSegError, ValueError):
    pass


class EmptyPool(PromptSegError, ValueError):
    pass


class EmptyExemplarList(PromptSegError, ValueError):
    pass


class EmptyRecordList(PromptSegError, ValueError):
    pass


class UnknownTestId(PromptSegError, KeyError):
    def __str__(self):
        return Exception.__str__(self)


# dataset-io

class ManifestError(PromptSegError):
    pass


class ParseError(ManifestError):
    def __init__(self, message, path=None, line=None, column=None):
        super().__init__(message)
        self.path = path
        self.line = line
        self.column = column


class DuplicateId(ManifestError):
    def __init__(self, entry_id):
        super().__init__(f"duplicate entry id: {entry_id!r}")
        self.entry_id = entry_id


class MissingFile(ManifestError):
    def __init__(self, path, entry_id=None):
        where = f" (entry {entry_id!r})" if entry_id is not None else ""
        super().__init__(f"missing file: {path}{where}")
        self.path = path
        self.entry_id = entry_id


class EntryLoadError(PromptSegError):
    """Wraps a decode failure with the manifest entry it came from."""

    def __init__(self, entry_id, cause):
        super().__init__(f"entry {entry_id!r}: {cause}")
        self.entry_id = entry_id
        self.cause = cause


# backends

class BackendError(PromptSegError):
    pass


class ConnectError(BackendError):
    pass


class Timeout(BackendError):
    pass


class ProtocolError(BackendError):
    pass


class ServerError(BackendError):
    def __init__(self, status, body):
        super().__init__(f"server returned {status}: {body}")
        self.status = status
        self.body = body


class PipelineError(PromptSegError):
    """A component failure while processing one test image."""

    def __init__(self, test_id, cause):
        super().__init__(f"test {test_id!r}: {cause}")
        self.test_id = test_id
        self.cause = cause
