"""Exception hierarchy shared across the package."""


class ModshapError(Exception):
    """Base class for all package-specific errors."""


class EmptyMaskableSetError(ModshapError):
    """No maskable token qualifies: the question is absent or fully protected."""


class CoalitionIndexError(ModshapError):
    """A coalition references a feature index outside the partition."""


class ExactTooLargeError(ModshapError):
    """Exact enumeration requested for a feature count above the hard cap."""


class ModelUnavailableError(ModshapError):
    """The model endpoint cannot serve the request."""


class ConnectFailedError(ModelUnavailableError):
    """The endpoint was unreachable after the configured retries."""


class EndpointTimeoutError(ModelUnavailableError):
    """The endpoint did not answer within the configured timeout."""


class ProtocolViolationError(ModshapError):
    """The endpoint answered with a malformed or wrong-arity response."""


class EmptyGenerationError(ModshapError):
    """The model emitted only terminators; prompt/model mismatch."""


class MissingExampleError(ModshapError):
    """An in-context-example prompt was requested from a template without one."""


class CorpusSchemaError(ModshapError):
    """The corpus file violates the expected schema; message names the record."""


class MissingAttributionError(ModshapError):
    """Plotting requested for a question whose attribution was not persisted."""
