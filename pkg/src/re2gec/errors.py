"""Exception hierarchy shared across the toolkit."""


class Re2Error(Exception):
    """Base class for all toolkit errors."""


class CorpusError(Re2Error):
    """Malformed corpus file or record."""


class SegmentationError(Re2Error):
    """Segmenter misconfiguration or external-process protocol failure."""


class EditError(Re2Error):
    """Edit script that cannot be applied to its source sentence."""


class RetrievalError(Re2Error):
    """Index construction or query failure."""


class TemplateError(Re2Error):
    """Missing template, placeholder, or required record field."""


class ParseError(Re2Error):
    """Completion text that cannot be parsed into a correction."""


class BackendError(Re2Error):
    """Backend transport failure, bad response, or missing scripted reply."""


class PipelineError(Re2Error):
    """Failure inside an orchestration step, annotated with the stage name."""

    def __init__(self, stage: str, message: str):
        super().__init__(f"{stage}: {message}")
        self.stage = stage
