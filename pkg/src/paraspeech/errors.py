"""Common exception base for the toolkit.

Every operational error raised by paraspeech subclasses ParaspeechError,
so callers (and the CLI) can catch one type and map it to exit status 1.
"""


class ParaspeechError(Exception):
    pass
