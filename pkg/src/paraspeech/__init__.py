"""paraspeech: grammar, metrics, sequence math, and corpus tooling for
transcripts with inline paralinguistic tags."""

__version__ = "0.1.0"
