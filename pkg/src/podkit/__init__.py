"""Piano/orchestra score pairs: MIDI ingest, piano rolls, alignment and the
orchestral inference evaluation framework."""

__version__ = "0.1.0"
