"""Reference inference server for the gardenlens wire protocol."""

__version__ = "0.1.0"
