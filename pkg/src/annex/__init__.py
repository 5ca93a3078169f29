"""Federated annotation service: anchored annotations on plain-text
documents, annotation-extended search, session-derived profiles, and
peer-to-peer record exchange."""

__version__ = "0.1.0"
