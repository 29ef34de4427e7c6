"""photoncloud: a desk-scale digital twin of a cloud photonic quantum computer."""

__version__ = "0.1.0"
