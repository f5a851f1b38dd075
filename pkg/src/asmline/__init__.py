"""Assembly sequence and line planning on layered cutset digraphs."""
__version__ = "0.1.0"
