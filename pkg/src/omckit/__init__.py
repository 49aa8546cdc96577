"""Design and characterization tools for 1D optomechanical crystal nanobeams."""

__version__ = "0.1.0"
