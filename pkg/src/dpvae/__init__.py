"""VAEs with a learned flow prior (decoupled prior) on 2-D toy data."""
__version__ = "0.1.0"
