"""scenekit: scenario dictionaries, open-set scene classification, and active view selection."""

__version__ = "0.1.0"
