"""Day-ahead market clearing on DC networks: unit commitment, dispatch and nodal prices."""

__version__ = "0.1.0"
