"""Bandwidth pricing for semantic-communication mobile AIGC networks.

Subpackages cover the OFDMA channel and semantic-information-age model
(:mod:`.channel`), the leader-follower bandwidth market and its equilibrium
solvers (:mod:`.game`), the partially observed pricing environment and
baselines (:mod:`.env`), a numpy dense-net substrate (:mod:`.nets`), the
diffusion-policy pricing agent (:mod:`.agent`), image quality and extraction
math (:mod:`.metrics`), and experiment configuration plus the command line
front end (:mod:`.config`, :mod:`.cli`).
"""

__version__ = "0.1.0"
